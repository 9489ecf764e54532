"""Growable array buffers and cell-bucket layouts shared by the estimators."""

import itertools

import numpy as np


class FloatBuf:
    """Amortized-doubling float64 buffer of shape (n,) or (n, d)."""

    def __init__(self, width=None, capacity=64):
        self._width = width
        shape = (capacity,) if width is None else (capacity, width)
        self._data = np.empty(shape)
        self.n = 0

    def append(self, value):
        if self.n == self._data.shape[0]:
            grown = np.empty(
                (2 * self._data.shape[0],) + self._data.shape[1:]
            )
            grown[: self.n] = self._data
            self._data = grown
        self._data[self.n] = value
        self.n += 1

    def view(self):
        return self._data[: self.n]


class IntBuf:
    """Amortized-doubling int64 buffer."""

    def __init__(self, capacity=16):
        self._data = np.empty(capacity, dtype=np.int64)
        self.n = 0

    def append(self, value):
        if self.n == self._data.shape[0]:
            grown = np.empty(2 * self._data.shape[0], dtype=np.int64)
            grown[: self.n] = self._data
            self._data = grown
        self._data[self.n] = value
        self.n += 1

    def view(self):
        return self._data[: self.n]


def neighbor_offsets(d):
    """All 3^d offset vectors in {-1, 0, 1}^d, as an int64 array."""
    return np.array(list(itertools.product((-1, 0, 1), repeat=d)), dtype=np.int64)


def csr_layout(points, side):
    """Counting-sort layout of points into uniform cells of the given side.

    Returns a dict with the cell geometry (lo, inv_side, ncells, strides), the
    flat cell id and arena slot of every point, and the per-cell start offsets.
    Out-of-range coordinates clip to the boundary cells, which preserves the
    one-cell adjacency used by queries.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n, d = points.shape
    if n == 0:
        lo = np.zeros(d)
        ncells = np.ones(d, dtype=np.int64)
        strides = np.ones(d, dtype=np.int64)
        return {
            "lo": lo,
            "inv_side": 1.0 / side,
            "ncells": ncells,
            "strides": strides,
            "flat": np.zeros(0, dtype=np.int64),
            "slot": np.zeros(0, dtype=np.int64),
            "start": np.zeros(1, dtype=np.int64),
            "counts": np.zeros(1, dtype=np.int64),
        }
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    inv_side = 1.0 / side
    ncells = np.maximum(np.floor((hi - lo) * inv_side).astype(np.int64) + 1, 1)
    strides = np.ones(d, dtype=np.int64)
    for j in range(d - 2, -1, -1):
        strides[j] = strides[j + 1] * ncells[j + 1]
    axes = np.clip(
        np.floor((points - lo) * inv_side).astype(np.int64), 0, ncells - 1
    )
    flat = axes @ strides
    total = int(strides[0] * ncells[0])
    counts = np.bincount(flat, minlength=total)
    start = np.zeros(total, dtype=np.int64)
    np.cumsum(counts[:-1], out=start[1:])
    slot = np.empty(n, dtype=np.int64)
    slot[np.argsort(flat, kind="stable")] = np.arange(n, dtype=np.int64)
    return {
        "lo": lo,
        "inv_side": inv_side,
        "ncells": ncells,
        "strides": strides,
        "flat": flat,
        "slot": slot,
        "start": start,
        "counts": counts,
    }
