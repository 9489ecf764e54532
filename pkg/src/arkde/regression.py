"""Streaming recursive Nadaraya-Watson estimation of the autoregression drift.

The estimator keeps every observed pair (X_i, X_{i+1}) with weight i^(beta d)
and a shrinking support radius i^(-beta), and answers queries through a
uniform bucket grid whose cell side equals the radius at i = 1: because the
radii only shrink, every sample that can contribute to a query lives in one of
the 3^d cells adjacent to the query's cell, and each candidate is then
filtered by its own radius.  A pure-python reference evaluator
(:func:`evaluate_brute_force`) implements the same sums without the index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _core
from ._buffers import FloatBuf, IntBuf, csr_layout, neighbor_offsets
from .errors import (
    ContractViolationError,
    DimensionMismatchError,
    ParameterError,
    ResourceLimitError,
)
from .kernels import _FAMILIES
from .model import drift_eval

_SNAPSHOT_VERSION = "arkde-regression-v1"


class RegressionEstimator:
    """Recursive Nadaraya-Watson estimator with a fixed-radius bucket index.

    Updates are strictly sequential (pair indices arrive in order, starting at
    one).  Once updates stop, the estimator is a frozen pure function and may
    be read concurrently.
    """

    def __init__(self, kernel, beta, d):
        if not 0.0 < beta < 1.0 / d:
            raise ParameterError(f"beta must lie in (0, 1/d) = (0, {1.0 / d:.6g}), got {beta}")
        if kernel.dimension != d:
            raise DimensionMismatchError("kernel dimension does not match estimator dimension")
        self.kernel = kernel
        self.beta = float(beta)
        self.d = int(d)
        self.count = 0
        self.cell_side = float(kernel.support_radius)  # radius at i = 1
        self._pred = FloatBuf(width=d)
        self._resp = FloatBuf(width=d)
        self._scale = FloatBuf()
        self._wt = FloatBuf()
        self._cells = {}
        self._csr = None

    # -- streaming updates -------------------------------------------------

    def update(self, i, x_i, x_next):
        """Insert the pair (X_i, X_{i+1}); ``i`` must equal count + 1."""
        if i != self.count + 1:
            raise ContractViolationError(
                f"pair indices must arrive in order: expected {self.count + 1}, got {i}"
            )
        x_i = self._check_point(x_i)
        x_next = self._check_point(x_next)
        self._pred.append(x_i)
        self._resp.append(x_next)
        self._scale.append(float(i) ** self.beta)
        self._wt.append(float(i) ** (self.beta * self.d))
        key = tuple(int(math.floor(v / self.cell_side)) for v in x_i)
        bucket = self._cells.get(key)
        if bucket is None:
            bucket = self._cells[key] = IntBuf()
        bucket.append(self.count)
        self.count += 1
        self._csr = None

    # -- queries -----------------------------------------------------------

    def _check_point(self, x):
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.d:
            raise DimensionMismatchError(
                f"point of dimension {x.shape[0]} passed to estimator of dimension {self.d}"
            )
        return x

    def _candidates(self, x):
        """Indices of stored samples in the 3^d cells around x."""
        base = tuple(int(math.floor(v / self.cell_side)) for v in x)
        chunks = []
        for off in neighbor_offsets(self.d):
            bucket = self._cells.get(tuple(base[j] + int(off[j]) for j in range(self.d)))
            if bucket is not None and bucket.n:
                chunks.append(bucket.view())
        if not chunks:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(chunks)

    def _weights_at(self, x):
        """(indices, kernel weights) of the positively weighted samples at x."""
        idx = self._candidates(x)
        if idx.size == 0:
            return idx, np.empty(0)
        u = (self._pred.view()[idx] - x) * self._scale.view()[idx, None]
        inside = (np.abs(u) < 1.0).all(axis=1)
        if not inside.any():
            return idx[:0], np.empty(0)
        idx = idx[inside]
        w = self._wt.view()[idx] * np.prod(self.kernel.eval1(u[inside]), axis=1)
        return idx, w

    def evaluate(self, x):
        """Kernel-weighted response average at x; the zero vector if no mass."""
        x = self._check_point(x)
        if self.count == 0:
            return np.zeros(self.d)
        idx, w = self._weights_at(x)
        den = w.sum()
        if den <= 0.0:
            return np.zeros(self.d)
        return (w @ self._resp.view()[idx]) / den

    def denominator(self, x):
        """The raw weight sum H(x); H/n estimates the stationary state density."""
        x = self._check_point(x)
        if self.count == 0:
            return 0.0
        _, w = self._weights_at(x)
        return float(w.sum())

    def evaluate_batch(self, xs):
        """Vectorized evaluation over rows of xs via the compiled bucket index."""
        xs = np.ascontiguousarray(np.atleast_2d(np.asarray(xs, dtype=float)))
        if xs.shape[1] != self.d:
            raise DimensionMismatchError("query batch dimension mismatch")
        if self.count == 0:
            return np.zeros((xs.shape[0], self.d)), np.zeros(xs.shape[0])
        csr = self._ensure_csr()
        return _core.nw_batch_csr(
            xs,
            csr["apred"],
            csr["aresp"],
            csr["ascale"],
            csr["awt"],
            csr["start"],
            csr["fill"],
            csr["lo"],
            csr["inv_side"],
            csr["ncells"],
            csr["strides"],
            neighbor_offsets(self.d),
            self.kernel.kernel_id,
        )

    def _ensure_csr(self):
        if self._csr is None:
            pred = self._pred.view()
            lay = csr_layout(pred, self.cell_side)
            slot = lay["slot"]
            n = self.count
            apred = np.empty((n, self.d))
            aresp = np.empty((n, self.d))
            ascale = np.empty(n)
            awt = np.empty(n)
            apred[slot] = pred
            aresp[slot] = self._resp.view()
            ascale[slot] = self._scale.view()
            awt[slot] = self._wt.view()
            fill = lay["counts"].astype(np.int64)
            self._csr = {
                "apred": apred,
                "aresp": aresp,
                "ascale": ascale,
                "awt": awt,
                "start": lay["start"],
                "fill": fill,
                "lo": lay["lo"],
                "inv_side": lay["inv_side"],
                "ncells": lay["ncells"],
                "strides": lay["strides"],
            }
        return self._csr

    # -- views and persistence ----------------------------------------------

    @property
    def predictors(self):
        return self._pred.view()

    @property
    def responses(self):
        return self._resp.view()

    @property
    def weights(self):
        return self._wt.view()

    @property
    def scales(self):
        return self._scale.view()

    def support_radius_of(self, i):
        """x-space support radius of the stored pair i (nonincreasing in i)."""
        return self.kernel.support_radius * float(i) ** (-self.beta)

    def save(self, path):
        """Versioned snapshot of the estimator state (beta, kernel, samples)."""
        np.savez(
            path,
            version=_SNAPSHOT_VERSION,
            family=self.kernel.family,
            beta=self.beta,
            d=self.d,
            count=self.count,
            pred=self._pred.view(),
            resp=self._resp.view(),
        )

    @classmethod
    def load(cls, path):
        from .kernels import make_kernel

        with np.load(path, allow_pickle=False) as z:
            if str(z["version"]) != _SNAPSHOT_VERSION:
                raise ParameterError(f"unsupported snapshot version {z['version']}")
            kernel = make_kernel(str(z["family"]), int(z["d"]))
            est = cls(kernel, float(z["beta"]), int(z["d"]))
            est.bulk_update(z["pred"], z["resp"])
        return est

    def bulk_update(self, pred, resp):
        """Append many pairs at once (indices continuing from the current count)."""
        pred = np.atleast_2d(np.asarray(pred, dtype=float))
        resp = np.atleast_2d(np.asarray(resp, dtype=float))
        for a, b in zip(pred, resp):
            self.update(self.count + 1, a, b)


def new_regression(kernel, beta, d):
    """Empty estimator; evaluate returns the zero vector everywhere."""
    return RegressionEstimator(kernel, beta, d)


def evaluate_brute_force(est, x, sample_limit=None):
    """Reference Nadaraya-Watson evaluation: a plain double loop over samples.

    This is the unindexed evaluation the bucket grid is measured against; it
    touches every stored pair (optionally only the first ``sample_limit``).
    Returns (value, denominator).
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    d = est.d
    c, p, _, _, _ = _FAMILIES[est.kernel.family]
    pred = est.predictors
    resp = est.responses
    scale = est.scales
    wt = est.weights
    m = est.count if sample_limit is None else min(est.count, sample_limit)
    den = 0.0
    num = [0.0] * d
    for k in range(m):
        kv = 1.0
        for j in range(d):
            t = scale[k] * (pred[k, j] - x[j])
            u = 1.0 - t * t
            if u <= 0.0:
                kv = 0.0
                break
            kv *= c * u**p
        if kv > 0.0:
            w = wt[k] * kv
            den += w
            for j in range(d):
                num[j] += w * resp[k, j]
    if den > 0.0:
        return np.array([v / den for v in num]), den
    return np.zeros(d), 0.0


@dataclass
class DilatedSupError:
    """Sup error of the drift estimate over the dilated ball {|x|_inf <= v}."""

    n: int
    v_n: float
    grid_points: int
    sup_error: float
    min_denominator_scaled: float  # min over grid of H(x) / (n * m_n)


def sup_error_on_ball(est, drift, v, grid_step, m_n=1.0):
    """Enumerate the grid over the ball and report sup |fhat - f| and the scaled denominator.

    ``m_n`` is the density floor used to scale the denominator diagnostic;
    pass the schedule value when available.
    """
    if v <= 0 or grid_step <= 0:
        raise ParameterError("v and grid_step must be positive")
    if est.d > 2:
        raise ParameterError("grid enumeration supports d <= 2 only")
    axis = np.arange(-v, v + grid_step / 2, grid_step)
    n_nodes = axis.size**est.d
    if n_nodes > 10**7:
        raise ResourceLimitError(f"grid of {n_nodes} nodes exceeds the 1e7 limit")
    if est.d == 1:
        nodes = axis[:, None]
    else:
        a, b = np.meshgrid(axis, axis, indexing="ij")
        nodes = np.column_stack([a.ravel(), b.ravel()])
    f_true = np.atleast_2d(drift_eval(drift, nodes))
    n_eff = est.count + 1
    if est.count == 0:
        errs = np.linalg.norm(f_true, axis=1)
        return DilatedSupError(
            n=n_eff,
            v_n=float(v),
            grid_points=int(n_nodes),
            sup_error=float(errs.max()),
            min_denominator_scaled=0.0,
        )
    vals, dens = est.evaluate_batch(nodes)
    errs = np.linalg.norm(vals - f_true, axis=1)
    return DilatedSupError(
        n=n_eff,
        v_n=float(v),
        grid_points=int(n_nodes),
        sup_error=float(errs.max()),
        min_denominator_scaled=float(dens.min()) / (n_eff * m_n),
    )
