"""Residual-based recursive innovation-density estimation, plain and truncated.

The density estimate at step n is ``(1/n) sum_i i^(alpha d) K(i^alpha (e_i - y))``
over residuals ``e_i = X_i - fhat_{i-1}(X_{i-1})``; the truncated variant zeroes
the drift estimate whenever the predictor left the threshold ball, which
improves the attainable rate under polynomial noise tails.  An optional fixed
evaluation grid is maintained incrementally: each pushed residual touches only
the nodes inside its shrinking support radius, so grid upkeep gets cheaper as
the run proceeds while arbitrary-point evaluation stays available from the
stored residuals.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _core
from ._buffers import FloatBuf, IntBuf, csr_layout, neighbor_offsets
from .errors import (
    ContractViolationError,
    DimensionMismatchError,
    EmptyEstimatorError,
    ParameterError,
    ResourceLimitError,
)
from .model import drift_eval, simulate
from .regression import RegressionEstimator
from .rng import generator_name

_SNAPSHOT_VERSION = "arkde-density-v1"


@dataclass(frozen=True)
class GridSpec:
    """A uniform evaluation lattice per axis: node k = lo + k * step."""

    lo: tuple
    hi: tuple
    step: tuple

    @classmethod
    def make(cls, lo, hi, step, d=None):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        step = np.atleast_1d(np.asarray(step, dtype=float))
        if d is not None:
            lo, hi, step = (np.broadcast_to(a, (d,)).copy() for a in (lo, hi, step))
        if not (lo.shape == hi.shape == step.shape):
            raise ParameterError("grid lo/hi/step shapes differ")
        if np.any(step <= 0) or np.any(hi <= lo):
            raise ParameterError("grid requires step > 0 and hi > lo per axis")
        return cls(tuple(lo), tuple(hi), tuple(step))

    @property
    def dimension(self):
        return len(self.lo)

    @property
    def shape(self):
        return tuple(
            int(math.floor((h - l) / s + 1e-9)) + 1
            for l, h, s in zip(self.lo, self.hi, self.step)
        )

    @property
    def size(self):
        total = 1
        for n in self.shape:
            total *= n
        return total

    def axis(self, j):
        return np.asarray(self.lo[j]) + self.step[j] * np.arange(self.shape[j])

    def nodes(self):
        """All node coordinates, shape (size, d), C-order."""
        axes = [self.axis(j) for j in range(self.dimension)]
        if self.dimension == 1:
            return axes[0][:, None]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])


class DensityEstimator:
    """Streaming recursive kernel density estimator over residuals.

    ``mode`` is ``"plain"`` or ``"truncated"``; the truncated variant carries
    an opaque threshold schedule ``v(i)`` consulted by the pipeline when it
    forms residuals (the estimator itself stores whatever it is given).
    """

    def __init__(self, kernel, alpha, d, grid=None, mode="plain", threshold_schedule=None):
        if not 0.0 < alpha < 1.0 / d:
            raise ParameterError(
                f"alpha must lie in (0, 1/d) = (0, {1.0 / d:.6g}), got {alpha}"
            )
        if kernel.dimension != d:
            raise DimensionMismatchError("kernel dimension does not match estimator dimension")
        if mode not in ("plain", "truncated"):
            raise ParameterError(f"mode must be 'plain' or 'truncated', got {mode!r}")
        if mode == "truncated" and threshold_schedule is None:
            raise ParameterError("truncated mode requires a threshold schedule")
        if grid is not None:
            if grid.dimension != d:
                raise ParameterError("grid dimension does not match estimator dimension")
            if d > 2:
                raise ParameterError("grid accumulators support d <= 2 only")
            if grid.size > 10**7:
                raise ResourceLimitError(f"grid of {grid.size} nodes exceeds the 1e7 limit")
        self.kernel = kernel
        self.alpha = float(alpha)
        self.d = int(d)
        self.grid = grid
        self.mode = mode
        self.threshold_schedule = threshold_schedule
        self.count = 0
        self.cell_side = float(kernel.support_radius)
        self._resid = FloatBuf(width=d)
        self._scale = FloatBuf()
        self._wt = FloatBuf()
        self._cells = {}
        self.accum = np.zeros(grid.size) if grid is not None else None
        if grid is not None:
            self._glo = np.asarray(grid.lo)
            self._gstep = np.asarray(grid.step)
            self._gn = np.asarray(grid.shape, dtype=np.int64)

    def push_residual(self, i, eps_hat):
        """Store residual i and add its kernel bump to the grid accumulator."""
        if i != self.count + 1:
            raise ContractViolationError(
                f"residual indices must arrive in order: expected {self.count + 1}, got {i}"
            )
        eps_hat = self._check_point(eps_hat)
        s = float(i) ** self.alpha
        w = float(i) ** (self.alpha * self.d)
        self._resid.append(eps_hat)
        self._scale.append(s)
        self._wt.append(w)
        key = tuple(int(math.floor(v / self.cell_side)) for v in eps_hat)
        bucket = self._cells.get(key)
        if bucket is None:
            bucket = self._cells[key] = IntBuf()
        bucket.append(self.count)
        self.count += 1
        if self.accum is not None:
            _core._grid_push(
                self.accum, self._glo, self._gstep, self._gn, eps_hat, s, w,
                self.kernel.kernel_id,
            )

    def _check_point(self, y):
        y = np.asarray(y, dtype=float).reshape(-1)
        if y.shape[0] != self.d:
            raise DimensionMismatchError(
                f"point of dimension {y.shape[0]} passed to estimator of dimension {self.d}"
            )
        return y

    def _grid_flat_index(self, y):
        """Flat accumulator index when y is (numerically) a grid node, else None."""
        if self.grid is None:
            return None
        k = (y - self._glo) / self._gstep
        kr = np.rint(k)
        if np.all(np.abs(k - kr) < 1e-6) and np.all(kr >= 0) and np.all(kr < self._gn):
            flat = 0
            for j in range(self.d):
                flat = flat * int(self._gn[j]) + int(kr[j])
            return flat
        return None

    def density_at(self, y):
        """Density estimate at y: accumulator read at grid nodes, index scan elsewhere."""
        if self.count == 0:
            raise EmptyEstimatorError("density_at called on an estimator with no residuals")
        y = self._check_point(y)
        flat = self._grid_flat_index(y)
        if flat is not None:
            return float(self.accum[flat]) / self.count
        base = tuple(int(math.floor(v / self.cell_side)) for v in y)
        total = 0.0
        for off in neighbor_offsets(self.d):
            bucket = self._cells.get(tuple(base[j] + int(off[j]) for j in range(self.d)))
            if bucket is None or not bucket.n:
                continue
            idx = bucket.view()
            u = (self._resid.view()[idx] - y) * self._scale.view()[idx, None]
            inside = (np.abs(u) < 1.0).all(axis=1)
            if inside.any():
                w = self._wt.view()[idx[inside]] * np.prod(
                    self.kernel.eval1(u[inside]), axis=1
                )
                total += float(w.sum())
        return total / self.count

    def density_on_grid(self):
        """Accumulator view as a density over the grid, shaped like the grid."""
        if self.grid is None:
            raise ParameterError("estimator has no evaluation grid")
        if self.count == 0:
            raise EmptyEstimatorError("no residuals pushed yet")
        return (self.accum / self.count).reshape(self.grid.shape)

    def density_at_points(self, ys):
        """Vectorized density at arbitrary points (m, d) from the stored residuals."""
        if self.count == 0:
            raise EmptyEstimatorError("no residuals pushed yet")
        ys = np.ascontiguousarray(np.atleast_2d(np.asarray(ys, dtype=float)))
        if ys.shape[1] != self.d:
            raise DimensionMismatchError("query batch dimension mismatch")
        sums = _core.density_points(
            np.ascontiguousarray(self._resid.view()),
            np.ascontiguousarray(self._scale.view()),
            np.ascontiguousarray(self._wt.view()),
            ys,
            self.kernel.kernel_id,
        )
        return sums / self.count

    def batch_recompute(self):
        """Dense audit recomputation of the accumulator from stored residuals."""
        if self.grid is None:
            raise ParameterError("estimator has no evaluation grid")
        return _core.accum_batch(
            np.ascontiguousarray(self._resid.view()),
            np.ascontiguousarray(self._scale.view()),
            np.ascontiguousarray(self._wt.view()),
            self._glo,
            self._gstep,
            self._gn,
            self.kernel.kernel_id,
        )

    @property
    def residuals(self):
        return self._resid.view()

    @property
    def scales(self):
        return self._scale.view()

    @property
    def weights(self):
        return self._wt.view()

    def _bulk_load(self, resid, accum=None):
        """Adopt a residual history produced by a pipeline run."""
        resid = np.atleast_2d(np.asarray(resid, dtype=float))
        n = resid.shape[0]
        idx = np.arange(1, n + 1, dtype=float)
        self._resid = FloatBuf(width=self.d, capacity=max(n, 1))
        self._resid._data[:n] = resid
        self._resid.n = n
        self._scale = FloatBuf(capacity=max(n, 1))
        self._scale._data[:n] = idx**self.alpha
        self._scale.n = n
        self._wt = FloatBuf(capacity=max(n, 1))
        self._wt._data[:n] = idx ** (self.alpha * self.d)
        self._wt.n = n
        self.count = n
        self._cells = {}
        if n:
            keys = np.floor(resid / self.cell_side).astype(np.int64)
            for i in range(n):
                key = tuple(int(v) for v in keys[i])
                bucket = self._cells.get(key)
                if bucket is None:
                    bucket = self._cells[key] = IntBuf()
                bucket.append(i)
        if accum is not None:
            self.accum = accum.copy()
        elif self.grid is not None:
            self.accum = self.batch_recompute() if n else np.zeros(self.grid.size)

    def save(self, path):
        np.savez(
            path,
            version=_SNAPSHOT_VERSION,
            family=self.kernel.family,
            alpha=self.alpha,
            d=self.d,
            mode=self.mode,
            has_grid=self.grid is not None,
            grid_lo=np.asarray(self.grid.lo) if self.grid else np.zeros(0),
            grid_hi=np.asarray(self.grid.hi) if self.grid else np.zeros(0),
            grid_step=np.asarray(self.grid.step) if self.grid else np.zeros(0),
            resid=self._resid.view(),
        )

    @classmethod
    def load(cls, path):
        from .kernels import make_kernel

        with np.load(path, allow_pickle=False) as z:
            if str(z["version"]) != _SNAPSHOT_VERSION:
                raise ParameterError(f"unsupported snapshot version {z['version']}")
            grid = None
            if bool(z["has_grid"]):
                grid = GridSpec.make(z["grid_lo"], z["grid_hi"], z["grid_step"])
            kernel = make_kernel(str(z["family"]), int(z["d"]))
            est = cls(kernel, float(z["alpha"]), int(z["d"]), grid=grid, mode=str(z["mode"]),
                      threshold_schedule=(lambda i: math.inf) if str(z["mode"]) == "truncated" else None)
            est._bulk_load(z["resid"])
        return est


def new_density(kernel, alpha, d, grid=None, mode="plain", threshold_schedule=None):
    """Empty estimator with an optional evaluation-grid accumulator."""
    return DensityEstimator(kernel, alpha, d, grid=grid, mode=mode,
                            threshold_schedule=threshold_schedule)


@dataclass
class PipelineReport:
    """Checkpointed diagnostics of one simulate -> fit -> residual -> density run."""

    n: int
    d: int
    seed: int
    stream: int
    generator: str
    diagnostic: bool
    checkpoints: list
    avg_pred_error: Optional[np.ndarray] = None
    sup_density_error: Optional[np.ndarray] = None
    residual_gap: Optional[np.ndarray] = None
    inside_ball_term: Optional[np.ndarray] = None
    outside_ball_term: Optional[np.ndarray] = None
    sup_err_f: Optional[np.ndarray] = None
    min_denominator: Optional[np.ndarray] = None
    runtime_per_step: float = 0.0
    window: Optional[GridSpec] = None

    @property
    def residual_vs_noise_mean_gap(self):
        if self.residual_gap is None or not len(self.residual_gap):
            return None
        return float(self.residual_gap[-1])


def run_pipeline(
    drift,
    noise,
    n,
    seed,
    reg_kernel,
    beta,
    dens_kernel,
    alpha,
    grid=None,
    mode="plain",
    threshold_schedule=None,
    checkpoints=(),
    diagnostic=False,
    *,
    stream=0,
    x0=None,
    oracle_residuals=False,
    ball_radii=None,
    ball_step=None,
    trajectory=None,
):
    """Run the full streaming pipeline and return (regression, density, report).

    At step i the residual uses the drift estimate built from pairs 1..i-2
    (the pair (X_{i-1}, X_i) is inserted only after the residual is formed),
    so the update ordering of the estimators is enforced by construction.
    With ``oracle_residuals`` the true innovations are pushed instead, which
    isolates the density estimator from the regression stage.

    Args:
        grid: optional GridSpec for the density accumulator.
        mode: "plain" or "truncated" residuals.
        threshold_schedule: callable i -> v_i; required for truncated mode and
            used for the inside/outside prediction-error decomposition.
        checkpoints: strictly increasing step indices in [1, n] at which
            diagnostics are recorded.
        ball_radii: optional per-checkpoint radii for sup |fhat - f| over the
            dilated ball (diagnostic mode).
        ball_step: grid step for the ball enumeration (default radius / 200).
        trajectory: reuse an existing simulated trajectory instead of drawing
            a fresh one (its noise must be retained when diagnostics need it).
    """
    checkpoints = [int(c) for c in checkpoints]
    if any(c < 1 or c > n for c in checkpoints) or any(
        b <= a for a, b in zip(checkpoints, checkpoints[1:])
    ):
        raise ParameterError("checkpoints must be strictly increasing within [1, n]")
    if mode == "truncated" and threshold_schedule is None:
        raise ParameterError("truncated mode requires a threshold schedule")

    d = drift.dimension
    need_noise = diagnostic or oracle_residuals
    if trajectory is None:
        trajectory = simulate(drift, noise, n, x0=x0, seed=seed, keep_noise=need_noise,
                              stream=stream)
    elif need_noise and trajectory.noises is None:
        raise ParameterError("diagnostic mode needs a trajectory with retained noise")
    X = np.ascontiguousarray(trajectory.states)
    eps = trajectory.noises
    have_eps = eps is not None
    eps_arr = np.ascontiguousarray(eps) if have_eps else np.zeros((1, d))

    fX = drift_eval(drift, X) if diagnostic else np.zeros((1, d))
    fX = np.ascontiguousarray(np.atleast_2d(fX))

    # threshold indicators: keep[i] = 1 iff |X_i| <= v_i (v_0 treated as v_1)
    has_v = threshold_schedule is not None
    if has_v:
        v_arr = np.array([threshold_schedule(max(i, 1)) for i in range(n + 1)])
        keep = (np.linalg.norm(X, axis=1) <= v_arr).astype(np.uint8)
    else:
        v_arr = np.zeros(n + 1)
        keep = np.ones(n + 1, dtype=np.uint8)

    # pair-index powers and the bucket arena for pairs j = 1..n-1
    jidx = np.arange(n, dtype=float)
    jidx[0] = 1.0
    rscale = jidx**beta
    rwt = jidx ** (beta * d)
    n_pairs = max(n - 1, 0)
    preds = X[1:n] if n_pairs else np.zeros((0, d))
    lay = csr_layout(preds, float(reg_kernel.support_radius))
    slot_full = np.zeros(n, dtype=np.int64)
    cell_full = np.zeros(n, dtype=np.int64)
    if n_pairs:
        slot_full[1:n] = lay["slot"]
        cell_full[1:n] = lay["flat"]
    apred = np.zeros((n_pairs, d))
    aresp = np.zeros((n_pairs, d))
    ascale = np.zeros(n_pairs)
    awt = np.zeros(n_pairs)
    fill = np.zeros(lay["start"].shape[0], dtype=np.int64)

    # density powers and grid
    iidx = np.arange(n + 1, dtype=float)
    iidx[0] = 1.0
    dscale = iidx**alpha
    dwt = iidx ** (alpha * d)
    has_grid = grid is not None
    if has_grid:
        glo = np.asarray(grid.lo)
        gstep = np.asarray(grid.step)
        gn = np.asarray(grid.shape, dtype=np.int64)
        accum = np.zeros(grid.size)
    else:
        glo = np.zeros(1)
        gstep = np.ones(1)
        gn = np.ones(1, dtype=np.int64)
        accum = np.zeros(1)

    m = len(checkpoints)
    ckpt = np.asarray(checkpoints, dtype=np.int64)
    resid_out = np.zeros((n, d))
    q_out = np.zeros((n, d))
    pred_err_out = np.zeros(n if diagnostic else 1)
    gap_out = np.zeros(n if (diagnostic and have_eps) else 1)
    avg_pred_ck = np.zeros(m)
    ins_ck = np.zeros(m)
    out_ck = np.zeros(m)
    gap_ck = np.zeros(m)
    accum_snap = np.zeros((m, accum.shape[0]))

    # per-checkpoint sup-error grids over the dilated ball
    if ball_radii is not None:
        if len(ball_radii) != m:
            raise ParameterError("ball_radii must align with checkpoints")
        node_chunks = []
        offs = [0]
        for v in ball_radii:
            step = ball_step if ball_step is not None else v / 200.0
            axis_nodes = np.arange(-v, v + step / 2, step)
            if d == 1:
                nodes_c = axis_nodes[:, None]
            elif d == 2:
                a, b = np.meshgrid(axis_nodes, axis_nodes, indexing="ij")
                nodes_c = np.column_stack([a.ravel(), b.ravel()])
            else:
                raise ParameterError("ball enumeration supports d <= 2 only")
            node_chunks.append(nodes_c)
            offs.append(offs[-1] + nodes_c.shape[0])
        nodes = np.ascontiguousarray(np.vstack(node_chunks)) if node_chunks else np.zeros((0, d))
        if nodes.shape[0] > 10**7:
            raise ResourceLimitError("ball grids exceed the 1e7 node limit")
        nodes_f = np.ascontiguousarray(np.atleast_2d(drift_eval(drift, nodes))) if nodes.size else np.zeros((0, d))
        node_off = np.asarray(offs, dtype=np.int64)
    else:
        nodes = np.zeros((0, d))
        nodes_f = np.zeros((0, d))
        node_off = np.zeros(m + 1, dtype=np.int64)
    supf_ck = np.zeros(m)
    minden_ck = np.zeros(m)

    t0 = time.perf_counter()
    _core.pipeline_core(
        X, fX, eps_arr, have_eps, diagnostic, oracle_residuals,
        mode == "truncated", keep, has_v and diagnostic, keep,
        rscale, rwt, slot_full, cell_full,
        apred, aresp, ascale, awt, lay["start"], fill,
        lay["lo"], lay["inv_side"], lay["ncells"], lay["strides"],
        neighbor_offsets(d), reg_kernel.kernel_id,
        dscale, dwt, dens_kernel.kernel_id, has_grid, accum, glo, gstep, gn,
        resid_out, q_out, pred_err_out, gap_out,
        ckpt, avg_pred_ck, ins_ck, out_ck, gap_ck, accum_snap,
        nodes, nodes_f, node_off, supf_ck, minden_ck,
    )
    elapsed = time.perf_counter() - t0

    # reconstruct estimator objects from the run arrays
    reg = RegressionEstimator(reg_kernel, beta, d)
    if n_pairs:
        reg.bulk_update(X[1:n], X[2 : n + 1])
    dens = DensityEstimator(
        dens_kernel, alpha, d, grid=grid, mode=mode, threshold_schedule=threshold_schedule
    )
    dens._bulk_load(resid_out, accum=accum if has_grid else None)

    sup_density = None
    if diagnostic and has_grid and m:
        p_true = noise.density(grid.nodes())
        sup_density = np.array(
            [np.abs(accum_snap[t] / ckpt[t] - p_true).max() for t in range(m)]
        )
    report = PipelineReport(
        n=n,
        d=d,
        seed=seed,
        stream=stream,
        generator=generator_name(),
        diagnostic=diagnostic,
        checkpoints=checkpoints,
        avg_pred_error=avg_pred_ck if diagnostic and m else None,
        sup_density_error=sup_density,
        residual_gap=gap_ck if (diagnostic and have_eps and m) else None,
        inside_ball_term=ins_ck if (diagnostic and has_v and m) else None,
        outside_ball_term=out_ck if (diagnostic and has_v and m) else None,
        sup_err_f=supf_ck if ball_radii is not None else None,
        min_denominator=minden_ck if ball_radii is not None else None,
        runtime_per_step=elapsed / n,
        window=grid,
    )
    return reg, dens, report
