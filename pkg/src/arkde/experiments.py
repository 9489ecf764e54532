"""Empirical verification harnesses at desk scale.

Four study types back the package's correctness claims:

* :func:`stationary_fixed_point` iterates the invariant-density equation
  ``h(x) = integral p(x - f(t)) h(t) dt`` on a grid and is checked against
  closed-form stationary laws;
* :func:`lln_check` compares trajectory time averages with space averages
  under the fixed-point density;
* :func:`convergence_study` runs the full pipeline over a geometric grid of
  sample sizes and fits log-log error slopes;
* :func:`clt_study` runs replicate pipelines, forms the normalized density
  deviations Z_n(y) = sqrt(n^(1 - alpha d)) (phat_n(y) - p(y)), and compares
  them against the limiting normal law with variance
  ``|K|_2^2 p(y) / (1 + alpha d)`` via Kolmogorov-Smirnov distances, variance
  ratios, and cross-point correlations.

Replicates are pure functions of (config, seed, stream), so permuting the
stream list permutes report rows without changing any value.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import ndtr

from .density import DensityEstimator, GridSpec, run_pipeline
from .errors import InfeasibleScheduleError, ParameterError
from .model import drift_eval, simulate
from .tuning import check_A6, clt_admissible, m_n_at, v_at

# -- stationary density -------------------------------------------------------


@dataclass
class StationaryDensity:
    """Converged (or flagged) fixed point of the invariant-density equation."""

    grid: GridSpec
    values: np.ndarray
    iterations: int
    final_delta: float
    converged: bool

    def interpolate(self, x):
        axis = self.grid.axis(0)
        return np.interp(np.asarray(x, dtype=float).reshape(-1), axis, self.values)


def stationary_fixed_point(drift, noise, grid, tol=1e-8, max_iter=500):
    """Iterate h <- integral p(x - f(t)) h(t) dt by trapezoid quadrature (d = 1).

    The density is renormalized each sweep to absorb quadrature mass leakage;
    convergence is the sup-norm change after renormalization.  Non-convergence
    within ``max_iter`` is flagged on the report, not raised.
    """
    if drift.dimension != 1 or noise.dimension != 1:
        raise ParameterError("the fixed-point iteration supports d = 1 only")
    if tol <= 0:
        raise ParameterError("tol must be positive")
    axis = grid.axis(0)
    step = grid.step[0]
    w = np.full(axis.size, step)
    w[0] = w[-1] = step / 2.0
    f_t = drift_eval(drift, axis[:, None])[:, 0]
    kernel_matrix = noise.density((axis[:, None] - f_t[None, :]).reshape(-1, 1)).reshape(
        axis.size, axis.size
    )
    h = noise.density(axis[:, None])
    h = h / float(w @ h)
    delta = math.inf
    iters = 0
    for iters in range(1, max_iter + 1):
        h_new = kernel_matrix @ (w * h)
        h_new /= float(w @ h_new)
        delta = float(np.abs(h_new - h).max())
        h = h_new
        if delta < tol:
            break
    return StationaryDensity(
        grid=grid,
        values=h,
        iterations=iters,
        final_delta=delta,
        converged=delta < tol,
    )


@dataclass
class LlnReport:
    """Trajectory time average of g versus its space average under h."""

    time_average: float
    space_average: float
    gap: float
    jackknife_se: float
    blocks: int


def lln_check(traj, g, growth_order, h, blocks=20):
    """Compare (1/n) sum g(X_i) with integral g h by quadrature, with a jackknife bar.

    ``growth_order`` declares the polynomial growth of g and must not exceed
    the noise moment order.
    """
    if growth_order > traj.noise.moment_order:
        raise ParameterError(
            f"growth order {growth_order} exceeds the noise moment order "
            f"{traj.noise.moment_order}"
        )
    states = traj.states[:-1]
    vals = np.asarray(g(states), dtype=float).reshape(-1)
    time_avg = float(vals.mean())
    axis = h.grid.axis(0)
    step = h.grid.step[0]
    w = np.full(axis.size, step)
    w[0] = w[-1] = step / 2.0
    g_nodes = np.asarray(g(axis[:, None]), dtype=float).reshape(-1)
    space_avg = float((w * g_nodes) @ h.values)
    # delete-block jackknife over contiguous blocks
    blocks = min(blocks, vals.size)
    parts = np.array_split(vals, blocks)
    sums = np.array([p.sum() for p in parts])
    sizes = np.array([p.size for p in parts])
    total = vals.sum()
    loo = (total - sums) / (vals.size - sizes)
    se = float(np.sqrt((blocks - 1) / blocks * np.sum((loo - loo.mean()) ** 2)))
    return LlnReport(
        time_average=time_avg,
        space_average=space_avg,
        gap=abs(time_avg - space_avg),
        jackknife_se=se,
        blocks=blocks,
    )


# -- slope fitting -------------------------------------------------------------


def fit_loglog_slope(ns, errs, drop_first=1):
    """Least-squares slope of log err against log n, dropping transient points."""
    ns = np.asarray(ns, dtype=float)[drop_first:]
    errs = np.asarray(errs, dtype=float)[drop_first:]
    if ns.size < 2:
        raise ParameterError("need at least two points after dropping the transient")
    if np.any(errs <= 0):
        raise ParameterError("errors must be positive for a log-log fit")
    slope, _ = np.polyfit(np.log(ns), np.log(errs), 1)
    return float(slope)


def default_density_window(noise, width_sds=6.0, step=0.01):
    """Evaluation window [-k sd, k sd] per axis for sup-norm density errors."""
    sds = np.sqrt(np.diag(noise.covariance))
    lo = -width_sds * sds
    hi = width_sds * sds
    return GridSpec.make(lo, hi, np.full(noise.dimension, step))


# -- convergence study ---------------------------------------------------------


@dataclass
class ConvergenceReport:
    """Checkpointed errors of one pipeline run and their fitted log-log slopes."""

    n_values: list
    sup_err_f: np.ndarray
    sup_err_p: np.ndarray
    avg_pred_err: np.ndarray
    fitted_slope_f: float
    fitted_slope_p: float
    fitted_slope_pred: float
    predicted_slope_pred: float  # -beta * tau from the schedule
    drop_first: int
    mode: str
    window: GridSpec
    runtime_per_step: float


def convergence_study(
    drift,
    noise,
    schedule,
    alpha,
    beta,
    kernel_f,
    kernel_p,
    n_grid,
    seed,
    *,
    mode="plain",
    window=None,
    oracle_residuals=False,
    drop_first=1,
    ball_step=None,
    stream=0,
    x0=None,
):
    """Single pipeline run with checkpoints at n_grid; errors and slopes per checkpoint.

    Requires the schedule to pass the density-floor growth audit and at least
    four strictly increasing sample sizes.
    """
    n_grid = [int(n) for n in n_grid]
    if len(n_grid) < 4 or any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ParameterError("n_grid must be strictly increasing with at least 4 points")
    audit = check_A6(schedule, noise)
    if not audit.passed:
        raise InfeasibleScheduleError(
            "schedule fails the density-floor growth audit: " + "; ".join(audit.notes)
        )
    window = window if window is not None else default_density_window(noise)
    radii = [v_at(schedule, n) for n in n_grid]
    thresholds = (lambda i: v_at(schedule, i)) if mode == "truncated" else None
    reg, dens, rep = run_pipeline(
        drift,
        noise,
        n_grid[-1],
        seed,
        kernel_f,
        beta,
        kernel_p,
        alpha,
        grid=window,
        mode=mode,
        threshold_schedule=thresholds,
        checkpoints=n_grid,
        diagnostic=True,
        oracle_residuals=oracle_residuals,
        ball_radii=radii,
        ball_step=ball_step,
        stream=stream,
        x0=x0,
    )
    return ConvergenceReport(
        n_values=n_grid,
        sup_err_f=rep.sup_err_f,
        sup_err_p=rep.sup_density_error,
        avg_pred_err=rep.avg_pred_error,
        fitted_slope_f=fit_loglog_slope(n_grid, rep.sup_err_f, drop_first),
        fitted_slope_p=fit_loglog_slope(n_grid, rep.sup_density_error, drop_first),
        fitted_slope_pred=fit_loglog_slope(n_grid, rep.avg_pred_error, drop_first),
        predicted_slope_pred=-schedule.beta * schedule.tau_predicted,
        drop_first=drop_first,
        mode=mode,
        window=window,
        runtime_per_step=rep.runtime_per_step,
    )


# -- CLT study -----------------------------------------------------------------


def ks_distance(sample, sd):
    """One-sample Kolmogorov-Smirnov distance against N(0, sd^2)."""
    z = np.sort(np.asarray(sample, dtype=float)) / sd
    n = z.size
    cdf = ndtr(z)
    upper = np.arange(1, n + 1) / n - cdf
    lower = cdf - np.arange(0, n) / n
    return float(max(upper.max(), lower.max()))


@dataclass
class CltReport:
    """Replicate matrix of normalized density deviations and their normal-law audit."""

    y_points: np.ndarray  # (q, d)
    n: int
    replicates: int
    alpha: float
    base_seed: int
    streams: list
    p_true: np.ndarray  # (q,)
    p_hat: np.ndarray  # (M, q)
    z_values: np.ndarray  # (M, q)
    theory_var: np.ndarray  # (q,)
    ks_distance: np.ndarray  # (q,)
    variance_ratio: np.ndarray  # (q,)
    pairwise_correlation: np.ndarray  # (q, q)
    oracle_residuals: bool


def _clt_replicate(args):
    (
        drift, noise, n, base_seed, stream, kernel_f, beta, kernel_p, alpha,
        oracle, x0,
    ) = args
    if oracle:
        traj = simulate(drift, noise, n, x0=x0, seed=base_seed, keep_noise=True,
                        stream=stream)
        dens = DensityEstimator(kernel_p, alpha, noise.dimension)
        dens._bulk_load(traj.noises)
    else:
        _, dens, _ = run_pipeline(
            drift, noise, n, base_seed, kernel_f, beta, kernel_p, alpha,
            stream=stream, x0=x0,
        )
    return dens


def clt_study(
    drift,
    noise,
    schedule,
    alpha,
    beta,
    kernel_f,
    kernel_p,
    n,
    M,
    y_points,
    base_seed,
    *,
    oracle_residuals=False,
    streams=None,
    threads=1,
    x0=None,
):
    """Monte Carlo audit of the limiting normal law of the density estimator.

    Refuses inadmissible (schedule, alpha) pairs, naming the violated
    condition.  ``streams`` defaults to 0..M-1; each replicate is an
    independent (seed, stream) pipeline.
    """
    adm = clt_admissible(schedule, alpha, noise.dimension)
    if not adm:
        raise InfeasibleScheduleError(
            "inadmissible (schedule, alpha): " + "; ".join(adm.reasons)
        )
    if M < 200:
        raise ParameterError("at least 200 replicates are required")
    d = noise.dimension
    ys = np.atleast_2d(np.asarray(y_points, dtype=float))
    if ys.shape[1] != d:
        raise ParameterError("y_points dimension mismatch")
    q = ys.shape[0]
    if q > 1:
        sep = min(
            float(np.abs(ys[i] - ys[j]).max())
            for i in range(q)
            for j in range(i + 1, q)
        )
        min_radius = 2.0 * max(
            kernel_p.support_radius * n ** (-alpha),
            kernel_f.support_radius * n ** (-beta),
        )
        if sep <= min_radius:
            raise ParameterError(
                f"y_points must be pairwise separated by more than {min_radius:.3g} "
                "(twice the kernel support at n) for asymptotic independence"
            )
    streams = list(range(M)) if streams is None else [int(s) for s in streams]
    if len(streams) != M:
        raise ParameterError("streams must have one entry per replicate")

    args = [
        (drift, noise, n, base_seed, s, kernel_f, beta, kernel_p, alpha,
         oracle_residuals, x0)
        for s in streams
    ]
    p_hat = np.empty((M, q))
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for row, dens in enumerate(pool.map(_clt_replicate, args, chunksize=4)):
                p_hat[row] = dens.density_at_points(ys)
    else:
        for row, a in enumerate(args):
            p_hat[row] = _clt_replicate(a).density_at_points(ys)

    p_true = np.atleast_1d(noise.density(ys))
    scale = math.sqrt(n ** (1.0 - alpha * d))
    z = scale * (p_hat - p_true[None, :])
    theory_var = kernel_p.l2_norm_sq * p_true / (1.0 + alpha * d)
    ks = np.array([ks_distance(z[:, j], math.sqrt(theory_var[j])) for j in range(q)])
    var_ratio = z.var(axis=0, ddof=1) / theory_var
    corr = np.corrcoef(z, rowvar=False) if q > 1 else np.ones((1, 1))
    return CltReport(
        y_points=ys,
        n=n,
        replicates=M,
        alpha=alpha,
        base_seed=base_seed,
        streams=streams,
        p_true=p_true,
        p_hat=p_hat,
        z_values=z,
        theory_var=theory_var,
        ks_distance=ks,
        variance_ratio=var_ratio,
        pairwise_correlation=np.atleast_2d(corr),
        oracle_residuals=oracle_residuals,
    )


# -- prediction-error decomposition ---------------------------------------------


@dataclass
class PredictionErrorReport:
    """Inside/outside-ball split of the average prediction error at checkpoints."""

    n_values: list
    avg_pred_err: np.ndarray
    inside_term: np.ndarray
    outside_term: np.ndarray
    v_first: float
    v_last: float
    outside_vanishing: bool  # strictly decreasing and last below half the first


def prediction_error_study(drift, noise, schedule, beta, kernel, n_grid, seed, *,
                           stream=0, x0=None, alpha=None):
    """Diagnostic pipeline recording both terms of the prediction-error split.

    The threshold sequence is the schedule's v_i; the density floor sequence
    must be nonincreasing over the grid (audited via the exact ball minimum).
    """
    n_grid = [int(n) for n in n_grid]
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ParameterError("n_grid must be strictly increasing")
    floors = [m_n_at(schedule, noise, n) for n in n_grid]
    if any(b > a * (1 + 1e-12) for a, b in zip(floors, floors[1:])):
        raise ParameterError("the density floor sequence must be nonincreasing")
    alpha = alpha if alpha is not None else min(0.5 / noise.dimension, 0.35)
    _, _, rep = run_pipeline(
        drift,
        noise,
        n_grid[-1],
        seed,
        kernel,
        beta,
        kernel,
        alpha,
        mode="plain",
        threshold_schedule=lambda i: v_at(schedule, i),
        checkpoints=n_grid,
        diagnostic=True,
        stream=stream,
        x0=x0,
    )
    outside = rep.outside_ball_term
    if outside[0] <= 0:
        vanishing = True
    else:
        vanishing = bool(np.all(np.diff(outside) < 0) and outside[-1] < 0.5 * outside[0])
    return PredictionErrorReport(
        n_values=n_grid,
        avg_pred_err=rep.avg_pred_error,
        inside_term=rep.inside_ball_term,
        outside_term=outside,
        v_first=v_at(schedule, n_grid[0]),
        v_last=v_at(schedule, n_grid[-1]),
        outside_vanishing=vanishing,
    )
