"""Drift and noise families, trajectory simulation, and stability diagnostics.

The process under study is ``X_n = f(X_{n-1}) + eps_n`` with an unknown drift
``f`` and i.i.d. innovations ``eps_n``.  Drift families here are contractive
(``|f(x)| <= r_f |x| + C_f`` with ``r_f < 1``) or bounded, so trajectories are
stable without requiring stationary initialization; the diagnostics in this
module audit exactly those properties on simulated paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.special import gammaln

from . import _core
from .errors import (
    DimensionMismatchError,
    NumericalOverflowError,
    ParameterError,
)
from .rng import generator_name, make_generator

_DRIFT_IDS = {"zero": 0, "linear_stable": 1, "tanh_affine": 2, "bounded_sine": 3}


@dataclass
class DriftSpec:
    """A drift family with its declared contraction constants.

    The constants are declarations audited by :func:`check_A1`; use the factory
    functions (:func:`zero_drift`, :func:`linear_drift`, ...) to construct
    specs whose declarations are valid by construction.
    """

    family: str
    dimension: int
    r_f: float
    C_f: float
    gradient_bound: float
    theta: Optional[np.ndarray] = None
    scale: float = 0.0
    shift: Optional[np.ndarray] = None
    amplitude: float = 0.0

    @property
    def drift_id(self):
        return _DRIFT_IDS[self.family]

    def _core_args(self):
        d = self.dimension
        theta = self.theta if self.theta is not None else np.zeros((d, d))
        shift = self.shift if self.shift is not None else np.zeros(d)
        return (
            self.drift_id,
            np.ascontiguousarray(theta, dtype=float),
            float(self.scale),
            np.ascontiguousarray(shift, dtype=float),
            float(self.amplitude),
        )


def zero_drift(dimension=1):
    """f(x) = 0."""
    return DriftSpec("zero", dimension, r_f=0.0, C_f=0.0, gradient_bound=0.0)


def linear_drift(theta):
    """f(x) = theta @ x with spectral norm strictly below one."""
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    if theta.shape[0] != theta.shape[1]:
        raise ParameterError("theta must be a square matrix")
    spectral = float(np.linalg.norm(theta, 2))
    if spectral >= 1.0:
        raise ParameterError(
            f"linear drift requires spectral norm < 1, got {spectral:.6g}"
        )
    return DriftSpec(
        "linear_stable",
        theta.shape[0],
        r_f=spectral,
        C_f=0.0,
        gradient_bound=spectral,
        theta=theta,
    )


def tanh_drift(scale=1.0, shift=0.0, dimension=1):
    """f(x)_j = scale * tanh(x_j) + shift_j (bounded, so r_f = 0)."""
    shift = np.broadcast_to(np.asarray(shift, dtype=float), (dimension,)).copy()
    c_f = abs(scale) * math.sqrt(dimension) + float(np.linalg.norm(shift))
    return DriftSpec(
        "tanh_affine",
        dimension,
        r_f=0.0,
        C_f=c_f,
        gradient_bound=abs(scale),
        scale=float(scale),
        shift=shift,
    )


def sine_drift(amplitude=1.0, dimension=1):
    """f(x)_j = amplitude * sin(x_j)."""
    return DriftSpec(
        "bounded_sine",
        dimension,
        r_f=0.0,
        C_f=abs(amplitude) * math.sqrt(dimension),
        gradient_bound=abs(amplitude),
        amplitude=float(amplitude),
    )


def drift_eval(drift, x):
    """Evaluate f at a point (d,) or a batch (m, d)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if pts.shape[1] != drift.dimension:
        raise DimensionMismatchError(
            f"point of dimension {pts.shape[1]} passed to drift of dimension "
            f"{drift.dimension}"
        )
    # shared compiled path keeps f(x) bit-identical to the simulation recursion
    out = _core.drift_batch(*drift._core_args(), np.ascontiguousarray(pts))
    return out[0] if single else out


@dataclass
class NoiseSpec:
    """An i.i.d. innovation family with evaluable density and known covariance.

    ``tail_class`` distinguishes the three supported decay regimes of the
    density at infinity, which drive all bandwidth/rate schedules:
    ``polynomial`` (student-t product, exponent delta = dof + 1),
    ``exponential`` (Laplace product, exponent delta = rate), and
    ``gaussian``.
    """

    family: str
    dimension: int
    covariance: np.ndarray
    rate: float = 0.0  # Laplace rate per coordinate
    dof: float = 0.0  # student-t degrees of freedom
    moment_order: float = math.inf  # declared polynomial moment order m
    _chol: np.ndarray = field(default=None, repr=False)
    _inv_cov: np.ndarray = field(default=None, repr=False)
    _log_norm: float = field(default=0.0, repr=False)

    @property
    def tail_class(self):
        return {
            "gaussian": "gaussian",
            "laplace_product": "exponential",
            "student_t_product": "polynomial",
        }[self.family]

    @property
    def tail_exponent(self):
        """delta in the tail bound: |x|^-delta (polynomial) or exp(-delta |x|) (exponential)."""
        if self.family == "laplace_product":
            return self.rate
        if self.family == "student_t_product":
            return self.dof + 1.0
        return math.inf

    @property
    def lambda_min(self):
        return float(np.linalg.eigvalsh(self.covariance).min())

    def density(self, y):
        """Exact density p(y) at a point (d,) or batch (m, d)."""
        y = np.asarray(y, dtype=float)
        single = y.ndim <= 1
        pts = np.atleast_2d(y)
        if pts.shape[1] != self.dimension:
            raise DimensionMismatchError(
                f"point of dimension {pts.shape[1]} passed to noise of dimension "
                f"{self.dimension}"
            )
        if self.family == "gaussian":
            quad = np.einsum("ij,jk,ik->i", pts, self._inv_cov, pts)
            vals = np.exp(self._log_norm - 0.5 * quad)
        elif self.family == "laplace_product":
            vals = np.exp(
                self.dimension * math.log(self.rate / 2.0)
                - self.rate * np.abs(pts).sum(axis=1)
            )
        else:
            logs = self._log_norm - 0.5 * (self.dof + 1.0) * np.log1p(
                pts**2 / self.dof
            )
            vals = np.exp(logs.sum(axis=1))
        return float(vals[0]) if single else vals

    def draw(self, rng, n):
        """n i.i.d. draws, shape (n, d)."""
        d = self.dimension
        if self.family == "gaussian":
            return rng.standard_normal((n, d)) @ self._chol.T
        if self.family == "laplace_product":
            return rng.laplace(0.0, 1.0 / self.rate, size=(n, d))
        return rng.standard_t(self.dof, size=(n, d))


def gaussian_noise(covariance=1.0, dimension=1):
    """Gaussian innovations with the given covariance (scalar, diagonal, or full)."""
    cov = np.asarray(covariance, dtype=float)
    if cov.ndim == 0:
        cov = float(cov) * np.eye(dimension)
    elif cov.ndim == 1:
        cov = np.diag(cov)
    if cov.shape != (dimension, dimension):
        raise DimensionMismatchError("covariance shape does not match dimension")
    if not np.allclose(cov, cov.T):
        raise ParameterError("covariance must be symmetric")
    eigs = np.linalg.eigvalsh(cov)
    if eigs.min() <= 0:
        raise ParameterError("covariance must be positive definite")
    chol = np.linalg.cholesky(cov)
    log_norm = -0.5 * (dimension * math.log(2 * math.pi) + float(np.linalg.slogdet(cov)[1]))
    return NoiseSpec(
        "gaussian",
        dimension,
        covariance=cov,
        _chol=chol,
        _inv_cov=np.linalg.inv(cov),
        _log_norm=log_norm,
    )


def laplace_noise(rate=1.0, dimension=1):
    """Product of Laplace coordinates with density (rate/2) exp(-rate |t|)."""
    if rate <= 0:
        raise ParameterError("rate must be positive")
    cov = (2.0 / rate**2) * np.eye(dimension)
    return NoiseSpec("laplace_product", dimension, covariance=cov, rate=float(rate))


def student_t_noise(dof, moment_order=None, dimension=1):
    """Product of student-t coordinates; polynomial tails with exponent dof + 1.

    ``moment_order`` is the declared moment order m used by the rate
    schedules; it must satisfy 2 < m < dof.  Defaults to the midpoint of
    that interval.
    """
    if dof <= 2:
        raise ParameterError("dof must exceed 2 so the innovation variance exists")
    if moment_order is None:
        moment_order = (2.0 + dof) / 2.0
    if not 2.0 < moment_order < dof:
        raise ParameterError(
            f"moment_order must lie in (2, dof) = (2, {dof}), got {moment_order}"
        )
    cov = (dof / (dof - 2.0)) * np.eye(dimension)
    log_norm = float(
        gammaln((dof + 1.0) / 2.0) - gammaln(dof / 2.0) - 0.5 * math.log(dof * math.pi)
    )
    return NoiseSpec(
        "student_t_product",
        dimension,
        covariance=cov,
        dof=float(dof),
        moment_order=float(moment_order),
        _log_norm=log_norm,
    )


def noise_density(noise, y):
    """Exact density value p(y) of the noise family."""
    return noise.density(y)


@dataclass
class Trajectory:
    """A simulated path X_0..X_n, with the driving noise retained in diagnostic mode."""

    states: np.ndarray  # (n+1, d)
    noises: Optional[np.ndarray]  # (n, d) or None
    seed: int
    stream: int
    drift: DriftSpec
    noise: NoiseSpec
    generator: str

    @property
    def n(self):
        return self.states.shape[0] - 1

    @property
    def dimension(self):
        return self.states.shape[1]


def simulate(drift, noise, n, x0=None, seed=0, keep_noise=False, stream=0):
    """Simulate X_i = f(X_{i-1}) + eps_i for i = 1..n, deterministically in (seed, stream).

    Raises:
        NumericalOverflowError: if a non-finite state appears, naming the step.
    """
    if n < 1:
        raise ParameterError("n must be at least 1")
    if drift.dimension != noise.dimension:
        raise DimensionMismatchError("drift and noise dimensions differ")
    d = drift.dimension
    if x0 is None:
        x0 = np.zeros(d)
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), (d,)).copy()
    if not np.all(np.isfinite(x0)):
        raise ParameterError("x0 must be finite")
    rng = make_generator(seed, stream)
    eps = np.ascontiguousarray(noise.draw(rng, n))
    states, bad = _core.simulate_states(*drift._core_args(), x0, eps)
    if bad:
        raise NumericalOverflowError(
            f"non-finite state encountered at step {bad}", step=int(bad)
        )
    return Trajectory(
        states=states,
        noises=eps if keep_noise else None,
        seed=seed,
        stream=stream,
        drift=drift,
        noise=noise,
        generator=generator_name(),
    )


@dataclass
class StabilityReport:
    """Empirical stability diagnostics of a trajectory."""

    n: int
    moment_order: float
    sum_norm_m_over_n: float  # (1/n) sum |X_i|^m
    sup_norm_scaled: float  # sup_i |X_i| / n^(1/m)
    sup_noise: Optional[float]  # running max of |eps_i| (needs retained noise)
    exp_moment_sum_over_n: Optional[float]
    exponent_a: Optional[float]
    squared_exponent: bool
    overflowed: bool  # exponential sums saturated to +inf


def stability_diagnostics(traj, m, exponent_a=None, squared_exponent=False):
    """Compute the moment/exponential stability diagnostics of a simulated path.

    Exponential sums that overflow are reported as +inf with the ``overflowed``
    flag set instead of raising.
    """
    if traj.n < 1:
        raise ParameterError("trajectory must contain at least one step")
    if m <= 0:
        raise ParameterError("m must be positive")
    norms = np.linalg.norm(traj.states[1:], axis=1)
    sup_all = float(np.linalg.norm(traj.states, axis=1).max())
    sum_m = float(np.mean(norms**m))
    sup_scaled = sup_all / traj.n ** (1.0 / m)
    sup_noise = None
    if traj.noises is not None:
        sup_noise = float(np.linalg.norm(traj.noises, axis=1).max())
    exp_sum = None
    overflow = False
    if exponent_a is not None:
        arg = exponent_a * (norms**2 if squared_exponent else norms)
        with np.errstate(over="ignore"):
            vals = np.exp(arg)
        exp_sum = float(np.mean(vals))
        overflow = not math.isfinite(exp_sum) or bool(np.isinf(vals).any())
        if overflow:
            exp_sum = math.inf
    return StabilityReport(
        n=traj.n,
        moment_order=float(m),
        sum_norm_m_over_n=sum_m,
        sup_norm_scaled=sup_scaled,
        sup_noise=sup_noise,
        exp_moment_sum_over_n=exp_sum,
        exponent_a=None if exponent_a is None else float(exponent_a),
        squared_exponent=squared_exponent,
        overflowed=overflow,
    )


def crossing_frequency(traj, drift, R):
    """Fraction of steps i = 0..n-1 with |f(X_i)| < R (ball-crossing frequency)."""
    if R <= 0:
        raise ParameterError("R must be positive")
    f_vals = drift_eval(drift, traj.states[:-1])
    return float(np.mean(np.linalg.norm(f_vals, axis=1) < R))


@dataclass
class DriftBoundReport:
    """Audit of the declared contraction bound |f(x)| <= r_f |x| + C_f."""

    samples: int
    box_radius: float
    max_slack: float  # max over samples of |f(x)| - (r_f |x| + C_f)
    violation_count: int
    passed: bool


def check_A1(drift, sample_count, box_radius, seed):
    """Sample the box uniformly and audit the declared (r_f, C_f) bound."""
    if sample_count < 100:
        raise ParameterError("sample_count must be at least 100")
    rng = make_generator(seed)
    pts = rng.uniform(-box_radius, box_radius, size=(sample_count, drift.dimension))
    f_norm = np.linalg.norm(drift_eval(drift, pts), axis=1)
    bound = drift.r_f * np.linalg.norm(pts, axis=1) + drift.C_f
    slack = f_norm - bound
    violations = int(np.count_nonzero(slack > 1e-9))
    return DriftBoundReport(
        samples=sample_count,
        box_radius=float(box_radius),
        max_slack=float(slack.max()),
        violation_count=violations,
        passed=violations == 0,
    )


def trajectory_to_csv(traj, path):
    """Write a trajectory as CSV with header step,x_1..x_d[,eps_1..eps_d].

    The first line records the counter-based generator and the (seed, stream)
    pair, so the file is reproducible from its own header.
    """
    path = Path(path)
    d = traj.dimension
    cols = ["step"] + [f"x_{j + 1}" for j in range(d)]
    if traj.noises is not None:
        cols += [f"eps_{j + 1}" for j in range(d)]
    lines = [
        f"# rng = {traj.generator} seed = {traj.seed} stream = {traj.stream}",
        ",".join(cols),
    ]
    for i in range(traj.n + 1):
        row = [str(i)] + [repr(float(v)) for v in traj.states[i]]
        if traj.noises is not None:
            row += [repr(float(v)) for v in traj.noises[i - 1]] if i >= 1 else [""] * d
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n")
