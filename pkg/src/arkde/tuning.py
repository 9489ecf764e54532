"""Bandwidth exponents, dilation radii, and admissibility checks per noise-tail family.

Every schedule fixes the growth of the dilation radius v_n, the implied decay
of the density floor ``m_n = inf { p(z) : |z| <= v_n + R }``, and the predicted
exponent ``tau`` of the average-prediction-error rate ``n^(-beta tau)``.  The
three supported tail classes have closed-form optima:

* polynomial tails ``C |x|^-delta``: v_n = A n^eta with
  ``eta = (beta + 1/m) / (m + delta)``, requiring ``delta / m^2 < beta``;
* exponential tails ``C exp(-delta |x|)``: v_n = eta log n with
  ``eta = beta / (2m)`` for a working moment order m < delta;
* gaussian innovations: v_n = sqrt(eta log n) with
  ``eta = 2 beta c lambda_min / (1 + c (1 - r_f))`` for a slack c in (0, 1).

The truncated-residual variant relaxes the polynomial feasibility constraint
and achieves ``tau = (m - 1) / (m + delta - 1)``, strictly better than the
plain ``tau = (m - delta / (m beta)) / (m + delta)``.

Admissibility proxies here use the closed-form power-law characterization of
``m_n^{-1}`` (n^(delta eta), resp. n^(eta / (2 c lambda_min))) rather than the
exact ball minimum: the exact value carries a fixed radius offset R that makes
the finite-n ratio non-monotone far below the asymptotic regime, while the
schedules are defined by their exponents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import InfeasibleScheduleError, ParameterError, UnsupportedNoiseError

_DEFAULT_N_GRID = tuple(int(round(10 ** (3 + 4 * k / 5))) for k in range(6))


@dataclass(frozen=True)
class RateSchedule:
    """A fully resolved (v_n, m_n, tau, alpha-range) schedule for one tail class."""

    tail: str  # polynomial | exponential | gaussian
    d: int
    beta: float
    eta: float
    A: float
    v_form: str  # power | log | sqrt_log
    tau_predicted: float
    R: float
    alpha_clt_lower: float
    alpha_clt_upper: float
    m_inv_rate: float  # m_n^{-1} grows like n^m_inv_rate
    delta: Optional[float] = None
    m: Optional[float] = None
    a_exp: Optional[float] = None  # working exponential-moment exponent
    lambda_min: Optional[float] = None
    c: Optional[float] = None
    r_f: Optional[float] = None
    tau_supremum: Optional[float] = None  # least upper bound when tau is approached, not attained
    beta_interval: Optional[tuple] = None
    eta_interval_clt: Optional[tuple] = None
    truncated: bool = False
    metadata: Optional[dict] = None

    @property
    def alpha_range_clt(self):
        return (self.alpha_clt_lower, self.alpha_clt_upper)

    def with_amplitude(self, A):
        return replace(self, A=float(A))


def v_at(schedule, n):
    """Dilation radius v_n of the schedule at step n."""
    if n < 1:
        raise ParameterError("n must be at least 1")
    if schedule.v_form == "power":
        return schedule.A * float(n) ** schedule.eta
    if schedule.v_form == "log":
        return schedule.eta * math.log(n)
    return math.sqrt(schedule.eta * math.log(n)) if n > 1 else 0.0


def _clt_lower(beta, tau, d):
    return max((1.0 - 2.0 * beta * tau) / d, 1.0 / (d + 2))


def _free_exponent_metadata(beta, d):
    # free exponents of the bounds; report metadata only, never used in computation
    return {
        "lambda_interval": (0.5 + beta * d, 1.0),
        "s_interval": ((1.0 + beta * d) / 2.0, 1.0),
        "gamma_interval_form": "((1 + alpha d) / 2, 1)",
    }


def polynomial_schedule(delta, m, d=1, beta=None, A=1.0, R=1.0):
    """Optimal plain-estimator schedule for polynomial tails C |x|^-delta.

    Feasibility requires ``delta > 3``, ``2 < m < delta - 1`` and
    ``delta / m^2 < 1 / (2 (d + 1))``; beta defaults to the midpoint of its
    admissible interval ``(delta / m^2, 1 / (2 (d + 1)))``.
    """
    if delta <= 3:
        raise InfeasibleScheduleError(f"polynomial tails require delta > 3, got delta = {delta}")
    if not 2.0 < m <= delta - 1.0:
        raise InfeasibleScheduleError(
            f"moment order must satisfy 2 < m <= delta - 1 = {delta - 1}, got m = {m}"
        )
    lo = delta / m**2
    hi = 1.0 / (2.0 * (d + 1))
    if lo >= hi:
        raise InfeasibleScheduleError(
            f"infeasible: delta / m^2 = {lo:.6g} must be below 1 / (2 (d + 1)) = {hi:.6g}"
        )
    if beta is None:
        beta = (lo + hi) / 2.0
    if not lo < beta < hi:
        raise InfeasibleScheduleError(
            f"beta must lie in (delta / m^2, 1 / (2 (d + 1))) = ({lo:.6g}, {hi:.6g}), got {beta}"
        )
    eta = (beta + 1.0 / m) / (m + delta)
    tau = (m - delta / (m * beta)) / (m + delta)
    return RateSchedule(
        tail="polynomial",
        d=d,
        beta=float(beta),
        eta=eta,
        A=float(A),
        v_form="power",
        tau_predicted=tau,
        R=float(R),
        alpha_clt_lower=_clt_lower(beta, tau, d),
        alpha_clt_upper=1.0 / d,
        m_inv_rate=delta * eta,
        delta=float(delta),
        m=float(m),
        beta_interval=(lo, hi),
        eta_interval_clt=(1.0 / m**2, 1.0 / m**2 + 1.0 / (m * (d + 2))),
        metadata=_free_exponent_metadata(beta, d),
    )


def truncated_schedule(delta, m, d=1, beta=None, A=1.0, R=1.0):
    """Schedule for the truncated-residual estimator under polynomial tails.

    Only ``delta > 3`` is required (no delta/m^2 coupling); the optimal
    exponent is ``eta = beta / (m + delta - 1)`` with
    ``tau = (m - 1) / (m + delta - 1)``.
    """
    if delta <= 3:
        raise InfeasibleScheduleError(f"polynomial tails require delta > 3, got delta = {delta}")
    if not 2.0 < m <= delta - 1.0:
        raise InfeasibleScheduleError(
            f"moment order must satisfy 2 < m <= delta - 1 = {delta - 1}, got m = {m}"
        )
    hi = 1.0 / (2.0 * (d + 1))
    if beta is None:
        beta = hi / 2.0
    if not 0.0 < beta < hi:
        raise InfeasibleScheduleError(
            f"beta must lie in (0, 1 / (2 (d + 1))) = (0, {hi:.6g}), got {beta}"
        )
    eta = beta / (m + delta - 1.0)
    tau = (m - 1.0) / (m + delta - 1.0)
    return RateSchedule(
        tail="polynomial",
        d=d,
        beta=float(beta),
        eta=eta,
        A=float(A),
        v_form="power",
        tau_predicted=tau,
        R=float(R),
        alpha_clt_lower=_clt_lower(beta, tau, d),
        alpha_clt_upper=1.0 / d,
        m_inv_rate=delta * eta,
        delta=float(delta),
        m=float(m),
        beta_interval=(0.0, hi),
        truncated=True,
        metadata=_free_exponent_metadata(beta, d),
    )


def exponential_schedule(delta, d=1, beta=None, m=None, a=None, R=1.0):
    """Schedule for exponential tails C exp(-delta |x|); v_n = eta log n.

    ``m`` is the working exponential-moment order (< delta, default 0.9 delta)
    and ``a < m`` the exponent used in the error bounds (default 0.9 m).  The
    achievable tau approaches 1/2 as m -> delta and a -> m; the recorded
    ``tau_predicted`` is the value these defaults attain and ``tau_supremum``
    is 1/2.
    """
    if delta <= 0:
        raise InfeasibleScheduleError(f"exponential tails require delta > 0, got {delta}")
    if m is None:
        m = 0.9 * delta
    if not 0.0 < m < delta:
        raise InfeasibleScheduleError(
            f"working moment order must satisfy 0 < m < delta = {delta}, got m = {m}"
        )
    if 2.0 * m <= delta:
        raise InfeasibleScheduleError(
            f"eta = beta / (2 m) needs delta < 2 m for the density floor to keep pace: "
            f"delta = {delta}, 2 m = {2 * m}"
        )
    if a is None:
        a = 0.9 * m
    if not 0.0 < a < m:
        raise InfeasibleScheduleError(f"bound exponent must satisfy 0 < a < m = {m}, got a = {a}")
    hi = 1.0 / (2.0 * (d + 1))
    if beta is None:
        beta = hi / 2.0
    if not 0.0 < beta < hi:
        raise InfeasibleScheduleError(
            f"beta must lie in (0, 1 / (2 (d + 1))) = (0, {hi:.6g}), got {beta}"
        )
    eta = beta / (2.0 * m)
    tau = min(1.0 - delta / (2.0 * m), a / (2.0 * m))
    return RateSchedule(
        tail="exponential",
        d=d,
        beta=float(beta),
        eta=eta,
        A=1.0,
        v_form="log",
        tau_predicted=tau,
        R=float(R),
        alpha_clt_lower=_clt_lower(beta, tau, d),
        alpha_clt_upper=1.0 / d,
        m_inv_rate=delta * eta,
        delta=float(delta),
        m=float(m),
        a_exp=float(a),
        tau_supremum=0.5,
        beta_interval=(0.0, hi),
        metadata=_free_exponent_metadata(beta, d),
    )


def gaussian_schedule(lambda_min=1.0, r_f=0.0, d=1, beta=None, c=0.9, R=1.0):
    """Schedule for gaussian innovations; v_n = sqrt(eta log n).

    ``c`` in (0, 1) trades constants against the rate:
    ``tau = c (1 - r_f) / (1 + c (1 - r_f))`` approaches 1/2 for bounded
    drifts (r_f = 0) as c -> 1.  Default c = 0.9.
    """
    if not 0.0 < c < 1.0:
        raise InfeasibleScheduleError(f"c must lie in (0, 1), got {c}")
    if not 0.0 <= r_f < 1.0:
        raise InfeasibleScheduleError(f"r_f must lie in [0, 1), got {r_f}")
    if lambda_min <= 0:
        raise InfeasibleScheduleError("lambda_min must be positive")
    hi = 1.0 / (2.0 * (d + 1))
    if beta is None:
        beta = hi / 2.0
    if not 0.0 < beta < hi:
        raise InfeasibleScheduleError(
            f"beta must lie in (0, 1 / (2 (d + 1))) = (0, {hi:.6g}), got {beta}"
        )
    eta = 2.0 * beta * c * lambda_min / (1.0 + c * (1.0 - r_f))
    tau = c * (1.0 - r_f) / (1.0 + c * (1.0 - r_f))
    return RateSchedule(
        tail="gaussian",
        d=d,
        beta=float(beta),
        eta=eta,
        A=1.0,
        v_form="sqrt_log",
        tau_predicted=tau,
        R=float(R),
        alpha_clt_lower=_clt_lower(beta, tau, d),
        alpha_clt_upper=1.0 / d,
        m_inv_rate=eta / (2.0 * c * lambda_min),
        lambda_min=float(lambda_min),
        c=float(c),
        r_f=float(r_f),
        a_exp=(1.0 - r_f) / (2.0 * lambda_min),
        tau_supremum=0.5 if r_f == 0.0 else None,
        beta_interval=(0.0, hi),
        metadata=_free_exponent_metadata(beta, d),
    )


def recommend_schedule(noise, d=None, beta=None, *, r_f=0.0, c=0.9, m=None, a=None,
                       A=1.0, R=1.0, truncated=False):
    """Build the tail-appropriate optimal schedule for a noise family.

    For polynomial tails the declared moment order of the noise is used unless
    ``m`` overrides it; ``truncated`` selects the truncated-residual variant.
    """
    d = noise.dimension if d is None else d
    tail = noise.tail_class
    if tail == "polynomial":
        m_eff = noise.moment_order if m is None else m
        builder = truncated_schedule if truncated else polynomial_schedule
        return builder(noise.tail_exponent, m_eff, d=d, beta=beta, A=A, R=R)
    if truncated:
        raise ParameterError("the truncated schedule targets polynomial tails only")
    if tail == "exponential":
        return exponential_schedule(noise.tail_exponent, d=d, beta=beta, m=m, a=a, R=R)
    return gaussian_schedule(noise.lambda_min, r_f=r_f, d=d, beta=beta, c=c, R=R)


# -- density floor -----------------------------------------------------------


def _audit_radial_monotone(noise, radius, seed=5, rays=32, steps=24):
    """Check that the density is nonincreasing along rays out to the radius."""
    from .rng import make_generator

    rng = make_generator(seed)
    d = noise.dimension
    dirs = rng.standard_normal((rays, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = np.linspace(0.0, radius, steps)
    for u in dirs:
        vals = noise.density(radii[:, None] * u)
        if np.any(np.diff(vals) > 1e-12 * np.maximum(vals[:-1], 1e-300)):
            return False
    return True


def m_n_at(schedule, noise, n, R=None):
    """Exact density floor inf { p(z) : |z| <= v_n + R } for the built-in families.

    For coordinatewise-symmetric unimodal product densities the minimum over
    the euclidean sphere sits at the diagonal extreme point; for a gaussian
    with general covariance it sits along the smallest-eigenvalue direction.
    """
    R = schedule.R if R is None else R
    rho = v_at(schedule, n) + R
    if not _audit_radial_monotone(noise, rho):
        raise UnsupportedNoiseError(
            "density floor needs a radially nonincreasing density; audit failed"
        )
    d = noise.dimension
    if noise.family == "gaussian":
        return float(np.exp(noise._log_norm - rho**2 / (2.0 * noise.lambda_min)))
    diag = np.full(d, rho / math.sqrt(d))
    return float(noise.density(diag))


# -- assumption audits --------------------------------------------------------


@dataclass
class A6Report:
    """Finite-sample audit of the density-floor growth condition.

    The ratio column is the modeled ``m_n^{-1} / n^beta = n^(m_inv_rate - beta)``;
    the condition holds exactly when the exponent is negative, which the grid
    renders as a strictly decreasing, vanishing sequence.
    """

    n_grid: tuple
    v_values: np.ndarray
    ratio_values: np.ndarray
    v_increasing: bool
    ratio_decreasing: bool
    ratio_vanishing: bool  # last value below half the first
    notes: tuple
    passed: bool


def check_A6(schedule, noise=None, beta=None, n_grid=_DEFAULT_N_GRID):
    """Audit v_n growth and the modeled density-floor ratio on a log grid of n."""
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ParameterError("n_grid must be strictly increasing")
    beta = schedule.beta if beta is None else beta
    ns = np.asarray(n_grid, dtype=float)
    v = np.array([v_at(schedule, int(n)) for n in n_grid])
    ratio = ns ** (schedule.m_inv_rate - beta)
    notes = []
    if noise is not None and noise.tail_class != schedule.tail:
        notes.append(
            f"schedule tail {schedule.tail!r} does not match noise tail {noise.tail_class!r}"
        )
    v_inc = bool(np.all(np.diff(v) > 0))
    if not v_inc:
        notes.append("v_n is not strictly increasing on the grid")
    dec = bool(np.all(np.diff(ratio) < 0))
    if not dec:
        notes.append("m_n^{-1} / n^beta is not decreasing (rate exponent >= beta)")
    vanish = bool(ratio[-1] < 0.5 * ratio[0])
    return A6Report(
        n_grid=tuple(int(x) for x in n_grid),
        v_values=v,
        ratio_values=ratio,
        v_increasing=v_inc,
        ratio_decreasing=dec,
        ratio_vanishing=vanish,
        notes=tuple(notes),
        passed=v_inc and dec,
    )


@dataclass
class AdmissibilityReport:
    """Outcome of the central-limit-theorem bandwidth admissibility check."""

    admissible: bool
    alpha: float
    reasons: tuple
    proxy_exponent: float
    proxy_values: np.ndarray

    def __bool__(self):
        return self.admissible


def clt_admissible(schedule, alpha, d=None, n_grid=_DEFAULT_N_GRID):
    """Decide whether a density bandwidth exponent alpha supports the CLT scaling.

    Checks, with explicit reasons on failure:
    the open range ``1/(d+2) < alpha < 1/d``; the schedule's lower bound
    ``alpha > max((1 - 2 beta tau)/d, 1/(d+2))``; for polynomial schedules the
    eta window of the CLT; and the vanishing of the variance/density-floor
    proxy ``n^((1 - alpha d - 2 beta)/2) * m_n^{-1}`` on a log grid.
    """
    d = schedule.d if d is None else d
    reasons = []
    lo_open = 1.0 / (d + 2)
    hi_open = 1.0 / d
    if not lo_open < alpha < hi_open:
        reasons.append(
            f"alpha must lie strictly inside (1/(d+2), 1/d) = ({lo_open:.6g}, {hi_open:.6g})"
        )
    if alpha <= schedule.alpha_clt_lower:
        reasons.append(
            f"alpha must exceed max((1 - 2 beta tau)/d, 1/(d+2)) = "
            f"{schedule.alpha_clt_lower:.6g}"
        )
    if schedule.eta_interval_clt is not None:
        lo_eta, hi_eta = schedule.eta_interval_clt
        if not lo_eta < schedule.eta < hi_eta:
            reasons.append(
                f"eta = {schedule.eta:.6g} outside the admissible window "
                f"({lo_eta:.6g}, {hi_eta:.6g})"
            )
    exponent = (1.0 - alpha * d - 2.0 * schedule.beta) / 2.0 + schedule.m_inv_rate
    ns = np.asarray(n_grid, dtype=float)
    proxy = ns**exponent
    if not np.all(np.diff(proxy) < 0):
        reasons.append(
            "normalized bias proxy n^((1 - alpha d - 2 beta)/2) * m_n^{-1} does not "
            f"decrease (exponent {exponent:.6g} >= 0)"
        )
    return AdmissibilityReport(
        admissible=not reasons,
        alpha=float(alpha),
        reasons=tuple(reasons),
        proxy_exponent=exponent,
        proxy_values=proxy,
    )


def estimate_crossing_radius(drift, noise, n_pilot=20000, seed=123):
    """R = 1 + a pilot Monte Carlo estimate of the mean drift norm under the state law."""
    from .model import drift_eval, simulate

    traj = simulate(drift, noise, n_pilot, seed=seed)
    f_vals = drift_eval(drift, traj.states[:-1])
    return 1.0 + float(np.linalg.norm(f_vals, axis=1).mean())
