"""Rate-schedule algebra, density floors, and admissibility checks."""

import dataclasses
import math

import numpy as np
import pytest

from arkde.errors import InfeasibleScheduleError, ParameterError, UnsupportedNoiseError
from arkde.model import NoiseSpec, gaussian_noise, laplace_noise, student_t_noise
from arkde.tuning import (
    check_A6,
    clt_admissible,
    estimate_crossing_radius,
    exponential_schedule,
    gaussian_schedule,
    m_n_at,
    polynomial_schedule,
    recommend_schedule,
    truncated_schedule,
    v_at,
)
from arkde.model import tanh_drift


class TestDilationRadius:
    def test_power_form(self):
        s = polynomial_schedule(9, 8, 1)
        s = dataclasses.replace(s, eta=0.1, A=1.0)
        assert v_at(s, 1024) == pytest.approx(2.0, abs=1e-12)

    def test_log_form(self):
        s = exponential_schedule(1.0, 1)
        s = dataclasses.replace(s, eta=0.5)
        assert v_at(s, int(round(math.e**2))) == pytest.approx(0.5 * math.log(round(math.e**2)))

    def test_sqrt_log_form(self):
        s = gaussian_schedule(1.0, 0.0, 1)
        s = dataclasses.replace(s, eta=1.0)
        n = int(round(math.e**4))
        assert v_at(s, n) == pytest.approx(math.sqrt(math.log(n)), abs=1e-12)

    def test_requires_positive_n(self):
        s = gaussian_schedule(1.0, 0.0, 1)
        with pytest.raises(ParameterError):
            v_at(s, 0)


class TestDensityFloor:
    def test_gaussian_closed_form(self):
        s = gaussian_schedule(1.0, 0.0, 1, beta=0.2)
        noise = gaussian_noise(1.0, 1)
        # v_1 = 0 for the sqrt-log form, so rho = R = 2
        val = m_n_at(s, noise, 1, R=2.0)
        assert val == pytest.approx(math.exp(-2.0) / math.sqrt(2 * math.pi), rel=1e-12)

    def test_laplace_closed_form(self):
        s = gaussian_schedule(1.0, 0.0, 1, beta=0.2)
        assert m_n_at(s, laplace_noise(1.0, 1), 1, R=3.0) == pytest.approx(
            0.5 * math.exp(-3.0), rel=1e-12
        )

    def test_gaussian_floor_dominates_slack_bound(self):
        # closed form with slack c < 1: m_n >= const * exp(-rho^2 / (2 c))
        noise = gaussian_noise(1.0, 1)
        s = gaussian_schedule(1.0, 0.0, 1, beta=0.2)
        const = 1.0 / math.sqrt(2 * math.pi)
        for n in (10, 1000, 100000):
            rho = v_at(s, n) + s.R
            for c in (0.5, 0.9, 0.99):
                assert m_n_at(s, noise, n) >= const * math.exp(-(rho**2) / (2 * c)) - 1e-300

    def test_nonincreasing_in_n(self):
        schedules = [
            (gaussian_schedule(1.0, 0.0, 1, beta=0.2), gaussian_noise(1.0, 1)),
            (exponential_schedule(1.0, 1), laplace_noise(1.0, 1)),
            (polynomial_schedule(9, 7, 1), student_t_noise(8, 7, 1)),
        ]
        for s, noise in schedules:
            vals = [m_n_at(s, noise, n) for n in (1, 10, 100, 10**4, 10**6)]
            assert all(b <= a * (1 + 1e-12) for a, b in zip(vals, vals[1:]))

    @pytest.mark.parametrize("noise_fn", [laplace_noise, lambda r, d: student_t_noise(8, 5, d)])
    def test_diagonal_is_sphere_minimizer_2d(self, noise_fn):
        noise = noise_fn(1.0, 2)
        s = gaussian_schedule(1.0, 0.0, 2, beta=0.1)
        rho = v_at(s, 100) + s.R
        floor = m_n_at(s, noise, 100)
        rng = np.random.default_rng(2)
        pts = rng.standard_normal((10_000, 2))
        pts = rho * pts / np.linalg.norm(pts, axis=1, keepdims=True)
        assert floor <= noise.density(pts).min() + 1e-15

    def test_radial_audit_rejects_nonmonotone_density(self):
        class Bump(NoiseSpec):
            def density(self, y):
                base = super().density(y)
                y = np.atleast_2d(np.asarray(y, dtype=float))
                return base + 0.2 * np.exp(-((np.linalg.norm(y, axis=1) - 3.0) ** 2))

        bumpy = Bump("gaussian", 1, covariance=np.eye(1))
        bumpy.__dict__.update(gaussian_noise(1.0, 1).__dict__)
        bumpy.__class__ = Bump
        s = gaussian_schedule(1.0, 0.0, 1, beta=0.2)
        with pytest.raises(UnsupportedNoiseError):
            m_n_at(s, bumpy, 10**4)


class TestPolynomialSchedule:
    def test_worked_example(self):
        s = polynomial_schedule(9, 8, 1)
        assert s.beta_interval == pytest.approx((9 / 64, 0.25))
        assert s.beta == pytest.approx((9 / 64 + 0.25) / 2)
        assert s.eta == pytest.approx((s.beta + 1 / 8) / 17, abs=1e-15)
        assert s.tau_predicted == pytest.approx((8 - 9 / (8 * s.beta)) / 17, abs=1e-15)

    def test_infeasible_combination_quotes_inequality(self):
        with pytest.raises(InfeasibleScheduleError, match="delta / m\\^2"):
            polynomial_schedule(9, 2.5, 1)

    def test_delta_guard(self):
        with pytest.raises(InfeasibleScheduleError, match="delta > 3"):
            polynomial_schedule(2.5, 2.2, 1)

    def test_eta_lands_in_clt_window(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            d = int(rng.integers(1, 3))
            delta = float(rng.uniform(5, 40))
            m_lo = 2 * math.sqrt(delta * (d + 1))  # delta/m^2 < 1/(2(d+1))
            if m_lo >= delta - 1:
                continue
            m = float(rng.uniform(m_lo * 1.001, delta - 1))
            s = polynomial_schedule(delta, m, d)
            lo, hi = s.eta_interval_clt
            assert lo < s.eta < hi

    def test_beta_out_of_interval_rejected(self):
        with pytest.raises(InfeasibleScheduleError, match="beta must lie"):
            polynomial_schedule(9, 8, 1, beta=0.3)


class TestTruncatedSchedule:
    def test_worked_example(self):
        s = truncated_schedule(4, 3, 1, beta=0.2)
        assert s.eta == pytest.approx(0.2 / 6, abs=1e-15)
        assert s.tau_predicted == pytest.approx(1 / 3, abs=1e-15)

    def test_strictly_better_than_plain_formula(self):
        # plain tau for (delta=4, m=3, beta=0.2) is negative; truncated is 1/3
        delta, m, beta = 4.0, 3.0, 0.2
        plain_tau = (m - delta / (m * beta)) / (m + delta)
        s = truncated_schedule(delta, m, 1, beta=beta)
        assert s.tau_predicted > plain_tau

    def test_tau_increases_with_moment_order(self):
        taus = [truncated_schedule(9, m, 1, beta=0.2).tau_predicted for m in (3, 4, 5, 6, 7)]
        assert all(b > a for a, b in zip(taus, taus[1:]))


class TestExponentialSchedule:
    def test_defaults(self):
        s = exponential_schedule(2.0, 1)
        assert s.m == pytest.approx(1.8)
        assert s.a_exp == pytest.approx(1.62)
        assert s.eta == pytest.approx(s.beta / (2 * 1.8))
        assert s.tau_predicted == pytest.approx(min(1 - 2.0 / 3.6, 1.62 / 3.6))
        assert s.tau_supremum == 0.5

    def test_small_m_infeasible(self):
        with pytest.raises(InfeasibleScheduleError, match="delta < 2 m"):
            exponential_schedule(2.0, 1, m=0.9)


class TestGaussianSchedule:
    def test_worked_example(self):
        s = gaussian_schedule(1.0, 0.0, 1, beta=0.24, c=0.9)
        assert s.tau_predicted == pytest.approx(0.9 / 1.9, abs=1e-15)
        assert s.eta == pytest.approx(2 * 0.24 * 0.9 / 1.9, abs=1e-15)
        assert s.alpha_clt_lower == pytest.approx(1 - 2 * 0.24 * 0.9 / 1.9, abs=1e-12)

    def test_tau_approaches_half_as_c_grows(self):
        t1 = gaussian_schedule(1.0, 0.0, 1, c=0.9).tau_predicted
        t2 = gaussian_schedule(1.0, 0.0, 1, c=0.99).tau_predicted
        assert t1 < t2 < 0.5

    def test_unbounded_drift_lowers_tau(self):
        bounded = gaussian_schedule(1.0, 0.0, 1).tau_predicted
        contractive = gaussian_schedule(1.0, 0.5, 1).tau_predicted
        assert contractive < bounded


class TestRecommendation:
    def test_dispatch_by_tail(self):
        assert recommend_schedule(gaussian_noise(1.0, 1)).tail == "gaussian"
        assert recommend_schedule(laplace_noise(1.0, 1)).tail == "exponential"
        assert recommend_schedule(student_t_noise(8, 7, 1)).tail == "polynomial"

    def test_truncated_flag(self):
        s = recommend_schedule(student_t_noise(8, 7, 1), truncated=True)
        assert s.truncated
        with pytest.raises(ParameterError):
            recommend_schedule(gaussian_noise(1.0, 1), truncated=True)

    def test_crossing_radius_estimate(self):
        r = estimate_crossing_radius(tanh_drift(1.0, 0.0, 1), gaussian_noise(1.0, 1),
                                     n_pilot=5000)
        assert 1.0 < r < 2.0


class TestA6Audit:
    def test_admissible_gaussian_ratio_decreases(self):
        s = gaussian_schedule(1.0, 0.0, 1, beta=0.2)
        rep = check_A6(s, gaussian_noise(1.0, 1))
        assert rep.passed and rep.ratio_decreasing and rep.v_increasing

    def test_overshooting_eta_flagged(self):
        s = polynomial_schedule(9, 7, 1)
        bad = dataclasses.replace(s, eta=s.beta / s.delta * 2, m_inv_rate=2 * s.beta)
        rep = check_A6(bad, student_t_noise(8, 7, 1))
        assert not rep.passed and not rep.ratio_decreasing

    def test_constant_v_flagged(self):
        s = polynomial_schedule(9, 7, 1)
        frozen = dataclasses.replace(s, eta=0.0, m_inv_rate=0.0)
        rep = check_A6(frozen, student_t_noise(8, 7, 1))
        assert not rep.passed and not rep.v_increasing
        assert any("not strictly increasing" in note for note in rep.notes)

    def test_n_grid_validation(self):
        s = gaussian_schedule(1.0, 0.0, 1)
        with pytest.raises(ParameterError):
            check_A6(s, n_grid=(100, 50))


class TestCltAdmissibility:
    def test_worked_example_admissible(self):
        s = gaussian_schedule(1.0, 0.0, 1, beta=0.24, c=0.9)
        rep = clt_admissible(s, 0.8, 1)
        assert rep.admissible and not rep.reasons
        assert np.all(np.diff(rep.proxy_values) < 0)

    def test_endpoint_alphas_inadmissible(self):
        s = gaussian_schedule(1.0, 0.0, 1, beta=0.24, c=0.9)
        assert not clt_admissible(s, 1.0, 1).admissible
        assert not clt_admissible(s, 1.0 / 3.0, 1).admissible

    def test_below_lower_bound_names_reason(self):
        s = gaussian_schedule(1.0, 0.0, 1, beta=0.24, c=0.9)
        rep = clt_admissible(s, 0.5, 1)
        assert not rep.admissible
        assert any("alpha must exceed" in r for r in rep.reasons)

    def test_proxy_failure_reason(self):
        s = gaussian_schedule(1.0, 0.0, 1, beta=0.24, c=0.9)
        slow = dataclasses.replace(s, m_inv_rate=0.5)
        rep = clt_admissible(slow, 0.8, 1)
        assert not rep.admissible
        assert any("does not decrease" in r for r in rep.reasons)
