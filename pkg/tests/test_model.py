"""Model families, simulation determinism, and stability diagnostics."""

import math

import numpy as np
import pytest

from arkde import _core
from arkde.errors import (
    ContractViolationError,
    DimensionMismatchError,
    NumericalOverflowError,
    ParameterError,
)
from arkde.model import (
    DriftSpec,
    Trajectory,
    check_A1,
    crossing_frequency,
    drift_eval,
    gaussian_noise,
    laplace_noise,
    linear_drift,
    noise_density,
    simulate,
    sine_drift,
    stability_diagnostics,
    student_t_noise,
    tanh_drift,
    trajectory_to_csv,
    zero_drift,
)


class TestDrift:
    def test_zero_everywhere(self):
        d = zero_drift(2)
        assert np.array_equal(drift_eval(d, np.array([3.0, -1.0])), np.zeros(2))

    def test_tanh_at_origin(self):
        d = tanh_drift(2.0, 0.0, 1)
        assert drift_eval(d, np.array([0.0]))[0] == 0.0

    def test_linear_scalar_multiply(self):
        d = linear_drift(0.5)
        assert drift_eval(d, np.array([3.0]))[0] == pytest.approx(1.5, abs=1e-15)

    def test_linear_requires_contraction(self):
        with pytest.raises(ParameterError):
            linear_drift(np.array([[1.0, 0.0], [0.0, 0.4]]))

    def test_declared_constants(self):
        d = tanh_drift(1.5, 0.25, 1)
        assert d.r_f == 0.0
        assert d.C_f == pytest.approx(1.75)
        assert sine_drift(2.0, 4).C_f == pytest.approx(4.0)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            drift_eval(zero_drift(2), np.array([1.0]))


class TestNoise:
    def test_gaussian_density_at_origin(self):
        n = gaussian_noise(1.0, 1)
        assert noise_density(n, np.array([0.0])) == pytest.approx(
            1.0 / math.sqrt(2 * math.pi), rel=1e-12
        )

    def test_laplace_density_at_origin(self):
        assert noise_density(laplace_noise(1.0, 1), np.array([0.0])) == pytest.approx(0.5)

    def test_tail_decay_monotone(self):
        for noise in (gaussian_noise(1.0, 1), laplace_noise(1.0, 1), student_t_noise(5, 3, 1)):
            vals = noise.density(np.linspace(0, 30, 40)[:, None])
            assert np.all(np.diff(vals) <= 0)
            assert vals[-1] < 1e-4

    def test_densities_integrate_to_one(self):
        grid = np.linspace(-60, 60, 240_001)[:, None]
        for noise in (gaussian_noise(2.0, 1), laplace_noise(0.7, 1), student_t_noise(6, 3, 1)):
            mass = np.trapezoid(noise.density(grid), grid[:, 0])
            assert abs(mass - 1.0) < 1e-4

    def test_draw_mean_near_zero(self):
        rng = np.random.default_rng(5)
        for noise in (gaussian_noise(1.0, 2), laplace_noise(1.0, 2), student_t_noise(8, 4, 2)):
            draws = noise.draw(rng, 10**6)
            sd = math.sqrt(noise.covariance[0, 0])
            assert np.all(np.abs(draws.mean(axis=0)) < 4 * sd / 10**3 * 10)

    def test_student_requirements(self):
        with pytest.raises(ParameterError):
            student_t_noise(2.0)
        with pytest.raises(ParameterError):
            student_t_noise(8.0, moment_order=9.0)
        assert student_t_noise(8.0).moment_order == pytest.approx(5.0)

    def test_tail_classes(self):
        assert gaussian_noise(1.0, 1).tail_class == "gaussian"
        assert laplace_noise(2.0, 1).tail_exponent == 2.0
        assert student_t_noise(8, 4, 1).tail_exponent == 9.0


class TestSimulate:
    def test_iid_reduction_variance(self):
        traj = simulate(zero_drift(1), gaussian_noise(1.0, 1), 10**5, seed=11)
        assert 0.97 <= traj.states[1:].var() <= 1.03

    def test_deterministic_recursion_zero_noise(self):
        drift = linear_drift(0.5)
        eps = np.zeros((12, 1))
        states, bad = _core.simulate_states(*drift._core_args(), np.array([1.0]), eps)
        assert bad == 0
        np.testing.assert_allclose(states[:, 0], 0.5 ** np.arange(13), rtol=1e-15)

    def test_linear_gaussian_longrun_variance(self):
        traj = simulate(linear_drift(0.5), gaussian_noise(1.0, 1), 10**6, seed=21)
        target = 1.0 / (1.0 - 0.25)
        assert abs(traj.states[1:].var() - target) / target < 0.02

    def test_noise_reconstruction_bit_exact(self, tanh_gauss_traj):
        # X_i must equal fl(f(X_{i-1}) + eps_i): one rounding of the same operands
        t = tanh_gauss_traj
        f_prev = drift_eval(t.drift, t.states[:-1])
        assert np.array_equal(t.states[1:], f_prev + t.noises)

    def test_noise_reconstruction_bit_exact_2d_linear(self):
        drift = linear_drift(np.array([[0.4, 0.2], [-0.1, 0.3]]))
        t = simulate(drift, gaussian_noise(1.0, 2), 2000, seed=77, keep_noise=True)
        f_prev = drift_eval(drift, t.states[:-1])
        assert np.array_equal(t.states[1:], f_prev + t.noises)

    def test_seed_determinism_and_stream_independence(self):
        a = simulate(zero_drift(1), gaussian_noise(1.0, 1), 100, seed=9)
        b = simulate(zero_drift(1), gaussian_noise(1.0, 1), 100, seed=9)
        c = simulate(zero_drift(1), gaussian_noise(1.0, 1), 100, seed=9, stream=1)
        assert np.array_equal(a.states, b.states)
        assert not np.array_equal(a.states, c.states)

    def test_overflow_names_step(self):
        unstable = DriftSpec("linear_stable", 1, r_f=1.5, C_f=0.0, gradient_bound=1.5,
                             theta=np.array([[1.5]]))
        with pytest.raises(NumericalOverflowError) as exc:
            simulate(unstable, gaussian_noise(1.0, 1), 5000, x0=np.array([1.0]), seed=1)
        assert exc.value.step is not None and exc.value.step > 0

    def test_preconditions(self):
        with pytest.raises(ParameterError):
            simulate(zero_drift(1), gaussian_noise(1.0, 1), 0, seed=1)
        with pytest.raises(DimensionMismatchError):
            simulate(zero_drift(2), gaussian_noise(1.0, 1), 5, seed=1)


class TestStability:
    def test_gaussian_fourth_moment(self):
        traj = simulate(zero_drift(1), gaussian_noise(1.0, 1), 10**5, seed=31)
        rep = stability_diagnostics(traj, 4)
        assert abs(rep.sum_norm_m_over_n - 3.0) / 3.0 < 0.1

    def test_constant_trajectory(self):
        traj = Trajectory(np.zeros((11, 1)), None, 0, 0, zero_drift(1),
                          gaussian_noise(1.0, 1), "test")
        rep = stability_diagnostics(traj, 2, exponent_a=1.0)
        assert rep.sum_norm_m_over_n == 0.0
        assert rep.sup_norm_scaled == 0.0
        assert rep.exp_moment_sum_over_n == 1.0

    def test_exp_moment_average_bounded_across_n(self):
        vals = []
        for n in (10**3, 10**4, 10**5):
            traj = simulate(linear_drift(0.5), gaussian_noise(1.0, 1), n, seed=41)
            rep = stability_diagnostics(traj, 4, exponent_a=0.25, squared_exponent=True)
            assert not rep.overflowed
            vals.append(rep.exp_moment_sum_over_n)
        assert vals[1] <= vals[0] * 1.2 and vals[2] <= vals[1] * 1.2

    def test_exp_overflow_saturates(self):
        traj = simulate(linear_drift(0.5), gaussian_noise(1.0, 1), 1000, seed=3)
        rep = stability_diagnostics(traj, 2, exponent_a=1e6, squared_exponent=True)
        assert rep.overflowed
        assert rep.exp_moment_sum_over_n == math.inf

    def test_sup_noise_requires_retention(self, tanh_gauss_traj):
        rep = stability_diagnostics(tanh_gauss_traj, 3)
        assert rep.sup_noise is not None and rep.sup_noise > 0


class TestCrossing:
    def test_zero_drift_always_inside(self):
        traj = simulate(zero_drift(1), gaussian_noise(1.0, 1), 500, seed=5)
        assert crossing_frequency(traj, zero_drift(1), 0.01) == 1.0

    def test_bounded_drift_inside_large_ball(self):
        drift = tanh_drift(1.0, 0.0, 1)
        traj = simulate(drift, gaussian_noise(1.0, 1), 500, seed=6)
        assert crossing_frequency(traj, drift, 2.0) == 1.0

    def test_pathwise_markov_inequality(self):
        drift = linear_drift(0.99)
        traj = simulate(drift, gaussian_noise(1.0, 1), 1000, seed=7)
        R = 0.01
        freq = crossing_frequency(traj, drift, R)
        f_norms = np.linalg.norm(drift_eval(drift, traj.states[:-1]), axis=1)
        assert 0.0 <= freq <= 1.0
        assert freq >= 1.0 - f_norms.mean() / R


class TestContractionAudit:
    def test_linear_passes(self):
        assert check_A1(linear_drift(0.5), 1000, 10.0, seed=1).passed

    def test_tanh_passes(self):
        assert check_A1(tanh_drift(1.3, 0.5, 2), 1000, 10.0, seed=2).passed

    def test_underdeclared_bound_flagged(self):
        bad = DriftSpec("linear_stable", 1, r_f=0.9, C_f=0.0, gradient_bound=1.2,
                        theta=np.array([[1.2]]))
        rep = check_A1(bad, 1000, 10.0, seed=3)
        assert not rep.passed and rep.violation_count > 0 and rep.max_slack > 0


class TestExport:
    def test_trajectory_csv_roundtrip(self, tmp_path):
        traj = simulate(zero_drift(2), gaussian_noise(1.0, 2), 50, seed=13, keep_noise=True)
        path = tmp_path / "traj.csv"
        trajectory_to_csv(traj, path)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("# rng = philox4x64")
        assert lines[1] == "step,x_1,x_2,eps_1,eps_2"
        data = np.genfromtxt(path, delimiter=",", skip_header=2)
        np.testing.assert_allclose(data[1:, 1:3], traj.states[1:], rtol=1e-15)
        np.testing.assert_allclose(data[1:, 3:], traj.noises, rtol=1e-15)
