"""Recursive Nadaraya-Watson estimator: contracts, oracle equivalence, invariants."""

import numpy as np
import pytest

from arkde.errors import ContractViolationError, ParameterError, ResourceLimitError
from arkde.kernels import make_kernel
from arkde.model import gaussian_noise, linear_drift, simulate, zero_drift
from arkde.regression import (
    RegressionEstimator,
    evaluate_brute_force,
    new_regression,
    sup_error_on_ball,
)

from conftest import brute_nw


def _filled_estimator(n, d=1, beta=0.2, seed=101):
    k = make_kernel("epanechnikov", d)
    traj = simulate(
        zero_drift(d) if d > 1 else linear_drift(0.5),
        gaussian_noise(1.0, d),
        n + 1,
        seed=seed,
    )
    est = RegressionEstimator(k, beta, d)
    est.bulk_update(traj.states[1 : n + 1], traj.states[2 : n + 2])
    return est, traj


class TestConstruction:
    def test_empty_estimator_returns_zero(self, epan1):
        est = new_regression(epan1, 0.2, 1)
        assert np.array_equal(est.evaluate(np.array([3.7])), np.zeros(1))
        assert est.denominator(np.array([0.0])) == 0.0

    def test_beta_range_rejected(self, epan1, epan2):
        with pytest.raises(ParameterError):
            new_regression(epan1, 1.5, 1)
        assert new_regression(epan2, 0.1, 2).beta == 0.1

    def test_kernel_dimension_must_match(self, epan2):
        with pytest.raises(Exception):
            new_regression(epan2, 0.2, 1)


class TestUpdateContract:
    def test_first_insert_weight_one(self, epan1):
        est = new_regression(epan1, 0.2, 1)
        est.update(1, np.array([0.0]), np.array([1.0]))
        assert est.count == 1
        assert est.weights[0] == 1.0

    def test_weight_power_of_index(self):
        k = make_kernel("epanechnikov", 1)
        est = new_regression(k, 0.25, 1)  # beta d = 0.25
        for i in range(1, 17):
            est.update(i, np.array([float(i)]), np.array([0.0]))
        assert est.weights[15] == pytest.approx(2.0, abs=1e-14)  # 16 ** 0.25

    def test_out_of_order_rejected(self, epan1):
        est = new_regression(epan1, 0.2, 1)
        est.update(1, np.array([0.0]), np.array([1.0]))
        est.update(2, np.array([0.2]), np.array([0.5]))
        with pytest.raises(ContractViolationError):
            est.update(5, np.array([0.4]), np.array([0.1]))

    def test_radii_monotone(self, epan1):
        est = new_regression(epan1, 0.3, 1)
        radii = [est.support_radius_of(i) for i in range(1, 50)]
        assert all(b <= a for a, b in zip(radii, radii[1:]))


class TestEvaluate:
    def test_single_sample_exact_response(self, epan1):
        est = new_regression(epan1, 0.2, 1)
        est.update(1, np.array([0.7]), np.array([-2.5]))
        np.testing.assert_array_equal(est.evaluate(np.array([0.7])), np.array([-2.5]))

    def test_far_query_zero_fallback(self, epan1):
        est = new_regression(epan1, 0.2, 1)
        est.update(1, np.array([0.0]), np.array([5.0]))
        assert np.array_equal(est.evaluate(np.array([10.0])), np.zeros(1))

    def test_denominator_kernel_at_zero(self, epan1):
        est = new_regression(epan1, 0.2, 1)
        est.update(1, np.array([1.0]), np.array([0.0]))
        assert est.denominator(np.array([1.0])) == pytest.approx(0.75, abs=1e-15)

    def test_indexed_matches_double_loop(self):
        est, _ = _filled_estimator(800)
        rng = np.random.default_rng(7)
        queries = rng.uniform(-3, 3, size=(60, 1))
        for x in queries:
            ref, ref_den = brute_nw(
                est.predictors, est.responses, est.scales, est.weights, est.kernel, x
            )
            got = est.evaluate(x)
            if ref_den > 0:
                np.testing.assert_allclose(got, ref, rtol=1e-12, atol=1e-15)
            else:
                assert np.array_equal(got, np.zeros(1))

    def test_indexed_matches_double_loop_2d(self):
        est, _ = _filled_estimator(600, d=2, beta=0.2, seed=5)
        rng = np.random.default_rng(8)
        for x in rng.uniform(-2, 2, size=(40, 2)):
            ref, ref_den = brute_nw(
                est.predictors, est.responses, est.scales, est.weights, est.kernel, x
            )
            got = est.evaluate(x)
            if ref_den > 0:
                np.testing.assert_allclose(got, ref, rtol=1e-12, atol=1e-15)

    def test_batch_matches_scalar_path(self):
        est, _ = _filled_estimator(500)
        rng = np.random.default_rng(9)
        xs = rng.uniform(-3, 3, size=(100, 1))
        vals, dens = est.evaluate_batch(xs)
        for i, x in enumerate(xs):
            np.testing.assert_allclose(vals[i], est.evaluate(x), rtol=1e-12, atol=1e-15)
            assert dens[i] == pytest.approx(est.denominator(x), rel=1e-12, abs=1e-15)

    def test_package_brute_force_agrees(self):
        est, _ = _filled_estimator(300)
        x = np.array([0.4])
        ref, _ = brute_nw(est.predictors, est.responses, est.scales, est.weights,
                          est.kernel, x)
        got, _ = evaluate_brute_force(est, x)
        np.testing.assert_allclose(got, ref, rtol=1e-13)


class TestInvariants:
    def test_convex_hull_of_weighted_responses(self):
        est, _ = _filled_estimator(1000)
        rng = np.random.default_rng(11)
        for x in rng.uniform(-3, 3, size=(200, 1)):
            den = est.denominator(x)
            val = est.evaluate(x)
            if den == 0.0:
                assert np.array_equal(val, np.zeros(1))
                continue
            u = (est.predictors - x) * est.scales[:, None]
            active = (np.abs(u) < 1.0).all(axis=1)
            resp = est.responses[active]
            assert resp.size > 0
            assert resp.min() - 1e-12 <= val[0] <= resp.max() + 1e-12

    def test_fallback_iff_zero_denominator(self):
        est, _ = _filled_estimator(200)
        rng = np.random.default_rng(12)
        for x in rng.uniform(-12, 12, size=(300, 1)):
            den = est.denominator(x)
            val = est.evaluate(x)
            if den == 0.0:
                assert np.array_equal(val, np.zeros(1))
            else:
                u = (est.predictors - x) * est.scales[:, None]
                assert (np.abs(u) < 1.0).any()


class TestStationaryDensityEstimate:
    def test_denominator_over_n_estimates_state_density(self):
        k = make_kernel("epanechnikov", 1)
        traj = simulate(zero_drift(1), gaussian_noise(1.0, 1), 10**5, seed=17)
        est = RegressionEstimator(k, 0.3, 1)
        est.bulk_update(traj.states[1:-1], traj.states[2:])
        phi0 = 1.0 / np.sqrt(2 * np.pi)
        h_over_n = est.denominator(np.array([0.0])) / (est.count + 1)
        assert abs(h_over_n - phi0) / phi0 < 0.1


class TestSupErrorOnBall:
    def test_empty_estimator_zero_drift(self, epan1):
        est = new_regression(epan1, 0.2, 1)
        rep = sup_error_on_ball(est, zero_drift(1), 1.0, 0.05)
        assert rep.sup_error == 0.0

    def test_empty_estimator_linear_drift_edge_value(self, epan1):
        est = new_regression(epan1, 0.2, 1)
        rep = sup_error_on_ball(est, linear_drift(0.5), 1.0, 0.05)
        assert rep.sup_error == pytest.approx(0.5, abs=1e-12)

    def test_grid_node_limit(self, epan1):
        est = new_regression(epan1, 0.2, 1)
        with pytest.raises(ResourceLimitError):
            sup_error_on_ball(est, zero_drift(1), 1000.0, 1e-5)

    def test_dimension_limit(self):
        k = make_kernel("epanechnikov", 3)
        est = new_regression(k, 0.2, 3)
        with pytest.raises(ParameterError):
            sup_error_on_ball(est, zero_drift(3), 1.0, 0.1)


class TestPersistence:
    def test_snapshot_roundtrip(self, tmp_path):
        est, _ = _filled_estimator(400)
        path = tmp_path / "reg.npz"
        est.save(path)
        loaded = RegressionEstimator.load(path)
        assert loaded.count == est.count
        assert loaded.beta == est.beta
        rng = np.random.default_rng(13)
        for x in rng.uniform(-2, 2, size=(50, 1)):
            np.testing.assert_array_equal(loaded.evaluate(x), est.evaluate(x))
