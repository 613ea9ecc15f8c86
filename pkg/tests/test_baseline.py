import numpy as np
import pytest

from rilqr.baseline import exploration_snr, moesp_identify, run_mlqr
from rilqr.errors import DimensionError, ExcitationError
from rilqr.hankel import SignalRecord
from rilqr.plant import (ACTUAL_A, ACTUAL_B, LtiSystem, actual_plant, generate_similar_record,
                         step)
from rilqr.subspace import batch_predictors, lqr_gain


@pytest.fixture(scope="module")
def long_clean_record():
    rec, _ = generate_similar_record(actual_plant(0.0), 10_000, 1.0, np.random.default_rng(3))
    return rec


class TestMoesp:
    def test_noiseless_eigenvalues(self, long_clean_record):
        est = moesp_identify(long_clean_record, 5, 2)
        np.testing.assert_allclose(np.sort(est.eigenvalues().real), np.sort(np.linalg.eigvals(ACTUAL_A)),
                                   atol=1e-6)

    def test_measured_basis_recovers_matrices(self, long_clean_record):
        est = moesp_identify(long_clean_record, 5, 2)
        np.testing.assert_allclose(est.a_meas, ACTUAL_A, atol=1e-8)
        np.testing.assert_allclose(est.b_meas, ACTUAL_B, atol=1e-8)
        np.testing.assert_allclose(est.c_hat @ est.x0_hat, long_clean_record.outputs[0], atol=1e-8)

    def test_similarity_is_the_only_freedom(self, long_clean_record):
        # the identified model reproduces the record from its own initial state
        est = moesp_identify(long_clean_record, 5, 2)
        x = est.x0_hat
        for t in range(200):
            np.testing.assert_allclose(est.c_hat @ x, long_clean_record.outputs[t], atol=1e-7)
            x = est.a_hat @ x + est.b_hat @ long_clean_record.inputs[t]

    def test_noisy_convergence(self):
        rec, _ = generate_similar_record(actual_plant(1e-4), 10_000, 1.0, np.random.default_rng(8))
        est = moesp_identify(rec, 5, 2)
        np.testing.assert_allclose(np.sort(est.eigenvalues().real), [-0.991, 1.001], atol=1e-2)

    def test_zero_input_rejected(self):
        rec = SignalRecord(np.zeros((60, 1)), np.random.default_rng(0).standard_normal((60, 2)))
        with pytest.raises(ExcitationError):
            moesp_identify(rec, 5, 2)

    def test_order_above_rank_rejected(self):
        # a first-order response embedded in two outputs cannot support order 2
        r = np.random.default_rng(1)
        u = r.standard_normal(200)
        x = np.zeros(201)
        for t in range(200):
            x[t + 1] = 0.5 * x[t] + u[t]
        rec = SignalRecord(u[:, None], np.column_stack([x[:200], 2 * x[:200]]))
        with pytest.raises(ExcitationError):
            moesp_identify(rec, 5, 2)

    def test_too_short(self):
        rec = SignalRecord(np.ones((8, 1)), np.ones((8, 2)))
        with pytest.raises(DimensionError):
            moesp_identify(rec, 5, 2)


class TestRunMlqr:
    def test_zero_excitation(self, weights):
        with pytest.raises(ExcitationError):
            run_mlqr(actual_plant(0.01), weights, [1.0, 0.0], 0.0, 50, 150,
                     np.random.default_rng(0), np.random.default_rng(1))

    def test_noiseless_matches_true_model_controller(self, weights):
        x0 = np.array([1.0, 1.0]) / np.sqrt(2)
        plant = actual_plant(0.0)
        run = run_mlqr(plant, weights, x0, 1.0, 50, 150, np.random.default_rng(0), np.random.default_rng(1))
        kf = lqr_gain(batch_predictors(ACTUAL_A, ACTUAL_B, 4), weights).first_block
        x = run.log.states[50]
        rng = np.random.default_rng(0)
        for t in range(50, 200):
            u = -kf @ x
            np.testing.assert_allclose(run.log.inputs[t], u, atol=1e-6)
            x, _, _ = step(plant, x, u, rng)
            np.testing.assert_allclose(run.log.states[t + 1], x, atol=1e-6)

    def test_ledger_identity_and_phases(self, weights):
        run = run_mlqr(actual_plant(0.01), weights, [1.0, 0.0], 0.1, 50, 150,
                       np.random.default_rng(2), np.random.default_rng(3))
        led = run.ledger
        assert led.explore_steps == 50 and run.log.length == 200
        assert led.j_total == led.j_explore + led.j_exploit
        assert run.snr > 0

    def test_u_shape_over_exploration_variance(self, weights):
        # too little excitation misidentifies, too much costs in the explore phase
        def mean_total(var):
            vals = []
            for s in range(10):
                try:
                    r = run_mlqr(actual_plant(1e-4), weights, [0.7, 0.7], var, 50, 150,
                                 np.random.default_rng([s, 0]), np.random.default_rng([s, 1]))
                    vals.append(r.ledger.j_total)
                except Exception:
                    pass
            return np.mean(vals)
        high, mid, low = mean_total(1.15), mean_total(1e-3), mean_total(1.1e-10)
        assert high > mid and low > mid


def test_exploration_snr_scales_with_variance():
    sys = LtiSystem(ACTUAL_A, ACTUAL_B, 0.01)
    u = np.random.default_rng(0).standard_normal((50, 1))
    assert exploration_snr(sys, 2 * u) == pytest.approx(4 * exploration_snr(sys, u))
    assert exploration_snr(LtiSystem(ACTUAL_A, ACTUAL_B, 0.0), u) == float("inf")
