import numpy as np
import pytest

from rilqr.bench import bench_qr_update, fit_exponent, time_rilqr_iterations
from rilqr.experiments import ExperimentConfig


def test_fit_exponent_recovers_power_law():
    s = np.array([10, 20, 40, 80])
    assert fit_exponent(s, 3e-7 * s ** 2.0) == pytest.approx(2.0)


def test_bench_small_sizes():
    res = bench_qr_update((8, 16), oversampling=4, reps=2, work=2e4, call_updates=20)
    assert res.sizes == (8, 16)
    assert [r[1] for r in res.rows()] == [12, 20]
    assert all(t > 0 for t in res.stream_seconds + res.call_seconds)
    assert np.isfinite(res.stream_alpha) and np.isfinite(res.call_alpha)


def test_iteration_timer_small():
    cfg = ExperimentConfig(t_explore=0, t_exploit=5)
    out = time_rilqr_iterations(cfg, n_t_values=(500, 1_000), steps=5, reps=1)
    assert set(out) == {500, 1_000} and all(v > 0 for v in out.values())
