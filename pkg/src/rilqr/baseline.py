"""Explore/exploit comparator: ordinary MOESP identification then model-based LQR."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from rilqr.errors import DimensionError, ExcitationError
from rilqr.hankel import SignalRecord, build_hankel
from rilqr.plant import (CostLedger, LtiSystem, TrajectoryLog, TrajectoryRecorder,
                         realized_cost, step)
from rilqr.subspace import GainMatrix, LqrWeights, batch_predictors, lqr_gain

EXCITATION_TOL = 1e-12
ORDER_TOL = 1e-12


@dataclass
class MoespEstimate:
    """Identified ``(a_hat, b_hat, c_hat)`` in the basis chosen by the SVD.

    ``a_meas``/``b_meas`` express the same model in the measured-state
    basis (``c = I``), which is what a state-feedback gain acts on.
    """

    a_hat: np.ndarray
    b_hat: np.ndarray
    c_hat: np.ndarray
    x0_hat: np.ndarray
    singular_values: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def a_meas(self) -> np.ndarray:
        return np.linalg.solve(self.c_hat.T, (self.c_hat @ self.a_hat).T).T

    @property
    def b_meas(self) -> np.ndarray:
        return self.c_hat @ self.b_hat

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.a_hat)


def _free_and_forced(a, c, inputs, length):
    """Regressors of ``y(t) = c a^t x0 + sum_j c a^(t-1-j) b u(j)``, linear in (x0, vec b)."""
    n = a.shape[0]
    m = inputs.shape[1]
    p = c.shape[0]
    cols = []
    # free response to each unit initial state
    for i in range(n):
        x = np.zeros(n)
        x[i] = 1.0
        out = np.empty((length, p))
        for t in range(length):
            out[t] = c @ x
            x = a @ x
        cols.append(out.ravel())
    # forced response to each unit entry of b
    for i in range(n):
        for j in range(m):
            x = np.zeros(n)
            out = np.empty((length, p))
            for t in range(length):
                out[t] = c @ x
                x = a @ x
                x[i] += inputs[t, j]
            cols.append(out.ravel())
    return np.column_stack(cols)


def moesp_identify(record: SignalRecord, k: int, order: int) -> MoespEstimate:
    """Ordinary MOESP with zero feedthrough.

    Parameters
    ----------
    record : SignalRecord
        Open-loop input/output samples.
    k : int
        Block rows of the input and output Hankel matrices.
    order : int
        Model order.

    Raises
    ------
    ExcitationError
        If the input Hankel matrix is zero or rank deficient, or the
        order exceeds the numerical rank of the projected outputs.
    """
    u, y = record.inputs, record.outputs
    nt, m = u.shape
    p = y.shape[1]
    if k < 2 or order < 1 or order >= k * p + 1:
        raise DimensionError(f"need k >= 2 and 1 <= order <= k*p, got k={k}, order={order}")
    if nt < 2 * k + order:
        raise DimensionError(f"record of {nt} samples too short for k={k}, order={order}")
    j = nt - k + 1
    uh = build_hankel(u, 0, k, j)
    yh = build_hankel(y, 0, k, j)
    su_ = np.linalg.svd(uh, compute_uv=False)
    if su_[0] == 0.0 or su_[-1] <= EXCITATION_TOL * su_[0]:
        raise ExcitationError("input Hankel matrix is rank deficient; identified model would be unreliable")
    lq = np.linalg.qr(np.vstack([uh, yh]).T, mode="r").T
    l22 = lq[k * m:, k * m:]
    uo, sv, _ = np.linalg.svd(l22)
    if sv[order - 1] <= ORDER_TOL * sv[0]:
        raise ExcitationError(f"order {order} exceeds numerical rank of the projected outputs")
    gamma = uo[:, :order] * np.sqrt(sv[:order])
    c_hat = gamma[:p]
    a_hat = np.linalg.lstsq(gamma[:-p], gamma[p:], rcond=None)[0]
    phi = _free_and_forced(a_hat, c_hat, u, nt)
    theta = np.linalg.lstsq(phi, y.ravel(), rcond=None)[0]
    x0_hat = theta[:order]
    b_hat = theta[order:].reshape(order, m)
    diag = {"input_condition": float(su_[0] / su_[-1]),
            "order_gap": float(sv[order - 1] / sv[order]) if sv.size > order and sv[order] > 0 else float("inf")}
    return MoespEstimate(a_hat, b_hat, c_hat, x0_hat, sv, diag)


@dataclass
class MlqrRun:
    """Outcome of one explore/exploit run."""

    ledger: CostLedger
    log: TrajectoryLog
    estimate: MoespEstimate
    gain: GainMatrix
    snr: float


def exploration_snr(sys: LtiSystem, inputs) -> float:
    """Variance of the noise-free input-driven output over ``trace(eta) / n``."""
    x = np.zeros(sys.n)
    ys = []
    for u in np.asarray(inputs).reshape(-1, sys.m):
        ys.append(x)
        x = sys.a @ x + sys.b @ u
    noise = np.trace(sys.noise_cov) / sys.n
    var = float(np.var(np.array(ys)))
    return var / noise if noise > 0 else float("inf")


def run_mlqr(actual: LtiSystem, weights: LqrWeights, x0, explore_var: float, t_explore: int,
             t_exploit: int, plant_rng, explore_rng, k: int | None = None) -> MlqrRun:
    """Excite the plant open loop, identify it, then regulate with the identified model.

    Parameters
    ----------
    actual : LtiSystem
    weights : LqrWeights
    x0 : array_like
        Initial state.
    explore_var : float
        Variance of the white exploration input.
    t_explore, t_exploit : int
        Phase lengths.
    plant_rng, explore_rng : Generator
        Process-noise and exploration-input streams.
    k : int, optional
        MOESP block rows; defaults to ``weights.kp + 1``.

    Raises
    ------
    ExcitationError
        From identification.
    DivergenceError
        If the plant state blows up.
    """
    if explore_var < 0:
        raise ValueError(f"exploration variance must be non-negative, got {explore_var}")
    n, m = actual.n, actual.m
    k = weights.kp + 1 if k is None else k
    x = np.asarray(x0, dtype=float).reshape(n).copy()
    rec = TrajectoryRecorder(x)
    us = np.sqrt(explore_var) * explore_rng.standard_normal((t_explore, m))
    for t in range(t_explore):
        x_next, _, e = step(actual, x, us[t], plant_rng, t)
        rec.append(us[t], x_next, e)
        x = x_next
    explore_log = rec.log(m)
    record = SignalRecord(explore_log.inputs, explore_log.states[:t_explore])
    est = moesp_identify(record, k, n)
    gain = lqr_gain(batch_predictors(est.a_meas, est.b_meas, weights.kp), weights)
    kf = gain.first_block
    for t in range(t_explore, t_explore + t_exploit):
        u = -kf @ x
        x_next, _, e = step(actual, x, u, plant_rng, t)
        rec.append(u, x_next, e)
        x = x_next
    log = rec.log(m)
    ledger = realized_cost(log, weights.q, weights.r, t_explore)
    return MlqrRun(ledger, log, est, gain, exploration_snr(actual, us))
