"""Linear plants with process noise, trajectory logs and realized costs."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from rilqr import _kernels
from rilqr.errors import DimensionError, DivergenceError, NonFiniteError
from rilqr.hankel import SignalRecord

DIVERGENCE_LIMIT = 1e9

ACTUAL_A = np.array([[1.0, 0.40], [0.005, -0.99]])
ACTUAL_B = np.array([[0.2], [0.5]])
SIMILAR_A = np.array([[0.80, 0.30], [0.105, -0.89]])
SIMILAR_B = np.array([[0.21], [0.6]])


@dataclass
class LtiSystem:
    """``x(t+1) = a x(t) + b u(t) + e(t)`` with ``e ~ N(0, noise_cov)`` and ``y = x``."""

    a: np.ndarray
    b: np.ndarray
    noise_cov: np.ndarray | float = 0.0
    label: str = "actual"
    noise_factor: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.a = np.atleast_2d(np.asarray(self.a, dtype=float))
        n = self.a.shape[0]
        if self.a.shape != (n, n):
            raise DimensionError(f"a must be square, got {self.a.shape}")
        self.b = np.asarray(self.b, dtype=float).reshape(n, -1)
        eta = np.asarray(self.noise_cov, dtype=float)
        eta = eta * np.eye(n) if eta.ndim == 0 else eta
        if eta.shape != (n, n):
            raise DimensionError(f"noise covariance must be {n} x {n}, got {eta.shape}")
        if not np.allclose(eta, eta.T):
            raise ValueError("noise covariance must be symmetric")
        w, v = np.linalg.eigh(eta)
        if w.min() < -1e-12 * max(1.0, abs(w).max()):
            raise ValueError(f"noise covariance must be PSD, smallest eigenvalue {w.min():.3e}")
        self.noise_cov = eta
        self.noise_factor = v * np.sqrt(np.clip(w, 0.0, None))
        if not (np.all(np.isfinite(self.a)) and np.all(np.isfinite(self.b))):
            raise NonFiniteError("system matrices must be finite")

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def m(self) -> int:
        return self.b.shape[1]

    @property
    def c(self) -> np.ndarray:
        return np.eye(self.n)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.a)

    def draw_noise(self, rng, steps: int | None = None) -> np.ndarray:
        """Noise samples; one standard-normal draw per state entry regardless of ``noise_cov``."""
        z = rng.standard_normal(self.n if steps is None else (steps, self.n))
        return z @ self.noise_factor.T


def actual_plant(noise_cov=0.0) -> LtiSystem:
    return LtiSystem(ACTUAL_A, ACTUAL_B, noise_cov, "actual")


def similar_plant(noise_cov=0.0) -> LtiSystem:
    return LtiSystem(SIMILAR_A, SIMILAR_B, noise_cov, "similar")


def step(sys: LtiSystem, x, u, rng, t: int = 0):
    """Advance one sample.

    Returns
    -------
    x_next : ndarray
    y : ndarray
        Measured output at ``t + 1`` (equal to ``x_next``).
    noise : ndarray
        The process-noise draw.

    Raises
    ------
    DivergenceError
        If ``|x_next|`` exceeds the divergence limit.
    """
    x = np.asarray(x, dtype=float).reshape(sys.n)
    u = np.asarray(u, dtype=float).reshape(sys.m)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u))):
        raise NonFiniteError("state and input must be finite")
    e = sys.draw_noise(rng)
    x_next = sys.a @ x + sys.b @ u + e
    nrm = float(np.linalg.norm(x_next))
    if not nrm <= DIVERGENCE_LIMIT:
        raise DivergenceError(t + 1, nrm)
    return x_next, x_next.copy(), e


@dataclass
class TrajectoryLog:
    """States ``x(0..T)``, inputs ``u(0..T-1)`` and the noise that produced them."""

    states: np.ndarray
    inputs: np.ndarray
    noise: np.ndarray

    @property
    def length(self) -> int:
        return self.inputs.shape[0]

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.states.shape[0])

    @property
    def outputs(self) -> np.ndarray:
        return self.states

    def stage_costs(self, q, r) -> np.ndarray:
        x = self.states[:self.length]
        u = self.inputs
        return np.einsum("ti,ij,tj->t", x, np.atleast_2d(q), x) + np.einsum("ti,ij,tj->t", u, np.atleast_2d(r), u)

    def residual(self, sys: LtiSystem) -> float:
        """Largest deviation from the state recursion given the logged noise."""
        pred = self.states[:-1] @ sys.a.T + self.inputs @ sys.b.T + self.noise
        return float(np.abs(pred - self.states[1:]).max()) if self.length else 0.0

    def to_csv(self, path, q, r) -> None:
        """Write ``t,x1..xn,u1..um,cost_stage``, one row per applied input."""
        n, m = self.states.shape[1], self.inputs.shape[1]
        costs = self.stage_costs(q, r)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"x{i + 1}" for i in range(n)] + [f"u{i + 1}" for i in range(m)] + ["cost_stage"])
            for t in range(self.length):
                w.writerow([t] + [repr(float(v)) for v in self.states[t]]
                           + [repr(float(v)) for v in self.inputs[t]] + [repr(float(costs[t]))])


class TrajectoryRecorder:
    """Incremental builder of a :class:`TrajectoryLog`."""

    def __init__(self, x0):
        self._x = [np.asarray(x0, dtype=float).copy()]
        self._u = []
        self._e = []

    def append(self, u, x_next, e):
        self._u.append(np.asarray(u, dtype=float).copy())
        self._x.append(np.asarray(x_next, dtype=float).copy())
        self._e.append(np.asarray(e, dtype=float).copy())

    def log(self, m: int) -> TrajectoryLog:
        n = self._x[0].shape[0]
        return TrajectoryLog(np.array(self._x), np.array(self._u).reshape(-1, m),
                             np.array(self._e).reshape(-1, n))


@dataclass
class CostLedger:
    """Realized stage costs split at the end of the exploration phase."""

    stage_costs: np.ndarray
    explore_steps: int = 0

    @property
    def j_explore(self) -> float:
        return float(np.sum(self.stage_costs[:self.explore_steps]))

    @property
    def j_exploit(self) -> float:
        return float(np.sum(self.stage_costs[self.explore_steps:]))

    @property
    def j_total(self) -> float:
        return self.j_explore + self.j_exploit

    def to_dict(self) -> dict:
        return {"j_explore": self.j_explore, "j_exploit": self.j_exploit, "j_total": self.j_total}


def realized_cost(log: TrajectoryLog, q, r, explore_steps: int = 0) -> CostLedger:
    """Sum ``x'Qx + u'Ru`` over the logged inputs; no terminal term."""
    if not 0 <= explore_steps <= log.length:
        raise ValueError(f"phase boundary {explore_steps} outside [0, {log.length}]")
    return CostLedger(log.stage_costs(q, r), explore_steps)


def simulate_inputs(sys: LtiSystem, x0, inputs, rng) -> TrajectoryLog:
    """Open-loop response to a given input sequence (compiled loop)."""
    u = np.ascontiguousarray(np.asarray(inputs, dtype=float).reshape(-1, sys.m))
    if not np.all(np.isfinite(u)):
        raise NonFiniteError("inputs must be finite")
    e = np.ascontiguousarray(sys.draw_noise(rng, u.shape[0]))
    x, t_fail = _kernels.simulate_open_loop(sys.a, sys.b, np.asarray(x0, dtype=float).reshape(sys.n),
                                            u, e, DIVERGENCE_LIMIT)
    if t_fail >= 0:
        raise DivergenceError(t_fail, np.linalg.norm(x[t_fail]))
    return TrajectoryLog(x, u, e)


def generate_similar_record(sys: LtiSystem, n_t: int, input_var: float, rng, x0=None):
    """Open-loop record driven by iid ``N(0, input_var)`` inputs.

    Samples ``(u(i), x(i))`` for ``i = 0..n_t-1``. Inputs are drawn
    before the noise, both from ``rng``.

    Returns
    -------
    record : SignalRecord
    next_state : ndarray
        ``x(n_t)``, the state that would follow the record.
    """
    if n_t < 1:
        raise ValueError(f"record length must be positive, got {n_t}")
    if input_var < 0:
        raise ValueError(f"input variance must be non-negative, got {input_var}")
    u = np.sqrt(input_var) * rng.standard_normal((n_t, sys.m))
    x0 = np.zeros(sys.n) if x0 is None else x0
    log = simulate_inputs(sys, x0, u, rng)
    return SignalRecord(log.inputs, log.states[:-1]), log.states[-1].copy()
