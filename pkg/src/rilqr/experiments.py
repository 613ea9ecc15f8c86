"""Experiment configuration, the two learning-control loops, and the cost table."""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from rilqr.baseline import run_mlqr
from rilqr.errors import ModelMismatchWarning, RilqrError
from rilqr.hankel import SignalRecord, UpdateColumnBuilder, assemble_stack
from rilqr.plant import (ACTUAL_A, ACTUAL_B, SIMILAR_A, SIMILAR_B, CostLedger, LtiSystem,
                         TrajectoryLog, TrajectoryRecorder, generate_similar_record,
                         realized_cost, step)
from rilqr.sketch import CompressedStack, SketchConfig, compress_initial, streaming_update
from rilqr.streams import stream
from rilqr.subspace import (GainMatrix, LqrWeights, SubspaceEstimate,
                            estimate_from_factorization, lqr_gain)

DEFAULT_GRID = (1.15, 0.83, 0.08, 1e-3, 3.2e-5, 9.5e-8, 1.1e-10)
STATE_POLICIES = ("current", "stale")
# keys that do not change results and are left out of the run id
_NON_RESULT_KEYS = ("out", "workers")


@dataclass
class ExperimentConfig:
    """Every knob of the similar-data controller and the explore/exploit baseline.

    Matrices are nested lists so the config round-trips through YAML
    and JSON. ``eta`` is either a scalar (times identity) or a matrix;
    ``record_eta`` is the noise of the similar-plant record and follows
    ``eta`` when ``None``.
    """

    a_actual: list = field(default_factory=lambda: ACTUAL_A.tolist())
    b_actual: list = field(default_factory=lambda: ACTUAL_B.tolist())
    a_similar: list = field(default_factory=lambda: SIMILAR_A.tolist())
    b_similar: list = field(default_factory=lambda: SIMILAR_B.tolist())
    kp: int = 4
    q: list = field(default_factory=lambda: np.eye(2).tolist())
    p: list = field(default_factory=lambda: np.eye(2).tolist())
    r: list = field(default_factory=lambda: [[1.0]])
    n_t: int = 100_000
    sigma2_ud: float = 1.0
    sigma2_ue_grid: list = field(default_factory=lambda: list(DEFAULT_GRID))
    case_index: int = 0
    t_explore: int = 50
    t_exploit: int = 150
    eta: float | list = 1e-4
    record_eta: float | list | None = None
    oversampling: int = 10
    gamma: float = 1.0
    pinv_tol: float = 1e-10
    x0: list = field(default_factory=lambda: [1 / math.sqrt(2), 1 / math.sqrt(2)])
    seeds: int = 20
    master_seed: int = 0
    state_policy: str = "current"
    workers: int = 1
    out: str = "results"

    def __post_init__(self):
        self.validate()

    @property
    def t_iter(self) -> int:
        return self.t_explore + self.t_exploit

    @property
    def k(self) -> int:
        return self.kp + 1

    def validate(self) -> None:
        if self.kp < 1 or self.t_explore < 0 or self.t_exploit < 0 or self.seeds < 1:
            raise ValueError("horizons, phase lengths and seed count must be positive")
        if self.sigma2_ud < 0 or any(v < 0 for v in self.sigma2_ue_grid):
            raise ValueError("variances must be non-negative")
        if not self.sigma2_ue_grid:
            raise ValueError("sigma2_ue_grid must not be empty")
        if not 0 <= self.case_index < len(self.sigma2_ue_grid):
            raise ValueError(f"case_index {self.case_index} outside the grid")
        if self.state_policy not in STATE_POLICIES:
            raise ValueError(f"state_policy must be one of {STATE_POLICIES}, got {self.state_policy!r}")
        if self.gamma <= 0 or self.oversampling < 1:
            raise ValueError("gamma must be positive and oversampling >= 1")
        if self.n_t < 2 * self.k + 1:
            raise ValueError(f"n_t = {self.n_t} too short for horizon {self.kp}")

    def actual(self) -> LtiSystem:
        return LtiSystem(self.a_actual, self.b_actual, self.eta, "actual")

    def similar(self) -> LtiSystem:
        eta = self.eta if self.record_eta is None else self.record_eta
        return LtiSystem(self.a_similar, self.b_similar, eta, "similar")

    def weights(self) -> LqrWeights:
        return LqrWeights(self.q, self.p, self.r, self.kp)

    def sketch(self) -> SketchConfig:
        return SketchConfig(self.oversampling, self.master_seed, self.gamma)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def run_id(self) -> str:
        d = {k: v for k, v in self.to_dict().items() if k not in _NON_RESULT_KEYS}
        blob = json.dumps(d, sort_keys=True).encode()
        return f"{hashlib.sha256(blob).hexdigest()[:12]}-s{self.master_seed}"


def parse_override(text: str) -> tuple[str, object]:
    """``key=value`` with the value parsed as YAML (numbers, lists, null)."""
    if "=" not in text:
        raise ValueError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    key = key.strip().replace("-", "_")
    return key, yaml.safe_load(raw)


def load_config(path=None, overrides=()) -> ExperimentConfig:
    """Defaults, then a flat YAML file, then ``key=value`` overrides."""
    data = {}
    if path is not None:
        loaded = yaml.safe_load(Path(path).read_text()) or {}
        if not isinstance(loaded, dict):
            raise ValueError(f"{path}: expected a mapping of key: value")
        data.update({k.replace("-", "_"): v for k, v in loaded.items()})
    for item in overrides:
        key, value = parse_override(item)
        data[key] = value
    return ExperimentConfig.from_dict(data)


@dataclass
class Algorithm1Result:
    """Controller state learned from the similar-plant record alone."""

    record: SignalRecord
    cstack: CompressedStack
    builder: UpdateColumnBuilder
    estimate: SubspaceEstimate
    gain: GainMatrix
    u0: np.ndarray


def similar_record(cfg: ExperimentConfig, replica: int = 0):
    """Record of the similar plant for one replica, plus the state following it."""
    return generate_similar_record(cfg.similar(), cfg.n_t, cfg.sigma2_ud,
                                   stream(cfg.master_seed, "record", replica))


def run_algorithm1(cfg: ExperimentConfig, record: SignalRecord | None = None, *, replica: int = 0,
                   case: int = 0, compressed: CompressedStack | None = None, x0=None) -> Algorithm1Result:
    """Learn the initial controller from historical data.

    Builds the stack, keeps its last column for the online window,
    compresses and factors it, extracts the predictors and evaluates
    the first input at ``x0``. A precomputed ``compressed`` stack (of
    the same record) is copied instead of recompressing.
    """
    if record is None:
        record, _ = similar_record(cfg, replica)
    k = cfg.k
    builder = UpdateColumnBuilder.from_record(record, k)
    online = stream(cfg.master_seed, "online-sketch", replica, case)
    if compressed is None:
        cstack = compress_initial(assemble_stack(record, k), cfg.sketch(),
                                  rng=stream(cfg.master_seed, "sketch", replica), online_rng=online)
    else:
        cstack = compressed.copy()
        cstack.rng = online
    est = estimate_from_factorization(cstack.factorization, cstack.wp_bar, k, record.m, record.n, cfg.pinv_tol)
    gain = lqr_gain(est, cfg.weights())
    x0 = np.asarray(cfg.x0 if x0 is None else x0, dtype=float)
    return Algorithm1Result(record, cstack, builder, est, gain, -gain.first_block @ x0)


@dataclass
class RilqrRun:
    """One closed-loop run of the online-refined controller."""

    ledger: CostLedger
    log: TrajectoryLog
    gain_trace: np.ndarray
    cstack: CompressedStack
    diagnostics: dict


def run_algorithm2(alg1: Algorithm1Result, actual: LtiSystem, cfg: ExperimentConfig, plant_rng,
                   x0=None, steps: int | None = None) -> RilqrRun:
    """Regulate the actual plant while folding each new sample into the factorization.

    At step ``t`` the input is ``-K first block @ x(t)`` with the gain
    from step ``t-1`` (``current`` policy) or the input stored at step
    ``t-1`` from ``x(t-1)`` (``stale`` policy). The applied pair
    ``(u(t), x(t))`` then extends the data window, the stack receives
    one sketched rank-1 update and the gain is recomputed.

    ``gain_trace[t]`` is the feedback block after update ``t``.
    """
    k, m, n = cfg.k, actual.m, actual.n
    steps = cfg.t_iter if steps is None else steps
    w = cfg.weights()
    x = np.asarray(cfg.x0 if x0 is None else x0, dtype=float).reshape(n).copy()
    cstack = alg1.cstack
    builder = alg1.builder
    gain = alg1.gain
    stored = alg1.u0 if x0 is None else -gain.first_block @ x
    rec = TrajectoryRecorder(x)
    trace = np.empty((steps, m, n))
    n_warn = 0
    min_gap = np.inf
    max_tcond = 0.0
    for t in range(steps):
        u = -gain.first_block @ x if cfg.state_policy == "current" else stored
        x_next, _, e = step(actual, x, u, plant_rng, t)
        rec.append(u, x_next, e)
        h = builder.next_column(u, x)
        cstack = streaming_update(cstack, h, cfg.gamma)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", ModelMismatchWarning)
            est = estimate_from_factorization(cstack.factorization, cstack.wp_bar, k, m, n, cfg.pinv_tol)
        n_warn += len(caught)
        min_gap = min(min_gap, est.diagnostics["order_gap"])
        max_tcond = max(max_tcond, est.diagnostics["t_condition"])
        gain = lqr_gain(est, w)
        trace[t] = gain.first_block
        stored = -gain.first_block @ x
        x = x_next
    log = rec.log(m)
    diag = {"model_warnings": n_warn, "min_order_gap": float(min_gap), "max_t_condition": float(max_tcond),
            "closed_loop_radius": float(np.abs(np.linalg.eigvals(actual.a - actual.b @ gain.first_block)).max())}
    return RilqrRun(realized_cost(log, w.q, w.r, 0), log, trace, cstack, diag)


@dataclass
class RunResult:
    """Per-replica ledgers of one method and their aggregate."""

    method: str
    per_seed: list
    gain_trace: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def ok(self) -> list:
        return [e for e in self.per_seed if not e["failed"]]

    @property
    def n_failed(self) -> int:
        return len(self.per_seed) - len(self.ok)

    def _stat(self, key, fn):
        vals = [e[key] for e in self.ok]
        return float(fn(vals)) if vals else float("nan")

    @property
    def mean(self) -> dict:
        return {key: self._stat(key, np.mean) for key in ("j_explore", "j_exploit", "j_total")}

    @property
    def std(self) -> dict:
        return {key: self._stat(key, np.std) for key in ("j_explore", "j_exploit", "j_total")}


def _failure(replica, exc):
    return {"replica": replica, "failed": True, "error": f"{type(exc).__name__}: {exc}",
            "j_explore": None, "j_exploit": None, "j_total": None}


def rilqr_replica(cfg, replica, case, record, compressed, keep=False):
    try:
        alg1 = run_algorithm1(cfg, record, replica=replica, case=case, compressed=compressed)
        run = run_algorithm2(alg1, cfg.actual(), cfg, stream(cfg.master_seed, "plant", replica, case))
    except RilqrError as exc:
        return _failure(replica, exc), None
    entry = {"replica": replica, "failed": False, "error": None, **run.ledger.to_dict(),
             "closed_loop_radius": run.diagnostics["closed_loop_radius"]}
    return entry, (run if keep else None)


def mlqr_replica(cfg, replica, case, keep=False):
    try:
        run = run_mlqr(cfg.actual(), cfg.weights(), cfg.x0, cfg.sigma2_ue_grid[case], cfg.t_explore,
                       cfg.t_exploit, stream(cfg.master_seed, "plant", replica, case),
                       stream(cfg.master_seed, "explore", replica, case), cfg.k)
    except (RilqrError, np.linalg.LinAlgError) as exc:
        return _failure(replica, exc), None
    entry = {"replica": replica, "failed": False, "error": None, **run.ledger.to_dict(), "snr": run.snr}
    return entry, (run if keep else None)


def _replica_rilqr(args):
    cfg, replica, case = args
    record, _ = similar_record(cfg, replica)
    return rilqr_replica(cfg, replica, case, record, None, keep=replica == 0)


def _replica_mlqr(args):
    cfg, replica, case = args
    return mlqr_replica(cfg, replica, case, keep=replica == 0)


def _map(fn, jobs, workers):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, jobs))
    return [fn(j) for j in jobs]


def run_replicas(cfg: ExperimentConfig, method: str, case: int | None = None):
    """All replicas of one method on one grid case, merged in replica order.

    Returns
    -------
    RunResult
    first_run : RilqrRun or MlqrRun or None
        Full run object of replica 0 (``None`` if it failed).
    """
    case = cfg.case_index if case is None else case
    jobs = [(cfg, i, case) for i in range(cfg.seeds)]
    fn = {"rilqr": _replica_rilqr, "mlqr": _replica_mlqr}[method]
    out = _map(fn, jobs, cfg.workers)
    first = out[0][1]
    trace = first.gain_trace if method == "rilqr" and first is not None else None
    return RunResult(method, [e for e, _ in out], trace), first


def _table_replica(args):
    cfg, replica = args
    record, _ = similar_record(cfg, replica)
    compressed = compress_initial(assemble_stack(record, cfg.k), cfg.sketch(),
                                  rng=stream(cfg.master_seed, "sketch", replica))
    rows, runs = [], []
    for case in range(len(cfg.sigma2_ue_grid)):
        ml, ml_run = mlqr_replica(cfg, replica, case, keep=replica == 0)
        ri, ri_run = rilqr_replica(cfg, replica, case, record, compressed, keep=replica == 0)
        rows.append({"case": case + 1, "mlqr": ml, "rilqr": ri})
        runs.append((ml_run, ri_run))
    return rows, runs


@dataclass
class Table2Result:
    """Seed-averaged costs per grid case plus per-seed detail."""

    rows: list
    per_seed: list
    run_id: str
    out_dir: Path | None

    @property
    def n_failed(self) -> int:
        return sum(r["n_failed_mlqr"] + r["n_failed_rilqr"] for r in self.rows)


def _mean(vals):
    return float(np.mean(vals)) if vals else float("nan")


def reproduce_table2(cfg: ExperimentConfig, out_dir=None, *, write=True) -> Table2Result:
    """Run every grid case for every replica and aggregate the costs.

    Means are over the replicas that completed; failures are counted
    per case. When ``write`` is set the table, a JSON summary and the
    replica-0 trajectories are written under ``out_dir``
    (``<cfg.out>/<run id>`` by default).
    """
    run_id = cfg.run_id()
    results = _map(_table_replica, [(cfg, i) for i in range(cfg.seeds)], cfg.workers)
    per_case = [[res[0][c] for res in results] for c in range(len(cfg.sigma2_ue_grid))]
    rows = []
    for c, entries in enumerate(per_case):
        ml = [e["mlqr"] for e in entries if not e["mlqr"]["failed"]]
        ri = [e["rilqr"] for e in entries if not e["rilqr"]["failed"]]
        j_explore = _mean([e["j_explore"] for e in ml])
        j_exploit = _mean([e["j_exploit"] for e in ml])
        rows.append({
            "case": c + 1, "sigma2_ue": float(cfg.sigma2_ue_grid[c]),
            "snr": _mean([e["snr"] for e in ml]),
            "j_explore": j_explore, "j_exploit": j_exploit, "j_mlqr": j_explore + j_exploit,
            "j_rilqr": _mean([e["j_total"] for e in ri]),
            "n_failed_mlqr": len(entries) - len(ml), "n_failed_rilqr": len(entries) - len(ri),
        })
    per_seed = [row for res in results for row in res[0]]
    out = None
    if write:
        out = Path(out_dir) if out_dir is not None else Path(cfg.out) / run_id
        _write_table2(out, cfg, run_id, rows, per_seed, results[0][1])
    return Table2Result(rows, per_seed, run_id, out)


TABLE2_COLUMNS = ("case", "sigma2_ue", "snr", "j_explore", "j_exploit", "j_mlqr", "j_rilqr",
                  "n_failed_mlqr", "n_failed_rilqr")


def _fmt(v):
    return repr(float(v)) if isinstance(v, float) else str(v)


def _write_table2(out: Path, cfg, run_id, rows, per_seed, first_runs):
    traj = out / "trajectories"
    traj.mkdir(parents=True, exist_ok=True)
    with open(out / "table2.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TABLE2_COLUMNS)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in TABLE2_COLUMNS])
    q, r = np.asarray(cfg.q), np.asarray(cfg.r)
    for c, (ml_run, ri_run) in enumerate(first_runs):
        if ml_run is not None:
            ml_run.log.to_csv(traj / f"case{c + 1}_mlqr.csv", q, r)
        if ri_run is not None:
            ri_run.log.to_csv(traj / f"case{c + 1}_rilqr.csv", q, r)
    summary = {"run_id": run_id, "config": cfg.to_dict(), "table": rows, "per_seed": per_seed}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True, allow_nan=True))
