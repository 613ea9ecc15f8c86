"""Timing harnesses: rank-1 QR update scaling and per-iteration loop cost."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from rilqr.linalg import qr_decompose, rank1_qr_update, rank1_qr_update_stream
from rilqr.streams import as_generator

DEFAULT_SIZES = (20, 40, 80, 160)


@dataclass
class BenchResult:
    """Best-of-repeats seconds per update and fitted ``t = c * s**alpha`` exponents.

    ``stream_*`` times the compiled update loop; ``call_*`` times the
    validated per-call Python API, which adds a fixed overhead per
    update and therefore flattens the fit at small sizes.
    """

    sizes: tuple
    oversampling: int
    stream_seconds: list
    stream_alpha: float
    call_seconds: list
    call_alpha: float

    def rows(self):
        return [(s, s + self.oversampling, a, b)
                for s, a, b in zip(self.sizes, self.stream_seconds, self.call_seconds)]


def fit_exponent(sizes, seconds) -> float:
    """Least-squares slope of ``log t`` against ``log s``."""
    return float(np.polyfit(np.log(sizes), np.log(seconds), 1)[0])


def bench_qr_update(sizes=DEFAULT_SIZES, oversampling: int = 10, reps: int = 15,
                    work: float = 2e6, call_updates: int = 200, seed=0) -> BenchResult:
    """Time rank-1 updates of an ``(s + l) x s`` factorization for each ``s``.

    Sizes are interleaved within every repeat and the minimum over
    repeats is kept, which suppresses load spikes from other processes.
    Each streaming batch holds about ``work / (nc (nc + s))`` updates.
    """
    rng = as_generator(seed)
    setups = []
    for s in sizes:
        nc = s + oversampling
        fact = qr_decompose(rng.standard_normal((nc, s)))
        count = max(200, int(work) // (nc * (nc + s)))
        us = rng.standard_normal((count, nc))
        vs = 1e-3 * rng.standard_normal((count, s))
        rank1_qr_update_stream(fact, us[:1], vs[:1])  # compile / warm up
        rank1_qr_update(fact, us[0], vs[0])
        setups.append((fact, us, vs))
    best_stream = [np.inf] * len(sizes)
    best_call = [np.inf] * len(sizes)
    for _ in range(reps):
        for i, (fact, us, vs) in enumerate(setups):
            t0 = time.perf_counter()
            rank1_qr_update_stream(fact, us, vs)
            best_stream[i] = min(best_stream[i], (time.perf_counter() - t0) / len(us))
            f = fact
            n_call = min(call_updates, len(us))
            t0 = time.perf_counter()
            for j in range(n_call):
                f = rank1_qr_update(f, us[j], vs[j], reorth_every=None)
            best_call[i] = min(best_call[i], (time.perf_counter() - t0) / n_call)
    return BenchResult(tuple(sizes), oversampling, best_stream, fit_exponent(sizes, best_stream),
                       best_call, fit_exponent(sizes, best_call))


def time_rilqr_iterations(cfg, n_t_values=(1_000, 10_000, 100_000), steps: int = 100,
                          reps: int = 3) -> dict:
    """Best-of-``reps`` mean wall time of one online iteration per record length."""
    from rilqr.experiments import run_algorithm1, run_algorithm2, similar_record
    from rilqr.streams import stream

    out = {}
    for n_t in n_t_values:
        c = cfg.replace(n_t=n_t)
        record, _ = similar_record(c)
        alg1 = run_algorithm1(c, record)
        best = np.inf
        for rep in range(reps + 1):
            a = run_algorithm1(c, record, compressed=alg1.cstack)
            t0 = time.perf_counter()
            run_algorithm2(a, c.actual(), c, stream(c.master_seed, "plant", 0, rep), steps=steps)
            if rep:  # first pass warms caches
                best = min(best, (time.perf_counter() - t0) / steps)
        out[n_t] = best
    return out
