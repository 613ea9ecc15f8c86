"""Command-line entry point: ``rilqr <subcommand> [options]``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from rilqr.errors import RilqrError
from rilqr.experiments import (TABLE2_COLUMNS, ExperimentConfig, RunResult, rilqr_replica,
                               load_config, reproduce_table2, run_replicas,
                               similar_record)
from rilqr.hankel import SignalRecord


def _config(args) -> ExperimentConfig:
    overrides = list(args.set or [])
    if args.seed is not None:
        overrides.append(f"master_seed={args.seed}")
    if args.seeds is not None:
        overrides.append(f"seeds={args.seeds}")
    if args.out is not None:
        overrides.append(f"out={args.out}")
    if getattr(args, "workers", None) is not None:
        overrides.append(f"workers={args.workers}")
    return load_config(args.config, overrides)


def _out_dir(cfg) -> Path:
    return Path(cfg.out) / cfg.run_id()


def cmd_generate_similar(args) -> int:
    cfg = _config(args)
    record, _ = similar_record(cfg, args.replica)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "similar_record.csv"
    record.to_csv(path)
    print(f"wrote {record.length} samples to {path}")
    return 0


def _print_result(result: RunResult):
    for e in result.per_seed:
        if e["failed"]:
            print(f"replica {e['replica']:3d}  FAILED  {e['error']}")
        else:
            print(f"replica {e['replica']:3d}  J_explore={e['j_explore']:.6g}  "
                  f"J_exploit={e['j_exploit']:.6g}  J={e['j_total']:.6g}")
    mean, std = result.mean, result.std
    print(f"{result.method}: mean J = {mean['j_total']:.6g} (std {std['j_total']:.3g}) "
          f"over {len(result.ok)} replicas, {result.n_failed} failed")


def _write_run(out: Path, cfg, result: RunResult, first) -> None:
    out.mkdir(parents=True, exist_ok=True)
    if first is not None:
        first.log.to_csv(out / f"{result.method}_trajectory.csv", np.asarray(cfg.q), np.asarray(cfg.r))
    if result.gain_trace is not None:
        with open(out / "gain_trace.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            flat = result.gain_trace.reshape(len(result.gain_trace), -1)
            w.writerow(["t"] + [f"k{i + 1}" for i in range(flat.shape[1])])
            for t, row in enumerate(flat):
                w.writerow([t] + [repr(float(v)) for v in row])
    summary = {"method": result.method, "config": cfg.to_dict(), "mean": result.mean,
               "std": result.std, "n_failed": result.n_failed, "per_seed": result.per_seed}
    (out / f"{result.method}_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))


def cmd_run(args, method) -> int:
    cfg = _config(args)
    if method == "rilqr" and args.record:
        record = SignalRecord.from_csv(args.record)
        entries, first = [], None
        for i in range(cfg.seeds):
            entry, run = rilqr_replica(cfg, i, cfg.case_index, record, None, keep=i == 0)
            entries.append(entry)
            first = run if i == 0 else first
        result = RunResult("rilqr", entries, first.gain_trace if first is not None else None)
    else:
        result, first = run_replicas(cfg, method)
    _print_result(result)
    out = _out_dir(cfg)
    _write_run(out, cfg, result, first)
    print(f"results in {out}")
    return 1 if result.n_failed else 0


def cmd_table2(args) -> int:
    cfg = _config(args)
    res = reproduce_table2(cfg)
    widths = [5, 10, 11, 11, 11, 11, 9, 7, 7]
    print(" ".join(f"{c[:w]:>{w}}" for c, w in zip(TABLE2_COLUMNS, widths)))
    for row in res.rows:
        cells = [f"{row['case']:>5d}", f"{row['sigma2_ue']:>10.3g}"]
        cells += [f"{row[c]:>11.5g}" for c in ("snr", "j_explore", "j_exploit", "j_mlqr")]
        cells += [f"{row['j_rilqr']:>9.4g}", f"{row['n_failed_mlqr']:>7d}", f"{row['n_failed_rilqr']:>7d}"]
        print(" ".join(cells))
    print(f"results in {res.out_dir}")
    if res.n_failed:
        print(f"{res.n_failed} replica run(s) failed; means exclude them", file=sys.stderr)
        return 1
    return 0


def cmd_bench(args) -> int:
    from rilqr.bench import bench_qr_update

    res = bench_qr_update(tuple(args.sizes), args.oversampling, args.reps, seed=args.seed or 0)
    print(f"{'s':>5} {'nc':>5} {'stream us/update':>17} {'call us/update':>15}")
    for s, nc, a, b in res.rows():
        print(f"{s:>5d} {nc:>5d} {a * 1e6:>17.3f} {b * 1e6:>15.3f}")
    print(f"fitted exponent (compiled stream): {res.stream_alpha:.3f}")
    print(f"fitted exponent (per-call API):    {res.call_alpha:.3f}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "bench_qr_update.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "nc", "stream_seconds", "call_seconds"])
            w.writerows([s, nc, repr(a), repr(b)] for s, nc, a, b in res.rows())
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat YAML file of key: value settings")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--seeds", type=int, help="number of replicas")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key (repeatable)")
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="rilqr", description="Similar-data receding-horizon LQR experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-similar", parents=[common], help="write the similar-plant record as CSV")
    p.add_argument("--replica", type=int, default=0)
    p.set_defaults(func=cmd_generate_similar)

    p = sub.add_parser("run-rilqr", parents=[common], help="run the online-refined controller")
    p.add_argument("--record", help="similar-plant CSV record (default: generate)")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=lambda a: cmd_run(a, "rilqr"))

    p = sub.add_parser("run-mlqr", parents=[common], help="run the explore/exploit baseline")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=lambda a: cmd_run(a, "mlqr"))

    p = sub.add_parser("table2", parents=[common], help="cost table over the exploration-variance grid")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_table2)

    p = sub.add_parser("bench-qr-update", parents=[common], help="rank-1 QR update timing")
    p.add_argument("--sizes", type=int, nargs="+", default=[20, 40, 80, 160])
    p.add_argument("--oversampling", type=int, default=10)
    p.add_argument("--reps", type=int, default=15)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (RilqrError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
