"""Command-line interface.

Example::

    cvqkd-finite simulate --out run1 --override run.n_total=1000000
    cvqkd-finite keylen --data run1 --out report.json
    cvqkd-finite sweep --data run1 --out sweep.csv
    cvqkd-finite intervals --out intervals.csv

Exit status: 0 on success, 2 for configuration errors, 3 for malformed or
unreadable data, 4 for numerical failures.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import pipeline
from .config import DEFAULT_PROFILE, RunConfig, load_config
from .errors import ConfigError, DataFormatError
from .estimation import combine_moments

__all__ = ["main", "build_parser"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def _common(parser: argparse.ArgumentParser, data: bool = True) -> None:
    parser.add_argument("--config", default=None,
                        help=f"config file or profile name (default: {DEFAULT_PROFILE})")
    parser.add_argument("--seed", type=int, default=None, help="override run.seed")
    parser.add_argument("--out", default=None, help="output path (stdout when omitted)")
    parser.add_argument("--method", choices=("beta", "gaussian"), default=None,
                        help="override run.interval_method")
    parser.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="set any config key; repeatable")
    if data:
        parser.add_argument("--data", default=None, help="run directory (default: run.output_path)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cvqkd-finite", description="Finite-size CV-QKD key-length toolkit.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write simulated data blocks, calibration records and a manifest")
    _common(p, data=False)
    p.add_argument("--workers", type=int, default=None, help="parallel block writers (output is unchanged)")

    p = sub.add_parser("calibrate", help="shot-noise calibration from a run's calibration records")
    _common(p)

    p = sub.add_parser("estimate", help="moments, entropy and channel parameters of a run")
    _common(p)

    p = sub.add_parser("keylen", help="itemized key-length report")
    _common(p)

    p = sub.add_parser("sweep", help="key fraction against cumulative block count (CSV)")
    _common(p)

    p = sub.add_parser("intervals", help="confidence-interval half-widths over a log grid of n (CSV)")
    _common(p, data=False)
    return ap


def _config(args: argparse.Namespace) -> RunConfig:
    overrides = list(args.override)
    if args.seed is not None:
        overrides.append(f"run.seed={args.seed}")
    if args.method is not None:
        overrides.append(f"run.interval_method={args.method}")
    return load_config(args.config, overrides)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="")


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _csv(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\r\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def _data_dir(args: argparse.Namespace, cfg: RunConfig) -> Path:
    return Path(args.data if args.data is not None else cfg["run.output_path"])


def _pooled(cfg: RunConfig, data_dir: Path):
    summaries = pipeline.summarize_run(cfg, data_dir)
    moments = combine_moments(s.moments for s in summaries)
    counts = np.sum([s.counts for s in summaries], axis=0)
    return summaries, moments, counts


def cmd_simulate(args, cfg: RunConfig) -> int:
    out = Path(args.out if args.out is not None else cfg["run.output_path"])
    manifest = pipeline.simulate_run(cfg, out, workers=args.workers)
    print(f"wrote {len(manifest['blocks'])} blocks of {cfg.block_size} symbols to {out}")
    return EXIT_OK


def cmd_calibrate(args, cfg: RunConfig) -> int:
    receiver = pipeline.calibrate_run(cfg, _data_dir(args, cfg))
    fields = ("tau", "t", "t_hat", "v_shot_hat", "v_shot_plus", "v_shot_minus", "m", "delta")
    _emit(_json({"receiver": {f: getattr(receiver, f) for f in fields}, "config": cfg.to_dict()}), args.out)
    return EXIT_OK


def cmd_estimate(args, cfg: RunConfig) -> int:
    data_dir = _data_dir(args, cfg)
    receiver = pipeline.calibrate_run(cfg, data_dir)
    _, moments, counts = _pooled(cfg, data_dir)
    summary = pipeline.run_summary(cfg, moments, receiver, counts)
    summary["config"] = cfg.to_dict()
    _emit(_json(summary), args.out)
    return EXIT_OK


def cmd_keylen(args, cfg: RunConfig) -> int:
    data_dir = _data_dir(args, cfg)
    receiver = pipeline.calibrate_run(cfg, data_dir)
    _, moments, counts = _pooled(cfg, data_dir)
    n_nominal = cfg["pipeline.n_nominal"] or moments.n
    report = pipeline.evaluate_key(cfg, moments, counts, receiver, n_nominal)
    body = {
        "report": report.to_dict(),
        "n_nominal": n_nominal,
        "n_measured": moments.n,
        "estimates": pipeline.run_summary(cfg, moments, receiver, counts),
        "config": cfg.to_dict(),
    }
    _emit(_json(body), args.out)
    return EXIT_OK


def cmd_sweep(args, cfg: RunConfig) -> int:
    data_dir = _data_dir(args, cfg)
    receiver = pipeline.calibrate_run(cfg, data_dir)
    summaries = pipeline.summarize_run(cfg, data_dir)
    k_values = cfg["sweep.k_values"]
    if k_values is not None and k_values[-1] > len(summaries):
        raise ConfigError(f"sweep.k_values reaches {k_values[-1]} but {data_dir} has {len(summaries)} blocks")
    rows = pipeline.sweep_rows(cfg, summaries, receiver, k_values)
    _emit(_csv(rows, pipeline.SWEEP_COLUMNS), args.out)
    return EXIT_OK


def cmd_intervals(args, cfg: RunConfig) -> int:
    grid = pipeline.log_grid(cfg["intervals.n_min"], cfg["intervals.n_max"], cfg["intervals.rows"])
    rows = pipeline.interval_rows(grid, cfg["intervals.eps"])
    _emit(_csv(rows, pipeline.INTERVAL_COLUMNS), args.out)
    return EXIT_OK


_COMMANDS = {
    "simulate": cmd_simulate,
    "calibrate": cmd_calibrate,
    "estimate": cmd_estimate,
    "keylen": cmd_keylen,
    "sweep": cmd_sweep,
    "intervals": cmd_intervals,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(args)
        return _COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        where = f" {exc.filename}" if exc.filename else ""
        print(f"data error:{where} {exc.strerror or exc}", file=sys.stderr)
        return EXIT_DATA
    except ArithmeticError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
