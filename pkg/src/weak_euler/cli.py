"""Command line entry point: ``weak-euler run <config>`` and ``weak-euler list``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .experiments import ConfigError, list_text, resolve_config, run_experiment

log = logging.getLogger("weak_euler")


def _plain(obj):
    """Convert numpy scalars/arrays and tuples into JSON-friendly values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        obj = float(obj)
    if isinstance(obj, float) and obj != obj:
        return None
    if isinstance(obj, float) and obj in (float("inf"), float("-inf")):
        return "inf" if obj > 0 else "-inf"
    return obj


def write_csv(rows, path):
    rows = [_plain(r) for r in rows]
    keys = list(dict.fromkeys(k for r in rows for k in r))
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def run(config_path, threads=None, seed=None, output=None) -> dict:
    """Run one configuration and write its outputs; returns the summary."""
    with open(config_path) as fh:
        raw = json.load(fh)
    cfg = resolve_config(raw, seed)
    out = Path(output or cfg.get("output_dir") or Path("results") / cfg["experiment"])
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    summary, rows, plot = run_experiment(cfg, threads)
    wall = time.perf_counter() - t0
    embedded = {k: v for k, v in cfg.items() if k != "output_dir"}
    doc = _plain({"experiment": cfg["experiment"], "version": __version__, "config": embedded,
                  "pass": summary.pop("pass"), "estimates": summary})
    (out / "summary.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    (out / "timing.json").write_text(json.dumps({"wall_clock_seconds": wall, "threads": threads}) + "\n")
    write_csv(rows, out / "results.csv")
    write_csv(plot, out / "plotdata.csv")
    log.info("%s: %s (%.1f s) -> %s", cfg["experiment"], "PASS" if doc["pass"] else "FAIL", wall, out)
    return doc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="weak-euler", description="Weak error experiments for Euler schemes.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment configuration (JSON)")
    r.add_argument("config")
    r.add_argument("--threads", type=int, default=None, help="worker threads (results do not depend on it)")
    r.add_argument("--seed", type=int, default=None, help="override the configured seed")
    r.add_argument("--output", default=None, help="output directory")
    sub.add_parser("list", help="list experiments")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    if args.command == "list":
        print(list_text())
        return 0
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        doc = run(args.config, args.threads, args.seed, args.output)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    # a failed contract is a result, not an error
    print(json.dumps({"experiment": doc["experiment"], "pass": doc["pass"]}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
