"""Command line entry point.

    weakchaos list
    weakchaos run CONFIG.yaml [--seed S] [--out DIR] [--workers W]
    weakchaos KIND [--set key=value ...] [--seed S] [--out DIR] [--workers W]

Outputs go to ``DIR/<experiment name>/<table>.csv`` plus ``DIR/summary.json``.
The output directory is taken from ``--out``, then the ``WEAKCHAOS_OUT``
environment variable, then the config file. Exit codes: 0 on success, 1 if
any experiment failed, 2 on an invalid config.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from .config import KIND_NAMES, parse_config
from .exceptions import ConfigError
from .experiments import list_experiments, run_experiment

OUT_ENV = "WEAKCHAOS_OUT"
EXIT_OK, EXIT_FAILED, EXIT_INVALID = 0, 1, 2


def experiment_seed(master, index):
    """Seed of experiment ``index``: a pure function of the master seed."""
    state = np.random.SeedSequence(master, spawn_key=(index,)).generate_state(2, np.uint32)
    return int(state[0]) << 32 | int(state[1])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        obj = float(obj)
        return obj if math.isfinite(obj) else None
    if obj is None or isinstance(obj, (int, str)):
        return obj
    return str(obj)


def run_config(cfg, out=None, workers=None, seed=None):
    """Run every experiment of a validated config and write its reports.

    Returns ``(summary, exit_code)``. A failing experiment is recorded in the
    summary with its error and does not stop the others.
    """
    out = Path(out if out is not None else os.environ.get(OUT_ENV, cfg.out))
    workers = cfg.workers if workers is None else workers
    seed = cfg.seed if seed is None else seed
    start = time.perf_counter()
    reports = []
    failed = False
    for index, exp in enumerate(cfg.experiments):
        exp_seed = experiment_seed(seed, index)
        report = {"name": exp.name, "kind": exp.kind, "seed": exp_seed,
                  "config": exp.model_dump(mode="json")}
        try:
            results, tables = run_experiment(exp, exp_seed, workers)
        except Exception as exc:  # reported, the remaining experiments still run
            failed = True
            report.update(status="failed", error=f"{type(exc).__name__}: {exc}")
        else:
            folder = out / exp.name
            folder.mkdir(parents=True, exist_ok=True)
            files = []
            for name, text in tables.items():
                (folder / f"{name}.csv").write_text(text)
                files.append(f"{exp.name}/{name}.csv")
            report.update(status="ok", results=results, files=files)
        reports.append(report)
    summary = {
        "seed": seed,
        "experiments": reports,
        "wall_clock_seconds": round(time.perf_counter() - start, 3),
    }
    summary = _jsonable(summary)
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary, EXIT_FAILED if failed else EXIT_OK


def load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"not valid YAML: {exc}") from None
    return parse_config(data)


def _parse_sets(pairs):
    out = {}
    for item in pairs or []:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(item, "expected key=value")
        node = out
        *parents, leaf = key.split(".")
        for part in parents:
            node = node.setdefault(part, {})
        node[leaf] = yaml.safe_load(value)
    return out


def build_parser():
    parser = argparse.ArgumentParser(prog="weakchaos", description="Run weak-chaos statistics experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--workers", type=int, help="process pool size")

    sub.add_parser("list", help="list experiment kinds")
    run = sub.add_parser("run", parents=[common], help="run every experiment of a config file")
    run.add_argument("config")
    for kind in KIND_NAMES:
        p = sub.add_parser(kind, parents=[common], help=f"run one {kind} experiment with defaults")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", dest="overrides",
                       help="override a field, e.g. --set ensemble=1000 or --set system.gamma=0.3")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "list":
        for kind, desc, anchor in list_experiments():
            print(f"{kind:<20} {desc}  [{anchor}]")
        return EXIT_OK
    try:
        if args.command == "run":
            cfg = load_config(args.config)
        else:
            entry = {"name": args.command, "kind": args.command, **_parse_sets(args.overrides)}
            cfg = parse_config({"experiments": [entry]})
        if args.workers is not None and args.workers < 1:
            raise ConfigError("workers", "must be >= 1")
        if args.seed is not None and args.seed < 0:
            raise ConfigError("seed", "must be >= 0")
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    summary, code = run_config(cfg, args.out, args.workers, args.seed)
    for rep in summary["experiments"]:
        line = f"{rep['name']}: {rep['status']}"
        if rep["status"] != "ok":
            line += f" ({rep['error']})"
        print(line)
    return code


if __name__ == "__main__":
    sys.exit(main())
