"""Command line entry point: run, validate and list experiments."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
import traceback
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import EXPERIMENT_NAMES, ExperimentConfig, load_config
from .errors import ConfigError
from .experiments import EXPERIMENTS, Context
from .reports import emit_report, to_jsonable

log = logging.getLogger("spectral_lab")

ENV_OUT = "SPECTRAL_LAB_OUT"
EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


def _run_one(ctx: Context, idx: int, spec: dict, seed: int, out: Path) -> dict:
    name = spec["name"]
    params = {k: v for k, v in spec.items() if k != "name"}
    base = out / f"{idx:02d}_{name}"
    start = time.perf_counter()
    entry = {"index": idx, "name": name}
    try:
        outcome = EXPERIMENTS[name](ctx, params, np.random.default_rng([seed, idx]))
        elapsed = time.perf_counter() - start
        extra = {"experiment": name, "params": params, "tolerances": ctx.config.tolerances,
                 "checks": outcome.checks, "passed": outcome.passed}
        csv_path, json_path = emit_report((outcome.columns, outcome.rows, outcome.summary), base, extra)
        entry.update(passed=outcome.passed, checks=outcome.checks, csv=csv_path.name, json=json_path.name)
    except OSError:
        raise
    except Exception as exc:  # numerical failure stays local to this experiment
        elapsed = time.perf_counter() - start
        log.error("experiment %02d %s failed: %s", idx, name, exc)
        entry.update(passed=False, error=f"{type(exc).__name__}: {exc}",
                     traceback=traceback.format_exc(limit=4))
    entry["wall_clock"] = elapsed
    return entry


def run(config: ExperimentConfig, out: Path, jobs: int = 1, seed: int | None = None) -> tuple[int, dict]:
    """Execute every configured experiment and write the run manifest. Returns (exit code, manifest)."""
    seed = config.seed if seed is None else seed
    out.mkdir(parents=True, exist_ok=True)
    ctx = Context(config)
    specs = list(enumerate(config.experiments))
    t0 = time.perf_counter()
    if jobs > 1 and len(specs) > 1:
        # build shared state once so worker threads do not race on the cached properties
        ctx.lattice, ctx.operator, ctx.region  # noqa: B018
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            entries = list(pool.map(lambda item: _run_one(ctx, item[0], item[1], seed, out), specs))
    else:
        entries = [_run_one(ctx, i, s, seed, out) for i, s in specs]
    manifest = {
        "config_digest": config.digest,
        "version": __version__,
        "seed": seed,
        "total_wall_clock": time.perf_counter() - t0,
        "experiments": entries,
        "passed": all(e["passed"] for e in entries),
    }
    (out / "run_manifest.json").write_text(json.dumps(to_jsonable(manifest), indent=2, sort_keys=True) + "\n")
    return (EXIT_OK if manifest["passed"] else EXIT_FAILED), manifest


def _output_dir(args, config: ExperimentConfig) -> Path:
    return Path(args.out or os.environ.get(ENV_OUT) or config.output_dir or "out")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spectral-lab", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the experiments listed in a config")
    r.add_argument("config")
    r.add_argument("--out", help=f"output directory (default: ${ENV_OUT}, then config output_dir, then ./out)")
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--seed", type=int)
    v = sub.add_parser("validate", help="validate a config without running it")
    v.add_argument("config")
    sub.add_parser("list-experiments", help="print the known experiment names")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "list-experiments":
        print("\n".join(EXPERIMENT_NAMES))
        return EXIT_OK
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        print(f"ok {config.digest}")
        return EXIT_OK
    if args.jobs < 1:
        print("--jobs must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    out = _output_dir(args, config)
    try:
        code, manifest = run(config, out, args.jobs, args.seed)
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_IO
    for e in manifest["experiments"]:
        status = "PASS" if e["passed"] else "FAIL"
        print(f"{status} {e['index']:02d} {e['name']} ({e['wall_clock']:.2f} s)")
    return code


if __name__ == "__main__":
    sys.exit(main())
