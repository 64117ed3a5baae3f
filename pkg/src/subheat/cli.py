"""Command-line front door: ``subheat <command> [--config PATH] [--output DIR] ...``."""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import shutil
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import ENV_PREFIX, ConfigError, RunConfig, load_config
from .grid import save_grid_function
from .pipeline import ALL_VERIFY, Lab, TaskResult, run_task
from .plots import emit_plots
from .reports import _clean, dump_json, write_csv

log = logging.getLogger("subheat")

COMMANDS = ("assemble", "spectrum", "verify-subordination", "verify-kernel-bounds", "verify-fractional",
            "verify-carleson", "verify-all", "tabulate-eta", "report")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("jobs must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", default=argparse.SUPPRESS, help="JSON run configuration")
    common.add_argument("--output", metavar="DIR", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("--cache", metavar="DIR", default=argparse.SUPPRESS, help="eigendecomposition cache")
    common.add_argument("--jobs", metavar="N", type=_positive, default=argparse.SUPPRESS, help="concurrent tasks")
    common.add_argument("--seed", metavar="U64", type=_u64, default=argparse.SUPPRESS, help="global seed")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    parser = argparse.ArgumentParser(prog="subheat", parents=[common],
                                     description="Spectral verification of heat-semigroup estimates.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    helps = {
        "assemble": "assemble operators, check coefficient conditions, dump grid functions",
        "spectrum": "eigendecompose (or load from cache) and check eigenpairs",
        "verify-subordination": "stable-density quadrature and dual-path kernels",
        "verify-kernel-bounds": "alpha = 1 kernel envelopes, Duhamel, weighted L^p",
        "verify-fractional": "fractional derivative quadrature, decay slopes, cancellation",
        "verify-carleson": "isometry, area function, Carleson equivalence",
        "verify-all": "every task above",
        "tabulate-eta": "CSV of the unit stable density",
        "report": "render SVG plots from the CSV tables in the output directory",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _write_task_outputs(result: TaskResult, out: Path) -> list:
    """The task's shard plus its tables and grid functions; returns the written paths."""
    written = []
    shard = out / "shards" / f"{result.name}.json"
    shard.parent.mkdir(parents=True, exist_ok=True)
    dump_json(result.to_json(), shard)
    written.append(shard)
    for rel, (header, rows) in sorted(result.tables.items()):
        p = out / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        write_csv(p, header, rows)
        written.append(p)
    for rel, (values, grid, meta) in sorted(result.grid_functions.items()):
        p = out / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        save_grid_function(p, values, grid, **meta)
        written += [p, Path(str(p) + ".json")]
    return written


def _flatten(results: list) -> list:
    rows = []
    for res in results:
        for rep in res.reports:
            j = rep.to_json()
            rows.append((res.name, rep.name, "passed", str(rep.passed)))
            rows.append((res.name, rep.name, "empirical_sup", repr(float(rep.empirical_sup))))
            if rep.refinement_ratio is not None:
                rows.append((res.name, rep.name, "refinement_ratio", repr(float(rep.refinement_ratio))))
            for k, v in j["fits"].items():
                if isinstance(v, (int, float, str)) and not isinstance(v, bool):
                    rows.append((res.name, rep.name, k, repr(v) if isinstance(v, float) else str(v)))
    return rows


def _report_payload(command: str, cfg: RunConfig, results: list) -> dict:
    data = {k: v for k, v in cfg.to_json().items() if k not in ("output_dir", "cache_dir", "jobs")}
    failing = [f"{r.name}/{name}" for r in results for name in r.failing()]
    return {
        "command": command,
        "config_hash": cfg.config_hash(),
        "config": data,
        "passed": not failing,
        "failing": failing,
        "tasks": [r.to_json() for r in results],
    }


def _manifest(out: Path, cfg: RunConfig, command: str, status: dict, timings: dict, files: list) -> Path:
    import matplotlib
    import scipy

    entries = {}
    for p in sorted(set(files)):
        entries[str(p.relative_to(out))] = {"sha256": _sha256(p), "bytes": p.stat().st_size}
    manifest = {
        "command": command,
        "config_hash": cfg.config_hash(),
        "versions": {"subheat": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "matplotlib": matplotlib.__version__, "python": sys.version.split()[0]},
        "tasks": {k: {"status": status[k], "wall_clock_s": round(timings[k], 3)} for k in status},
        "files": entries,
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(_clean(manifest), indent=2, sort_keys=True) + "\n")
    return path


def run(command: str, cfg: RunConfig) -> int:
    """Execute one command against a validated configuration; returns the exit status."""
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    files, status, timings = [], {}, {}
    if command == "tabulate-eta":
        from .pipeline import task_subordination  # noqa: F401  (shares the table layout)
        from .subordination import tabulate_eta

        t0 = time.perf_counter()
        p = out / "tables" / "eta.csv"
        p.parent.mkdir(parents=True, exist_ok=True)
        tabulate_eta(p, cfg["fractional"]["alpha_list"], np.geomspace(1e-2, 1e2, 41))
        files.append(p)
        status["tabulate-eta"], timings["tabulate-eta"] = "ok", time.perf_counter() - t0
        _manifest(out, cfg, command, status, timings, files)
        return EXIT_OK
    if command == "report":
        t0 = time.perf_counter()
        svgs = emit_plots(out)
        if not svgs:
            print(f"notice: no CSV tables under {out / 'tables'}; no plots written", file=sys.stderr)
        status["report"], timings["report"] = "ok", time.perf_counter() - t0
        _manifest(out, cfg, command, status, timings, svgs)
        return EXIT_OK

    tasks = list(ALL_VERIFY) if command == "verify-all" else [command]
    lab = Lab(cfg)
    results = {}

    def work(name):
        t0 = time.perf_counter()
        res = run_task(name, lab)
        return name, res, time.perf_counter() - t0

    if cfg.jobs > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            done = list(pool.map(work, tasks))
    else:
        done = [work(name) for name in tasks]
    for name, res, dt in done:
        results[name] = res
        timings[name] = dt
        status[name] = "passed" if res.passed else "failed"
    # single-threaded merge in canonical task order
    ordered = [results[name] for name in tasks]
    for res in ordered:
        files += _write_task_outputs(res, out)
    p = out / "tables" / "reports.csv"
    p.parent.mkdir(parents=True, exist_ok=True)
    write_csv(p, ["task", "report", "field", "value"], _flatten(ordered))
    files.append(p)
    payload = _report_payload(command, cfg, ordered)
    p = out / "report.json"
    dump_json(payload, p)
    files.append(p)
    if command == "verify-all":
        files += emit_plots(out)
    _manifest(out, cfg, command, status, timings, files)
    if payload["failing"]:
        for name in payload["failing"]:
            print(f"FAILED {name}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = vars(parser.parse_args(argv))
    logging.basicConfig(level=logging.INFO if args.get("verbose") else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    config_path = args.get("config") or os.environ.get(ENV_PREFIX + "CONFIG")
    overrides = {"output_dir": args.get("output"), "cache_dir": args.get("cache"), "jobs": args.get("jobs"),
                 "seed": args.get("seed")}
    try:
        cfg = load_config(config_path, overrides)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(args["command"], cfg)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
