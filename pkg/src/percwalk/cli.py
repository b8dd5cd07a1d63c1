"""percwalk <experiment> --config FILE [--seeds a..b] [--out DIR] [--workers K]

Exit codes: 0 all checks pass, 1 a criterion fails, 2 usage or config error,
3 resource error (vertex caps, window too small for a walk).
"""
from __future__ import annotations

import argparse
import csv
import datetime
import json
import math
import platform
import sys
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from . import __version__
from .config import EXPERIMENTS, ExperimentConfig, SeedRange, config_schema, load_config
from .experiments import ConfigError, ExperimentResult, run_experiment
from .lattice import CapacityError
from .walk import WindowExit

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_RESOURCE = 0, 1, 2, 3


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, NaN/inf to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def write_outputs(result: ExperimentResult, cfg: ExperimentConfig, out: Path, meta: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for name, (header, rows) in result.tables.items():
        with open(out / f"{name}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_cell(v) for v in row])
    with open(out / "summary.json", "w") as fh:
        json.dump(_clean(result.summary(cfg.config_hash())), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out / "config.json", "w") as fh:
        json.dump(cfg.model_dump(mode="json"), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out / "metadata.json", "w") as fh:
        json.dump(_clean(meta), fh, indent=2, sort_keys=True)
        fh.write("\n")
    if result.plot:
        (out / "plot.gp").write_text(result.plot)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="percwalk", description="Random walks among random conductances.")
    p.add_argument("experiment", choices=list(EXPERIMENTS) + ["schema"])
    p.add_argument("--config", help="YAML experiment config")
    p.add_argument("--seeds", help="inclusive seed range a..b (overrides the config)")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--workers", type=int, default=1, help="worker processes")
    return p


def run(experiment: str, cfg: ExperimentConfig, out: Path, workers: int = 1, argv=None) -> tuple[int, dict]:
    started = datetime.datetime.now(datetime.timezone.utc)
    result = run_experiment(experiment, cfg, workers)
    meta = {"started": started.isoformat(), "finished": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "config_hash": cfg.config_hash(), "percwalk": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "workers": workers, "argv": list(argv or [])}
    write_outputs(result, cfg, out, meta)
    summary = result.summary(cfg.config_hash())
    return (EXIT_PASS if result.passed else EXIT_FAIL), summary


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    if args.experiment == "schema":
        print(json.dumps(config_schema(), indent=2, sort_keys=True))
        return EXIT_PASS
    if not args.config:
        print("error: --config is required", file=sys.stderr)
        return EXIT_USAGE
    if args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = load_config(args.config)
        updates = {}
        if args.seeds:
            updates["seeds"] = SeedRange.parse(args.seeds).model_dump()
        if args.out:
            updates["output"] = args.out
        if updates:
            cfg = ExperimentConfig.model_validate({**cfg.model_dump(mode="json"), **updates})
    except ValidationError as exc:
        for err in exc.errors():
            loc = ".".join(str(p) for p in err["loc"]) or "<root>"
            print(f"config error: {loc}: {err['msg']}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if cfg.experiment is not None and cfg.experiment != args.experiment:
        print(f"error: config is for {cfg.experiment!r}, not {args.experiment!r}", file=sys.stderr)
        return EXIT_USAGE
    try:
        code, summary = run(args.experiment, cfg, Path(cfg.output), args.workers, argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CapacityError, WindowExit, MemoryError) as exc:
        print(f"resource error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    status = "PASS" if code == EXIT_PASS else "FAIL"
    print(f"{args.experiment} [{summary['criterion']}] {status}")
    for name, ok in summary["checks"].items():
        print(f"  {'ok  ' if ok else 'FAIL'} {name}")
    return code


if __name__ == "__main__":
    sys.exit(main())
