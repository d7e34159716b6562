"""Command-line entry point: ``laprmt <experiment> [options]``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .config import EXPERIMENTS, RunConfig, validate_config
from .container import write_rows_csv
from .errors import ConfigError
from .parallel import ENV_THREADS, resolve_threads

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="laprmt", description="Numerical experiments on random Laplacian-type matrices.")
    p.add_argument("--version", action="version", version=f"laprmt {__version__}")
    sub = p.add_subparsers(dest="experiment", metavar="EXPERIMENT")
    sub.required = True
    for name in EXPERIMENTS:
        s = sub.add_parser(name, help=f"run the {name} experiment")
        s.add_argument("--config", metavar="PATH", help="JSON or 'key = value' config file")
        s.add_argument("--seed", type=int, help="unsigned 64-bit seed")
        s.add_argument("--trials", type=int)
        s.add_argument("--n", type=int, help="matrix parameter N (size N+1)")
        s.add_argument("--q-exp", type=float, dest="q_exp", help="q = N^q_exp, in (0, 1/2]")
        s.add_argument("--out", dest="output_dir", metavar="DIR")
        s.add_argument("--threads", help=f"worker threads or 'auto' (fallback: ${ENV_THREADS})")
        s.add_argument("--check-config", action="store_true", help="validate, echo the canonical config and exit")
    return p


def resolve_config(args: argparse.Namespace) -> RunConfig:
    text = ""
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError([f"cannot read config {args.config}: {exc.strerror}"]) from exc
    flags = {k: getattr(args, k) for k in ("seed", "trials", "n", "q_exp", "output_dir", "threads")}
    flags["experiment"] = args.experiment
    cfg = validate_config(text, flags)
    try:
        resolve_threads(cfg.threads)
    except ValueError as exc:
        raise ConfigError([f"threads (or ${ENV_THREADS}): {exc}"]) from exc
    return cfg


def summary(cfg: RunConfig, rep) -> dict:
    """Deterministic summary: no timings, paths or thread counts."""
    return {
        "schema": 1,
        "experiment": cfg.experiment,
        "config": cfg.provenance(),
        "config_hash": cfg.digest(),
        "seed": cfg.seed,
        "passed": rep.passed,
        "report": rep.to_dict(),
    }


def write_outputs(cfg: RunConfig, rep, header, rows) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    text = json.dumps(summary(cfg, rep), sort_keys=True, indent=2) + "\n"
    (out / f"{cfg.experiment}_summary.json").write_text(text, encoding="utf-8")
    write_rows_csv(out / f"{cfg.experiment}_detail.csv", header, rows)
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_CONFIG
    if args.check_config:
        print(cfg.echo())
        return EXIT_OK
    from .experiments import run

    try:
        rep, header, rows = run(cfg)
    except Exception as exc:  # runtime failure: report and exit 1
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    out = write_outputs(cfg, rep, header, rows)
    print(rep.table())
    print(f"config hash {cfg.digest()[:16]}  seed {cfg.seed}  outputs in {out}")
    return EXIT_OK if rep.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
