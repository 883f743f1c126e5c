"""``skewlangevin`` command-line entry point."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import harness
from .data_io import DataError

EXPERIMENTS = ("validate", "toy", "linear", "logistic", "variance", "scgf")


def _parser():
    p = argparse.ArgumentParser(prog="skewlangevin",
                                description="Projected and skew-reflected Langevin experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name, help=f"run a {name} experiment from a config file")
        sp.add_argument("--config", required=True, type=Path, help="experiment config (INI)")
        sp.add_argument("--out", type=Path, help="output directory (overrides experiment.out)")
        sp.add_argument("--seeds", help="seed list, e.g. 0,1,2 or 0-9")
        sp.add_argument("--chains", type=int, help="number of parallel chains")
        sp.add_argument("--threads", type=int, default=1, help="worker threads across seeds/methods")
    sp = sub.add_parser("check-samples", help="verify that sample files lie in the constraint set")
    sp.add_argument("paths", nargs="*", type=Path, help="sample CSVs (default: all in --out)")
    sp.add_argument("--out", type=Path, help="run directory whose config defines the set")
    sp.add_argument("--config", type=Path, help="config defining the set (instead of --out)")
    sp = sub.add_parser("manifest", help="summarize a finished run")
    sp.add_argument("run_dir", nargs="?", type=Path)
    sp.add_argument("--out", type=Path, help="run directory (alternative to the positional)")
    sp = sub.add_parser("configs", help="copy the bundled example configs to a directory")
    sp.add_argument("dest", type=Path)
    return p


def _experiment(args):
    overrides = {"kind": args.command, "out": args.out and str(args.out), "seeds": args.seeds,
                 "chains": args.chains, "threads": args.threads}
    cfg = harness.load_config(args.config, overrides)
    res = harness.run_experiment(cfg)
    print(f"{cfg.kind}: wrote {len(res.files)} files to {res.out}")
    if not res.ok:
        print(f"error: {res.message}", file=sys.stderr)
        return 1
    return 0


def _check_samples(args):
    if args.config is not None:
        cfg = harness.load_config(args.config, {"out": "."})
        constraint = harness.build_constraint(cfg, harness._target_dim(cfg))
    elif args.out is not None:
        constraint = harness.constraint_for_run(args.out)
    else:
        print("error: pass --out RUN_DIR or --config PATH", file=sys.stderr)
        return 2
    paths = list(args.paths)
    if not paths:
        if args.out is None:
            print("error: no sample files given", file=sys.stderr)
            return 2
        paths = sorted(args.out.glob("samples_*.csv")) + sorted(args.out.glob("reference.csv"))
    if not paths:
        print("error: no sample files found", file=sys.stderr)
        return 2
    counts = harness.check_samples(constraint, paths)
    for p, n in counts.items():
        print(f"{'ok  ' if n == 0 else 'FAIL'} {p}: {n} infeasible row(s)")
    return 0 if all(n == 0 for n in counts.values()) else 1


def _manifest(args):
    run_dir = args.run_dir or args.out
    if run_dir is None:
        print("error: pass a run directory", file=sys.stderr)
        return 2
    harness.print_manifest(run_dir)
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = _parser().parse_args(argv)
    try:
        if args.command in EXPERIMENTS:
            return _experiment(args)
        if args.command == "check-samples":
            return _check_samples(args)
        if args.command == "manifest":
            return _manifest(args)
        print(f"copied configs to {harness.copy_example_configs(args.dest)}")
        return 0
    except harness.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # surface module context without a traceback
        mod = type(exc).__module__.replace("skewlangevin.", "")
        print(f"error ({mod}.{type(exc).__name__}): {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
