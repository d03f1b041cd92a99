"""Command line front end: run sweeps, compare strategies, self-test."""

from __future__ import annotations

import argparse
import random
import sys
from dataclasses import replace

from . import selftest
from .harness import (ExperimentConfig, compare_strategies, emit_csv,
                      format_csv, parse_config_file, run_sweep)


def _add_common_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="key = value config file")
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.add_argument("--seed", type=int, help="override base_seed")
    p.add_argument("--iterations", type=int, help="override iterations")
    p.add_argument("--topology", choices=["one-rn", "multi-rn"])
    p.add_argument("--flavor", choices=["gidnc", "sidnc"])
    p.add_argument("--solver", choices=["mwc", "mvs"])
    p.add_argument("--strategy", choices=["worlt", "unit", "delivery", "popularity"])
    p.add_argument("--worlt-n", type=int, dest="worlt_n")
    p.add_argument("--workers", type=int, default=1,
                   help="parallel iteration workers (results identical at any count)")


def _load_config(args) -> ExperimentConfig:
    cfg = parse_config_file(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["base_seed"] = args.seed
    for name in ("iterations", "topology", "flavor", "solver", "strategy", "worlt_n"):
        val = getattr(args, name, None)
        if val is not None:
            overrides[name] = val
    return replace(cfg, **overrides) if overrides else cfg


def _emit(rows, out_path) -> None:
    if out_path:
        emit_csv(rows, out_path)
        print(f"wrote {out_path}")
    else:
        sys.stdout.write(format_csv(rows))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="idnc-sim",
        description="Relay-assisted IDNC recovery simulator (completion-delay experiments)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="sweep completion delay over M")
    _add_common_overrides(p_run)

    p_cmp = sub.add_parser("compare", help="paired-seed comparison of strategies")
    _add_common_overrides(p_cmp)
    p_cmp.add_argument("--strategies", required=True,
                       help="comma-separated: worlt,unit,delivery,popularity")

    sub.add_parser("selftest", help="run the fast invariant checks")

    args = parser.parse_args(argv)

    if args.command == "selftest":
        return selftest.run(rng=random.Random(0))

    cfg = _load_config(args)
    if args.command == "run":
        rows = run_sweep(cfg, workers=args.workers)
    else:
        strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
        rows = compare_strategies(cfg, strategies, workers=args.workers)
    _emit(rows, args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
