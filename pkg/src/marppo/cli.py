"""Command-line entry point: train one configuration over one or more seeds."""

from __future__ import annotations

import argparse
import sys

from marppo.config import VARIANTS, parse_config
from marppo.envs import ENV_NAMES
from marppo.harness import run_experiment
from marppo.nn import ContractError, NumericError


def _seed_list(raw: str) -> list[int]:
    try:
        seeds = [int(tok) for tok in raw.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {raw!r}")
    if not seeds:
        raise argparse.ArgumentTypeError("expected at least one seed")
    return seeds


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="marppo",
        description="Train cooperative multi-agent policies with a recurrent "
                    "shared critic and write per-seed telemetry CSVs.")
    p.add_argument("--config", metavar="FILE",
                   help="key=value config file; flags below override it")
    p.add_argument("--env", choices=ENV_NAMES, help="environment name")
    p.add_argument("--variant", choices=VARIANTS, help="architecture/estimator variant")
    p.add_argument("--beta", type=float, help="cross-agent reward weight in [0, 1]")
    p.add_argument("--seed", type=int, help="seed for a single-seed run (default from config: 0)")
    p.add_argument("--seeds", type=_seed_list, metavar="LIST",
                   help="comma-separated seed list, e.g. 0,1,2; overrides --seed")
    p.add_argument("--iterations", type=int, help="training iterations per seed")
    p.add_argument("--out", required=True, metavar="DIR", help="output directory")
    p.add_argument("--plot", action="store_true", help="write curves.svg of the returns")
    p.add_argument("--parallel-seeds", action="store_true",
                   help="run seeds concurrently (per-seed files are independent)")
    p.add_argument("--quiet", action="store_true", help="suppress progress lines")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {key: value for key, value in (
        ("env", args.env),
        ("variant", args.variant),
        ("beta", args.beta),
        ("seed", args.seed),
        ("iterations", args.iterations),
    ) if value is not None}
    try:
        config = parse_config(args.config, overrides)
        seeds = args.seeds if args.seeds is not None else [config.seed]
        log = None if args.quiet else print
        manifest = run_experiment(config, args.out, seeds, log=log, plot=args.plot,
                                  parallel_seeds=args.parallel_seeds)
    except (ContractError, NumericError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if not args.quiet:
        print(f"wrote {manifest.out_dir}/manifest.json "
              f"({len(seeds)} seed{'s' if len(seeds) != 1 else ''}, "
              f"{config.iterations} iterations)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
