"""Command-line entry points: `nlcgbench run` and `nlcgbench sweep`."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .errors import ConfigError, DatasetFormatError
from .harness import load_config, run, sweep


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nlcgbench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a single training run")
    run_p.add_argument("--config", required=True, help="path to a key = value config file")
    run_p.add_argument("--seed", type=int, default=None, help="override the config seed")
    run_p.add_argument("--out", default=".", help="directory for the run CSV")

    sweep_p = sub.add_parser("sweep", help="grid of runs over one axis")
    sweep_p.add_argument("--config", required=True, help="path to the base config file")
    sweep_p.add_argument("--axis", required=True, help="config key to vary (or batch_size)")
    sweep_p.add_argument("--values", required=True, help="comma-separated axis values")
    sweep_p.add_argument(
        "--optimizers", required=True, help="comma-separated optimizer names"
    )
    sweep_p.add_argument("--seeds", required=True, help="comma-separated integer seeds")
    sweep_p.add_argument("--out", default=".", help="directory for run CSVs and summary.csv")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if args.command == "run":
            if args.seed is not None:
                config = replace(config, seed=args.seed)
            result = run(config, out_dir=args.out)
            print(
                f"run complete: optimizer={result.optimizer} steps={result.steps_logged} "
                f"final_loss={result.final_loss:.6g} diverged={str(result.diverged).lower()} "
                f"csv={result.csv_path}"
            )
        else:
            summary = sweep(
                config,
                axis=args.axis,
                values=[v.strip() for v in args.values.split(",") if v.strip()],
                optimizers=[o.strip() for o in args.optimizers.split(",") if o.strip()],
                seeds=[int(s) for s in args.seeds.split(",") if s.strip()],
                out_dir=args.out,
            )
            print(f"sweep complete: summary={summary}")
    except (ConfigError, DatasetFormatError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
