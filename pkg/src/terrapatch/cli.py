"""Command-line entry point: one subcommand per pipeline stage plus ``all``.

Exit codes: 0 success, 1 topology validation failure, 2 I/O errors.
"""

from __future__ import annotations

import argparse
import sys

from .pipeline import (
    STAGES,
    PipelineConfig,
    PipelineError,
    ValidationFailure,
    run_all,
    run_stage,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="terrapatch",
        description="Build terrain-derivative patch datasets and evaluate multilabel models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for stage in list(STAGES) + ["all"]:
        p = sub.add_parser(stage, help=f"run the {stage} stage" if stage != "all" else "run every stage")
        p.add_argument("--config", required=True, help="path to the INI run configuration")
        p.add_argument("--seed", type=int, default=None, help="override the split seed")
        p.add_argument("--resume", action="store_true", help="skip stages whose inputs are unchanged")
        p.add_argument("--jobs", type=int, default=1, help="parallel workers for patch extraction")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = PipelineConfig.load(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.command == "all":
            run_all(cfg, resume=args.resume, jobs=args.jobs)
        else:
            run_stage(args.command, cfg, resume=args.resume, jobs=args.jobs)
    except ValidationFailure as exc:
        print(f"validation failed:\n{exc}", file=sys.stderr)
        return 1
    except (OSError, FileNotFoundError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
