"""Command-line entry point: ``xainudge <stage> --config ... [--seed N]``.

Exit codes: 0 success, 2 config error, 3 stage failure.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import load_config, recipe_names
from .exceptions import ConfigError, MissingArtifactError, SchemaError, StageError
from .pipeline import STAGES, Run, format_summary

EXIT_OK, EXIT_CONFIG, EXIT_STAGE = 0, 2, 3

HELP = {
    "gen-data": "generate (or load) the dataset and its train/calibration/eval split",
    "train-ai": "train the random-forest AI model",
    "explain": "compute Shapley and LIME explanations for calibration and eval instances",
    "sim-log": "simulate behavior logs from a decision-maker population",
    "train-behavior": "fit the behavior model (with k-fold CV)",
    "manipulate": "assign targets and optimize manipulated explanations",
    "evaluate": "evaluate a fresh population under each explanation condition",
    "report": "print the summary table and write metrics_long.csv",
    "run": "all stages in order",
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help=f"YAML config path or bundled recipe ({', '.join(recipe_names())})")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--out-dir", default="runs", help="parent of run directories (default: runs)")
    common.add_argument("--threads", type=int, default=1, help="worker threads within a stage")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="xainudge", description="Explanation-manipulation experiments on simulated decision makers.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*STAGES, "run"):
        p = sub.add_parser(name, parents=[common], help=HELP[name])
        if name == "report":
            p.add_argument("--run-dir", help="read summary.json from this run directory instead of --config")
    return parser


def _report_from_dir(run_dir):
    path = Path(run_dir) / "summary.json"
    if not path.exists():
        raise MissingArtifactError(path, "evaluate")
    print(format_summary(json.loads(path.read_text())))


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "report" and args.run_dir and not args.config:
            _report_from_dir(args.run_dir)
            return EXIT_OK
        if not args.config:
            raise ConfigError("--config is required")
        config = load_config(args.config).with_seed(args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MissingArtifactError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE

    run = Run(config, args.out_dir, args.threads)
    stages = STAGES if args.command == "run" else (args.command,)
    try:
        for stage in stages:
            out = run.run_stage(stage)
            if stage == "report":
                print(out)
    except (StageError, MissingArtifactError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    print(f"run directory: {run.dir}", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
