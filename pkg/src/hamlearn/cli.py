"""Command-line entry point: run, converge, compare and presets."""

import argparse
import json
import logging
import sys
from typing import Optional, Sequence

from dotenv import load_dotenv

from .config import Settings, configure_logging, load_experiment_config
from .errors import HamlearnError
from .presets import PRESETS
from .schemas.experiment import ComparisonReport, ExperimentReport
from .services.experiment import DEFAULT_STEPS, ExperimentService
from .services.outputs import output_stem

logger = logging.getLogger(__name__)


def parse_steps(text: str) -> list[float]:
    """Comma-separated RK4 steps, e.g. "8e-3,4e-3,2e-3"."""
    try:
        steps = [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from None
    if not steps:
        raise argparse.ArgumentTypeError("at least one step is required")
    return steps


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hamlearn",
        description="Learn Hamiltonians from trajectory data and evaluate the reconstruction.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat TOML experiment file")
    common.add_argument("--preset", help="named preset used as the base configuration")
    common.add_argument("--seed", type=int, help="root random seed")
    common.add_argument("--out", help="output directory")
    common.add_argument(
        "--trajectories", metavar="PATH", help="trajectory file used as training data"
    )
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", parents=[common], help="run one experiment")
    run.add_argument("--emit-pairs", action="store_true", help="also write the training pairs")
    converge = sub.add_parser("converge", parents=[common], help="RK4 step convergence study")
    converge.add_argument(
        "--steps",
        type=parse_steps,
        default=list(DEFAULT_STEPS),
        help="comma-separated, strictly decreasing RK4 steps",
    )
    sub.add_parser("compare", parents=[common], help="SP model against the non-SP baseline")
    sub.add_parser("presets", help="list the named presets")
    return parser


def run_summary(report: ExperimentReport) -> dict:
    summary = {
        "system": report.config.system,
        "config_hash": report.config.config_hash(),
        "pair_count": report.pair_count,
        "mean_relative_error": report.mean_relative_error,
        "max_deviation": report.max_deviation,
        "diverged": report.diverged,
        "diverged_time": report.diverged_time,
        "alignment_constant": report.alignment_constant,
    }
    if report.diagnostics is not None:
        summary["diagnostics"] = report.diagnostics.model_dump()
    if report.stability is not None:
        summary["stability"] = report.stability.model_dump(by_alias=True)
    return summary


def comparison_summary(comparison: ComparisonReport) -> dict:
    return {
        "sp": run_summary(comparison.sp),
        "nonsp_mean_relative_error": comparison.nonsp_mean_relative_error,
        "nonsp_diverged": comparison.nonsp_diverged,
        "sp_symplectic_defect": comparison.sp_symplectic_defect,
        "nonsp_symplectic_defect": comparison.nonsp_symplectic_defect,
    }


def _print(payload: dict) -> None:
    print(json.dumps(payload, indent=2))


def _presets() -> int:
    for name in PRESETS:
        cfg = load_experiment_config(preset=name)
        line = {
            "name": name,
            "system": cfg.system,
            "degree": cfg.degree,
            "trajectories": cfg.trajectories,
            "steps_per_burst": cfg.steps_per_burst,
        }
        print(json.dumps(line))
    return 0


def _dispatch(args: argparse.Namespace) -> int:
    settings = Settings.from_env(output_dir=args.out)
    configure_logging(settings, verbose=args.verbose)
    cfg = load_experiment_config(
        args.config,
        args.preset,
        {
            "seed": args.seed,
            "output_dir": args.out,
            "trajectory_file": args.trajectories,
            "emit_pairs": getattr(args, "emit_pairs", False) or None,
        },
    )
    service = ExperimentService(settings)
    logger.info("%s %s (%s)", args.command, cfg.system, output_stem(service.prepare(cfg)))

    if args.command == "run":
        _print(run_summary(service.run(cfg)))
    elif args.command == "converge":
        _print(service.converge(cfg, args.steps).model_dump())
    elif args.command == "compare":
        payload = comparison_summary(service.compare(cfg))
        if cfg.baseline_no_filter:
            filtering = service.compare_filter(cfg)
            payload["filtered_mean_relative_error"] = filtering.filtered.mean_relative_error
            payload["unfiltered_mean_relative_error"] = filtering.unfiltered.mean_relative_error
        _print(payload)
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI; returns the process exit code (0, 2 or 3)."""
    load_dotenv()
    args = build_parser().parse_args(argv)
    if args.command == "presets":
        return _presets()
    try:
        return _dispatch(args)
    except HamlearnError as exc:
        logger.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
