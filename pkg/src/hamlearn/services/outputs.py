"""Write experiment results: series tables, trajectory files, summaries and models.

Every file set is written to a staging directory first and moved into
place only when all files are complete. A failed commit leaves no partial
outputs behind and puts back any files it was replacing.
"""

import json
import logging
import os
import shutil
import tempfile
from pathlib import Path
from typing import Any, Callable, Optional, Union

import numpy as np

from ..schemas.data import DataPairSet
from ..schemas.experiment import (
    ComparisonReport,
    ConvergenceStudy,
    ExperimentConfig,
    ExperimentReport,
)
from ..schemas.phase import Trajectory
from .files import write_pairs_file, write_rows, write_trajectory_file

logger = logging.getLogger(__name__)

SERIES_HEADER = ["time", "relative_error", "hamiltonian_true", "hamiltonian_learned", "deviation"]
CONVERGENCE_HEADER = [
    "step",
    "linf",
    "l2",
    "total_variation",
    "linf_order",
    "l2_order",
    "total_variation_order",
]

# Trajectory ids in the trajectories file.
TRUTH_ID, SP_ID, NONSP_ID = 0, 1, 2

Writer = Callable[[Path], Any]


def output_stem(cfg: ExperimentConfig) -> str:
    return f"{cfg.system}-{cfg.config_hash()}"


def _commit(directory: Union[str, Path], files: dict[str, Writer]) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".staging-", dir=directory))
    placed: list[tuple[Path, Optional[Path]]] = []
    try:
        for name, writer in files.items():
            writer(staging / name)
        for name in files:
            target = directory / name
            backup = None
            if target.exists():
                backup = staging / f".previous-{name}"
                os.replace(target, backup)
            placed.append((target, backup))
            os.replace(staging / name, target)
    except Exception:
        logger.error("writing outputs to %s failed; restoring previous files", directory)
        for target, backup in reversed(placed):
            if backup is not None and backup.exists():
                os.replace(backup, target)
            else:
                target.unlink(missing_ok=True)
        raise
    finally:
        shutil.rmtree(staging, ignore_errors=True)
    return [target for target, _ in placed]


def _write_json(payload: dict[str, Any]) -> Writer:
    def write(path: Path) -> None:
        path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")

    return write


def _write_text(text: str) -> Writer:
    def write(path: Path) -> None:
        path.write_text(text + "\n", encoding="utf-8")

    return write


def _series_rows(report: ExperimentReport) -> np.ndarray:
    return np.column_stack(
        [
            report.times,
            report.relative_error,
            report.hamiltonian_true,
            report.hamiltonian_learned,
            report.deviation,
        ]
    ).reshape(-1, len(SERIES_HEADER))


def _evaluation_trajectory(states: list[list[float]], step: float) -> Optional[Trajectory]:
    if not states:
        return None
    states_arr = np.asarray(states, dtype=float)
    return Trajectory(times=np.arange(states_arr.shape[0]) * step, states=states_arr)


def report_summary(report: ExperimentReport) -> dict[str, Any]:
    """JSON-ready report: the configuration echo, all series and the scalar metrics.

    Timings stay out so that reruns produce identical files.
    """
    summary = report.model_dump(mode="json", by_alias=True)
    summary["config_hash"] = report.config.config_hash()
    summary["mean_relative_error"] = report.mean_relative_error
    summary["max_deviation"] = report.max_deviation
    return summary


def _report_files(report: ExperimentReport, extra_trajectories=()) -> dict[str, Writer]:
    cfg = report.config
    stem = output_stem(cfg)
    trajectories = [
        (TRUTH_ID, _evaluation_trajectory(report.truth_states, cfg.eval_step)),
        (SP_ID, _evaluation_trajectory(report.learned_states, cfg.eval_step)),
        *extra_trajectories,
    ]
    trajectories = [(i, t) for i, t in trajectories if t is not None]
    dim_d = len(cfg.test_initial_state) // 2
    return {
        f"{stem}-series.csv": lambda p: write_rows(p, SERIES_HEADER, _series_rows(report)),
        f"{stem}-trajectories.csv": lambda p: write_trajectory_file(
            p, [t for _, t in trajectories], ids=[i for i, _ in trajectories], dim_d=dim_d
        ),
        f"{stem}-model.json": _write_text(report.model.model_dump_json(indent=2)),
    }


def emit_outputs(
    report: ExperimentReport,
    directory: Union[str, Path],
    pairs: Optional[DataPairSet] = None,
) -> list[Path]:
    """Write the series table, evaluation trajectories, summary and model of one run.

    The training pairs are written too when given.
    """
    files = _report_files(report)
    if pairs is not None:
        files[f"{output_stem(report.config)}-pairs.csv"] = lambda p: write_pairs_file(p, pairs)
    files[f"{output_stem(report.config)}-summary.json"] = _write_json(report_summary(report))
    return _commit(directory, files)


def emit_comparison(comparison: ComparisonReport, directory: Union[str, Path]) -> list[Path]:
    """Write the SP run outputs plus the baseline's series, trajectory and model."""
    report = comparison.sp
    cfg = report.config
    stem = output_stem(cfg)
    nonsp = (NONSP_ID, _evaluation_trajectory(comparison.nonsp_states, cfg.eval_step))
    files = _report_files(report, extra_trajectories=[nonsp])
    n = len(comparison.nonsp_relative_error)
    nonsp_rows = np.column_stack([report.times[:n], comparison.nonsp_relative_error])
    summary = report_summary(report)
    summary["baseline"] = comparison.model_dump(mode="json", exclude={"sp"})
    summary["baseline"]["nonsp_mean_relative_error"] = comparison.nonsp_mean_relative_error
    files[f"{stem}-nonsp-series.csv"] = lambda p: write_rows(
        p, ["time", "relative_error"], nonsp_rows.reshape(-1, 2)
    )
    files[f"{stem}-nonsp-model.json"] = _write_text(
        comparison.nonsp_model.model_dump_json(indent=2)
    )
    files[f"{stem}-summary.json"] = _write_json(summary)
    return _commit(directory, files)


def emit_convergence(
    payload: tuple[ExperimentConfig, ConvergenceStudy], directory: Union[str, Path]
) -> list[Path]:
    """Write the convergence table (missing orders as nan) and its JSON form."""
    cfg, study = payload
    stem = f"{output_stem(cfg)}-convergence"

    def order(values):
        return [np.nan if v is None else v for v in values]

    rows = np.column_stack(
        [
            study.steps,
            study.linf,
            study.l2,
            study.total_variation,
            order(study.linf_order),
            order(study.l2_order),
            order(study.total_variation_order),
        ]
    )
    summary = study.model_dump(mode="json")
    summary["config"] = cfg.model_dump(mode="json")
    return _commit(
        directory,
        {
            f"{stem}.csv": lambda p: write_rows(p, CONVERGENCE_HEADER, rows),
            f"{stem}.json": _write_json(summary),
        },
    )
