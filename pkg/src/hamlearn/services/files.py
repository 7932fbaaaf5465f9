"""Delimited-text trajectory and pair files.

One row per sample: trajectory_id, time, the 2d state entries (p-block then
q-block) and optionally 2d derivative entries. The first row is a header.
"""

import logging
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from ..errors import ArgumentError, DimensionError
from ..schemas.data import DataPairSet
from ..schemas.phase import Trajectory

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def trajectory_header(dim_d: int, derivatives: bool = False) -> list[str]:
    columns = ["trajectory_id", "time"]
    columns += [f"p{i}" for i in range(1, dim_d + 1)]
    columns += [f"q{i}" for i in range(1, dim_d + 1)]
    if derivatives:
        columns += [f"dp{i}" for i in range(1, dim_d + 1)]
        columns += [f"dq{i}" for i in range(1, dim_d + 1)]
    return columns


def write_rows(path: PathLike, header: Sequence[str], rows: np.ndarray) -> Path:
    """Write rows with a header line; an empty array gives a header-only file."""
    path = Path(path)
    rows = np.asarray(rows, dtype=float).reshape(-1, len(header))
    np.savetxt(path, rows, fmt="%.17g", delimiter=",", header=",".join(header), comments="")
    return path


def write_trajectory_file(
    path: PathLike,
    trajectories: Sequence[Trajectory],
    ids: Optional[Sequence[int]] = None,
    derivatives: Optional[Sequence[np.ndarray]] = None,
    dim_d: Optional[int] = None,
) -> Path:
    """Write trajectories in the interchange format.

    Args:
        path: Destination file
        trajectories: Trajectories to write, in order
        ids: Trajectory ids (default 0, 1, ...)
        derivatives: Optional per-trajectory derivative arrays, same shapes as the states
        dim_d: Degrees of freedom; required only when ``trajectories`` is empty
    """
    if ids is None:
        ids = range(len(trajectories))
    if len(ids) != len(trajectories):
        raise ArgumentError("one id per trajectory is required")
    if trajectories:
        dim_d = trajectories[0].dim_d
    if dim_d is None:
        raise ArgumentError("dim_d is required to write an empty trajectory file")
    blocks = []
    for k, (tid, traj) in enumerate(zip(ids, trajectories)):
        if traj.dim_d != dim_d:
            raise DimensionError("all trajectories in one file must share d")
        parts = [np.full((len(traj), 1), float(tid)), traj.times[:, None], traj.states]
        if derivatives is not None:
            parts.append(np.asarray(derivatives[k], dtype=float).reshape(traj.states.shape))
        blocks.append(np.hstack(parts))
    header = trajectory_header(dim_d, derivatives is not None)
    rows = np.vstack(blocks) if blocks else np.empty((0, len(header)))
    return write_rows(path, header, rows)


def write_pairs_file(path: PathLike, pairs: DataPairSet) -> Path:
    """Write a pair set, one row per pair, with derivative columns."""
    ids = pairs.trajectory_ids[:, None].astype(float)
    rows = np.hstack([ids, pairs.times[:, None], pairs.states, pairs.derivatives])
    return write_rows(path, trajectory_header(pairs.dims // 2, derivatives=True), rows)


def _parse_header(line: str) -> tuple[int, bool]:
    columns = [c.strip() for c in line.split(",")]
    if columns[:2] != ["trajectory_id", "time"]:
        raise ArgumentError("header must start with trajectory_id,time")
    width = len(columns) - 2
    for dim_d, has_derivs in ((width // 2, False), (width // 4, True)):
        if dim_d > 0 and columns == trajectory_header(dim_d, has_derivs):
            return dim_d, has_derivs
    raise ArgumentError(f"unrecognised column layout: {line.strip()}")


def read_trajectory_file(
    path: PathLike,
) -> tuple[list[Trajectory], list[int], Optional[list[np.ndarray]]]:
    """Read a trajectory file, grouping rows by trajectory_id in order of first appearance.

    Returns:
        Trajectories, their ids, and per-trajectory derivative arrays when the
        file carries derivative columns (else None)
    """
    path = Path(path)
    with path.open("r", encoding="utf-8") as handle:
        dim_d, has_derivs = _parse_header(handle.readline())
        data = np.loadtxt(handle, delimiter=",", ndmin=2)
    width = 2 + (4 if has_derivs else 2) * dim_d
    if data.size == 0:
        return [], [], ([] if has_derivs else None)
    if data.shape[1] != width:
        raise ArgumentError(f"{path}: expected {width} columns, got {data.shape[1]}")
    ids = data[:, 0].astype(np.int64)
    order = list(dict.fromkeys(ids.tolist()))
    trajectories, derivatives = [], []
    for tid in order:
        rows = data[ids == tid]
        trajectories.append(Trajectory(times=rows[:, 1], states=rows[:, 2 : 2 + 2 * dim_d]))
        if has_derivs:
            derivatives.append(rows[:, 2 + 2 * dim_d :])
    logger.debug("read %d trajectories from %s", len(trajectories), path)
    return trajectories, order, (derivatives if has_derivs else None)
