"""Pydantic schemas for trajectory bursts and data-pair sets."""

from typing import Iterator, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .phase import Trajectory

DerivativeMethod = Literal["central_diff", "lsfit", "exact"]


def _readonly(values, ndim: int, name: str, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


class BurstPlan(BaseModel):
    """How many short trajectories to generate and how finely."""

    trajectories: int = Field(ge=1, description="Number of bursts M")
    steps_per_burst: int = Field(ge=1, description="Observation intervals per burst")
    dt: float = Field(gt=0, description="Observation spacing")
    fine_ratio: int = Field(default=10_000, ge=1, description="Reference substeps per interval")
    seed: int = Field(default=0, ge=0, description="Random seed")

    @property
    def substep(self) -> float:
        return self.dt / self.fine_ratio


class NoiseSpec(BaseModel):
    """Multiplicative state noise x -> x (1 + eta), eta ~ U[-amplitude, amplitude]."""

    amplitude: float = Field(default=0.0, ge=0, description="Maximal relative perturbation")
    kind: Literal["multiplicative_uniform"] = Field(
        default="multiplicative_uniform", description="Noise model"
    )


class DenoiseConfig(BaseModel):
    """Least-squares polynomial-in-time fit used to de-noise and differentiate bursts."""

    degree: int = Field(default=5, ge=1, description="Polynomial degree Q")
    apply_filter: bool = Field(default=True, description="Replace states by the fitted values")


class BurstSet(BaseModel):
    """Bursts sharing one time grid, stacked as states[m, j, :]."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    times: np.ndarray = Field(description="Common sample times, shape (J+1,)")
    states: np.ndarray = Field(description="Stacked states, shape (M, J+1, 2d)")
    trajectory_ids: np.ndarray = Field(description="Original burst index of each row")
    dropped: tuple[int, ...] = Field(default=(), description="Burst ids removed after blow-up")
    exited: tuple[int, ...] = Field(default=(), description="Burst ids that left the domain")

    @field_validator("times", mode="before")
    @classmethod
    def _coerce_times(cls, value) -> np.ndarray:
        times = _readonly(value, 1, "times")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        return times

    @field_validator("states", mode="before")
    @classmethod
    def _coerce_states(cls, value) -> np.ndarray:
        return _readonly(value, 3, "states")

    @field_validator("trajectory_ids", mode="before")
    @classmethod
    def _coerce_ids(cls, value) -> np.ndarray:
        return _readonly(value, 1, "trajectory_ids", dtype=np.int64)

    @model_validator(mode="after")
    def _check_shapes(self) -> "BurstSet":
        m, n, _ = self.states.shape
        if n != self.times.shape[0]:
            raise ValueError("states and times disagree on the number of samples")
        if self.trajectory_ids.shape[0] != m:
            raise ValueError("one trajectory id per burst is required")
        return self

    @classmethod
    def from_trajectories(cls, trajectories: list[Trajectory]) -> "BurstSet":
        """Stack trajectories that share a time grid."""
        if not trajectories:
            raise ValueError("at least one trajectory is required")
        times = trajectories[0].times
        for traj in trajectories[1:]:
            if traj.times.shape != times.shape or not np.array_equal(traj.times, times):
                raise ValueError("trajectories must share one time grid")
        return cls(
            times=times,
            states=np.stack([t.states for t in trajectories]),
            trajectory_ids=np.arange(len(trajectories)),
        )

    def __len__(self) -> int:
        return int(self.states.shape[0])

    def trajectories(self) -> Iterator[Trajectory]:
        for m in range(len(self)):
            yield self.trajectory(m)

    @property
    def dims(self) -> int:
        return int(self.states.shape[2])

    def trajectory(self, m: int) -> Trajectory:
        return Trajectory(times=self.times, states=self.states[m])

    def with_states(self, states: np.ndarray) -> "BurstSet":
        return self.model_copy(update={"states": _readonly(states, 3, "states")})


class PairProvenance(BaseModel):
    """Where a data-pair set came from."""

    method: DerivativeMethod = Field(description="Time-derivative estimator")
    bursts: int = Field(ge=0, description="Bursts that contributed pairs")
    samples_per_burst: int = Field(ge=0, description="Samples per burst")
    dropped_bursts: list[int] = Field(default_factory=list, description="Blown-up burst ids")
    exited_bursts: list[int] = Field(default_factory=list, description="Burst ids leaving D")
    restricted: bool = Field(default=False, description="Whether pairs outside D were removed")
    removed_outside: int = Field(default=0, ge=0, description="Pairs removed by restriction")
    digest: str = Field(default="", description="SHA-256 of the pair arrays")


class DataPairSet(BaseModel):
    """The K pairs {x_k, xdot_k} that feed the least-squares problem."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    states: np.ndarray = Field(description="x_k, shape (K, 2d)")
    derivatives: np.ndarray = Field(description="xdot_k, shape (K, 2d)")
    trajectory_ids: np.ndarray = Field(description="Burst id of each pair")
    times: np.ndarray = Field(description="Sample time of each pair within its burst")
    tau_bound: Optional[float] = Field(default=None, description="max_k |xdot_k - f(x_k)|")
    provenance: PairProvenance = Field(description="Burst metadata")

    @field_validator("states", "derivatives", mode="before")
    @classmethod
    def _coerce_matrix(cls, value) -> np.ndarray:
        return _readonly(value, 2, "pair array")

    @field_validator("times", mode="before")
    @classmethod
    def _coerce_times(cls, value) -> np.ndarray:
        return _readonly(value, 1, "times")

    @field_validator("trajectory_ids", mode="before")
    @classmethod
    def _coerce_ids(cls, value) -> np.ndarray:
        return _readonly(value, 1, "trajectory_ids", dtype=np.int64)

    @model_validator(mode="after")
    def _check_pairs(self) -> "DataPairSet":
        k = self.states.shape[0]
        if self.derivatives.shape != self.states.shape:
            raise ValueError("states and derivatives must have the same shape")
        if self.trajectory_ids.shape[0] != k or self.times.shape[0] != k:
            raise ValueError("one trajectory id and time per pair is required")
        if not (np.all(np.isfinite(self.states)) and np.all(np.isfinite(self.derivatives))):
            raise ValueError("pair entries must be finite")
        return self

    @property
    def count(self) -> int:
        return int(self.states.shape[0])

    @property
    def dims(self) -> int:
        return int(self.states.shape[1])
