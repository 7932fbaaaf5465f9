"""Pydantic schemas for phase-space states, trajectories and Hamiltonian systems."""

import math
from typing import Callable, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .basis import DomainBox

VectorField = Callable[[np.ndarray], np.ndarray]
ScalarField = Callable[[np.ndarray], np.ndarray]


def _frozen_array(values, ndim: int, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


class StateVector(BaseModel):
    """Point u = (p, q) in phase space R^{2d}, momenta first."""

    model_config = ConfigDict(frozen=True)

    values: tuple[float, ...] = Field(description="2d entries: p-block then q-block")
    dim_d: int = Field(gt=0, description="Number of degrees of freedom d")

    @model_validator(mode="after")
    def _check_values(self) -> "StateVector":
        if len(self.values) != 2 * self.dim_d:
            raise ValueError(f"expected {2 * self.dim_d} entries, got {len(self.values)}")
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("state entries must be finite")
        return self

    @classmethod
    def from_array(cls, values) -> "StateVector":
        arr = np.asarray(values, dtype=float).ravel()
        if arr.size == 0 or arr.size % 2:
            raise ValueError("a phase-space state needs an even, positive number of entries")
        return cls(values=tuple(float(v) for v in arr), dim_d=arr.size // 2)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    @property
    def p(self) -> np.ndarray:
        return self.array[: self.dim_d]

    @property
    def q(self) -> np.ndarray:
        return self.array[self.dim_d :]


class Trajectory(BaseModel):
    """Sampled solution u(t; u0) on strictly increasing times."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    times: np.ndarray = Field(description="Strictly increasing sample times")
    states: np.ndarray = Field(description="States, shape (len(times), 2d)")

    @field_validator("times", mode="before")
    @classmethod
    def _coerce_times(cls, value) -> np.ndarray:
        times = _frozen_array(value, 1, "times")
        if times.size == 0:
            raise ValueError("a trajectory needs at least one sample")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        return times

    @field_validator("states", mode="before")
    @classmethod
    def _coerce_states(cls, value) -> np.ndarray:
        return _frozen_array(value, 2, "states")

    @model_validator(mode="after")
    def _check_shapes(self) -> "Trajectory":
        if self.states.shape[0] != self.times.shape[0]:
            raise ValueError("states and times must have the same length")
        if self.states.shape[1] == 0 or self.states.shape[1] % 2:
            raise ValueError("states must have an even, positive width")
        return self

    def __len__(self) -> int:
        return int(self.times.shape[0])

    @property
    def dim_d(self) -> int:
        return self.states.shape[1] // 2

    @property
    def origin(self) -> StateVector:
        return StateVector.from_array(self.states[0])

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


class IntegratorConfig(BaseModel):
    """Fixed-step time integration settings."""

    step: float = Field(gt=0, description="Time step tau")
    scheme: Literal["rk4"] = Field(default="rk4", description="Integration scheme")


class HamiltonianSystem(BaseModel):
    """Canonical system du/dt = J^{-1} grad H(u) with vectorised callables."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    name: str = Field(description="System identifier")
    dim_d: int = Field(gt=0, description="Degrees of freedom d")
    hamiltonian: ScalarField = Field(description="H, maps (..., 2d) to (...)")
    rhs: VectorField = Field(description="J^{-1} grad H, maps (..., 2d) to (..., 2d)")
    default_domain: Optional[DomainBox] = Field(default=None, description="Computational domain D")
    parameters: dict[str, float] = Field(default_factory=dict, description="Physical constants")

    @model_validator(mode="after")
    def _check_domain(self) -> "HamiltonianSystem":
        if self.default_domain is not None and self.default_domain.dim_d != self.dim_d:
            raise ValueError("default domain dimension does not match the system")
        return self
