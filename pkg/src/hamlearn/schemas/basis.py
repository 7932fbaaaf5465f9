"""Pydantic schemas for the polynomial basis layer."""

import math
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator

DomainPolicy = Literal["strict", "clamp", "extrapolate"]


class DomainBox(BaseModel):
    """Axis-aligned hypercube D = [a_1, b_1] x ... x [a_2d, b_2d] in phase space."""

    model_config = ConfigDict(frozen=True)

    lower: tuple[float, ...] = Field(description="Lower bounds a_i, p-block then q-block")
    upper: tuple[float, ...] = Field(description="Upper bounds b_i, p-block then q-block")

    @model_validator(mode="after")
    def _check_bounds(self) -> "DomainBox":
        if len(self.lower) != len(self.upper):
            raise ValueError("lower and upper must have the same length")
        if len(self.lower) == 0 or len(self.lower) % 2:
            raise ValueError("phase-space box needs an even, positive dimension")
        for i, (a, b) in enumerate(zip(self.lower, self.upper)):
            if not (math.isfinite(a) and math.isfinite(b)):
                raise ValueError(f"bounds of coordinate {i} must be finite")
            if not a < b:
                raise ValueError(f"coordinate {i}: lower bound {a} must be below upper bound {b}")
        return self

    @classmethod
    def cube(cls, low: float, high: float, dims: int) -> "DomainBox":
        """Box with identical bounds on every coordinate."""
        return cls(lower=(low,) * dims, upper=(high,) * dims)

    @property
    def dims(self) -> int:
        return len(self.lower)

    @property
    def dim_d(self) -> int:
        return len(self.lower) // 2

    @property
    def lower_array(self) -> np.ndarray:
        return np.asarray(self.lower, dtype=float)

    @property
    def upper_array(self) -> np.ndarray:
        return np.asarray(self.upper, dtype=float)

    @property
    def extent(self) -> np.ndarray:
        return self.upper_array - self.lower_array

    @property
    def volume(self) -> float:
        return float(np.prod(self.extent))

    def contains(self, points: np.ndarray, rtol: float = 0.0) -> np.ndarray:
        """Boolean mask over leading axes: point lies in the box (widened by rtol * extent)."""
        x = np.asarray(points, dtype=float)
        slack = rtol * self.extent
        inside = (x >= self.lower_array - slack) & (x <= self.upper_array + slack)
        return np.all(inside, axis=-1)


class MultiIndex(BaseModel):
    """Exponent tuple i = (i_1, ..., i_2d) of a tensor-product basis function."""

    model_config = ConfigDict(frozen=True)

    exponents: tuple[int, ...] = Field(description="Per-coordinate polynomial degrees")

    @model_validator(mode="after")
    def _check_exponents(self) -> "MultiIndex":
        if any(e < 0 for e in self.exponents):
            raise ValueError("exponents must be nonnegative")
        return self

    @computed_field  # type: ignore[prop-decorator]
    @property
    def total(self) -> int:
        return sum(self.exponents)


class BasisDescriptor(BaseModel):
    """Serializable description of a total-degree Legendre basis."""

    degree: int = Field(ge=0, description="Maximal total degree n")
    dims: int = Field(gt=0, description="Number of phase-space coordinates 2d")
    lower: list[float] = Field(description="Domain lower bounds")
    upper: list[float] = Field(description="Domain upper bounds")
    ordering: Literal["graded-lex"] = Field(default="graded-lex", description="Index ordering tag")
    family: Literal["legendre"] = Field(default="legendre", description="Univariate family")
    domain_policy: DomainPolicy = Field(default="strict", description="Out-of-domain handling")


class StabilityDiagnostic(BaseModel):
    """Outcome of the K_N <= lambda K / log K stability check."""

    model_config = ConfigDict(populate_by_name=True)

    kn_estimate: float = Field(ge=0, description="Estimated K_N")
    sample_count: int = Field(gt=1, description="Number of data pairs K")
    r: float = Field(gt=0, description="Probability exponent r")
    lambda_: float = Field(gt=0, alias="lambda", description="(3 log(3/2) - 1) / (2 + 2r)")
    threshold: float = Field(description="lambda * K / log K")
    satisfied: bool = Field(description="Whether kn_estimate <= threshold")
    delta: float = Field(default=0.5, description="Deviation level used for beta_delta")
    beta_delta: float = Field(gt=0, description="(1 + delta) log(1 + delta) - delta")
    dim_v: Optional[int] = Field(default=None, description="Gradient space dimension N")
    failure_probability_bound: Optional[float] = Field(
        default=None, description="2 N exp(-beta_delta K / K_N)"
    )
    kn_empirical: Optional[float] = Field(
        default=None, description="K_N restricted to the training points"
    )

    @model_validator(mode="after")
    def _check_consistency(self) -> "StabilityDiagnostic":
        if self.satisfied != (self.kn_estimate <= self.threshold):
            raise ValueError("satisfied flag disagrees with kn_estimate <= threshold")
        return self
