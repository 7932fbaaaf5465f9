"""Pydantic schemas for learned models and their diagnostics."""

from typing import Literal, Optional

from pydantic import BaseModel, Field, model_validator

from .basis import BasisDescriptor


def dense_gauss_points(degree: int) -> int:
    """Gauss points per axis for L2 errors of non-polynomial gradients."""
    return 4 * (degree + 1)


class SolverReport(BaseModel):
    """Summary of a symmetric eigendecomposition pseudo-inverse solve."""

    rank: int = Field(ge=0, description="Number of retained eigenvalues")
    size: int = Field(ge=0, description="Matrix dimension")
    eigenvalue_min: float = Field(description="Smallest eigenvalue")
    eigenvalue_max: float = Field(description="Largest eigenvalue")
    cutoff: float = Field(ge=0, description="Absolute truncation threshold")
    residual: float = Field(ge=0, description="Residual norm |A c - b|")


class ModelRecord(BaseModel):
    """Model file contents: basis descriptor plus coefficients at full precision."""

    format_version: Literal[1] = Field(default=1, description="Model file format version")
    kind: Literal["hamiltonian", "vector_field"] = Field(description="Model family")
    basis: BasisDescriptor = Field(description="Basis the coefficients refer to")
    coefficients: list[list[float]] = Field(
        description="Hamiltonian: one row over nonconstant functions; field: one row per component"
    )
    constant: float = Field(default=0.0, description="Additive constant C of the Hamiltonian")
    solver_report: SolverReport = Field(description="Solver summary")
    provenance_digest: str = Field(default="", description="SHA-256 of the training pairs")


class DiagnosticsReport(BaseModel):
    """Error and stability diagnostics of a learned Hamiltonian."""

    a_minus_i_norm: Optional[float] = Field(
        default=None, description="Spectral norm of A - I in a gradient-orthonormal basis"
    )
    best_approx_error: Optional[float] = Field(
        default=None, description="|grad H - Pi_V grad H| in L2 of the uniform measure"
    )
    gradient_error: Optional[float] = Field(
        default=None, description="|grad H - T_L(grad H~)| in L2 of the uniform measure"
    )
    alignment_error: Optional[float] = Field(
        default=None, description="RMS of H~0 + C - H with the optimal constant C"
    )
    alignment_constant: Optional[float] = Field(default=None, description="Optimal constant C")
    symplectic_defect: Optional[float] = Field(
        default=None, description="Max Jacobian asymmetry of J f over sampled points"
    )
    truncation_level: Optional[float] = Field(default=None, description="Radius L used by T_L")
    error_bound: Optional[float] = Field(
        default=None, description="Right-hand side of the expected squared-error bound"
    )

    @model_validator(mode="after")
    def _check_nonnegative(self) -> "DiagnosticsReport":
        for name in (
            "a_minus_i_norm",
            "best_approx_error",
            "gradient_error",
            "alignment_error",
            "symplectic_defect",
            "truncation_level",
            "error_bound",
        ):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ValueError(f"{name} must be nonnegative")
        return self
