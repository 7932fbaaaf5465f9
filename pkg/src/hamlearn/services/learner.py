"""Gradient-space least squares, learned Hamiltonian models and the non-SP baseline."""

import logging
from pathlib import Path
from typing import Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.linalg import eigh

from ..errors import ArgumentError, DegenerateProblemError, DimensionError, NumericalError
from ..schemas.data import DataPairSet
from ..schemas.model import ModelRecord, SolverReport
from ..schemas.phase import HamiltonianSystem
from .basis import TotalDegreeBasis
from .dynamics import apply_j, apply_j_inverse

logger = logging.getLogger(__name__)

DEFAULT_CHUNK_SIZE = 4096


def _frozen(values, ndim: int, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


class GradientLSProblem(BaseModel):
    """Normal equations A c = b of the gradient fit, both scaled by 1/K."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    gram: np.ndarray = Field(description="A, shape (N, N)")
    rhs_vec: np.ndarray = Field(description="b, shape (N,)")
    basis: TotalDegreeBasis = Field(description="Basis whose nonconstant gradients span V")
    count: int = Field(ge=1, description="Number of pairs K")
    provenance_digest: str = Field(default="", description="Digest of the pair set")

    @field_validator("gram", mode="before")
    @classmethod
    def _coerce_gram(cls, value) -> np.ndarray:
        return _frozen(value, 2, "gram")

    @field_validator("rhs_vec", mode="before")
    @classmethod
    def _coerce_rhs(cls, value) -> np.ndarray:
        return _frozen(value, 1, "rhs_vec")

    @model_validator(mode="after")
    def _check_problem(self) -> "GradientLSProblem":
        n = self.basis.dim_v
        if self.gram.shape != (n, n) or self.rhs_vec.shape != (n,):
            raise ValueError(f"gram and rhs_vec must match dim_v={n}")
        if np.max(np.abs(self.gram - self.gram.T), initial=0.0) > 1e-12:
            raise ValueError("gram must be symmetric")
        return self


def _chunks(count: int, size: int):
    for start in range(0, count, size):
        yield slice(start, min(start + size, count))


def assemble(
    pairs: DataPairSet, basis: TotalDegreeBasis, chunk_size: int = DEFAULT_CHUNK_SIZE
) -> GradientLSProblem:
    """Build the normal equations of the gradient fit.

    a_ij = (1/K) sum_k grad phi_i . grad phi_j and b_i = (1/K) sum_k (J xdot_k) . grad phi_i.

    Contributions are summed chunk by chunk in ascending pair order; the
    chunk size changes memory use, never the summation order across runs.
    """
    if pairs.dims != basis.dims:
        raise DimensionError(f"pairs have dimension {pairs.dims}, basis has {basis.dims}")
    k, n = pairs.count, basis.dim_v
    if n >= k:
        logger.warning("basis has N=%d >= K=%d pairs; the fit is underdetermined", n, k)
    targets = apply_j(pairs.derivatives)
    gram = np.zeros((n, n))
    rhs = np.zeros(n)
    for block in _chunks(k, basis.block_size(chunk_size)):
        grads = basis.gradients(pairs.states[block])[:, 1:, :]
        gram += np.tensordot(grads, grads, axes=([0, 2], [0, 2]))
        rhs += np.einsum("pim,pm->i", grads, targets[block])
    gram /= k
    rhs /= k
    return GradientLSProblem(
        gram=0.5 * (gram + gram.T),
        rhs_vec=rhs,
        basis=basis,
        count=k,
        provenance_digest=pairs.provenance.digest,
    )


def pseudo_solve(
    matrix: np.ndarray, rhs: np.ndarray, rel_tol: float = 1e-10
) -> tuple[np.ndarray, SolverReport]:
    """Least-squares solution of a symmetric PSD system via eigendecomposition.

    ``rhs`` may be a vector or a matrix of right-hand sides. Eigenvalues
    below rel_tol * lambda_max are discarded.

    Raises:
        DegenerateProblemError: If no eigenvalue survives the cutoff
        NumericalError: If the matrix is clearly indefinite
    """
    if not rel_tol > 0:
        raise ArgumentError("rel_tol must be positive")
    eigenvalues, vectors = eigh(matrix)
    top = float(eigenvalues[-1]) if eigenvalues.size else 0.0
    if top <= 0:
        raise DegenerateProblemError("matrix has no positive eigenvalue")
    low = float(eigenvalues[0])
    if low < -1e-10 * top:
        raise NumericalError(f"matrix is not positive semidefinite (min eigenvalue {low:.3g})")
    cutoff = rel_tol * top
    keep = eigenvalues > cutoff
    rank = int(np.count_nonzero(keep))
    if rank == 0:
        raise DegenerateProblemError("every eigenvalue fell below the cutoff")
    if rank < eigenvalues.size:
        logger.warning("truncated %d of %d eigenvalues", eigenvalues.size - rank, eigenvalues.size)
    kept = vectors[:, keep]
    projected = kept.T @ rhs
    scaled = projected / (
        eigenvalues[keep] if projected.ndim == 1 else eigenvalues[keep][:, None]
    )
    solution = kept @ scaled
    residual = float(np.linalg.norm(matrix @ solution - rhs))
    report = SolverReport(
        rank=rank,
        size=int(eigenvalues.size),
        eigenvalue_min=low,
        eigenvalue_max=top,
        cutoff=cutoff,
        residual=residual,
    )
    return solution, report


class HamiltonianModel(BaseModel):
    """Learned H~0(x) = sum_j c_j phi_j(x) + C over the nonconstant basis functions."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    basis: TotalDegreeBasis = Field(description="Basis of W")
    coefficients: np.ndarray = Field(description="c, one per nonconstant basis function")
    constant: float = Field(default=0.0, description="Additive constant C")
    solver_report: SolverReport = Field(description="Solver summary")
    provenance_digest: str = Field(default="", description="Digest of the training pairs")

    @field_validator("coefficients", mode="before")
    @classmethod
    def _coerce_coefficients(cls, value) -> np.ndarray:
        return _frozen(value, 1, "coefficients")

    @model_validator(mode="after")
    def _check_size(self) -> "HamiltonianModel":
        if self.coefficients.shape[0] != self.basis.dim_v:
            raise ValueError(
                f"expected {self.basis.dim_v} coefficients, got {self.coefficients.shape[0]}"
            )
        return self

    @property
    def dim_d(self) -> int:
        return self.basis.dims // 2

    def evaluate(self, x) -> np.ndarray:
        """H~(x) over leading axes."""
        return self.basis.values(x)[..., 1:] @ self.coefficients + self.constant

    def gradient(self, x) -> np.ndarray:
        """grad H~(x), shape (..., 2d)."""
        return np.einsum("...im,i->...m", self.basis.gradients(x)[..., 1:, :], self.coefficients)

    def field(self, x) -> np.ndarray:
        """Reconstructed vector field J^{-1} grad H~(x)."""
        return apply_j_inverse(self.gradient(x))

    def with_constant(self, constant: float) -> "HamiltonianModel":
        return self.model_copy(update={"constant": float(constant)})

    def to_record(self) -> ModelRecord:
        return ModelRecord(
            kind="hamiltonian",
            basis=self.basis.descriptor(),
            coefficients=[self.coefficients.tolist()],
            constant=self.constant,
            solver_report=self.solver_report,
            provenance_digest=self.provenance_digest,
        )

    @classmethod
    def from_record(cls, record: ModelRecord) -> "HamiltonianModel":
        if record.kind != "hamiltonian" or len(record.coefficients) != 1:
            raise ArgumentError("record does not describe a Hamiltonian model")
        return cls(
            basis=TotalDegreeBasis.from_descriptor(record.basis),
            coefficients=record.coefficients[0],
            constant=record.constant,
            solver_report=record.solver_report,
            provenance_digest=record.provenance_digest,
        )

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.write_text(self.to_record().model_dump_json(indent=2), encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "HamiltonianModel":
        record = ModelRecord.model_validate_json(Path(path).read_text(encoding="utf-8"))
        return cls.from_record(record)


def solve(problem: GradientLSProblem, rel_tol: float = 1e-10) -> HamiltonianModel:
    """Coefficients c minimising |A c - b| with the eigenvalue-truncated pseudo-inverse."""
    coefficients, report = pseudo_solve(problem.gram, problem.rhs_vec, rel_tol)
    logger.info("solved gradient system: rank %d of %d", report.rank, report.size)
    return HamiltonianModel(
        basis=problem.basis,
        coefficients=coefficients,
        solver_report=report,
        provenance_digest=problem.provenance_digest,
    )


def fit_hamiltonian(
    pairs: DataPairSet,
    basis: TotalDegreeBasis,
    rel_tol: float = 1e-10,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> HamiltonianModel:
    """assemble followed by solve."""
    return solve(assemble(pairs, basis, chunk_size), rel_tol)


def htilde_eval(model: HamiltonianModel, x) -> np.ndarray:
    value = model.evaluate(x)
    return float(value) if np.ndim(value) == 0 else value


def htilde_grad(model: HamiltonianModel, x) -> np.ndarray:
    return model.gradient(x)


def reconstructed_system(model: HamiltonianModel) -> HamiltonianSystem:
    """du/dt = J^{-1} grad H~(u); its exact flow conserves H~."""
    return HamiltonianSystem(
        name="learned",
        dim_d=model.dim_d,
        hamiltonian=model.evaluate,
        rhs=model.field,
        default_domain=model.basis.domain,
    )


def truncate_tl(g, level: float) -> np.ndarray:
    """T_L(g) = L g / max(|g|, L) along the last axis."""
    if not level > 0:
        raise ArgumentError("truncation level must be positive")
    g = np.asarray(g, dtype=float)
    norm = np.linalg.norm(g, axis=-1, keepdims=True)
    return g * (level / np.maximum(norm, level))


class NonSPModel(BaseModel):
    """Component-wise polynomial fit of the right-hand side over the full basis W."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    basis: TotalDegreeBasis = Field(description="Basis of W, constants included")
    coefficients: np.ndarray = Field(description="d_ij, shape (2d, W)")
    solver_report: SolverReport = Field(description="Solver summary")
    provenance_digest: str = Field(default="", description="Digest of the training pairs")

    @field_validator("coefficients", mode="before")
    @classmethod
    def _coerce_coefficients(cls, value) -> np.ndarray:
        return _frozen(value, 2, "coefficients")

    @model_validator(mode="after")
    def _check_shape(self) -> "NonSPModel":
        expected = (self.basis.dims, self.basis.dim_w)
        if self.coefficients.shape != expected:
            raise ValueError(f"coefficients must have shape {expected}")
        return self

    def field(self, x) -> np.ndarray:
        return self.basis.values(x) @ self.coefficients.T

    def to_record(self) -> ModelRecord:
        return ModelRecord(
            kind="vector_field",
            basis=self.basis.descriptor(),
            coefficients=self.coefficients.tolist(),
            solver_report=self.solver_report,
            provenance_digest=self.provenance_digest,
        )

    @classmethod
    def from_record(cls, record: ModelRecord) -> "NonSPModel":
        if record.kind != "vector_field":
            raise ArgumentError("record does not describe a vector field model")
        return cls(
            basis=TotalDegreeBasis.from_descriptor(record.basis),
            coefficients=record.coefficients,
            solver_report=record.solver_report,
            provenance_digest=record.provenance_digest,
        )


def fit_nonsp(
    pairs: DataPairSet,
    basis: TotalDegreeBasis,
    rel_tol: float = 1e-10,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> NonSPModel:
    """Fit xdot_i ~ sum_j d_ij phi_j(x) for every component with the same pseudo-inverse policy."""
    if pairs.dims != basis.dims:
        raise DimensionError(f"pairs have dimension {pairs.dims}, basis has {basis.dims}")
    k, w = pairs.count, basis.dim_w
    gram = np.zeros((w, w))
    rhs = np.zeros((w, basis.dims))
    for block in _chunks(k, basis.block_size(chunk_size)):
        values = basis.values(pairs.states[block])
        gram += values.T @ values
        rhs += values.T @ pairs.derivatives[block]
    gram = 0.5 * (gram + gram.T) / k
    coefficients, report = pseudo_solve(gram, rhs / k, rel_tol)
    return NonSPModel(
        basis=basis,
        coefficients=coefficients.T,
        solver_report=report,
        provenance_digest=pairs.provenance.digest,
    )
