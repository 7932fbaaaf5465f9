"""Error and stability diagnostics of learned models."""

import logging
import math
from typing import Optional, Union

import numpy as np

from ..errors import ArgumentError, EmptyDataError
from ..schemas.basis import DomainBox
from ..schemas.data import DataPairSet
from ..schemas.model import DiagnosticsReport, dense_gauss_points
from ..schemas.phase import HamiltonianSystem, ScalarField, VectorField
from .basis import TotalDegreeBasis, gauss_legendre_grid, stability_lambda, whitening_transform
from .dynamics import apply_j, system_gradient
from .learner import DEFAULT_CHUNK_SIZE, HamiltonianModel, assemble, pseudo_solve, truncate_tl
from .streams import DIAGNOSTICS_STREAM, rng_stream

logger = logging.getLogger(__name__)


def _blocks(basis: TotalDegreeBasis, count: int, chunk_size: int):
    step = basis.block_size(chunk_size)
    for start in range(0, count, step):
        yield slice(start, min(start + step, count))


def quadrature_gradient_gram(
    basis: TotalDegreeBasis,
    quadrature_points: Optional[int] = None,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> np.ndarray:
    """Gradient Gram matrix of the nonconstant basis under the uniform measure on the domain.

    With the default degree + 1 Gauss points per axis every entry is exact.
    """
    q = quadrature_points or basis.degree + 1
    nodes, weights = gauss_legendre_grid(basis.domain, q)
    gram = np.zeros((basis.dim_v, basis.dim_v))
    for block in _blocks(basis, nodes.shape[0], chunk_size):
        grads = basis.gradients(nodes[block])[:, 1:, :]
        gram += np.einsum("p,pim,pjm->ij", weights[block], grads, grads, optimize=True)
    return 0.5 * (gram + gram.T)


def a_deviation(
    pairs: DataPairSet,
    basis: TotalDegreeBasis,
    quadrature_points: Optional[int] = None,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> float:
    """Spectral norm |A - I| after orthonormalising the gradient basis for the uniform measure.

    Raises:
        RankDeficiencyError: If the quadrature Gram matrix is singular
    """
    transform = whitening_transform(
        quadrature_gradient_gram(basis, quadrature_points, chunk_size), labels=basis.indices[1:]
    )
    gram = assemble(pairs, basis, chunk_size).gram
    whitened = transform.T @ gram @ transform
    deviation = 0.5 * (whitened + whitened.T) - np.eye(basis.dim_v)
    return float(np.max(np.abs(np.linalg.eigvalsh(deviation))))


def best_approx_error(
    truth_grad: VectorField,
    basis: TotalDegreeBasis,
    quadrature_points: int,
    rel_tol: float = 1e-10,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> float:
    """|grad H - Pi_V grad H| in the uniform L2 norm, by projection on a Gauss grid."""
    nodes, weights = gauss_legendre_grid(basis.domain, quadrature_points)
    n = basis.dim_v
    gram = np.zeros((n, n))
    rhs = np.zeros(n)
    targets = np.asarray(truth_grad(nodes), dtype=float)
    for block in _blocks(basis, nodes.shape[0], chunk_size):
        grads = basis.gradients(nodes[block])[:, 1:, :]
        gram += np.einsum("p,pim,pjm->ij", weights[block], grads, grads, optimize=True)
        rhs += np.einsum("p,pim,pm->i", weights[block], grads, targets[block], optimize=True)
    coefficients, _ = pseudo_solve(0.5 * (gram + gram.T), rhs, rel_tol)
    total = 0.0
    for block in _blocks(basis, nodes.shape[0], chunk_size):
        grads = basis.gradients(nodes[block])[:, 1:, :]
        projection = np.einsum("pim,i->pm", grads, coefficients)
        residual = targets[block] - projection
        total += float(np.sum(weights[block] * np.sum(residual**2, axis=1)))
    return math.sqrt(max(total, 0.0))


def gradient_error(
    model: HamiltonianModel,
    truth_grad: VectorField,
    quadrature_points: int,
    truncation_level: Optional[float] = None,
) -> float:
    """|grad H - T_L(grad H~)| in the uniform L2 norm; no truncation when L is None."""
    nodes, weights = gauss_legendre_grid(model.basis.domain, quadrature_points)
    learned = model.gradient(nodes)
    if truncation_level is not None:
        learned = truncate_tl(learned, truncation_level)
    residual = np.asarray(truth_grad(nodes), dtype=float) - learned
    return math.sqrt(float(np.sum(weights * np.sum(residual**2, axis=1))))


def _learned_h0(model: Union[HamiltonianModel, ScalarField]) -> ScalarField:
    if isinstance(model, HamiltonianModel):
        return lambda x: model.evaluate(x) - model.constant
    return model


def alignment_offset(
    model: Union[HamiltonianModel, ScalarField], truth_h: ScalarField, sample_points
) -> float:
    """C = mean(H - H~0) over the samples."""
    points = np.asarray(sample_points, dtype=float)
    if points.ndim != 2 or points.shape[0] == 0:
        raise EmptyDataError("alignment needs at least one sample point")
    learned = _learned_h0(model)
    return float(np.mean(truth_h(points) - learned(points)))


def alignment_error(
    model: Union[HamiltonianModel, ScalarField], truth_h: ScalarField, sample_points
) -> float:
    """RMS of H~0 + C - H with the optimal constant C; zero whenever H~0 - H is constant."""
    points = np.asarray(sample_points, dtype=float)
    offset = alignment_offset(model, truth_h, points)
    residual = _learned_h0(model)(points) + offset - truth_h(points)
    return float(np.sqrt(np.mean(residual**2)))


def default_truncation_level(pairs: DataPairSet) -> float:
    """max_k |J xdot_k|, the data surrogate for the radius L of T_L."""
    return float(np.max(np.linalg.norm(apply_j(pairs.derivatives), axis=1)))


def error_bound_terms(
    best_error: float,
    sample_count: int,
    r: float,
    dim_v: int,
    truncation_level: float,
    tau_bound: float = 0.0,
) -> float:
    """(1 + 8 lambda / log K) best^2 + 8 L^2 / K^r + 8 N tau^2, reported next to measured errors."""
    if sample_count <= 1:
        raise ArgumentError("sample_count must exceed 1")
    lam = stability_lambda(r)
    return (
        (1.0 + 8.0 * lam / math.log(sample_count)) * best_error**2
        + 8.0 * truncation_level**2 / sample_count**r
        + 8.0 * dim_v * tau_bound**2
    )


def symplectic_defect(
    field: VectorField,
    box: DomainBox,
    samples: int,
    seed: int = 0,
    relative_step: float = 1e-5,
) -> float:
    """Max Jacobian asymmetry |D(Jf)_ij - D(Jf)_ji| over uniform samples of the box.

    J f is a gradient field exactly when this vanishes. Derivatives are
    central differences with step relative_step * extent per coordinate;
    samples are drawn from the box shrunk by that step.
    """
    if samples < 1:
        raise ArgumentError("samples must be at least 1")
    h = relative_step * box.extent
    rng = rng_stream(seed, DIAGNOSTICS_STREAM)
    points = rng.uniform(box.lower_array + h, box.upper_array - h, size=(samples, box.dims))
    jacobian = np.empty((samples, box.dims, box.dims))
    for k in range(box.dims):
        shift = np.zeros(box.dims)
        shift[k] = h[k]
        forward = apply_j(np.asarray(field(points + shift), dtype=float))
        backward = apply_j(np.asarray(field(points - shift), dtype=float))
        jacobian[:, :, k] = (forward - backward) / (2.0 * h[k])
    asymmetry = np.abs(jacobian - np.swapaxes(jacobian, 1, 2))
    return float(np.max(asymmetry))


def diagnose(
    model: HamiltonianModel,
    pairs: DataPairSet,
    truth: HamiltonianSystem,
    quadrature_points: Optional[int] = None,
    defect_samples: int = 200,
    stability_r: float = 1.0,
    seed: int = 0,
    alignment_samples: int = 4096,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> DiagnosticsReport:
    """Every diagnostic of a learned model against its true system."""
    basis = model.basis
    q = quadrature_points or dense_gauss_points(basis.degree)
    truth_grad = system_gradient(truth)
    level = default_truncation_level(pairs)
    best = best_approx_error(truth_grad, basis, q, chunk_size=chunk_size)
    rng = rng_stream(seed, DIAGNOSTICS_STREAM)
    domain = basis.domain
    shape = (alignment_samples, domain.dims)
    points = rng.uniform(domain.lower_array, domain.upper_array, size=shape)
    bound = None
    if pairs.count > 1:
        bound = error_bound_terms(
            best, pairs.count, stability_r, basis.dim_v, level, pairs.tau_bound or 0.0
        )
    report = DiagnosticsReport(
        a_minus_i_norm=a_deviation(pairs, basis, chunk_size=chunk_size),
        best_approx_error=best,
        gradient_error=gradient_error(model, truth_grad, q, level),
        alignment_error=alignment_error(model, truth.hamiltonian, points),
        alignment_constant=alignment_offset(model, truth.hamiltonian, points),
        symplectic_defect=symplectic_defect(model.field, domain, defect_samples, seed),
        truncation_level=level,
        error_bound=bound,
    )
    logger.debug("diagnostics: %s", report.model_dump())
    return report
