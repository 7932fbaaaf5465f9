"""Total-degree tensor Legendre bases, their gradients and the K_N stability quantities."""

import logging
import math
from typing import Iterator, Optional, Sequence

import numpy as np
from scipy.linalg import eigh
from scipy.special import comb

from ..errors import (
    ArgumentError,
    CapacityError,
    DimensionError,
    DomainError,
    RankDeficiencyError,
)
from ..schemas.basis import (
    BasisDescriptor,
    DomainBox,
    DomainPolicy,
    MultiIndex,
    StabilityDiagnostic,
)
from .streams import DIAGNOSTICS_STREAM, rng_stream

logger = logging.getLogger(__name__)

MAX_BASIS_SIZE = 1_000_000
MAX_KN_SAMPLES = 1_000_000
# Entries of one (points x basis functions) block kept in memory at a time.
BLOCK_ENTRIES = 1_000_000


def _compositions(total: int, dims: int) -> Iterator[tuple[int, ...]]:
    """Exponent tuples summing to exactly ``total``, in lexicographic order."""
    if dims == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, dims - 1):
            yield (first,) + rest


def index_count(n: int, dims: int) -> int:
    """C(n + dims, dims), the dimension of the total-degree space."""
    return int(comb(n + dims, dims, exact=True))


def enumerate_indices(n: int, dims: int) -> list[MultiIndex]:
    """All multi-indices with |i| <= n in graded lexicographic order.

    Raises:
        CapacityError: If the index set would exceed MAX_BASIS_SIZE entries
    """
    if n < 0:
        raise ArgumentError("n must be nonnegative")
    if dims < 1:
        raise ArgumentError("dims must be at least 1")
    count = index_count(n, dims)
    if count > MAX_BASIS_SIZE:
        raise CapacityError(f"total-degree set with n={n}, dims={dims} has {count} entries")
    indices = [MultiIndex(exponents=e) for w in range(n + 1) for e in _compositions(w, dims)]
    assert len(indices) == count
    return indices


def legendre_table(n: int, t) -> tuple[np.ndarray, np.ndarray]:
    """P_0..P_n and their derivatives at t, each of shape t.shape + (n + 1,)."""
    t = np.asarray(t, dtype=float)
    values = np.empty(t.shape + (n + 1,))
    derivs = np.empty_like(values)
    values[..., 0] = 1.0
    derivs[..., 0] = 0.0
    if n >= 1:
        values[..., 1] = t
        derivs[..., 1] = 1.0
    for k in range(1, n):
        values[..., k + 1] = ((2 * k + 1) * t * values[..., k] - k * values[..., k - 1]) / (k + 1)
        derivs[..., k + 1] = derivs[..., k - 1] + (2 * k + 1) * values[..., k]
    return values, derivs


def legendre_eval_with_deriv(k: int, t: float) -> tuple[float, float]:
    """(P_k(t), P_k'(t)) with t clamped to [-1, 1]."""
    if k < 0:
        raise ArgumentError("k must be nonnegative")
    t = min(1.0, max(-1.0, float(t)))
    values, derivs = legendre_table(k, t)
    return float(values[k]), float(derivs[k])


class TotalDegreeBasis:
    """Tensor products of Legendre polynomials of total degree <= n on a box.

    Index 0 is the constant function; the remaining dim_v functions span the
    gradient space V after differentiation.
    """

    def __init__(
        self,
        degree: int,
        domain: DomainBox,
        domain_policy: DomainPolicy = "strict",
        tolerance: float = 1e-9,
    ):
        if degree < 1:
            raise ArgumentError("degree must be at least 1")
        if domain_policy not in ("strict", "clamp", "extrapolate"):
            raise ArgumentError(f"unknown domain policy {domain_policy!r}")
        self.degree = degree
        self.domain = domain
        self.domain_policy = domain_policy
        self.tolerance = tolerance
        self.indices = enumerate_indices(degree, domain.dims)
        self.exponents = np.array([i.exponents for i in self.indices], dtype=np.intp)
        self.exponents.flags.writeable = False
        self._center = 0.5 * (domain.lower_array + domain.upper_array)
        self._scale = 2.0 / domain.extent

    def __repr__(self) -> str:
        return (
            f"TotalDegreeBasis(degree={self.degree}, dims={self.dims}, "
            f"policy={self.domain_policy!r})"
        )

    @property
    def dims(self) -> int:
        return self.domain.dims

    @property
    def dim_w(self) -> int:
        return len(self.indices)

    @property
    def dim_v(self) -> int:
        return self.dim_w - 1

    @property
    def chain_factors(self) -> np.ndarray:
        """d s_m / d x_m = 2 / (b_m - a_m)."""
        return self._scale.copy()

    def block_size(self, requested: int) -> int:
        """Points per evaluation block so one block stays near BLOCK_ENTRIES entries."""
        return max(1, min(requested, BLOCK_ENTRIES // self.dim_w))

    def descriptor(self) -> BasisDescriptor:
        return BasisDescriptor(
            degree=self.degree,
            dims=self.dims,
            lower=list(self.domain.lower),
            upper=list(self.domain.upper),
            domain_policy=self.domain_policy,
        )

    @classmethod
    def from_descriptor(cls, descriptor: BasisDescriptor) -> "TotalDegreeBasis":
        domain = DomainBox(lower=tuple(descriptor.lower), upper=tuple(descriptor.upper))
        if domain.dims != descriptor.dims:
            raise DimensionError("descriptor bounds disagree with its dimension")
        return cls(descriptor.degree, domain, domain_policy=descriptor.domain_policy)

    def to_reference(self, x) -> np.ndarray:
        """Map points to [-1, 1]^dims, applying the domain policy.

        Raises:
            DomainError: Under the strict policy, for points outside the box
                by more than the relative tolerance
        """
        x = np.asarray(x, dtype=float)
        if x.ndim == 0 or x.shape[-1] != self.dims:
            raise DimensionError(f"points must have last dimension {self.dims}")
        s = (x - self._center) * self._scale
        if self.domain_policy == "extrapolate":
            return s
        if self.domain_policy == "strict":
            outside = np.abs(s) > 1.0 + 2.0 * self.tolerance
            if np.any(outside):
                coordinate = int(np.nonzero(outside.reshape(-1, self.dims).any(axis=0))[0][0])
                raise DomainError(
                    f"point outside the basis domain in coordinate {coordinate}",
                    coordinate=coordinate,
                )
        return np.clip(s, -1.0, 1.0)

    def _factors(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Per-coordinate factors P_{i_m}(s_m) and P'_{i_m}(s_m), shape (dims, ..., W)."""
        s = self.to_reference(x)
        factors = np.empty((self.dims,) + s.shape[:-1] + (self.dim_w,))
        dfactors = np.empty_like(factors)
        for m in range(self.dims):
            values, derivs = legendre_table(self.degree, s[..., m])
            factors[m] = values[..., self.exponents[:, m]]
            dfactors[m] = derivs[..., self.exponents[:, m]]
        return factors, dfactors

    def values(self, x) -> np.ndarray:
        """phi_j(x) for every basis function, shape (..., W)."""
        factors, _ = self._factors(x)
        return np.prod(factors, axis=0)

    def gradients(self, x) -> np.ndarray:
        """grad phi_j(x) for every basis function, shape (..., W, dims)."""
        return self.evaluate(x)[1]

    def evaluate(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Values (..., W) and gradients (..., W, dims) from one pass over the factors."""
        factors, dfactors = self._factors(x)
        values = np.prod(factors, axis=0)
        grads = np.empty(values.shape + (self.dims,))
        for m in range(self.dims):
            component = dfactors[m] * self._scale[m]
            for k in range(self.dims):
                if k != m:
                    component = component * factors[k]
            grads[..., m] = component
        return values, grads

    def _check_index(self, j: int) -> None:
        if not 0 <= j < self.dim_w:
            raise ArgumentError(f"basis index {j} out of range [0, {self.dim_w})")


def basis_eval(basis: TotalDegreeBasis, j: int, x) -> np.ndarray:
    """phi_j(x); a float for a single point."""
    basis._check_index(j)
    value = basis.values(x)[..., j]
    return float(value) if value.ndim == 0 else value


def basis_grad(basis: TotalDegreeBasis, j: int, x) -> np.ndarray:
    """grad phi_j(x), shape (..., dims)."""
    basis._check_index(j)
    return basis.gradients(x)[..., j, :]


def gauss_legendre_grid(domain: DomainBox, points_per_axis: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss-Legendre nodes on the box with weights of the uniform probability measure."""
    if points_per_axis < 1:
        raise ArgumentError("points_per_axis must be positive")
    nodes, weights = np.polynomial.legendre.leggauss(points_per_axis)
    axes = [
        0.5 * (a + b) + 0.5 * (b - a) * nodes for a, b in zip(domain.lower, domain.upper)
    ]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, domain.dims)
    w = weights / 2.0
    total = w
    for _ in range(domain.dims - 1):
        total = np.multiply.outer(total, w)
    return grid, np.ravel(total)


def gradient_gram(gradients: np.ndarray, weights: Optional[np.ndarray] = None) -> np.ndarray:
    """Weighted gradient inner products G_ij = sum_p w_p grad phi_i . grad phi_j.

    ``gradients`` has shape (P, N, dims); uniform weights 1/P by default.
    """
    g = np.asarray(gradients, dtype=float)
    if weights is None:
        weights = np.full(g.shape[0], 1.0 / g.shape[0])
    gram = np.einsum("p,pim,pjm->ij", weights, g, g, optimize=True)
    return 0.5 * (gram + gram.T)


def whitening_transform(
    gram: np.ndarray,
    labels: Optional[Sequence[MultiIndex]] = None,
    rel_tol: float = 1e-12,
) -> np.ndarray:
    """T = V diag(lambda)^{-1/2} with G = V diag(lambda) V^T, so that T^T G T = I.

    Raises:
        RankDeficiencyError: If an eigenvalue is <= rel_tol * lambda_max; the
            error names the multi-index dominating each null direction
    """
    eigenvalues, vectors = eigh(gram)
    top = float(eigenvalues[-1]) if eigenvalues.size else 0.0
    null = eigenvalues <= rel_tol * max(top, 0.0)
    if top <= 0 or np.any(null):
        directions = []
        for v in vectors[:, null].T:
            k = int(np.argmax(np.abs(v)))
            directions.append(labels[k].exponents if labels is not None else (k,))
        raise RankDeficiencyError(
            f"gradient Gram matrix has {int(np.count_nonzero(null))} null directions",
            null_directions=directions,
        )
    return vectors / np.sqrt(eigenvalues)


def kernel_diagonal(gradients: np.ndarray, transform: Optional[np.ndarray] = None) -> np.ndarray:
    """sum_j |grad psi_j(x)|^2 per point, after an optional basis change psi = phi T."""
    g = np.asarray(gradients, dtype=float)
    if transform is not None:
        g = np.einsum("pim,ij->pjm", g, transform, optimize=True)
    return np.sum(g**2, axis=(1, 2))


def _kn_sample_points(basis: TotalDegreeBasis, grid_points_per_axis: int, seed: int) -> np.ndarray:
    domain = basis.domain
    if domain.dims <= 4:
        axes = [np.linspace(a, b, grid_points_per_axis) for a, b in zip(domain.lower, domain.upper)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, domain.dims)
    count = min(grid_points_per_axis**domain.dims, MAX_KN_SAMPLES)
    rng = rng_stream(seed, DIAGNOSTICS_STREAM)
    return rng.uniform(domain.lower_array, domain.upper_array, size=(count, domain.dims))


def _kn_over_points(
    basis: TotalDegreeBasis, points: np.ndarray, orthonormalize: bool, chunk_size: int
) -> float:
    step = basis.block_size(chunk_size)
    transform = None
    if orthonormalize:
        gram = np.zeros((basis.dim_v, basis.dim_v))
        for start in range(0, points.shape[0], step):
            grads = basis.gradients(points[start : start + step])[:, 1:, :]
            gram += np.einsum("pim,pjm->ij", grads, grads, optimize=True)
        gram = 0.5 * (gram + gram.T) / points.shape[0]
        transform = whitening_transform(gram, labels=basis.indices[1:])
    best = 0.0
    for start in range(0, points.shape[0], step):
        grads = basis.gradients(points[start : start + step])[:, 1:, :]
        best = max(best, float(np.max(kernel_diagonal(grads, transform))))
    return best


def kn_estimate(
    basis: TotalDegreeBasis,
    grid_points_per_axis: int,
    orthonormalize: bool,
    seed: int = 0,
    chunk_size: int = 4096,
) -> float:
    """Estimate K_N = sup_x sum_j |grad phi_j(x)|^2 over the basis domain.

    Uses a tensor grid up to four coordinates and uniform Monte Carlo
    samples beyond that. With ``orthonormalize`` the gradient basis is
    whitened in the empirical inner product of those same points.
    """
    if grid_points_per_axis < 2:
        raise ArgumentError("grid_points_per_axis must be at least 2")
    points = _kn_sample_points(basis, grid_points_per_axis, seed)
    return _kn_over_points(basis, points, orthonormalize, chunk_size)


def kn_empirical(
    basis: TotalDegreeBasis,
    points: np.ndarray,
    orthonormalize: bool,
    chunk_size: int = 4096,
) -> float:
    """K_N restricted to the given points, e.g. the training states."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ArgumentError("points must be a nonempty (P, dims) array")
    return _kn_over_points(basis, points, orthonormalize, chunk_size)


def stability_lambda(r: float) -> float:
    """lambda = (3 log(3/2) - 1) / (2 + 2 r)."""
    if not r > 0:
        raise ArgumentError("r must be positive")
    return (3.0 * math.log(1.5) - 1.0) / (2.0 + 2.0 * r)


def beta(delta: float) -> float:
    """beta_delta = (1 + delta) log(1 + delta) - delta."""
    return (1.0 + delta) * math.log1p(delta) - delta


def check_stability(
    kn: float,
    K: int,
    r: float,
    dim_v: Optional[int] = None,
    kn_empirical: Optional[float] = None,
) -> StabilityDiagnostic:
    """Evaluate the condition K_N <= lambda K / log K and the deviation probability bound."""
    if K <= 1:
        raise ArgumentError("K must exceed 1")
    if kn < 0:
        raise ArgumentError("kn must be nonnegative")
    lam = stability_lambda(r)
    threshold = lam * K / math.log(K)
    beta_half = beta(0.5)
    bound = None
    if dim_v is not None and kn > 0:
        bound = 2.0 * dim_v * math.exp(-beta_half * K / kn)
    satisfied = kn <= threshold
    if not satisfied:
        logger.warning("stability condition fails: K_N=%.4g > %.4g (K=%d)", kn, threshold, K)
    return StabilityDiagnostic(
        kn_estimate=kn,
        sample_count=K,
        r=r,
        lambda_=lam,
        threshold=threshold,
        satisfied=satisfied,
        delta=0.5,
        beta_delta=beta_half,
        dim_v=dim_v,
        failure_probability_bound=bound,
        kn_empirical=kn_empirical,
    )
