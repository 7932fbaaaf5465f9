"""Pytest fixtures for hamlearn tests."""

import numpy as np
import pytest

from hamlearn.schemas import BurstSet, DomainBox, ExperimentConfig
from hamlearn.services.basis import TotalDegreeBasis
from hamlearn.services.dynamics import builtin_system
from hamlearn.services.pipeline import assemble_pairs


@pytest.fixture
def oscillator():
    """H = (p^2 + q^2) / 2 on [-1, 1]^2."""
    return builtin_system("harmonic_oscillator")


@pytest.fixture
def pendulum():
    return builtin_system("pendulum")


@pytest.fixture
def unit_square() -> DomainBox:
    return DomainBox.cube(-1.0, 1.0, 2)


@pytest.fixture
def small_basis(unit_square) -> TotalDegreeBasis:
    """Degree-2 Legendre basis on the unit square: W = 6, N = 5."""
    return TotalDegreeBasis(2, unit_square)


@pytest.fixture
def uniform_points(unit_square) -> np.ndarray:
    rng = np.random.default_rng(1234)
    return rng.uniform(unit_square.lower_array, unit_square.upper_array, size=(200, 2))


def point_bursts(points: np.ndarray) -> BurstSet:
    """One single-sample burst per point."""
    points = np.asarray(points, dtype=float)
    return BurstSet(
        times=[0.0], states=points[:, None, :], trajectory_ids=np.arange(points.shape[0])
    )


@pytest.fixture
def oscillator_pairs(oscillator, uniform_points):
    """K = 200 uniform points with analytic derivatives."""
    return assemble_pairs(point_bursts(uniform_points), "exact", truth=oscillator)


@pytest.fixture
def small_config(tmp_path) -> ExperimentConfig:
    """Pendulum experiment shrunk to run in about a second."""
    return ExperimentConfig(
        system="pendulum",
        degree=4,
        trajectories=60,
        steps_per_burst=10,
        dt=0.01,
        fine_ratio=10,
        noise_amplitude=0.0,
        derivative_method="central_diff",
        horizon=1.0,
        eval_step=1e-2,
        seed=3,
        kn_grid_points=11,
        defect_samples=20,
        output_dir=str(tmp_path / "runs"),
    )


class RecombinedBasis(TotalDegreeBasis):
    """Nonconstant functions replaced by invertible linear combinations of themselves."""

    def __init__(self, mixing: np.ndarray, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.mixing = mixing

    def gradients(self, x) -> np.ndarray:
        grads = super().gradients(x)
        mixed = np.einsum("...km,kj->...jm", grads[..., 1:, :], self.mixing)
        return np.concatenate([grads[..., :1, :], mixed], axis=-2)


def unit_mixing(size: int, seed: int = 7) -> np.ndarray:
    """Unit upper-triangular, hence invertible, mixing matrix."""
    upper = np.random.default_rng(seed).uniform(-0.3, 0.3, (size, size))
    return np.eye(size) + np.triu(upper, k=1)
