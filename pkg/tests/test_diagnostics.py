"""Tests for the error and stability diagnostics."""

import math

import numpy as np
import pytest

from hamlearn.errors import ArgumentError, EmptyDataError
from hamlearn.schemas import DomainBox
from hamlearn.schemas.model import dense_gauss_points
from hamlearn.services.basis import TotalDegreeBasis, stability_lambda
from hamlearn.services.diagnostics import (
    a_deviation,
    alignment_error,
    alignment_offset,
    best_approx_error,
    default_truncation_level,
    diagnose,
    error_bound_terms,
    gradient_error,
    quadrature_gradient_gram,
    symplectic_defect,
)
from hamlearn.services.dynamics import system_gradient
from hamlearn.services.learner import fit_hamiltonian, fit_nonsp
from hamlearn.services.pipeline import assemble_pairs

from .conftest import point_bursts


@pytest.fixture
def oscillator_model(oscillator_pairs, small_basis):
    return fit_hamiltonian(oscillator_pairs, small_basis)


class TestGramDeviation:
    """Tests for the quadrature Gram matrix and |A - I|."""

    def test_quadrature_gram_is_exact(self, unit_square):
        """Test the gradient Gram matrix of the degree-1 basis: grad s_m are unit vectors."""
        basis = TotalDegreeBasis(1, unit_square)
        np.testing.assert_allclose(quadrature_gradient_gram(basis), np.eye(2), atol=1e-14)

    def test_deviation_shrinks_with_samples(self, oscillator, small_basis):
        """Test that |A - I| is small for many uniform samples and larger for few."""
        rng = np.random.default_rng(21)
        many = rng.uniform(-1.0, 1.0, size=(20_000, 2))
        few = rng.uniform(-1.0, 1.0, size=(30, 2))
        dev_many = a_deviation(
            assemble_pairs(point_bursts(many), "exact", truth=oscillator), small_basis
        )
        dev_few = a_deviation(
            assemble_pairs(point_bursts(few), "exact", truth=oscillator), small_basis
        )
        assert dev_many < 0.15
        assert dev_many < dev_few

    def test_single_pair_is_far_from_identity(self, oscillator, small_basis):
        """Test that one pair gives a rank-one A, so |A - I| is at least one half."""
        pairs = assemble_pairs(point_bursts([[0.3, -0.4]]), "exact", truth=oscillator)
        assert a_deviation(pairs, small_basis) >= 0.5

    def test_deviation_trend_over_sample_sizes(self, oscillator, small_basis):
        """Test that the three-seed median of |A - I| does not grow for K = 1e3, 1e4, 1e5."""
        medians = []
        for count in (1_000, 10_000, 100_000):
            values = []
            for seed in range(3):
                points = np.random.default_rng(seed).uniform(-1.0, 1.0, size=(count, 2))
                pairs = assemble_pairs(point_bursts(points), "exact", truth=oscillator)
                values.append(a_deviation(pairs, small_basis))
            medians.append(float(np.median(values)))
        assert medians[0] >= medians[1] >= medians[2]


class TestApproximationErrors:
    """Tests for best_approx_error, gradient_error and alignment."""

    def test_best_error_zero_inside_span(self, oscillator, small_basis):
        """Test that a quadratic Hamiltonian has zero projection error."""
        assert best_approx_error(system_gradient(oscillator), small_basis, 4) < 1e-12

    def test_best_error_positive_outside_span(self, pendulum):
        """Test that sin q is not a polynomial."""
        basis = TotalDegreeBasis(2, pendulum.default_domain)
        assert best_approx_error(system_gradient(pendulum), basis, 8) > 1e-2

    def test_best_error_decreases_with_degree(self, pendulum):
        """Test that raising n improves the best approximation."""
        grad = system_gradient(pendulum)
        errors = [
            best_approx_error(grad, TotalDegreeBasis(n, pendulum.default_domain), n + 4)
            for n in (2, 4, 6)
        ]
        assert errors[0] > errors[1] > errors[2]

    def test_gradient_error_of_exact_model(self, oscillator, oscillator_model):
        """Test that an exactly recovered model has no gradient error."""
        assert gradient_error(oscillator_model, system_gradient(oscillator), 4) < 1e-8

    def test_truncation_changes_gradient_error(self, oscillator, oscillator_model):
        """Test that clipping to a small radius introduces error."""
        grad = system_gradient(oscillator)
        assert gradient_error(oscillator_model, grad, 4, truncation_level=0.1) > 0.1

    def test_alignment_of_exact_model(self, oscillator, oscillator_model, uniform_points):
        """Test that H~0 + C matches H and C recovers the missing constant."""
        shifted = oscillator_model.with_constant(5.0)
        assert alignment_error(shifted, oscillator.hamiltonian, uniform_points) < 1e-8
        offset = alignment_offset(oscillator_model, oscillator.hamiltonian, uniform_points)
        assert offset == pytest.approx(
            alignment_offset(shifted, oscillator.hamiltonian, uniform_points)
        )

    def test_alignment_accepts_callables(self, oscillator, uniform_points):
        """Test that a plain scalar field can be aligned."""

        def shifted(x):
            return oscillator.hamiltonian(x) - 3.0

        assert alignment_offset(shifted, oscillator.hamiltonian, uniform_points) == pytest.approx(
            3.0
        )
        assert alignment_error(shifted, oscillator.hamiltonian, uniform_points) < 1e-12

    def test_alignment_needs_points(self, oscillator, oscillator_model):
        """Test that an empty sample raises EmptyDataError."""
        with pytest.raises(EmptyDataError):
            alignment_offset(oscillator_model, oscillator.hamiltonian, np.empty((0, 2)))


class TestErrorBound:
    """Tests for error_bound_terms and the truncation level."""

    def test_terms(self):
        """Test each of the three terms on its own."""
        assert error_bound_terms(0.0, 100, 1.0, 5, 2.0) == pytest.approx(8 * 4 / 100)
        assert error_bound_terms(0.0, 100, 1.0, 5, 2.0, tau_bound=0.1) == pytest.approx(
            0.32 + 8 * 5 * 0.01
        )
        lam = stability_lambda(1.0)
        assert error_bound_terms(1.0, 100, 1.0, 5, 0.0) == pytest.approx(
            1 + 8 * lam / math.log(100)
        )

    def test_needs_samples(self):
        """Test that K must exceed one."""
        with pytest.raises(ArgumentError):
            error_bound_terms(0.0, 1, 1.0, 5, 1.0)

    def test_truncation_level_from_data(self, oscillator_pairs):
        """Test that L is the largest |J xdot| in the data."""
        expected = np.max(np.linalg.norm(oscillator_pairs.states, axis=1))
        assert default_truncation_level(oscillator_pairs) == pytest.approx(expected)


class TestSymplecticDefect:
    """Tests for the Jacobian-asymmetry test."""

    def test_learned_field_is_symplectic(self, oscillator_model, unit_square):
        """Test that J^{-1} grad H~ has a symmetric Jacobian after J."""
        assert symplectic_defect(oscillator_model.field, unit_square, 50) < 1e-6

    def test_dilation_is_not_symplectic(self, unit_square):
        """Test f(x) = x: J f = (q, -p) has an antisymmetric Jacobian with asymmetry 2."""
        assert symplectic_defect(lambda x: x, unit_square, 10) == pytest.approx(2.0, rel=1e-6)

    def test_shear_has_unit_defect(self, unit_square):
        """Test f(p, q) = (q, q): J f = (q, -q) has asymmetry exactly 1."""

        def shear(x):
            return np.stack([x[..., 1], x[..., 1]], axis=-1)

        assert symplectic_defect(shear, unit_square, 10) == pytest.approx(1.0, rel=1e-6)

    def test_nonsp_baseline_on_pendulum_data(self, pendulum):
        """Test that the baseline fitted to pendulum pairs is measurably non-symplectic."""
        box = pendulum.default_domain
        rng = np.random.default_rng(4)
        points = rng.uniform(box.lower_array, box.upper_array, size=(150, 2))
        pairs = assemble_pairs(point_bursts(points), "exact", truth=pendulum)
        basis = TotalDegreeBasis(4, box)
        sp = symplectic_defect(fit_hamiltonian(pairs, basis).field, box, 100)
        nonsp = symplectic_defect(fit_nonsp(pairs, basis).field, box, 100)
        assert nonsp > 10 * sp

    def test_seeded(self, unit_square):
        """Test that the sample points depend only on the seed."""

        def field(x):
            return np.stack([x[..., 0] * x[..., 1], x[..., 0] ** 2], axis=-1)

        a = symplectic_defect(field, unit_square, 20, seed=3)
        assert a == symplectic_defect(field, unit_square, 20, seed=3)

    def test_needs_samples(self, unit_square):
        """Test that at least one sample is required."""
        with pytest.raises(ArgumentError):
            symplectic_defect(lambda x: x, unit_square, 0)


class TestDiagnose:
    """Tests for the combined diagnostics report."""

    def test_exact_oscillator_report(self, oscillator, oscillator_pairs, oscillator_model):
        """Test the report of an exactly recovered polynomial Hamiltonian."""
        report = diagnose(oscillator_model, oscillator_pairs, oscillator, defect_samples=20)
        assert report.best_approx_error < 1e-10
        assert report.alignment_error < 1e-8
        assert report.symplectic_defect < 1e-6
        assert report.a_minus_i_norm >= 0
        assert report.error_bound == pytest.approx(
            8 * report.truncation_level**2 / oscillator_pairs.count, rel=1e-6
        )

    def test_report_is_repeatable(self, oscillator, oscillator_pairs, oscillator_model):
        """Test that the same seed gives the same report."""
        a = diagnose(oscillator_model, oscillator_pairs, oscillator, defect_samples=5, seed=9)
        b = diagnose(oscillator_model, oscillator_pairs, oscillator, defect_samples=5, seed=9)
        assert a == b

    def test_truncation_level_in_report(self, oscillator, oscillator_model):
        """Test that the report carries L from underdetermined data on a wider box."""
        points = np.array([[0.5, 0.5], [1.5, 0.0], [0.0, -0.2]])
        pairs = assemble_pairs(point_bursts(points), "exact", truth=oscillator)
        basis = TotalDegreeBasis(2, DomainBox.cube(-2.0, 2.0, 2))
        report = diagnose(
            fit_hamiltonian(pairs, basis), pairs, oscillator, defect_samples=5, alignment_samples=16
        )
        assert report.truncation_level == pytest.approx(1.5)

    def test_dense_quadrature_by_default(self, pendulum):
        """Test that L2 errors of a non-polynomial gradient use 4 (n + 1) Gauss points per axis."""
        box = pendulum.default_domain
        points = np.random.default_rng(5).uniform(box.lower_array, box.upper_array, (200, 2))
        pairs = assemble_pairs(point_bursts(points), "exact", truth=pendulum)
        basis = TotalDegreeBasis(4, box)
        report = diagnose(
            fit_hamiltonian(pairs, basis), pairs, pendulum, defect_samples=5, alignment_samples=16
        )
        grad = system_gradient(pendulum)
        assert dense_gauss_points(4) == 20
        assert report.best_approx_error == best_approx_error(grad, basis, 20)
