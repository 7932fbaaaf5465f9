"""Tests for gradient-space least squares, learned models and the non-SP baseline."""

import numpy as np
import pytest

from hamlearn.errors import ArgumentError, DegenerateProblemError, DimensionError
from hamlearn.schemas import DomainBox
from hamlearn.services.basis import TotalDegreeBasis
from hamlearn.services.dynamics import apply_j_inverse, builtin_system, integrate
from hamlearn.services.learner import (
    HamiltonianModel,
    NonSPModel,
    assemble,
    fit_hamiltonian,
    fit_nonsp,
    htilde_eval,
    htilde_grad,
    pseudo_solve,
    reconstructed_system,
    solve,
    truncate_tl,
)
from hamlearn.services.pipeline import assemble_pairs

from .conftest import RecombinedBasis, point_bursts, unit_mixing


def _select(pairs, rows):
    return pairs.model_copy(
        update={
            "states": pairs.states[rows],
            "derivatives": pairs.derivatives[rows],
            "trajectory_ids": pairs.trajectory_ids[rows],
            "times": pairs.times[rows],
        }
    )


class TestAssemble:
    """Tests for the normal equations."""

    def test_gram_symmetric_and_scaled(self, oscillator_pairs, small_basis):
        """Test that A is symmetric PSD and b has one entry per nonconstant function."""
        problem = assemble(oscillator_pairs, small_basis)
        assert problem.gram.shape == (5, 5)
        assert problem.rhs_vec.shape == (5,)
        np.testing.assert_array_equal(problem.gram, problem.gram.T)
        assert np.min(np.linalg.eigvalsh(problem.gram)) > 0
        assert problem.count == 200

    def test_chunk_size_does_not_change_result(self, oscillator_pairs, small_basis):
        """Test that chunking only bounds memory."""
        a = assemble(oscillator_pairs, small_basis, chunk_size=7)
        b = assemble(oscillator_pairs, small_basis, chunk_size=4096)
        np.testing.assert_allclose(a.gram, b.gram, rtol=1e-13, atol=1e-15)
        np.testing.assert_allclose(a.rhs_vec, b.rhs_vec, rtol=1e-13, atol=1e-15)

    def test_repeatable(self, oscillator_pairs, small_basis):
        """Test that assembly is bitwise repeatable."""
        a = assemble(oscillator_pairs, small_basis)
        b = assemble(oscillator_pairs, small_basis)
        np.testing.assert_array_equal(a.gram, b.gram)

    def test_dimension_mismatch(self, oscillator_pairs):
        """Test that pairs and basis must agree on the dimension."""
        basis = TotalDegreeBasis(2, DomainBox.cube(-1.0, 1.0, 4))
        with pytest.raises(DimensionError):
            assemble(oscillator_pairs, basis)

    def test_underdetermined_warning(self, oscillator, small_basis, caplog):
        """Test that N >= K is logged as a warning."""
        pairs = assemble_pairs(point_bursts([[0.1, 0.2], [0.3, -0.4]]), "exact", truth=oscillator)
        assemble(pairs, small_basis)
        assert "underdetermined" in caplog.text


class TestPseudoSolve:
    """Tests for the eigendecomposition solver."""

    def test_full_rank_matches_solve(self):
        """Test that a well-conditioned SPD system is solved exactly."""
        rng = np.random.default_rng(1)
        m = rng.normal(size=(6, 6))
        a = m @ m.T + 6 * np.eye(6)
        b = rng.normal(size=6)
        x, report = pseudo_solve(a, b)
        np.testing.assert_allclose(x, np.linalg.solve(a, b), rtol=1e-10)
        assert report.rank == 6
        assert report.residual < 1e-10

    def test_minimum_norm_on_singular_system(self):
        """Test that truncated directions get no component."""
        a = np.diag([2.0, 1.0, 0.0])
        x, report = pseudo_solve(a, np.array([2.0, 3.0, 0.0]))
        np.testing.assert_allclose(x, [1.0, 3.0, 0.0])
        assert report.rank == 2

    def test_matrix_right_hand_sides(self):
        """Test that several right-hand sides are solved together."""
        a = np.diag([4.0, 2.0])
        x, _ = pseudo_solve(a, np.eye(2))
        np.testing.assert_allclose(x, np.diag([0.25, 0.5]))

    def test_zero_matrix_is_degenerate(self):
        """Test that an all-zero system raises DegenerateProblemError."""
        with pytest.raises(DegenerateProblemError):
            pseudo_solve(np.zeros((3, 3)), np.zeros(3))

    def test_tolerance_must_be_positive(self):
        """Test that rel_tol is validated."""
        with pytest.raises(ArgumentError, match="rel_tol"):
            pseudo_solve(np.eye(2), np.ones(2), rel_tol=0.0)


class TestExactRecovery:
    """Polynomial Hamiltonians inside the span are recovered from exact derivatives."""

    def test_oscillator_recovered(self, oscillator, oscillator_pairs, small_basis):
        """Test grad H~ = grad H to 1e-8 on a grid and H~ = H up to a constant."""
        model = fit_hamiltonian(oscillator_pairs, small_basis)
        axis = np.linspace(-1.0, 1.0, 21)
        grid = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1).reshape(-1, 2)
        np.testing.assert_allclose(model.gradient(grid), grid, atol=1e-8)
        offset = oscillator.hamiltonian(grid) - model.evaluate(grid)
        assert np.ptp(offset) < 1e-8

    def test_henon_heiles_recovered(self):
        """Test exact recovery of a cubic Hamiltonian in four dimensions."""
        system = builtin_system("henon_heiles")
        box = system.default_domain
        rng = np.random.default_rng(8)
        points = rng.uniform(box.lower_array, box.upper_array, size=(400, 4))
        pairs = assemble_pairs(point_bursts(points), "exact", truth=system)
        model = fit_hamiltonian(pairs, TotalDegreeBasis(3, box))
        test = rng.uniform(box.lower_array, box.upper_array, size=(50, 4))
        np.testing.assert_allclose(model.field(test), system.rhs(test), atol=1e-8)

    def test_field_is_symplectic_gradient(self, oscillator_pairs, small_basis):
        """Test that the reconstructed field is J^{-1} grad H~."""
        model = fit_hamiltonian(oscillator_pairs, small_basis)
        x = np.array([[0.2, -0.7], [0.9, 0.1]])
        np.testing.assert_allclose(model.field(x), apply_j_inverse(model.gradient(x)))

    def test_reconstructed_flow_conserves_learned_energy(self, oscillator_pairs, small_basis):
        """Test that RK4 on the learned system keeps H~ nearly constant."""
        model = fit_hamiltonian(oscillator_pairs, small_basis)
        system = reconstructed_system(model)
        traj = integrate(system.rhs, [0.3, 0.4], 1e-2, 5.0)
        energy = system.hamiltonian(traj.states)
        assert np.max(np.abs(energy - energy[0])) < 1e-9

    def test_provenance_digest_carried(self, oscillator_pairs, small_basis):
        """Test that the model records the digest of its training pairs."""
        model = fit_hamiltonian(oscillator_pairs, small_basis)
        assert model.provenance_digest == oscillator_pairs.provenance.digest


class TestFitInvariances:
    """The fit as a map from data to gradients."""

    @pytest.fixture
    def pendulum_pairs(self, pendulum):
        box = pendulum.default_domain
        points = np.random.default_rng(21).uniform(box.lower_array, box.upper_array, (300, 2))
        return assemble_pairs(point_bursts(points), "exact", truth=pendulum)

    @pytest.fixture
    def basis(self, pendulum):
        return TotalDegreeBasis(4, pendulum.default_domain)

    def test_gradient_independent_of_basis_choice(self, pendulum_pairs, basis):
        """Test that recombining the basis functions leaves grad H~ unchanged."""
        recombined = RecombinedBasis(unit_mixing(basis.dim_v), 4, basis.domain)
        direct = fit_hamiltonian(pendulum_pairs, basis)
        mixed = fit_hamiltonian(pendulum_pairs, recombined)
        x = pendulum_pairs.states[:50]
        np.testing.assert_allclose(mixed.gradient(x), direct.gradient(x), rtol=1e-7, atol=1e-9)

    def test_scaling_derivatives_scales_coefficients(self, pendulum_pairs, basis):
        """Test c(s xdot) = s c(xdot)."""
        scaled = pendulum_pairs.model_copy(
            update={"derivatives": -2.5 * pendulum_pairs.derivatives}
        )
        base = fit_hamiltonian(pendulum_pairs, basis).coefficients
        np.testing.assert_allclose(
            fit_hamiltonian(scaled, basis).coefficients, -2.5 * base, rtol=1e-10, atol=1e-12
        )

    def test_linear_in_derivatives(self, pendulum_pairs, basis):
        """Test that the coefficients of summed derivative data are the summed coefficients."""
        other = np.random.default_rng(4).normal(size=pendulum_pairs.derivatives.shape)
        shifted = pendulum_pairs.model_copy(
            update={"derivatives": pendulum_pairs.derivatives + other}
        )
        noise_only = pendulum_pairs.model_copy(update={"derivatives": other})
        total = fit_hamiltonian(shifted, basis).coefficients
        parts = (
            fit_hamiltonian(pendulum_pairs, basis).coefficients
            + fit_hamiltonian(noise_only, basis).coefficients
        )
        np.testing.assert_allclose(total, parts, rtol=1e-9, atol=1e-11)

    def test_pair_order_and_duplication_do_not_matter(self, pendulum_pairs, basis):
        """Test that permuting the pairs or repeating every pair gives the same fit."""
        count = pendulum_pairs.count
        shuffled = _select(pendulum_pairs, np.random.default_rng(2).permutation(count))
        doubled = _select(pendulum_pairs, np.tile(np.arange(count), 2))
        assert doubled.count == 2 * count
        base = fit_hamiltonian(pendulum_pairs, basis).coefficients
        for variant in (shuffled, doubled):
            np.testing.assert_allclose(
                fit_hamiltonian(variant, basis).coefficients, base, rtol=1e-9, atol=1e-11
            )


class TestModelHelpers:
    """Tests for htilde helpers, constants and truncation."""

    def test_htilde_eval_scalar_and_batch(self, oscillator_pairs, small_basis):
        """Test that a single point gives a float and a batch an array."""
        model = fit_hamiltonian(oscillator_pairs, small_basis)
        assert isinstance(htilde_eval(model, [0.1, 0.2]), float)
        assert htilde_eval(model, np.zeros((3, 2))).shape == (3,)
        assert htilde_grad(model, np.zeros((3, 2))).shape == (3, 2)

    def test_with_constant_shifts_values_only(self, oscillator_pairs, small_basis):
        """Test that the constant moves H~ but not its gradient."""
        model = fit_hamiltonian(oscillator_pairs, small_basis)
        shifted = model.with_constant(2.5)
        x = np.array([0.3, 0.3])
        assert shifted.evaluate(x) == pytest.approx(model.evaluate(x) + 2.5)
        np.testing.assert_array_equal(shifted.gradient(x), model.gradient(x))

    def test_truncation(self):
        """Test T_L clips long vectors to radius L and keeps short ones."""
        g = np.array([[3.0, 4.0], [0.3, 0.4]])
        np.testing.assert_allclose(truncate_tl(g, 1.0), [[0.6, 0.8], [0.3, 0.4]])

    def test_truncation_level_positive(self):
        """Test that L must be positive."""
        with pytest.raises(ArgumentError):
            truncate_tl([1.0, 0.0], 0.0)


class TestModelFiles:
    """Tests for model records and files."""

    def test_model_file_reloads_bitwise(self, tmp_path, oscillator_pairs, small_basis):
        """Test that a saved model reloads with identical coefficients and predictions."""
        model = fit_hamiltonian(oscillator_pairs, small_basis).with_constant(0.125)
        loaded = HamiltonianModel.load(model.save(tmp_path / "model.json"))
        np.testing.assert_array_equal(loaded.coefficients, model.coefficients)
        assert loaded.constant == model.constant
        x = np.array([[0.1, -0.3]])
        np.testing.assert_array_equal(loaded.evaluate(x), model.evaluate(x))

    def test_record_kind_checked(self, oscillator_pairs, small_basis):
        """Test that a vector-field record cannot be loaded as a Hamiltonian."""
        record = fit_nonsp(oscillator_pairs, small_basis).to_record()
        with pytest.raises(ArgumentError, match="Hamiltonian"):
            HamiltonianModel.from_record(record)
        assert NonSPModel.from_record(record).coefficients.shape == (2, 6)


class TestNonSP:
    """Tests for the unconstrained vector-field baseline."""

    def test_linear_field_recovered(self, oscillator, oscillator_pairs, small_basis):
        """Test that a polynomial field inside the span is fitted exactly."""
        model = fit_nonsp(oscillator_pairs, small_basis)
        x = np.array([[0.5, -0.25], [-0.9, 0.8]])
        np.testing.assert_allclose(model.field(x), oscillator.rhs(x), atol=1e-10)

    def test_same_data_different_family(self, pendulum):
        """Test that on non-polynomial data the baseline field is not a gradient field."""
        box = pendulum.default_domain
        rng = np.random.default_rng(2)
        points = rng.uniform(box.lower_array, box.upper_array, size=(300, 2))
        pairs = assemble_pairs(point_bursts(points), "exact", truth=pendulum)
        basis = TotalDegreeBasis(4, box)
        sp = fit_hamiltonian(pairs, basis)
        nonsp = fit_nonsp(pairs, basis)
        # divergence of the SP field vanishes identically
        x = np.array([[1.0, 0.5]])
        h = 1e-6

        def divergence(field):
            return sum(
                (field(x + h * e) - field(x - h * e))[0, k] / (2 * h)
                for k, e in enumerate(np.eye(2))
            )
        assert abs(divergence(sp.field)) < 1e-6
        assert abs(divergence(nonsp.field)) > abs(divergence(sp.field))

    def test_solver_report(self, oscillator_pairs, small_basis):
        """Test that the baseline solve reports the full basis size."""
        model = fit_nonsp(oscillator_pairs, small_basis)
        assert model.solver_report.size == small_basis.dim_w

    def test_solve_wraps_problem(self, oscillator_pairs, small_basis):
        """Test that solve returns a model over the problem's basis."""
        problem = assemble(oscillator_pairs, small_basis)
        model = solve(problem)
        assert model.basis is small_basis
        assert model.coefficients.shape == (small_basis.dim_v,)
