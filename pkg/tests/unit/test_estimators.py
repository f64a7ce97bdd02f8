"""
Unit tests for the sparse estimators

Tests cover:
- Oracle, thresholding and OMP recovery
- BPDN proximal iterations, duality gap and support polish
- Dantzig selector LP and its certificates
- Estimator dispatch and input validation
- Agreement with closed forms and a coordinate-descent reference
- Greedy residual and scaling invariants
"""

import pytest
import numpy as np
from scipy.linalg import hadamard

import sys
from pathlib import Path

# Add src directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from src.sparse_guarantees.dictionary import (
    Dictionary,
    DictionaryKind,
    build_random_gaussian,
    build_two_ortho_hadamard,
    coherence,
)
from src.sparse_guarantees.errors import (
    InputError,
    InvalidSpecError,
    NoConvergenceError,
    NonPositiveGammaError,
    RankDeficientError,
)
from src.sparse_guarantees.estimators import (
    EstimatorKind,
    SparseSignal,
    bpdn_estimate,
    bpdn_kkt_residual,
    dantzig_estimate,
    detect_support,
    omp_estimate,
    oracle_estimate,
    run_estimator,
    soft_threshold,
    thresholding_estimate,
)
from src.sparse_guarantees.guarantees import dantzig_guarantee, event_b_holds, greedy_guarantee


@pytest.fixture
def dictionary():
    """16 x 32 two-ortho dictionary, mu = 1/4."""
    return build_two_ortho_hadamard(16)


@pytest.fixture
def signal():
    return SparseSignal(32, (1, 20), np.array([1.0, -0.8]))


@pytest.fixture
def noiseless(dictionary, signal):
    return dictionary.matrix @ signal.to_dense()


class TestSparseSignal:
    """Test suite for the ground-truth signal type."""

    def test_properties(self, signal):
        assert signal.s == 2
        assert signal.x_min == pytest.approx(0.8)
        assert signal.x_max == pytest.approx(1.0)
        assert signal.energy == pytest.approx(1.64)
        dense = signal.to_dense()
        assert dense.shape == (32,)
        assert dense[20] == -0.8

    def test_rejects_zero_values(self):
        with pytest.raises(InvalidSpecError):
            SparseSignal(8, (0, 3), np.array([1.0, 0.0]))

    def test_rejects_unsorted_support(self):
        with pytest.raises(InvalidSpecError):
            SparseSignal(8, (3, 0), np.array([1.0, 2.0]))

    def test_rejects_out_of_range(self):
        with pytest.raises(InvalidSpecError):
            SparseSignal(8, (2, 8), np.array([1.0, 2.0]))


class TestHelpers:
    """Test suite for soft thresholding and support detection."""

    def test_soft_threshold(self):
        result = soft_threshold(np.array([3.0, -0.5, -2.0, 0.0]), 1.0)
        assert np.array_equal(result, np.array([2.0, 0.0, -1.0, 0.0]))

    def test_soft_threshold_negative(self):
        with pytest.raises(InputError):
            soft_threshold(np.ones(2), -0.1)

    def test_detect_support(self):
        assert detect_support(np.zeros(4)) == ()
        assert detect_support(np.array([0.0, 1.0, 1e-9, -0.5])) == (1, 3)


class TestGreedyAndOracle:
    """Test suite for the least-squares based estimators."""

    def test_oracle_recovers_noiseless(self, dictionary, signal, noiseless):
        estimate = oracle_estimate(dictionary, noiseless, signal.support)
        assert np.allclose(estimate.coefficients, signal.to_dense(), atol=1e-12)
        assert estimate.detected_support == signal.support

    def test_oracle_rank_deficient(self):
        dictionary = build_two_ortho_hadamard(2)
        with pytest.raises(RankDeficientError):
            oracle_estimate(dictionary, np.ones(2), [0, 1, 2])

    def test_thresholding_noiseless(self, dictionary, signal, noiseless):
        estimate = thresholding_estimate(dictionary, noiseless, 2)
        assert estimate.detected_support == signal.support
        assert np.allclose(estimate.coefficients, signal.to_dense(), atol=1e-12)

    def test_omp_noiseless(self, dictionary, signal, noiseless):
        estimate = omp_estimate(dictionary, noiseless, 2)
        assert estimate.detected_support == signal.support
        assert estimate.diagnostics.iterations == 2
        assert np.allclose(estimate.coefficients, signal.to_dense(), atol=1e-12)

    def test_omp_stops_on_zero_residual(self, dictionary, signal, noiseless):
        """Extra iterations are skipped once b is explained exactly."""
        estimate = omp_estimate(dictionary, noiseless, 5)
        assert estimate.diagnostics.iterations == 2
        assert estimate.detected_support == signal.support

    def test_sparsity_range(self, dictionary, noiseless):
        with pytest.raises(InputError):
            omp_estimate(dictionary, noiseless, 17)
        with pytest.raises(InputError):
            thresholding_estimate(dictionary, noiseless, 0)

    def test_measurement_length(self, dictionary):
        with pytest.raises(InputError):
            omp_estimate(dictionary, np.ones(5), 1)


class TestBPDN:
    """Test suite for basis pursuit denoising."""

    def test_small_gamma_recovers_support(self, dictionary, signal, noiseless):
        gamma = 1e-3
        estimate = bpdn_estimate(dictionary, noiseless, gamma)
        assert estimate.detected_support == signal.support
        assert np.allclose(estimate.coefficients, signal.to_dense(), atol=1e-2)
        assert estimate.diagnostics.duality_gap <= 1e-8
        assert estimate.diagnostics.polished
        assert bpdn_kkt_residual(dictionary, noiseless, estimate.coefficients, gamma) <= 1e-6 * gamma

    def test_large_gamma_gives_zero(self, dictionary, noiseless):
        gamma = float(np.max(np.abs(dictionary.matrix.T @ noiseless))) * 1.01
        estimate = bpdn_estimate(dictionary, noiseless, gamma)
        assert np.array_equal(estimate.coefficients, np.zeros(32))
        assert estimate.detected_support == ()
        assert estimate.diagnostics.iterations == 0

    def test_precomputed_lipschitz(self, dictionary, noiseless):
        """A supplied step-size constant gives the same solution."""
        default = bpdn_estimate(dictionary, noiseless, 0.05)
        supplied = bpdn_estimate(dictionary, noiseless, 0.05, lipschitz=2.0 * (1 + 1e-6))
        assert np.allclose(default.coefficients, supplied.coefficients, atol=1e-8)

    def test_non_positive_gamma(self, dictionary, noiseless):
        with pytest.raises(NonPositiveGammaError):
            bpdn_estimate(dictionary, noiseless, 0.0)

    def test_iteration_cap(self, dictionary, noiseless):
        with pytest.raises(NoConvergenceError) as exc_info:
            bpdn_estimate(dictionary, noiseless, 1e-3, tol=1e-15, max_iter=1)
        assert exc_info.value.iterations == 1


class TestDantzig:
    """Test suite for the Dantzig selector."""

    def test_small_tau_recovers(self, dictionary, signal, noiseless):
        estimate = dantzig_estimate(dictionary, noiseless, 1e-6)
        assert estimate.detected_support == signal.support
        assert np.allclose(estimate.coefficients, signal.to_dense(), atol=1e-4)
        assert estimate.diagnostics.feasibility_residual <= 1e-8
        assert estimate.diagnostics.complementary_slackness <= 1e-8

    def test_constraint_holds(self, dictionary, noiseless):
        tau = 0.1
        estimate = dantzig_estimate(dictionary, noiseless, tau)
        residual = noiseless - dictionary.matrix @ estimate.coefficients
        assert np.max(np.abs(dictionary.matrix.T @ residual)) <= tau + 1e-8
        assert estimate.diagnostics.objective == pytest.approx(np.sum(np.abs(estimate.coefficients)))

    def test_zero_solution_shortcut(self, dictionary, noiseless):
        tau = float(np.max(np.abs(dictionary.matrix.T @ noiseless)))
        estimate = dantzig_estimate(dictionary, noiseless, tau)
        assert np.array_equal(estimate.coefficients, np.zeros(32))
        assert estimate.diagnostics.objective == 0.0

    def test_negative_tau(self, dictionary, noiseless):
        with pytest.raises(InputError):
            dantzig_estimate(dictionary, noiseless, -1.0)


class TestRunEstimator:
    """Test suite for tag dispatch."""

    def test_dispatch_matches_direct_call(self, dictionary, noiseless):
        via_tag = run_estimator("thresholding", dictionary, noiseless, s=2)
        direct = thresholding_estimate(dictionary, noiseless, 2)
        assert np.array_equal(via_tag.coefficients, direct.coefficients)

    @pytest.mark.parametrize(
        "kind",
        [EstimatorKind.ORACLE, EstimatorKind.OMP, EstimatorKind.BPDN, EstimatorKind.DANTZIG],
    )
    def test_missing_parameter(self, dictionary, noiseless, kind):
        with pytest.raises(InputError):
            run_estimator(kind, dictionary, noiseless)

    def test_unknown_tag(self, dictionary, noiseless):
        with pytest.raises(ValueError):
            run_estimator("lasso", dictionary, noiseless)

    def test_estimate_serializes(self, dictionary, noiseless):
        data = run_estimator(EstimatorKind.OMP, dictionary, noiseless, s=2).to_dict()
        assert data["detected_support"] == [1, 20]
        assert len(data["coefficients"]) == 32
        assert data["diagnostics"]["iterations"] == 2


def _orthonormal(n):
    return Dictionary(hadamard(n) / np.sqrt(n), DictionaryKind.FROM_FILE)


def _noisy_instance(seed, n=32, m=64, s=4, sigma=0.01):
    """Random Gaussian dictionary, an s-sparse x0 and b = A x0 + w."""
    dictionary = build_random_gaussian(n, m, seed=seed)
    rng = np.random.default_rng(seed)
    x0 = np.zeros(m)
    x0[rng.choice(m, s, replace=False)] = rng.choice([-1.0, 1.0], s) * rng.uniform(0.5, 1.0, s)
    return dictionary, x0, dictionary.matrix @ x0 + sigma * rng.standard_normal(n)


def _coordinate_descent(a, b, gamma, max_sweeps=20000):
    """Cyclic coordinate descent for 1/2 ||b - Ax||^2 + gamma ||x||_1 with unit-norm columns."""
    x = np.zeros(a.shape[1])
    residual = b.copy()
    for _ in range(max_sweeps):
        largest_step = 0.0
        for i in range(a.shape[1]):
            old = x[i]
            z = old + a[:, i] @ residual
            x[i] = np.sign(z) * max(abs(z) - gamma, 0.0)
            if x[i] != old:
                residual -= a[:, i] * (x[i] - old)
                largest_step = max(largest_step, abs(x[i] - old))
        if largest_step < 1e-14:
            break
    return x


def _bpdn_objective(a, b, x, gamma):
    residual = b - a @ x
    return 0.5 * float(residual @ residual) + gamma * float(np.sum(np.abs(x)))


class TestSolverReferences:
    """Test suite comparing the convex solvers with closed forms and a reference solver."""

    def test_bpdn_orthonormal_is_soft_threshold(self):
        dictionary = _orthonormal(16)
        b = np.random.default_rng(3).standard_normal(16)
        gamma = 0.4
        estimate = bpdn_estimate(dictionary, b, gamma)
        expected = soft_threshold(dictionary.matrix.T @ b, gamma)
        assert np.allclose(estimate.coefficients, expected, atol=1e-9)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_bpdn_matches_coordinate_descent(self, seed):
        dictionary, _, b = _noisy_instance(seed)
        a = dictionary.matrix
        gamma = 0.1 * float(np.max(np.abs(a.T @ b)))
        estimate = bpdn_estimate(dictionary, b, gamma)
        reference = _bpdn_objective(a, b, _coordinate_descent(a, b, gamma), gamma)
        assert estimate.diagnostics.objective == pytest.approx(reference, rel=1e-8)
        assert _bpdn_objective(a, b, estimate.coefficients, gamma) <= reference + 1e-9 * max(1.0, reference)

    def test_dantzig_zero_tau_orthonormal(self):
        dictionary = _orthonormal(16)
        b = np.random.default_rng(4).standard_normal(16)
        estimate = dantzig_estimate(dictionary, b, 0.0)
        assert np.allclose(estimate.coefficients, dictionary.matrix.T @ b, atol=1e-8)

    def test_dantzig_l1_not_above_truth_under_event_b(self):
        """When every atom correlates with the noise below tau, x0 itself is feasible."""
        dictionary = build_two_ortho_hadamard(64)
        mu = coherence(dictionary)
        sigma = 0.05
        tau = dantzig_guarantee(mu, 3, dictionary.m, sigma, 1.0).parameter
        checked = 0
        for seed in range(20):
            rng = np.random.default_rng(100 + seed)
            x0 = np.zeros(dictionary.m)
            x0[rng.choice(dictionary.m, 3, replace=False)] = rng.uniform(0.5, 1.0, 3)
            w = sigma * rng.standard_normal(dictionary.n)
            if not event_b_holds(dictionary, w, tau):
                continue
            checked += 1
            estimate = dantzig_estimate(dictionary, dictionary.matrix @ x0 + w, tau)
            assert np.sum(np.abs(estimate.coefficients)) <= np.sum(np.abs(x0)) + 1e-7
        assert checked >= 10


class TestGreedyInvariants:
    """Test suite for properties of the greedy estimators."""

    def test_omp_residual_strictly_decreases(self):
        dictionary, _, b = _noisy_instance(7, sigma=0.05)
        norms = [np.linalg.norm(b)]
        for k in range(1, 8):
            coefficients = omp_estimate(dictionary, b, k).coefficients
            norms.append(np.linalg.norm(b - dictionary.matrix @ coefficients))
        assert all(later < earlier for earlier, later in zip(norms, norms[1:]))

    @pytest.mark.parametrize("scale", [0.5, 3.0, 1e3])
    def test_support_invariant_to_positive_scaling(self, scale):
        dictionary, _, b = _noisy_instance(8, sigma=0.05)
        assert omp_estimate(dictionary, scale * b, 4).detected_support == omp_estimate(dictionary, b, 4).detected_support
        assert (
            thresholding_estimate(dictionary, scale * b, 4).detected_support
            == thresholding_estimate(dictionary, b, 4).detected_support
        )

    def test_thresholding_fails_when_condition_violated(self, dictionary):
        """A weak coefficient next to a strong one loses to a Hadamard atom correlated with both."""
        x0 = np.zeros(32)
        x0[0], x0[1] = 1.0, 0.1
        _, report = greedy_guarantee(coherence(dictionary), 2, 32, 1e-6, 1.0, x_min=0.1, x_max=1.0)
        assert not report.applies
        estimate = thresholding_estimate(dictionary, dictionary.matrix @ x0, 2)
        assert estimate.detected_support != (0, 1)
        assert estimate.detected_support == (0, 16)
