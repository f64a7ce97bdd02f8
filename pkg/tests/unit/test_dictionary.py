"""
Unit tests for dictionary construction and analysis

Tests cover:
- Two-ortho, random Gaussian and overcomplete DCT builders
- CSV loading/saving with normalization warnings
- Coherence and the RIC/ROP coherence bounds
- Exhaustive RIC/ROP computation
"""

import itertools
import math

import pytest
import numpy as np

import sys
from pathlib import Path

# Add src directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from src.sparse_guarantees.dictionary import (
    Dictionary,
    DictionaryKind,
    build_dictionary,
    build_overcomplete_dct,
    build_random_gaussian,
    build_two_ortho_hadamard,
    coherence,
    exact_ric,
    exact_rics,
    exact_rop,
    lemma_bounds,
    load_dictionary_csv,
    ric_bounds,
    rop_bound,
    save_dictionary_csv,
    subdictionary,
)
from src.sparse_guarantees.errors import (
    DuplicateIndexError,
    EnumerationTooLargeError,
    IndexOutOfRangeError,
    InputError,
    NotPowerOfTwoError,
    TooFewAtomsError,
)


def _unit_norm(dictionary):
    return np.allclose(np.linalg.norm(dictionary.matrix, axis=0), 1.0, atol=1e-12)


class TestBuilders:
    """Test suite for dictionary builders."""

    def test_two_ortho_shape_and_coherence(self):
        dictionary = build_two_ortho_hadamard(16)
        assert (dictionary.n, dictionary.m) == (16, 32)
        assert dictionary.kind is DictionaryKind.TWO_ORTHO_HADAMARD
        assert _unit_norm(dictionary)
        assert coherence(dictionary) == pytest.approx(0.25, abs=1e-12)

    def test_two_ortho_needs_power_of_two(self):
        with pytest.raises(NotPowerOfTwoError):
            build_two_ortho_hadamard(12)

    def test_random_gaussian_reproducible(self):
        first = build_random_gaussian(6, 10, seed=3)
        second = build_random_gaussian(6, 10, seed=3)
        other = build_random_gaussian(6, 10, seed=4)
        assert np.array_equal(first.matrix, second.matrix)
        assert not np.array_equal(first.matrix, other.matrix)
        assert _unit_norm(first)
        assert first.seed == 3

    def test_overcomplete_dct(self):
        dictionary = build_overcomplete_dct(8, 16)
        assert dictionary.matrix.shape == (8, 16)
        assert _unit_norm(dictionary)
        assert 0.0 < coherence(dictionary) < 1.0

    def test_overcomplete_dct_needs_m_at_least_n(self):
        with pytest.raises(InputError):
            build_overcomplete_dct(8, 4)

    def test_matrix_is_read_only(self):
        dictionary = build_two_ortho_hadamard(4)
        with pytest.raises(ValueError):
            dictionary.matrix[0, 0] = 2.0

    def test_non_unit_columns_rejected(self):
        with pytest.raises(InputError):
            Dictionary(np.array([[2.0, 0.0], [0.0, 1.0]]), DictionaryKind.FROM_FILE)

    def test_build_dictionary_dispatch(self):
        assert build_dictionary("two_ortho_hadamard", n=8).m == 16
        assert build_dictionary(DictionaryKind.OVERCOMPLETE_DCT, n=4, m=6).m == 6
        with pytest.raises(InputError):
            build_dictionary(DictionaryKind.RANDOM_GAUSSIAN, n=4)
        with pytest.raises(InputError):
            build_dictionary(DictionaryKind.FROM_FILE)


class TestDictionaryFiles:
    """Test suite for the headerless CSV format."""

    def test_save_and_load(self, tmp_path):
        dictionary = build_random_gaussian(5, 7, seed=1)
        path = tmp_path / "dictionary.csv"
        save_dictionary_csv(dictionary, path)

        loaded = load_dictionary_csv(path)
        assert loaded.kind is DictionaryKind.FROM_FILE
        assert not loaded.normalization_warning
        assert np.allclose(loaded.matrix, dictionary.matrix, atol=1e-15)

    def test_unnormalized_file_flagged(self, tmp_path):
        path = tmp_path / "raw.csv"
        path.write_text("2.0,0.0,1.0\n0.0,3.0,1.0\n", encoding="utf-8")

        loaded = load_dictionary_csv(path)
        assert loaded.normalization_warning
        assert _unit_norm(loaded)
        assert loaded.matrix[0, 2] == pytest.approx(1.0 / math.sqrt(2.0))

    def test_unparseable_file(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1.0,abc\n", encoding="utf-8")
        with pytest.raises(InputError):
            load_dictionary_csv(path)


class TestCoherenceBounds:
    """Test suite for coherence and the derived RIC/ROP bounds."""

    def test_too_few_atoms(self):
        single = Dictionary(np.array([[1.0], [0.0]]), DictionaryKind.FROM_FILE)
        with pytest.raises(TooFewAtomsError):
            coherence(single)

    def test_bound_formulas(self):
        assert ric_bounds(0.1, 1) == 0.0
        assert ric_bounds(0.1, 3) == pytest.approx(0.2)
        assert rop_bound(0.1, 2, 8) == pytest.approx(0.4)
        with pytest.raises(InputError):
            ric_bounds(0.1, 0)

    def test_lemma_table(self):
        bounds = lemma_bounds(0.05, 4)
        assert sorted(bounds.delta) == [1, 2, 3, 4]
        assert bounds.delta[4] == pytest.approx(0.15)
        assert bounds.theta[(3, 3)] == pytest.approx(0.15)


class TestSubdictionary:
    """Test suite for column selection."""

    @pytest.fixture
    def dictionary(self):
        return build_two_ortho_hadamard(4)

    def test_order_preserved(self, dictionary):
        sub = subdictionary(dictionary, [5, 0, 2])
        assert np.array_equal(sub[:, 0], dictionary.matrix[:, 5])
        assert np.array_equal(sub[:, 1], dictionary.matrix[:, 0])

    def test_out_of_range(self, dictionary):
        with pytest.raises(IndexOutOfRangeError):
            subdictionary(dictionary, [0, 8])

    def test_duplicates(self, dictionary):
        with pytest.raises(DuplicateIndexError):
            subdictionary(dictionary, [1, 1])


class TestExactConstants:
    """Test suite for exhaustive RIC/ROP enumeration."""

    def test_orthonormal_dictionary(self):
        identity = Dictionary(np.eye(4), DictionaryKind.FROM_FILE)
        assert exact_ric(identity, 2) == pytest.approx(0.0, abs=1e-12)
        assert exact_rop(identity, 1, 2) == pytest.approx(0.0, abs=1e-12)

    def test_two_ortho_pairs(self):
        """Two atoms with correlation mu give delta_2 = theta_1,1 = mu."""
        dictionary = build_two_ortho_hadamard(4)
        assert exact_ric(dictionary, 1) == pytest.approx(0.0, abs=1e-12)
        assert exact_ric(dictionary, 2) == pytest.approx(0.5, abs=1e-12)
        assert exact_rop(dictionary, 1, 1) == pytest.approx(0.5, abs=1e-12)

    def test_coherence_bounds_hold(self):
        """Exact constants never exceed their coherence bounds."""
        for seed in range(3):
            dictionary = build_random_gaussian(6, 10, seed=seed)
            mu = coherence(dictionary)
            for s in range(1, 4):
                delta, theta = exact_rics(dictionary, s)
                assert delta <= ric_bounds(mu, s) + 1e-10
                assert theta <= rop_bound(mu, s, s) + 1e-10
            assert exact_rop(dictionary, 1, 3) <= rop_bound(mu, 1, 3) + 1e-10

    def test_theta_zero_when_supports_do_not_fit(self):
        dictionary = Dictionary(np.eye(3), DictionaryKind.FROM_FILE)
        assert exact_rics(dictionary, 2)[1] == 0.0

    def test_enumeration_cap(self):
        dictionary = build_two_ortho_hadamard(8)
        with pytest.raises(EnumerationTooLargeError):
            exact_ric(dictionary, 3, cap=10)
        with pytest.raises(EnumerationTooLargeError):
            exact_rop(dictionary, 2, 2, cap=10)

    def test_cap_counts_supports_not_pairs(self):
        """C(16, 2) = 120 supports of size two, but 5460 disjoint pairs."""
        dictionary = build_two_ortho_hadamard(8)
        assert exact_rop(dictionary, 2, 2, cap=120) == pytest.approx(2.0 / math.sqrt(8), abs=1e-12)
        assert exact_rics(dictionary, 2, cap=120)[0] == pytest.approx(1.0 / math.sqrt(8), abs=1e-12)

    @pytest.mark.parametrize("s1,s2", [(1, 1), (2, 2), (1, 3), (3, 2)])
    def test_rop_matches_pairwise_search(self, s1, s2):
        dictionary = build_random_gaussian(5, 9, seed=11)
        gram = dictionary.gram()
        expected = 0.0
        for first in itertools.combinations(range(9), s1):
            for second in itertools.combinations(sorted(set(range(9)) - set(first)), s2):
                block = gram[np.ix_(first, second)]
                expected = max(expected, np.linalg.norm(block, 2))
        assert exact_rop(dictionary, s1, s2) == pytest.approx(expected, abs=1e-12)

    def test_largest_lemma_size(self):
        """12 x 20 at s = 4 stays inside the default cap."""
        dictionary = build_random_gaussian(12, 20, seed=1)
        mu = coherence(dictionary)
        delta, theta = exact_rics(dictionary, 4)
        assert delta <= ric_bounds(mu, 4) + 1e-10
        assert 0.0 < theta <= rop_bound(mu, 4, 4) + 1e-10
