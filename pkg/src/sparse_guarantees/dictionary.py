"""
Dictionary construction and coherence analysis

Builds unit-norm dictionaries (two-ortho identity/Hadamard, random Gaussian,
overcomplete DCT, CSV file), computes the mutual coherence, the coherence
bounds on the restricted isometry/orthogonality constants, and the exact
constants by exhaustive enumeration on small dictionaries.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterator, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import hadamard

from .config import (
    DICTIONARY_STREAM_ID,
    ENUMERATION_CAP,
    ENUMERATION_CHUNK,
    FILE_NORM_WARNING_THRESHOLD,
    UNIT_NORM_TOLERANCE,
)
from .errors import (
    DuplicateIndexError,
    EnumerationTooLargeError,
    IndexOutOfRangeError,
    InputError,
    NotPowerOfTwoError,
    TooFewAtomsError,
)
from .numerics import DenseMatrix, RngStream, StreamPurpose, as_dense_matrix, gaussian


logger = logging.getLogger(__name__)


class DictionaryKind(str, Enum):
    TWO_ORTHO_HADAMARD = "two_ortho_hadamard"
    RANDOM_GAUSSIAN = "random_gaussian"
    OVERCOMPLETE_DCT = "overcomplete_dct"
    FROM_FILE = "from_file"


@dataclass(frozen=True, eq=False)
class Dictionary:
    """
    An n x m matrix with unit-norm columns (atoms) and its provenance.

    The matrix is stored read-only; construct through the ``build_*`` helpers
    or ``load_dictionary_csv``, which normalize the columns.
    """
    matrix: DenseMatrix
    kind: DictionaryKind
    seed: Optional[int] = None
    normalization_warning: bool = False

    def __post_init__(self):
        matrix = as_dense_matrix(self.matrix)
        norms = np.linalg.norm(matrix, axis=0)
        if matrix.shape[1] and np.max(np.abs(norms - 1.0)) > UNIT_NORM_TOLERANCE:
            raise InputError("Dictionary columns must have unit l2 norm")
        matrix = matrix.copy()
        matrix.flags.writeable = False
        object.__setattr__(self, "matrix", matrix)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def m(self) -> int:
        return self.matrix.shape[1]

    def gram(self) -> np.ndarray:
        return self.matrix.T @ self.matrix

    def describe(self) -> Dict:
        return {"kind": self.kind.value, "n": self.n, "m": self.m, "seed": self.seed}


@dataclass
class RicBounds:
    """Coherence bounds on the restricted isometry/orthogonality constants."""
    mu: float
    delta: Dict[int, float] = field(default_factory=dict)
    theta: Dict[Tuple[int, int], float] = field(default_factory=dict)


def _normalize_columns(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=0)
    if np.any(norms == 0.0):
        raise InputError("Dictionary contains an all-zero column")
    return matrix / norms


def build_two_ortho_hadamard(n: int) -> Dictionary:
    """
    Build the two-ortho dictionary [I H] with a normalized Sylvester Hadamard block.

    Args:
        n: Signal dimension, a power of two

    Returns:
        n x 2n dictionary with coherence 1/sqrt(n)

    Raises:
        NotPowerOfTwoError: If n is not a power of two
    """
    if n < 1 or n & (n - 1):
        raise NotPowerOfTwoError(f"Two-ortho Hadamard dictionary needs n = 2^k, got {n}")
    h = hadamard(n).astype(np.float64) / math.sqrt(n)
    matrix = np.hstack([np.eye(n), h])
    logger.info(f"Built two-ortho Hadamard dictionary {n}x{2 * n}")
    return Dictionary(matrix, DictionaryKind.TWO_ORTHO_HADAMARD)


def build_random_gaussian(n: int, m: int, seed: int) -> Dictionary:
    """Build an n x m dictionary of i.i.d. normal entries with normalized columns."""
    if n < 1 or m < 1:
        raise InputError(f"Dictionary dimensions must be positive, got {n}x{m}")
    stream = RngStream(seed, DICTIONARY_STREAM_ID).substream(StreamPurpose.DICTIONARY)
    matrix = gaussian(stream, n * m).reshape(n, m)
    logger.info(f"Built random Gaussian dictionary {n}x{m} (seed {seed})")
    return Dictionary(_normalize_columns(matrix), DictionaryKind.RANDOM_GAUSSIAN, seed=seed)


def build_overcomplete_dct(n: int, m: int) -> Dictionary:
    """
    Build an n x m overcomplete DCT dictionary.

    Atom j samples cos(pi * (i + 1/2) * j / m) at i = 0..n-1, i.e. DCT-II
    atoms on m equally spaced frequencies in [0, pi). For m = n this is the
    orthonormal DCT-II basis.
    """
    if n < 1 or m < n:
        raise InputError(f"Overcomplete DCT needs m >= n >= 1, got n={n}, m={m}")
    i = np.arange(n)[:, None] + 0.5
    j = np.arange(m)[None, :]
    matrix = np.cos(np.pi * i * j / m)
    logger.info(f"Built overcomplete DCT dictionary {n}x{m}")
    return Dictionary(_normalize_columns(matrix), DictionaryKind.OVERCOMPLETE_DCT)


def load_dictionary_csv(path: Union[str, Path]) -> Dictionary:
    """
    Load a dictionary from a headerless CSV (n rows, m values per row).

    Columns are re-normalized; ``normalization_warning`` is set when any
    column norm deviated from 1 by more than FILE_NORM_WARNING_THRESHOLD.

    Raises:
        InputError: If the file cannot be parsed as a finite matrix
    """
    path = Path(path)
    try:
        raw = np.loadtxt(path, delimiter=",", ndmin=2, encoding="utf-8")
    except ValueError as e:
        raise InputError(f"Cannot parse dictionary file {path}: {e}") from e
    raw = as_dense_matrix(raw)
    deviation = float(np.max(np.abs(np.linalg.norm(raw, axis=0) - 1.0)))
    warning = deviation > FILE_NORM_WARNING_THRESHOLD
    if warning:
        logger.warning(
            f"Dictionary file {path} has column norms off by up to {deviation:.3e}; re-normalized"
        )
    return Dictionary(_normalize_columns(raw), DictionaryKind.FROM_FILE, normalization_warning=warning)


def save_dictionary_csv(dictionary: Dictionary, path: Union[str, Path]) -> None:
    """Write the dictionary in the headerless CSV format read by ``load_dictionary_csv``."""
    lines = [",".join(repr(float(v)) for v in row) for row in dictionary.matrix]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def coherence(dictionary: Dictionary) -> float:
    """
    Mutual coherence: max |a_i^T a_j| over all pairs i != j.

    Raises:
        TooFewAtomsError: If the dictionary has fewer than two atoms
    """
    if dictionary.m < 2:
        raise TooFewAtomsError(f"Coherence needs at least two atoms, got {dictionary.m}")
    gram = np.abs(dictionary.gram())
    np.fill_diagonal(gram, 0.0)
    return float(gram.max())


def ric_bounds(mu: float, s: int) -> float:
    """Coherence bound (s - 1) mu on the restricted isometry constant delta_s."""
    if s < 1:
        raise InputError(f"Sparsity must be at least 1, got {s}")
    return (s - 1) * mu


def rop_bound(mu: float, s1: int, s2: int) -> float:
    """Coherence bound mu sqrt(s1 s2) on the restricted orthogonality constant."""
    if s1 < 1 or s2 < 1:
        raise InputError(f"Sparsities must be at least 1, got ({s1}, {s2})")
    return mu * math.sqrt(s1 * s2)


def lemma_bounds(mu: float, s_max: int) -> RicBounds:
    """Tabulate delta_s and theta_{s,s} bounds for s = 1..s_max."""
    bounds = RicBounds(mu=mu)
    for s in range(1, s_max + 1):
        bounds.delta[s] = ric_bounds(mu, s)
        bounds.theta[(s, s)] = rop_bound(mu, s, s)
    return bounds


def subdictionary(dictionary: Dictionary, support: Sequence[int]) -> DenseMatrix:
    """
    Columns of the dictionary at ``support``, in the given order.

    Raises:
        IndexOutOfRangeError: If an index lies outside [0, m)
        DuplicateIndexError: If an index repeats
    """
    indices = [int(i) for i in support]
    for i in indices:
        if not 0 <= i < dictionary.m:
            raise IndexOutOfRangeError(f"Atom index {i} outside [0, {dictionary.m})")
    if len(set(indices)) != len(indices):
        raise DuplicateIndexError(f"Support {indices} contains duplicate indices")
    return dictionary.matrix[:, indices]


def _combination_chunks(m: int, s: int, exclude: Tuple[int, ...] = ()) -> Iterator[np.ndarray]:
    pool = [i for i in range(m) if i not in exclude]
    combos = itertools.combinations(pool, s)
    while True:
        chunk = list(itertools.islice(combos, ENUMERATION_CHUNK))
        if not chunk:
            return
        yield np.asarray(chunk, dtype=np.intp)


def _all_combinations(m: int, s: int) -> np.ndarray:
    flat = itertools.chain.from_iterable(itertools.combinations(range(m), s))
    return np.fromiter(flat, dtype=np.intp).reshape(-1, s)


def _check_enumeration(count: int, cap: int, what: str) -> None:
    if count > cap:
        raise EnumerationTooLargeError(f"{what} needs {count} subsets, above the cap of {cap}")


def exact_ric(dictionary: Dictionary, s: int, cap: int = ENUMERATION_CAP) -> float:
    """delta_s by exhaustive search over every size-s support."""
    if not 1 <= s <= min(dictionary.n, dictionary.m):
        raise InputError(f"Sparsity {s} outside [1, min(n, m)]")
    _check_enumeration(math.comb(dictionary.m, s), cap, f"delta_{s}")
    gram = dictionary.gram()
    delta = 0.0
    for chunk in _combination_chunks(dictionary.m, s):
        blocks = gram[chunk[:, :, None], chunk[:, None, :]]
        eigenvalues = np.linalg.eigvalsh(blocks)
        delta = max(delta, float(np.max(eigenvalues[:, -1] - 1.0)), float(np.max(1.0 - eigenvalues[:, 0])))
    return delta


def exact_rop(dictionary: Dictionary, s1: int, s2: int, cap: int = ENUMERATION_CAP) -> float:
    """
    theta_{s1,s2} by exhaustive search over disjoint support pairs.

    For each pair the supremum of |c1^T A1^T A2 c2| over unit c1, c2 equals the
    largest singular value of the cross-Gram A1^T A2. The cap applies to the
    number of supports of each size, C(m, s1) and C(m, s2).
    """
    m = dictionary.m
    if s1 < 1 or s2 < 1 or s1 + s2 > m:
        raise InputError(f"Disjoint supports of sizes ({s1}, {s2}) do not fit in {m} atoms")
    _check_enumeration(max(math.comb(m, s1), math.comb(m, s2)), cap, f"theta_{s1},{s2}")

    gram = dictionary.gram()
    firsts = _all_combinations(m, s1)
    seconds = firsts if s1 == s2 else _all_combinations(m, s2)
    second_index = np.arange(len(seconds))
    block = max(1, ENUMERATION_CHUNK // len(seconds))
    theta = 0.0
    for start in range(0, len(firsts), block):
        first = firsts[start:start + block]
        keep = ~(first[:, None, :, None] == seconds[None, :, None, :]).any(axis=(2, 3))
        if s1 == s2:
            # each unordered pair once: the second support sorts after the first
            keep &= second_index[None, :] > np.arange(start, start + len(first))[:, None]
        rows, cols = np.nonzero(keep)
        if not len(rows):
            continue
        blocks = gram[first[rows][:, :, None], seconds[cols][:, None, :]]
        # the spectral norm never exceeds the Frobenius norm
        frobenius = np.sqrt(np.einsum("kij,kij->k", blocks, blocks))
        blocks = blocks[frobenius > theta]
        if len(blocks):
            theta = max(theta, float(np.max(np.linalg.svd(blocks, compute_uv=False)[:, 0])))
    return theta


def exact_rics(dictionary: Dictionary, s: int, cap: int = ENUMERATION_CAP) -> Tuple[float, float]:
    """
    Exact (delta_s, theta_{s,s}) by exhaustive enumeration.

    theta_{s,s} is reported as 0 when two disjoint size-s supports do not fit.

    Raises:
        EnumerationTooLargeError: If either enumeration exceeds ``cap``
    """
    delta = exact_ric(dictionary, s, cap)
    theta = exact_rop(dictionary, s, s, cap) if 2 * s <= dictionary.m else 0.0
    logger.debug(f"Exact constants for s={s}: delta={delta:.6g}, theta={theta:.6g}")
    return delta, theta


def build_dictionary(
    kind: Union[DictionaryKind, str],
    n: Optional[int] = None,
    m: Optional[int] = None,
    seed: Optional[int] = None,
    path: Optional[Union[str, Path]] = None,
) -> Dictionary:
    """
    Build a dictionary from a kind tag and the parameters that kind needs.

    Raises:
        InputError: If a parameter required by ``kind`` is missing
    """
    kind = DictionaryKind(kind)
    if kind is DictionaryKind.FROM_FILE:
        if path is None:
            raise InputError("from_file dictionaries need a path")
        return load_dictionary_csv(path)
    if n is None:
        raise InputError(f"{kind.value} dictionaries need n")
    if kind is DictionaryKind.TWO_ORTHO_HADAMARD:
        return build_two_ortho_hadamard(n)
    if m is None:
        raise InputError(f"{kind.value} dictionaries need m")
    if kind is DictionaryKind.RANDOM_GAUSSIAN:
        return build_random_gaussian(n, m, 0 if seed is None else seed)
    return build_overcomplete_dct(n, m)
