"""
Sparse estimators with optimality/recovery certificates

Implements the oracle least-squares estimator, the thresholding algorithm,
orthogonal matching pursuit (OMP), basis pursuit denoising (BPDN) and the
Dantzig selector. Every estimator returns an ``Estimate`` carrying the
coefficients, the detected support and solver diagnostics.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from .config import (
    BPDN_GAP_CHECK_EVERY,
    BPDN_MAX_ITER,
    BPDN_TOLERANCE,
    DANTZIG_SOLVER_TOLERANCE,
    DANTZIG_TOLERANCE,
    SUPPORT_TOLERANCE,
)
from .dictionary import Dictionary
from .errors import (
    InfeasibleError,
    InputError,
    InvalidSpecError,
    NoConvergenceError,
    NonPositiveGammaError,
    RankDeficientError,
)
from .numerics import ArrayLike, gram_solve, least_squares, operator_norm_sq


logger = logging.getLogger(__name__)


class EstimatorKind(str, Enum):
    ORACLE = "oracle"
    THRESHOLDING = "thresholding"
    OMP = "omp"
    BPDN = "bpdn"
    DANTZIG = "dantzig"


@dataclass(frozen=True, eq=False)
class SparseSignal:
    """
    Ground-truth sparse vector x0 stored as (dimension, support, values).

    Raises:
        InvalidSpecError: If the support is not sorted/unique/in range, or a value is zero
    """
    m: int
    support: Tuple[int, ...]
    values: np.ndarray

    def __post_init__(self):
        support = tuple(int(i) for i in self.support)
        values = np.asarray(self.values, dtype=np.float64).ravel()
        if len(support) != values.size:
            raise InvalidSpecError(f"Support has {len(support)} indices but {values.size} values")
        if any(b <= a for a, b in zip(support, support[1:])):
            raise InvalidSpecError(f"Support must be sorted and unique: {support}")
        if support and not (0 <= support[0] and support[-1] < self.m):
            raise InvalidSpecError(f"Support {support} outside [0, {self.m})")
        if np.any(values == 0.0):
            raise InvalidSpecError("Signal values on the support must be nonzero")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "values", values)

    @property
    def s(self) -> int:
        return len(self.support)

    @property
    def x_min(self) -> float:
        return float(np.min(np.abs(self.values)))

    @property
    def x_max(self) -> float:
        return float(np.max(np.abs(self.values)))

    @property
    def energy(self) -> float:
        return float(self.values @ self.values)

    def to_dense(self) -> np.ndarray:
        x = np.zeros(self.m)
        x[list(self.support)] = self.values
        return x


@dataclass
class EstimateDiagnostics:
    iterations: int = 0
    duality_gap: Optional[float] = None
    objective: Optional[float] = None
    feasibility_residual: Optional[float] = None
    complementary_slackness: Optional[float] = None
    polished: bool = False


@dataclass
class Estimate:
    """Recovered coefficients, their numerical support and solver diagnostics."""
    coefficients: np.ndarray
    detected_support: Tuple[int, ...]
    diagnostics: EstimateDiagnostics = field(default_factory=EstimateDiagnostics)

    def to_dict(self) -> Dict:
        return {
            "coefficients": [float(v) for v in self.coefficients],
            "detected_support": list(self.detected_support),
            "diagnostics": asdict(self.diagnostics),
        }


def detect_support(coefficients: np.ndarray, tolerance: float = SUPPORT_TOLERANCE) -> Tuple[int, ...]:
    """Indices with |x_i| > tolerance * max|x_j| (empty for the zero vector)."""
    magnitudes = np.abs(coefficients)
    largest = magnitudes.max() if magnitudes.size else 0.0
    if largest == 0.0:
        return ()
    return tuple(int(i) for i in np.flatnonzero(magnitudes > tolerance * largest))


def _estimate(coefficients: np.ndarray, diagnostics: Optional[EstimateDiagnostics] = None) -> Estimate:
    return Estimate(coefficients, detect_support(coefficients), diagnostics or EstimateDiagnostics())


def _as_vector(b: ArrayLike, dictionary: Dictionary) -> np.ndarray:
    b = np.asarray(b, dtype=np.float64).ravel()
    if b.size != dictionary.n:
        raise InputError(f"Measurement vector has length {b.size}, dictionary has {dictionary.n} rows")
    return b


def _ls_on_support(dictionary: Dictionary, b: np.ndarray, support: Sequence[int]) -> np.ndarray:
    coefficients = np.zeros(dictionary.m)
    support = sorted(int(i) for i in support)
    if support:
        coefficients[support] = least_squares(dictionary.matrix[:, support], b)
    return coefficients


def soft_threshold(x: ArrayLike, t: float) -> np.ndarray:
    """Componentwise sign(x_i) * max(|x_i| - t, 0)."""
    if t < 0:
        raise InputError(f"Threshold must be non-negative, got {t}")
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def oracle_estimate(dictionary: Dictionary, b: ArrayLike, support: Sequence[int]) -> Estimate:
    """
    Least squares restricted to the true support.

    Raises:
        RankDeficientError: If the true subdictionary is singular
    """
    b = _as_vector(b, dictionary)
    return _estimate(_ls_on_support(dictionary, b, support))


def thresholding_estimate(dictionary: Dictionary, b: ArrayLike, s: int) -> Estimate:
    """
    Keep the s atoms most correlated with b, then least squares on them.

    Ties are broken toward the lowest index.
    """
    if not 1 <= s <= dictionary.n:
        raise InputError(f"Sparsity {s} outside [1, {dictionary.n}]")
    b = _as_vector(b, dictionary)
    correlations = np.abs(dictionary.matrix.T @ b)
    chosen = np.argsort(-correlations, kind="stable")[:s]
    return _estimate(_ls_on_support(dictionary, b, chosen), EstimateDiagnostics(iterations=1))


def omp_estimate(dictionary: Dictionary, b: ArrayLike, s: int) -> Estimate:
    """
    Orthogonal matching pursuit with a full least-squares refit per iteration.

    Each iteration adds the atom most correlated with the residual (lowest
    index on ties); no atom is chosen twice. The loop ends after s atoms or
    once the residual vanishes.
    """
    if not 1 <= s <= dictionary.n:
        raise InputError(f"Sparsity {s} outside [1, {dictionary.n}]")
    b = _as_vector(b, dictionary)
    a = dictionary.matrix
    b_norm = float(np.linalg.norm(b))

    chosen: List[int] = []
    coefficients = np.zeros(dictionary.m)
    residual = b.copy()
    while len(chosen) < s and np.linalg.norm(residual) > 1e-12 * b_norm:
        correlations = np.abs(a.T @ residual)
        correlations[chosen] = -np.inf
        chosen.append(int(np.argmax(correlations)))
        coefficients = _ls_on_support(dictionary, b, chosen)
        residual = b - a @ coefficients
        logger.debug(f"OMP iteration {len(chosen)}: atom {chosen[-1]}, residual {np.linalg.norm(residual):.3e}")

    return _estimate(coefficients, EstimateDiagnostics(iterations=len(chosen)))


def _bpdn_gap(a: np.ndarray, b: np.ndarray, x: np.ndarray, gamma: float) -> Tuple[float, float, float]:
    """(primal, gap, ||A^T r||_inf) against the scaled-residual dual point."""
    residual = b - a @ x
    correlation = float(np.max(np.abs(a.T @ residual))) if residual.size else 0.0
    primal = 0.5 * float(residual @ residual) + gamma * float(np.sum(np.abs(x)))
    scale = 1.0 if correlation <= gamma else gamma / correlation
    nu = scale * residual
    dual = float(b @ nu) - 0.5 * float(nu @ nu)
    return primal, max(primal - dual, 0.0), correlation


def _polish_bpdn(a: np.ndarray, b: np.ndarray, x: np.ndarray, gamma: float) -> Optional[np.ndarray]:
    """
    Solve the KKT system A_S^T (b - A_S x_S) = gamma sign(x_S) on the current support.

    The nonzero set is tried first, then the tolerance-detected support.
    Returns the polished vector when it keeps the signs and is dual feasible.
    """
    candidates = [tuple(np.flatnonzero(x))]
    detected = detect_support(x)
    if detected != candidates[0]:
        candidates.append(detected)

    for support in candidates:
        support = np.asarray(support, dtype=np.intp)
        if support.size == 0 or support.size > a.shape[0]:
            continue
        signs = np.sign(x[support])
        a_sub = a[:, support]
        try:
            x_sub = least_squares(a_sub, b) - gamma * gram_solve(a_sub, signs)
        except RankDeficientError:
            continue
        if not np.array_equal(np.sign(x_sub), signs):
            continue
        polished = np.zeros_like(x)
        polished[support] = x_sub
        correlation = np.max(np.abs(a.T @ (b - a @ polished)))
        if correlation <= gamma * (1.0 + 1e-9):
            return polished
    return None


def bpdn_kkt_residual(dictionary: Dictionary, b: ArrayLike, x: ArrayLike, gamma: float) -> float:
    """
    Largest violation of the BPDN optimality conditions at x.

    On the support a_i^T r must equal gamma sign(x_i); off the support
    |a_i^T r| must not exceed gamma.
    """
    b = _as_vector(b, dictionary)
    x = np.asarray(x, dtype=np.float64)
    correlation = dictionary.matrix.T @ (b - dictionary.matrix @ x)
    on = x != 0
    violation = np.zeros_like(correlation)
    violation[on] = np.abs(correlation[on] - gamma * np.sign(x[on]))
    violation[~on] = np.maximum(np.abs(correlation[~on]) - gamma, 0.0)
    return float(violation.max()) if violation.size else 0.0


def bpdn_estimate(
    dictionary: Dictionary,
    b: ArrayLike,
    gamma: float,
    tol: float = BPDN_TOLERANCE,
    max_iter: int = BPDN_MAX_ITER,
    lipschitz: Optional[float] = None,
) -> Estimate:
    """
    Minimize 1/2 ||b - Ax||^2 + gamma ||x||_1 by accelerated proximal gradient.

    Iterations stop once the duality gap is at most max(tol * |primal|, 1e-12);
    the converged point is then polished on its support when the exact KKT
    solution there is sign consistent and dual feasible. ``lipschitz`` may
    carry a precomputed operator_norm_sq(A) for repeated solves.

    Raises:
        NonPositiveGammaError: If gamma <= 0
        NoConvergenceError: If the gap criterion is not met within max_iter iterations
    """
    if gamma <= 0:
        raise NonPositiveGammaError(f"BPDN needs gamma > 0, got {gamma}")
    if tol <= 0:
        raise InputError(f"BPDN tolerance must be positive, got {tol}")
    b = _as_vector(b, dictionary)
    a = dictionary.matrix

    step = 1.0 / (lipschitz if lipschitz is not None else operator_norm_sq(a))
    a_t_b = a.T @ b
    x = np.zeros(dictionary.m)
    y = x.copy()
    t = 1.0

    primal, gap, _ = _bpdn_gap(a, b, x, gamma)
    iteration = 0
    while gap > max(tol * abs(primal), 1e-12):
        if iteration >= max_iter:
            logger.error(f"BPDN stopped at the iteration cap with gap {gap:.3e}")
            raise NoConvergenceError(f"BPDN did not reach gap tolerance in {max_iter} iterations", iterations=iteration)
        iteration += 1
        gradient = a.T @ (a @ y) - a_t_b
        x_next = soft_threshold(y - step * gradient, gamma * step)
        # gradient-based restart keeps the momentum from overshooting
        if float((y - x_next) @ (x_next - x)) > 0:
            t = 1.0
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = x_next + ((t - 1.0) / t_next) * (x_next - x)
        x, t = x_next, t_next
        if iteration % BPDN_GAP_CHECK_EVERY == 0:
            primal, gap, _ = _bpdn_gap(a, b, x, gamma)

    diagnostics = EstimateDiagnostics(iterations=iteration)
    polished = _polish_bpdn(a, b, x, gamma)
    if polished is not None:
        polished_primal, polished_gap, _ = _bpdn_gap(a, b, polished, gamma)
        if polished_primal <= primal + 1e-12 * max(1.0, abs(primal)):
            x, primal, gap = polished, polished_primal, polished_gap
            diagnostics.polished = True

    diagnostics.duality_gap = gap
    diagnostics.objective = primal
    logger.debug(f"BPDN finished after {iteration} iterations, gap {gap:.3e}")
    return _estimate(x, diagnostics)


def dantzig_estimate(
    dictionary: Dictionary,
    b: ArrayLike,
    tau: float,
    tol: float = DANTZIG_TOLERANCE,
) -> Estimate:
    """
    Solve min ||x||_1 subject to ||A^T (b - Ax)||_inf <= tau as a linear program.

    The LP uses split variables x = u - v with u, v >= 0 and is solved by the
    HiGHS dual simplex. The result is certified by its constraint violation
    and complementary-slackness residual, both reported in the diagnostics.

    Raises:
        InfeasibleError: If the LP solver reports infeasibility
        NoConvergenceError: If the solver fails or the certificates exceed ``tol``
    """
    if tau < 0:
        raise InputError(f"Dantzig selector needs tau >= 0, got {tau}")
    b = _as_vector(b, dictionary)
    a = dictionary.matrix
    m = dictionary.m
    gram = a.T @ a
    correlation = a.T @ b

    if np.max(np.abs(correlation)) <= tau:
        return _estimate(
            np.zeros(m),
            EstimateDiagnostics(objective=0.0, feasibility_residual=0.0, complementary_slackness=0.0),
        )

    a_ub = np.block([[gram, -gram], [-gram, gram]])
    b_ub = np.concatenate([correlation + tau, tau - correlation])
    result = linprog(
        np.ones(2 * m),
        A_ub=a_ub,
        b_ub=b_ub,
        bounds=(0, None),
        method="highs-ds",
        options={
            "primal_feasibility_tolerance": DANTZIG_SOLVER_TOLERANCE,
            "dual_feasibility_tolerance": DANTZIG_SOLVER_TOLERANCE,
        },
    )
    if result.status == 2:
        raise InfeasibleError(f"Dantzig LP infeasible for tau={tau}: {result.message}")
    if result.status != 0:
        logger.error(f"Dantzig LP failed: {result.message}")
        raise NoConvergenceError(f"Dantzig LP failed: {result.message}", iterations=int(result.nit))

    z = result.x
    x = z[:m] - z[m:]
    feasibility = max(0.0, float(np.max(np.abs(correlation - gram @ x))) - tau)
    slack = b_ub - a_ub @ z
    slackness = max(
        float(np.max(np.abs(result.ineqlin.marginals * slack))),
        float(np.max(np.abs(result.lower.marginals * z))),
    )
    if feasibility > tol or slackness > tol:
        raise NoConvergenceError(
            f"Dantzig certificates out of tolerance: violation {feasibility:.3e}, slackness {slackness:.3e}",
            iterations=int(result.nit),
        )

    diagnostics = EstimateDiagnostics(
        iterations=int(result.nit),
        objective=float(np.sum(np.abs(x))),
        feasibility_residual=feasibility,
        complementary_slackness=slackness,
    )
    return _estimate(x, diagnostics)


def run_estimator(
    kind: EstimatorKind,
    dictionary: Dictionary,
    b: ArrayLike,
    *,
    s: Optional[int] = None,
    support: Optional[Sequence[int]] = None,
    gamma: Optional[float] = None,
    tau: Optional[float] = None,
    tol: Optional[float] = None,
    lipschitz: Optional[float] = None,
) -> Estimate:
    """
    Dispatch to one estimator by tag.

    Raises:
        InputError: If a parameter the estimator needs is missing
    """
    kind = EstimatorKind(kind)
    if kind is EstimatorKind.ORACLE:
        if support is None:
            raise InputError("oracle estimator needs the true support")
        return oracle_estimate(dictionary, b, support)
    if kind in (EstimatorKind.THRESHOLDING, EstimatorKind.OMP):
        if s is None:
            raise InputError(f"{kind.value} estimator needs the sparsity s")
        if kind is EstimatorKind.THRESHOLDING:
            return thresholding_estimate(dictionary, b, s)
        return omp_estimate(dictionary, b, s)
    if kind is EstimatorKind.BPDN:
        if gamma is None:
            raise InputError("bpdn estimator needs gamma")
        return bpdn_estimate(
            dictionary, b, gamma, tol if tol is not None else BPDN_TOLERANCE, lipschitz=lipschitz
        )
    if tau is None:
        raise InputError("dantzig estimator needs tau")
    return dantzig_estimate(dictionary, b, tau, tol if tol is not None else DANTZIG_TOLERANCE)
