"""
Closed-form performance guarantees

Coherence-based guarantee calculators for the adversarial BPDN bound, the
Dantzig selector, BPDN (explicit gamma and the recommended gamma), OMP and
thresholding, together with the Cramer-Rao bound, the SNR definition,
parameter selectors and the empirical noise events used in the proofs.

All logarithms are natural logarithms. Reports never raise on a violated
condition: ``applies`` carries the verdict so sweeps can tabulate regimes.
"""

import logging
import math
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field
from scipy.optimize import brentq

from .dictionary import Dictionary, subdictionary
from .errors import InputError, NonPositiveSigmaError
from .estimators import EstimatorKind, SparseSignal
from .numerics import ArrayLike, inverse_gram_trace, least_squares


logger = logging.getLogger(__name__)

ADVERSARIAL_LINF_FACTOR = 3.0 + math.sqrt(1.5)
SQRT2 = math.sqrt(2.0)


class GuaranteeReport(BaseModel):
    """Outcome of one guarantee calculator; serializes to a flat JSON object."""
    estimator: str = Field(..., description="Estimator tag the guarantee applies to")
    applies: bool = Field(..., description="Whether the theorem's condition holds")
    condition_lhs: Optional[float] = Field(None, description="Left-hand side of the condition")
    condition: str = Field(..., description="Inequality checked, lhs <op> rhs")
    condition_rhs: Optional[float] = Field(None, description="Right-hand side; null when unbounded")
    parameter_name: Optional[str] = Field(None, description="gamma, tau or epsilon")
    parameter: Optional[float] = Field(None, description="Recommended or supplied parameter value")
    alpha: Optional[float] = Field(None, description="Confidence constant used")
    success_probability: float = Field(..., ge=0.0, le=1.0)
    sq_error_bound: Optional[float] = Field(
        None, description="Squared l2 error bound (l_inf bound for the adversarial case)"
    )
    error_norm: str = Field("l2_squared", description="Norm the bound is stated in")
    bound_coefficient: Optional[float] = Field(
        None, description="Bound formula over s sigma^2 ln m; reported even when the condition fails"
    )
    relaxed_bound: Optional[float] = Field(None, description="Simplified (looser) bound when one exists")
    notes: str = ""


def _finite(value: float) -> Optional[float]:
    return value if math.isfinite(value) else None


def _clamp_probability(value: float, notes: list) -> float:
    if value < 0.0:
        notes.append("vacuous: closed-form probability is negative")
        return 0.0
    return min(value, 1.0)


def _coefficient(bound: Optional[float], s: int, sigma: float, m: int) -> Optional[float]:
    if bound is None or sigma <= 0.0:
        return None
    return bound / (s * sigma**2 * math.log(m))


def _check_common(s: int, m: int, sigma: float, alpha: Optional[float]) -> None:
    if s < 1:
        raise InputError(f"Sparsity must be at least 1, got {s}")
    if m < 2:
        raise InputError(f"Dictionary size m must be at least 2, got {m}")
    if sigma < 0:
        raise InputError(f"Noise level must be non-negative, got {sigma}")
    if alpha is not None and alpha < 0:
        raise InputError(f"alpha must be non-negative, got {alpha}")


def crb(dictionary: Dictionary, support: Sequence[int], sigma: float) -> float:
    """
    Cramer-Rao bound sigma^2 trace((A_S^T A_S)^-1) on the true support S.

    Raises:
        RankDeficientError: If A_S lacks full column rank
    """
    if sigma < 0:
        raise InputError(f"Noise level must be non-negative, got {sigma}")
    return sigma**2 * inverse_gram_trace(subdictionary(dictionary, support))


def adversarial_bpdn_guarantee(mu: float, s: int, epsilon: float) -> GuaranteeReport:
    """BPDN under bounded noise ||w|| <= epsilon: l_inf error below (3 + sqrt(3/2)) epsilon."""
    if epsilon < 0:
        raise InputError(f"Noise bound epsilon must be non-negative, got {epsilon}")
    rhs = 1.0 / (3.0 * mu) if mu > 0 else math.inf
    applies = s < rhs
    return GuaranteeReport(
        estimator=EstimatorKind.BPDN.value,
        applies=applies,
        condition_lhs=float(s),
        condition="<",
        condition_rhs=_finite(rhs),
        parameter_name="gamma",
        parameter=2.0 * epsilon,
        success_probability=1.0,
        sq_error_bound=ADVERSARIAL_LINF_FACTOR * epsilon if applies else None,
        error_norm="linf",
        notes="deterministic bound; support of the estimate lies inside the true support",
    )


def dantzig_guarantee(mu: float, s: int, m: int, sigma: float, alpha: float) -> GuaranteeReport:
    """
    Dantzig selector guarantee with tau = sigma sqrt(2 (1 + alpha) ln m).

    The bound is 2 c1^2 (1 + alpha) s sigma^2 ln m with
    c1 = 4 / (1 - ((1 + sqrt 2) s - 1) mu); it is withheld when the
    denominator of c1 is not positive.
    """
    _check_common(s, m, sigma, alpha)
    notes: list = []
    log_m = math.log(m)
    rhs = 1.0 + 1.0 / ((1.0 + SQRT2) * mu) if mu > 0 else math.inf
    applies = s < rhs
    tau = sigma * math.sqrt(2.0 * (1.0 + alpha) * log_m)
    probability = _clamp_probability(1.0 - 1.0 / (m**alpha * math.sqrt(math.pi * log_m)), notes)

    formula = None
    denominator = 1.0 - ((1.0 + SQRT2) * s - 1.0) * mu
    if denominator > 0:
        c1 = 4.0 / denominator
        formula = 2.0 * c1**2 * (1.0 + alpha) * s * sigma**2 * log_m
    elif applies:
        notes.append("vacuous: c1 denominator is not positive")
    bound = formula if applies else None

    return GuaranteeReport(
        estimator=EstimatorKind.DANTZIG.value,
        applies=applies,
        condition_lhs=float(s),
        condition="<",
        condition_rhs=_finite(rhs),
        parameter_name="tau",
        parameter=tau,
        alpha=alpha,
        success_probability=probability,
        sq_error_bound=bound,
        bound_coefficient=_coefficient(formula, s, sigma, m),
        notes="; ".join(notes),
    )


def bpdn_guarantee(
    mu: float,
    s: int,
    m: int,
    sigma: float,
    alpha: Optional[float] = None,
    gamma: Optional[float] = None,
) -> GuaranteeReport:
    """
    BPDN guarantee, either for a supplied gamma or for the recommended one.

    With ``gamma`` given, the bound is (sigma sqrt 3 + 3/2 gamma)^2 s with
    probability (1 - (m - s) exp(-gamma^2 / 8 sigma^2)) (1 - e^{-s/7}).
    Otherwise gamma = sqrt(8 sigma^2 (1 + alpha) ln(m - s)), the bound is
    (sqrt 3 + 3 sqrt(2 (1 + alpha) ln(m - s)))^2 s sigma^2 and the probability
    (1 - (m - s)^-alpha) (1 - e^{-s/7}).
    """
    _check_common(s, m, sigma, alpha)
    if m <= s:
        raise InputError(f"BPDN guarantee needs m > s, got m={m}, s={s}")
    if gamma is None and alpha is None:
        raise InputError("bpdn_guarantee needs alpha or gamma")
    if gamma is not None and gamma < 0:
        raise InputError(f"gamma must be non-negative, got {gamma}")

    notes: list = []
    rhs = 1.0 / (3.0 * mu) if mu > 0 else math.inf
    applies = s < rhs
    off_support = m - s
    log_off = math.log(off_support)
    sparsity_factor = 1.0 - math.exp(-s / 7.0)

    if gamma is None:
        gamma = math.sqrt(8.0 * sigma**2 * (1.0 + alpha) * log_off)
        raw_probability = (1.0 - off_support ** (-alpha)) * sparsity_factor
        bound = (math.sqrt(3.0) + 3.0 * math.sqrt(2.0 * (1.0 + alpha) * log_off)) ** 2 * s * sigma**2
    else:
        if sigma > 0:
            tail = off_support * math.exp(-gamma**2 / (8.0 * sigma**2))
        else:
            tail = 0.0 if gamma > 0 else float(off_support)
        raw_probability = (1.0 - tail) * sparsity_factor
        bound = (sigma * math.sqrt(3.0) + 1.5 * gamma) ** 2 * s

    probability = _clamp_probability(raw_probability, notes)
    formula = bound
    if not applies:
        bound = None
    return GuaranteeReport(
        estimator=EstimatorKind.BPDN.value,
        applies=applies,
        condition_lhs=float(s),
        condition="<",
        condition_rhs=_finite(rhs),
        parameter_name="gamma",
        parameter=gamma,
        alpha=alpha,
        success_probability=probability,
        sq_error_bound=bound,
        bound_coefficient=_coefficient(formula, s, sigma, m),
        notes="; ".join(notes),
    )


def greedy_probability(m: int, alpha: float) -> float:
    """Success probability shared by OMP and thresholding."""
    log_m = math.log(m)
    return 1.0 - 1.0 / (m**alpha * math.sqrt(math.pi * (1.0 + alpha) * log_m))


def greedy_guarantee(
    mu: float,
    s: int,
    m: int,
    sigma: float,
    alpha: float,
    x_min: float,
    x_max: float,
) -> Tuple[GuaranteeReport, GuaranteeReport]:
    """
    OMP and thresholding guarantees.

    Returns:
        (omp report, thresholding report); both share the probability and the
        bound 2 (1 + alpha) s sigma^2 ln m / (1 - (s - 1) mu)^2, with the
        relaxed bound 8 (1 + alpha) s sigma^2 ln m alongside
    """
    _check_common(s, m, sigma, alpha)
    if not 0 < x_min <= x_max:
        raise InputError(f"Need 0 < x_min <= x_max, got x_min={x_min}, x_max={x_max}")

    log_m = math.log(m)
    rhs = 2.0 * sigma * math.sqrt(2.0 * (1.0 + alpha) * log_m)
    shrink = 1.0 - (s - 1) * mu
    tight = 2.0 * (1.0 + alpha) * s * sigma**2 * log_m / shrink**2 if shrink > 0 else None
    relaxed = 8.0 * (1.0 + alpha) * s * sigma**2 * log_m

    reports = []
    for kind, lhs in (
        (EstimatorKind.OMP, x_min - (2 * s - 1) * mu * x_min),
        (EstimatorKind.THRESHOLDING, x_min - (2 * s - 1) * mu * x_max),
    ):
        notes: list = []
        probability = _clamp_probability(greedy_probability(m, alpha), notes)
        applies = lhs >= rhs
        reports.append(GuaranteeReport(
            estimator=kind.value,
            applies=applies,
            condition_lhs=lhs,
            condition=">=",
            condition_rhs=rhs,
            alpha=alpha,
            success_probability=probability,
            sq_error_bound=tight if applies else None,
            bound_coefficient=_coefficient(tight, s, sigma, m),
            relaxed_bound=relaxed if applies else None,
            notes="; ".join(notes),
        ))
    return reports[0], reports[1]


def omp_sigma_threshold(mu: float, s: int, m: int, alpha: float, x_min: float) -> float:
    """Largest sigma for which the OMP condition holds (0 when it never does)."""
    lhs = x_min * (1.0 - (2 * s - 1) * mu)
    return max(lhs, 0.0) / (2.0 * math.sqrt(2.0 * (1.0 + alpha) * math.log(m)))


def thresholding_sigma_threshold(mu: float, s: int, m: int, alpha: float, x_min: float, x_max: float) -> float:
    """Largest sigma for which the thresholding condition holds (0 when it never does)."""
    lhs = x_min - (2 * s - 1) * mu * x_max
    return max(lhs, 0.0) / (2.0 * math.sqrt(2.0 * (1.0 + alpha) * math.log(m)))


def success_probability_function(estimator: EstimatorKind, s: int, m: int) -> Callable[[float], float]:
    """Unclamped success probability as a function of alpha."""
    estimator = EstimatorKind(estimator)
    if estimator is EstimatorKind.DANTZIG:
        return lambda alpha: 1.0 - 1.0 / (m**alpha * math.sqrt(math.pi * math.log(m)))
    if estimator is EstimatorKind.BPDN:
        return lambda alpha: (1.0 - (m - s) ** (-alpha)) * (1.0 - math.exp(-s / 7.0))
    if estimator in (EstimatorKind.OMP, EstimatorKind.THRESHOLDING):
        return lambda alpha: greedy_probability(m, alpha)
    raise InputError(f"No probabilistic guarantee for estimator {estimator.value}")


def smallest_alpha_for_probability(estimator: EstimatorKind, target: float, s: int, m: int) -> float:
    """
    Smallest alpha >= 0 whose success probability reaches ``target``.

    Raises:
        InputError: If the target lies outside (0, 1) or is above the probability's supremum
    """
    if not 0.0 < target < 1.0:
        raise InputError(f"Target probability must lie in (0, 1), got {target}")
    probability = success_probability_function(estimator, s, m)
    if probability(0.0) >= target:
        return 0.0

    upper = 1.0
    while probability(upper) < target:
        upper *= 2.0
        if upper > 1e6:
            raise InputError(f"Probability {target} is unattainable for {EstimatorKind(estimator).value}")
    return float(brentq(lambda alpha: probability(alpha) - target, 0.0, upper, xtol=1e-14))


def guarantee_table(
    mu: float,
    s: int,
    m: int,
    sigma: float,
    alpha: float,
    x_min: Optional[float] = None,
    x_max: Optional[float] = None,
    epsilon: Optional[float] = None,
) -> Dict[str, GuaranteeReport]:
    """Evaluate every applicable calculator for one parameter set, keyed by estimator."""
    table = {
        EstimatorKind.DANTZIG.value: dantzig_guarantee(mu, s, m, sigma, alpha),
        EstimatorKind.BPDN.value: bpdn_guarantee(mu, s, m, sigma, alpha=alpha),
    }
    if x_min is not None and x_max is not None:
        omp, thresholding = greedy_guarantee(mu, s, m, sigma, alpha, x_min, x_max)
        table[EstimatorKind.OMP.value] = omp
        table[EstimatorKind.THRESHOLDING.value] = thresholding
    if epsilon is not None:
        table["bpdn_adversarial"] = adversarial_bpdn_guarantee(mu, s, epsilon)
    return table


def snr(signal_energy: float, n: int, sigma: float) -> float:
    """Signal-to-noise ratio ||x0||^2 / (n sigma^2)."""
    if sigma <= 0:
        raise NonPositiveSigmaError(f"SNR needs sigma > 0, got {sigma}")
    if n < 1:
        raise InputError(f"Signal dimension must be at least 1, got {n}")
    return signal_energy / (n * sigma**2)


def event_b_holds(dictionary: Dictionary, w: ArrayLike, tau: float) -> bool:
    """True iff every atom correlates with the noise by strictly less than tau."""
    correlations = np.abs(dictionary.matrix.T @ np.asarray(w, dtype=np.float64))
    return bool(np.max(correlations) < tau)


def event_g_holds(dictionary: Dictionary, support: Sequence[int], b: ArrayLike, gamma: float) -> bool:
    """
    True iff the part of b outside span(A_S) correlates with every atom by at most gamma / 2.

    Raises:
        RankDeficientError: If A_S lacks full column rank
    """
    b = np.asarray(b, dtype=np.float64)
    a_sub = subdictionary(dictionary, support)
    residual = b - a_sub @ least_squares(a_sub, b) if len(support) else b
    return bool(np.max(np.abs(dictionary.matrix.T @ residual)) <= 0.5 * gamma)


def adversarial_noise(dictionary: Dictionary, signal: SparseSignal, epsilon: float) -> np.ndarray:
    """
    Worst-case bounded noise inside span(A_S): ||w|| = epsilon along the atom of the
    smallest coefficient, pointing toward zero.

    The oracle estimate then misses that coefficient by exactly epsilon, so no
    projection onto the true support removes any of the noise.
    """
    if epsilon < 0:
        raise InputError(f"Noise bound epsilon must be non-negative, got {epsilon}")
    weakest = int(np.argmin(np.abs(signal.values)))
    atom = dictionary.matrix[:, signal.support[weakest]]
    return -math.copysign(epsilon, signal.values[weakest]) * atom
