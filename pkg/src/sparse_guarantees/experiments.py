"""
Deterministic Monte Carlo harness

Runs every configured estimator over a grid of noise levels (or support
sizes), recording one TrialRecord per (grid point, trial, estimator), and
aggregates the records into plot-ready tables with the guarantee curves and
the Cramer-Rao bound alongside:

- median_error_experiment: median squared error vs sigma^2, fixed-profile signals
- mse_vs_snr_experiment: mean squared error vs sigma^2 (and SNR), normalized Gaussian signals
- mse_vs_sparsity_experiment: mean squared error vs support size at fixed sigma

Every random draw comes from an RngStream keyed by (master_seed, stream_id)
with stream_id = grid_index * GRID_STRIDE + trial_index, so results do not
depend on the order (or thread) in which trials execute.
"""

import dataclasses
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from .config import (
    FIXED_PROFILE_COUNT,
    FIXED_SIGNAL_STREAM_BASE,
    GRID_STRIDE,
    MEDIAN_TARGET_PROBABILITY,
    MEDIAN_TRIALS_DEFAULT,
    MSE_TRIALS_DEFAULT,
)
from .dictionary import Dictionary, DictionaryKind, build_dictionary, coherence
from .errors import InvalidSpecError, SolverError
from .estimators import EstimatorKind, SparseSignal, run_estimator
from .guarantees import (
    GuaranteeReport,
    bpdn_guarantee,
    crb,
    dantzig_guarantee,
    greedy_guarantee,
    smallest_alpha_for_probability,
    snr,
)
from .numerics import RngStream, StreamPurpose, gaussian, median, operator_norm_sq


logger = logging.getLogger(__name__)


class ExperimentKind(str, Enum):
    MEDIAN = "median"
    MSE_SNR = "mse-snr"
    MSE_SPARSITY = "mse-sparsity"


class MagnitudeMode(str, Enum):
    FIXED_PROFILE = "fixed-profile"
    GAUSSIAN_NORMALIZED = "gaussian-normalized"


class SupportMode(str, Enum):
    FIXED = "fixed"
    RANDOM = "random"


# Config models

class DictionarySpec(BaseModel):
    """Which dictionary to build."""
    kind: DictionaryKind = Field(DictionaryKind.TWO_ORTHO_HADAMARD, description="Dictionary construction")
    n: Optional[int] = Field(None, ge=1, description="Number of rows")
    m: Optional[int] = Field(None, ge=1, description="Number of atoms (ignored for two-ortho)")
    seed: Optional[int] = Field(None, description="Seed for random_gaussian")
    path: Optional[str] = Field(None, description="CSV path for from_file")

    def build(self) -> Dictionary:
        return build_dictionary(self.kind, n=self.n, m=self.m, seed=self.seed, path=self.path)


class SignalSpec(BaseModel):
    """How ground-truth signals are drawn."""
    s: int = Field(..., ge=1, description="Support size")
    x_min: float = Field(0.1, gt=0, description="Smallest magnitude (fixed-profile)")
    x_max: float = Field(1.0, gt=0, description="Largest magnitude (fixed-profile)")
    magnitude_mode: MagnitudeMode = MagnitudeMode.FIXED_PROFILE
    support_mode: SupportMode = SupportMode.FIXED
    profiles: int = Field(FIXED_PROFILE_COUNT, ge=1, le=FIXED_PROFILE_COUNT, description="Magnitude profiles in use")

    @model_validator(mode="after")
    def _check_range(self) -> "SignalSpec":
        if self.magnitude_mode is MagnitudeMode.FIXED_PROFILE and self.x_min > self.x_max:
            raise ValueError(f"x_min ({self.x_min}) must not exceed x_max ({self.x_max})")
        return self


class EstimatorPolicy(BaseModel):
    """
    One estimator and how its parameter is chosen.

    ``parameter`` fixes tau/gamma explicitly; otherwise ``alpha`` is used, or
    the smallest alpha whose success probability reaches ``target_probability``.
    """
    kind: EstimatorKind
    alpha: Optional[float] = Field(None, ge=0)
    target_probability: Optional[float] = Field(None, gt=0, lt=1)
    parameter: Optional[float] = Field(None, gt=0, description="Explicit tau or gamma")
    tol: Optional[float] = Field(None, gt=0, description="Solver tolerance override")


class ExperimentConfig(BaseModel):
    """A complete, versionable sweep description."""
    experiment: Optional[ExperimentKind] = Field(None, description="Inferred from the other fields when absent")
    dictionary: DictionarySpec = Field(default_factory=lambda: DictionarySpec(n=256))
    estimators: List[EstimatorPolicy] = Field(
        default_factory=lambda: [EstimatorPolicy(kind=kind) for kind in EstimatorKind]
    )
    signal: SignalSpec
    noise_variances: List[float] = Field(default_factory=list, description="sigma^2 grid")
    sparsity_levels: Optional[List[int]] = Field(None, description="Support-size grid (mse-sparsity)")
    sigma: Optional[float] = Field(None, gt=0, description="Fixed noise level for the sparsity grid")
    trials: Optional[int] = Field(None, ge=1, description="Trials per grid point; defaults by experiment kind")
    master_seed: int = 0
    threads: int = Field(1, ge=1)

    @field_validator("noise_variances")
    @classmethod
    def _positive_variances(cls, values: List[float]) -> List[float]:
        if any(not (v > 0 and math.isfinite(v)) for v in values):
            raise ValueError("noise variances must be positive and finite")
        return values

    @field_validator("sparsity_levels")
    @classmethod
    def _positive_levels(cls, values: Optional[List[int]]) -> Optional[List[int]]:
        if values is not None and any(v < 1 for v in values):
            raise ValueError("sparsity levels must be at least 1")
        return values

    @model_validator(mode="after")
    def _check_grid(self) -> "ExperimentConfig":
        if self.sparsity_levels:
            if self.sigma is None:
                raise ValueError("a sparsity grid needs a fixed sigma")
        elif not self.noise_variances:
            raise ValueError("config needs noise_variances or sparsity_levels")
        if not self.estimators:
            raise ValueError("config needs at least one estimator")
        kinds = [p.kind.value for p in self.estimators]
        repeated = sorted({k for k in kinds if kinds.count(k) > 1})
        if repeated:
            # records and table rows are keyed by estimator name
            raise ValueError(f"estimators listed more than once: {', '.join(repeated)}")
        if self.trials is None:
            self.trials = MEDIAN_TRIALS_DEFAULT if self.kind() is ExperimentKind.MEDIAN else MSE_TRIALS_DEFAULT
        return self

    def kind(self) -> ExperimentKind:
        if self.experiment is not None:
            return self.experiment
        if self.sparsity_levels:
            return ExperimentKind.MSE_SPARSITY
        if self.signal.magnitude_mode is MagnitudeMode.FIXED_PROFILE:
            return ExperimentKind.MEDIAN
        return ExperimentKind.MSE_SNR


# Records and tables

@dataclass(frozen=True)
class TrialRecord:
    grid_index: int
    trial_index: int
    estimator: str
    sq_error: float
    support_exact: bool
    solver_gap: Optional[float]
    seed_used: int
    failed: bool = False


@dataclass(frozen=True)
class GridPoint:
    index: int
    sigma: float
    variance: float
    s: int
    axis_value: float


@dataclass
class TableRow:
    grid_index: int
    axis_value: float
    sigma2: float
    snr: Optional[float]
    estimator: str
    profile: str
    statistic: str
    value: Optional[float]
    bound: Optional[float]
    bound_applies: bool
    crb: Optional[float]
    trials: int
    failures: int


@dataclass
class ExperimentTable:
    kind: ExperimentKind
    axis_name: str
    statistic: str
    rows: List[TableRow] = field(default_factory=list)
    records: List[TrialRecord] = field(default_factory=list)

    def row(self, grid_index: int, estimator: str, profile: str = "all") -> TableRow:
        for row in self.rows:
            if row.grid_index == grid_index and row.estimator == estimator and row.profile == profile:
                return row
        raise KeyError((grid_index, estimator, profile))


# Signals

def fixed_profile(profile: int, s: int, x_min: float, x_max: float, generator: np.random.Generator) -> np.ndarray:
    """
    Magnitudes in [x_min, x_max] for one of the eight documented profiles.

    0 all x_max, 1 all x_min, 2 linear ramp, 3 geometric ramp,
    4 one small rest large, 5 one large rest small, 6 alternating,
    7 uniform random in range.
    """
    if profile == 0:
        return np.full(s, x_max)
    if profile == 1:
        return np.full(s, x_min)
    if profile == 2:
        return np.linspace(x_min, x_max, s)
    if profile == 3:
        return np.geomspace(x_min, x_max, s)
    if profile == 4:
        return np.array([x_min] + [x_max] * (s - 1))
    if profile == 5:
        return np.array([x_max] + [x_min] * (s - 1))
    if profile == 6:
        return np.where(np.arange(s) % 2 == 0, x_min, x_max).astype(np.float64)
    if profile == 7:
        return generator.uniform(x_min, x_max, s)
    raise InvalidSpecError(f"Unknown magnitude profile {profile}")


def gen_signal(spec: SignalSpec, stream: RngStream, m: int, s: Optional[int] = None, profile: int = 0) -> SparseSignal:
    """
    Draw a ground-truth signal with a random support and random signs.

    fixed-profile signals take their magnitudes from ``fixed_profile``;
    gaussian-normalized signals are Gaussian on the support, scaled to unit norm.

    Raises:
        InvalidSpecError: If s exceeds m or the magnitude range is inverted
    """
    s = spec.s if s is None else s
    if not 1 <= s <= m:
        raise InvalidSpecError(f"Support size {s} outside [1, {m}]")
    generator = stream.generator()
    support = np.sort(generator.choice(m, size=s, replace=False))
    signs = generator.choice(np.array([-1.0, 1.0]), size=s)

    if spec.magnitude_mode is MagnitudeMode.FIXED_PROFILE:
        if spec.x_min > spec.x_max:
            raise InvalidSpecError(f"x_min ({spec.x_min}) exceeds x_max ({spec.x_max})")
        magnitudes = generator.permutation(fixed_profile(profile, s, spec.x_min, spec.x_max, generator))
        values = signs * magnitudes
    else:
        values = gaussian(dataclasses.replace(stream, counter=stream.counter + 1), s)
        values = values / np.linalg.norm(values)
    return SparseSignal(m, tuple(int(i) for i in support), values)


# Sweep

@dataclass
class _SweepContext:
    config: ExperimentConfig
    kind: ExperimentKind
    dictionary: Dictionary
    mu: float
    lipschitz: Optional[float]
    points: List[GridPoint]
    fixed_signals: Dict[Tuple[int, int], SparseSignal]
    parameters: Dict[Tuple[int, str], Dict[str, float]]


def _grid(config: ExperimentConfig) -> List[GridPoint]:
    if config.sparsity_levels:
        return [
            GridPoint(i, config.sigma, config.sigma**2, s, float(s))
            for i, s in enumerate(config.sparsity_levels)
        ]
    return [
        GridPoint(i, math.sqrt(variance), variance, config.signal.s, variance)
        for i, variance in enumerate(config.noise_variances)
    ]


def _alpha_for(policy: EstimatorPolicy, kind: ExperimentKind, s: int, m: int) -> float:
    if policy.alpha is not None:
        return policy.alpha
    target = policy.target_probability
    if target is None:
        if kind is not ExperimentKind.MEDIAN:
            return 1.0
        target = MEDIAN_TARGET_PROBABILITY
    return smallest_alpha_for_probability(policy.kind, target, s, m)


def _resolve_parameters(ctx: _SweepContext, policy: EstimatorPolicy, point: GridPoint) -> Dict[str, float]:
    m = ctx.dictionary.m
    if policy.kind is EstimatorKind.ORACLE:
        return {}
    alpha = _alpha_for(policy, ctx.kind, point.s, m)
    parameters = {"alpha": alpha}
    if policy.kind is EstimatorKind.DANTZIG:
        parameters["tau"] = (
            policy.parameter if policy.parameter is not None
            else dantzig_guarantee(ctx.mu, point.s, m, point.sigma, alpha).parameter
        )
    elif policy.kind is EstimatorKind.BPDN:
        parameters["gamma"] = (
            policy.parameter if policy.parameter is not None
            else bpdn_guarantee(ctx.mu, point.s, m, point.sigma, alpha=alpha).parameter
        )
    return parameters


def _prepare(config: ExperimentConfig) -> _SweepContext:
    kind = config.kind()
    dictionary = config.dictionary.build()
    points = _grid(config)
    largest_s = max(p.s for p in points)
    if largest_s > dictionary.n or largest_s >= dictionary.m:
        raise InvalidSpecError(f"Support size {largest_s} does not fit a {dictionary.n}x{dictionary.m} dictionary")
    needs_bpdn = any(p.kind is EstimatorKind.BPDN for p in config.estimators)

    ctx = _SweepContext(
        config=config,
        kind=kind,
        dictionary=dictionary,
        mu=coherence(dictionary),
        lipschitz=operator_norm_sq(dictionary.matrix) if needs_bpdn else None,
        points=points,
        fixed_signals={},
        parameters={},
    )
    if config.signal.support_mode is SupportMode.FIXED:
        for point in points:
            for profile in range(config.signal.profiles):
                if (point.s, profile) not in ctx.fixed_signals:
                    stream = RngStream(config.master_seed, FIXED_SIGNAL_STREAM_BASE + profile)
                    ctx.fixed_signals[(point.s, profile)] = gen_signal(
                        config.signal, stream.substream(StreamPurpose.SIGNAL), dictionary.m, point.s, profile
                    )
    for point in points:
        for policy in config.estimators:
            ctx.parameters[(point.index, policy.kind.value)] = _resolve_parameters(ctx, policy, point)
    return ctx


def _signal_for(ctx: _SweepContext, point: GridPoint, trial_index: int, base: RngStream) -> SparseSignal:
    profile = trial_index % ctx.config.signal.profiles
    if ctx.config.signal.support_mode is SupportMode.FIXED:
        return ctx.fixed_signals[(point.s, profile)]
    return gen_signal(ctx.config.signal, base.substream(StreamPurpose.SIGNAL), ctx.dictionary.m, point.s, profile)


def _run_trial(ctx: _SweepContext, point: GridPoint, trial_index: int) -> List[TrialRecord]:
    stream_id = point.index * GRID_STRIDE + trial_index
    base = RngStream(ctx.config.master_seed, stream_id)
    signal = _signal_for(ctx, point, trial_index, base)
    x0 = signal.to_dense()
    a = ctx.dictionary.matrix
    b = a @ x0 + point.sigma * gaussian(base.substream(StreamPurpose.NOISE), ctx.dictionary.n)

    records = []
    for policy in ctx.config.estimators:
        parameters = ctx.parameters[(point.index, policy.kind.value)]
        try:
            estimate = run_estimator(
                policy.kind,
                ctx.dictionary,
                b,
                s=point.s,
                support=signal.support,
                gamma=parameters.get("gamma"),
                tau=parameters.get("tau"),
                tol=policy.tol,
                lipschitz=ctx.lipschitz,
            )
        except SolverError as e:
            logger.warning(f"{policy.kind.value} failed at grid {point.index}, trial {trial_index}: {e}")
            records.append(TrialRecord(point.index, trial_index, policy.kind.value, math.nan, False, None, stream_id, True))
            continue
        error = x0 - estimate.coefficients
        records.append(TrialRecord(
            grid_index=point.index,
            trial_index=trial_index,
            estimator=policy.kind.value,
            sq_error=float(error @ error),
            support_exact=estimate.detected_support == signal.support,
            solver_gap=estimate.diagnostics.duality_gap,
            seed_used=stream_id,
        ))
    return records


def _sweep(ctx: _SweepContext) -> List[TrialRecord]:
    tasks = [(point, trial) for point in ctx.points for trial in range(ctx.config.trials)]
    logger.info(
        f"Running {ctx.kind.value} sweep: {len(ctx.points)} grid points x {ctx.config.trials} trials "
        f"x {len(ctx.config.estimators)} estimators on {ctx.config.threads} thread(s)"
    )
    if ctx.config.threads == 1:
        batches = [_run_trial(ctx, point, trial) for point, trial in tasks]
    else:
        with ThreadPoolExecutor(max_workers=ctx.config.threads) as executor:
            batches = list(executor.map(lambda task: _run_trial(ctx, *task), tasks))
    records = [record for batch in batches for record in batch]
    records.sort(key=lambda r: (r.grid_index, r.trial_index, r.estimator))
    failures = sum(r.failed for r in records)
    logger.info(f"Sweep finished: {len(records)} records, {failures} solver failure(s)")
    return records


def run_trials(config: ExperimentConfig) -> List[TrialRecord]:
    """
    Run every estimator on every (grid point, trial) of the config.

    Returns:
        Records sorted by (grid_index, trial_index, estimator); solver failures
        are flagged on their record instead of aborting the sweep
    """
    return _sweep(_prepare(config))


# Aggregation

def aggregate_records(
    records: List[TrialRecord],
    statistic: str,
    profiles: Optional[int] = None,
) -> Dict[Tuple[int, str, str], Tuple[Optional[float], int, int]]:
    """
    Aggregate squared errors per (grid_index, estimator, profile).

    Profile "all" pools every trial; when ``profiles`` is given, profile "p"
    pools the trials with trial_index % profiles == p. Failed records are
    excluded and counted.

    Returns:
        Mapping to (statistic value or None, successful trials, failures)
    """
    groups: Dict[Tuple[int, str, str], List[TrialRecord]] = {}
    for record in records:
        keys = [(record.grid_index, record.estimator, "all")]
        if profiles:
            keys.append((record.grid_index, record.estimator, str(record.trial_index % profiles)))
        for key in keys:
            groups.setdefault(key, []).append(record)

    summarize = median if statistic == "median" else (lambda values: float(np.mean(values)))
    aggregates = {}
    for key, group in groups.items():
        errors = [r.sq_error for r in group if not r.failed]
        value = summarize(errors) if errors else None
        aggregates[key] = (value, len(errors), len(group) - len(errors))
    return aggregates


def _bound_for(ctx: _SweepContext, estimator: str, point: GridPoint) -> Optional[GuaranteeReport]:
    kind = EstimatorKind(estimator)
    if kind is EstimatorKind.ORACLE:
        return None
    m = ctx.dictionary.m
    parameters = ctx.parameters[(point.index, estimator)]
    alpha = parameters["alpha"]
    if kind is EstimatorKind.DANTZIG:
        return dantzig_guarantee(ctx.mu, point.s, m, point.sigma, alpha)
    if kind is EstimatorKind.BPDN:
        policy = next(p for p in ctx.config.estimators if p.kind is kind)
        if policy.parameter is not None:
            return bpdn_guarantee(ctx.mu, point.s, m, point.sigma, gamma=policy.parameter)
        return bpdn_guarantee(ctx.mu, point.s, m, point.sigma, alpha=alpha)
    if ctx.config.signal.magnitude_mode is not MagnitudeMode.FIXED_PROFILE:
        # greedy guarantees need a fixed magnitude range
        return None
    omp, thresholding = greedy_guarantee(
        ctx.mu, point.s, m, point.sigma, alpha, ctx.config.signal.x_min, ctx.config.signal.x_max
    )
    return omp if kind is EstimatorKind.OMP else thresholding


def _crb_curve(ctx: _SweepContext, point: GridPoint) -> float:
    values = []
    for trial_index in range(ctx.config.trials):
        base = RngStream(ctx.config.master_seed, point.index * GRID_STRIDE + trial_index)
        signal = _signal_for(ctx, point, trial_index, base)
        values.append(crb(ctx.dictionary, signal.support, point.sigma))
    return float(np.mean(values))


def _tabulate(ctx: _SweepContext, records: List[TrialRecord]) -> ExperimentTable:
    statistic = "median" if ctx.kind is ExperimentKind.MEDIAN else "mean"
    profiles = ctx.config.signal.profiles if ctx.kind is ExperimentKind.MEDIAN else None
    aggregates = aggregate_records(records, statistic, profiles)
    table = ExperimentTable(
        kind=ctx.kind,
        axis_name="s" if ctx.kind is ExperimentKind.MSE_SPARSITY else "sigma2",
        statistic=statistic,
        records=records,
    )
    gaussian_signals = ctx.config.signal.magnitude_mode is MagnitudeMode.GAUSSIAN_NORMALIZED

    for point in ctx.points:
        crb_value = _crb_curve(ctx, point)
        point_snr = snr(1.0, ctx.dictionary.n, point.sigma) if gaussian_signals else None
        for policy in ctx.config.estimators:
            estimator = policy.kind.value
            report = _bound_for(ctx, estimator, point)
            applies = bool(report is not None and report.applies and report.sq_error_bound is not None)
            keys = ["all"] + ([str(p) for p in range(profiles)] if profiles else [])
            for profile in keys:
                value, trials, failures = aggregates.get((point.index, estimator, profile), (None, 0, 0))
                table.rows.append(TableRow(
                    grid_index=point.index,
                    axis_value=point.axis_value,
                    sigma2=point.variance,
                    snr=point_snr,
                    estimator=estimator,
                    profile=profile,
                    statistic=statistic,
                    value=value,
                    bound=report.sq_error_bound if applies else None,
                    bound_applies=applies,
                    crb=crb_value,
                    trials=trials,
                    failures=failures,
                ))
    return table


def _run_experiment(config: ExperimentConfig, kind: ExperimentKind) -> ExperimentTable:
    config = config.model_copy(update={"experiment": kind})
    ctx = _prepare(config)
    return _tabulate(ctx, _sweep(ctx))


def median_error_experiment(config: ExperimentConfig) -> ExperimentTable:
    """
    Median squared error per sigma^2 and estimator, with per-profile medians.

    Parameters not fixed by the config use the smallest alpha whose success
    probability exceeds 1/2; the bound column uses the same alpha.

    Raises:
        InvalidSpecError: If the signals are not fixed-profile or the grid is over s
    """
    if config.signal.magnitude_mode is not MagnitudeMode.FIXED_PROFILE:
        raise InvalidSpecError("median experiment needs fixed-profile signals")
    if config.sparsity_levels:
        raise InvalidSpecError("median experiment sweeps sigma^2, not s")
    return _run_experiment(config, ExperimentKind.MEDIAN)


def mse_vs_snr_experiment(config: ExperimentConfig) -> ExperimentTable:
    """Mean squared error per sigma^2 (with the SNR of a unit-energy signal) and estimator."""
    if config.signal.magnitude_mode is not MagnitudeMode.GAUSSIAN_NORMALIZED:
        raise InvalidSpecError("mse-snr experiment needs gaussian-normalized signals")
    if config.sparsity_levels:
        raise InvalidSpecError("mse-snr experiment sweeps sigma^2, not s")
    return _run_experiment(config, ExperimentKind.MSE_SNR)


def mse_vs_sparsity_experiment(config: ExperimentConfig) -> ExperimentTable:
    """Mean squared error per support size at a fixed sigma."""
    if config.signal.magnitude_mode is not MagnitudeMode.GAUSSIAN_NORMALIZED:
        raise InvalidSpecError("mse-sparsity experiment needs gaussian-normalized signals")
    if not config.sparsity_levels:
        raise InvalidSpecError("mse-sparsity experiment needs sparsity_levels")
    return _run_experiment(config, ExperimentKind.MSE_SPARSITY)


def run_experiment(config: ExperimentConfig, kind: Optional[ExperimentKind] = None) -> ExperimentTable:
    """Dispatch to the experiment named by ``kind`` (or the config's own kind)."""
    kind = ExperimentKind(kind) if kind is not None else config.kind()
    runners = {
        ExperimentKind.MEDIAN: median_error_experiment,
        ExperimentKind.MSE_SNR: mse_vs_snr_experiment,
        ExperimentKind.MSE_SPARSITY: mse_vs_sparsity_experiment,
    }
    return runners[kind](config)
