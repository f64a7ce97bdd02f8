"""
Command-line interface for the sparse guarantees toolkit

Commands:
- coherence: mutual coherence of a dictionary and its RIC/ROP bound table
- bounds: guarantee calculators for one (mu, s, m, sigma, alpha) setting
- estimate: run one estimator on a measurement vector, JSON result
- experiment {median|mse-snr|mse-sparsity}: Monte Carlo sweep to CSV + manifest
- verify: desk-scale acceptance checks, PASS/FAIL per criterion

Exit codes: 0 success, 1 invalid input or configuration, 2 solver failure
(or a failed verification).
"""

import argparse
import json
import logging
import math
import os
import sys
import time
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from pydantic import ValidationError

from src.sparse_guarantees import __version__
from src.sparse_guarantees.config import (
    LEMMA_TABLE_MAX_S,
    LOG_FILE_NAME,
    LOG_FORMAT,
    MEDIAN_TARGET_PROBABILITY,
    SEED_ENV_VAR,
)
from src.sparse_guarantees.dictionary import (
    Dictionary,
    DictionaryKind,
    build_dictionary,
    build_random_gaussian,
    build_two_ortho_hadamard,
    coherence,
    exact_rics,
    exact_rop,
    lemma_bounds,
    rop_bound,
)
from src.sparse_guarantees.errors import ConfigError, InputError, SolverError
from src.sparse_guarantees.estimators import (
    EstimatorKind,
    bpdn_estimate,
    bpdn_kkt_residual,
    dantzig_estimate,
    run_estimator,
)
from src.sparse_guarantees.experiments import (
    DictionarySpec,
    EstimatorPolicy,
    ExperimentConfig,
    ExperimentKind,
    MagnitudeMode,
    SignalSpec,
    SupportMode,
    gen_signal,
    mse_vs_snr_experiment,
    run_experiment,
)
from src.sparse_guarantees.guarantees import (
    bpdn_guarantee,
    crb,
    dantzig_guarantee,
    guarantee_table,
    omp_sigma_threshold,
    smallest_alpha_for_probability,
    thresholding_sigma_threshold,
)
from src.sparse_guarantees.numerics import RngStream, StreamPurpose, gaussian
from src.sparse_guarantees.persistence import (
    write_json,
    write_manifest,
    write_table_csv,
    write_trial_records_csv,
)

from .schemas import EstimateConfig, VerifyConfig


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_SOLVER = 2


class _ArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors as ConfigError instead of exiting."""

    def error(self, message):
        raise ConfigError(message)


# Configuration plumbing

def configure_logging(level: str = "INFO", output_dir: Optional[str] = None) -> None:
    """Log to stderr and, when an output directory is given, to its log file."""
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if output_dir:
        Path(output_dir).mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(Path(output_dir) / LOG_FILE_NAME))
    logging.basicConfig(level=getattr(logging, level), format=LOG_FORMAT, handlers=handlers, force=True)


def _parse_override_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(data: Dict[str, Any], overrides: List[str]) -> Dict[str, Any]:
    """
    Apply ``key=value`` overrides to a config dict.

    Keys are dotted paths (``signal.s``, ``estimators.0.alpha``); values are
    parsed as JSON when possible and kept as strings otherwise.

    Raises:
        ConfigError: If an override is malformed or its path does not exist
    """
    for override in overrides:
        key, sep, raw = override.partition("=")
        if not sep or not key:
            raise ConfigError(f"Override must look like key=value, got {override!r}")
        parts = key.split(".")
        node: Any = data
        for part in parts[:-1]:
            if isinstance(node, list):
                try:
                    node = node[int(part)]
                except (ValueError, IndexError) as e:
                    raise ConfigError(f"Override {key!r}: bad list index {part!r}") from e
            else:
                node = node.setdefault(part, {})
            if not isinstance(node, (dict, list)):
                raise ConfigError(f"Override {key!r}: {part!r} is not a section")
        last = parts[-1]
        if isinstance(node, list):
            try:
                node[int(last)] = _parse_override_value(raw)
            except (ValueError, IndexError) as e:
                raise ConfigError(f"Override {key!r}: bad list index {last!r}") from e
        else:
            node[last] = _parse_override_value(raw)
    return data


def load_config(path: Optional[str], overrides: List[str]) -> Dict[str, Any]:
    """
    Read a JSON object from ``path`` (empty when absent) and apply overrides.

    Raises:
        ConfigError: If the file is missing or does not hold a JSON object
    """
    data: Dict[str, Any] = {}
    if path:
        config_path = Path(path)
        if not config_path.is_file():
            raise ConfigError(f"Config file not found: {config_path}")
        try:
            data = json.loads(config_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config file {config_path} is not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"Config file {config_path} must hold a JSON object")
    return apply_overrides(data, overrides or [])


def resolve_seed(cli_seed: Optional[int], config_seed: Optional[int] = None) -> int:
    """``--seed`` wins over the environment variable, which wins over the config."""
    if cli_seed is not None:
        return cli_seed
    env_value = os.environ.get(SEED_ENV_VAR)
    if env_value not in (None, ""):
        try:
            return int(env_value)
        except ValueError as e:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {env_value!r}") from e
    return config_seed if config_seed is not None else 0


def _dictionary_from_args(args: argparse.Namespace) -> Optional[Dictionary]:
    if args.two_ortho_hadamard is not None:
        return build_two_ortho_hadamard(args.two_ortho_hadamard)
    if args.random_gaussian is not None:
        n, m = args.random_gaussian
        return build_random_gaussian(n, m, resolve_seed(args.seed))
    if args.overcomplete_dct is not None:
        n, m = args.overcomplete_dct
        return build_dictionary(DictionaryKind.OVERCOMPLETE_DCT, n=n, m=m)
    if args.dictionary_file is not None:
        return build_dictionary(DictionaryKind.FROM_FILE, path=args.dictionary_file)
    if args.config:
        data = load_config(args.config, args.set)
        return DictionarySpec(**data).build()
    return None


def _emit_json(data: Dict[str, Any], output_dir: Optional[str], name: str) -> None:
    if output_dir:
        path = write_json(data, Path(output_dir) / name)
        print(f"Wrote {path}")
    else:
        print(json.dumps(data, indent=2))


# Commands

def cmd_coherence(args: argparse.Namespace) -> int:
    dictionary = _dictionary_from_args(args)
    if dictionary is None:
        raise ConfigError("coherence needs a dictionary source (see --help)")
    mu = coherence(dictionary)
    s_max = min(args.max_s, dictionary.n)
    bounds = lemma_bounds(mu, s_max)

    print(f"dictionary: {dictionary.kind.value} {dictionary.n}x{dictionary.m}")
    if dictionary.normalization_warning:
        print("WARNING: dictionary columns were re-normalized on load")
    print(f"mu = {mu:.6g}")
    print(f"{'s':>3}  {'delta_s <=':>12}  {'theta_s,s <=':>12}")
    for s in range(1, s_max + 1):
        print(f"{s:>3}  {bounds.delta[s]:>12.6g}  {bounds.theta[(s, s)]:>12.6g}")

    result: Dict[str, Any] = {
        "dictionary": dictionary.describe(),
        "mu": mu,
        "normalization_warning": dictionary.normalization_warning,
        "bounds": [
            {"s": s, "delta_bound": bounds.delta[s], "theta_bound": bounds.theta[(s, s)]}
            for s in range(1, s_max + 1)
        ],
    }
    if args.exact_s:
        exact = []
        print(f"{'s':>3}  {'delta_s':>12}  {'theta_s,s':>12}  (exhaustive)")
        for s in range(1, args.exact_s + 1):
            delta, theta = exact_rics(dictionary, s)
            exact.append({"s": s, "delta": delta, "theta": theta})
            print(f"{s:>3}  {delta:>12.6g}  {theta:>12.6g}")
        result["exact"] = exact
    if args.output_dir:
        _emit_json(result, args.output_dir, "coherence.json")
    return EXIT_OK


def cmd_bounds(args: argparse.Namespace) -> int:
    if args.mu is not None:
        mu, m = args.mu, args.m
        if m is None:
            raise ConfigError("--mu needs --m")
    else:
        dictionary = _dictionary_from_args(args)
        if dictionary is None:
            raise ConfigError("bounds needs --mu/--m or a dictionary source")
        mu, m = coherence(dictionary), dictionary.m

    table = guarantee_table(mu, args.s, m, args.sigma, args.alpha, args.x_min, args.x_max, args.epsilon)
    print(f"mu = {mu:.6g}, s = {args.s}, m = {m}, sigma = {args.sigma:g}, alpha = {args.alpha:g}")
    print(f"{'estimator':<18} {'applies':<8} {'coefficient':>12} {'sq_error_bound':>15} {'probability':>12}")
    for name, report in table.items():
        coefficient = f"{report.bound_coefficient:.6g}" if report.bound_coefficient is not None else "-"
        bound = f"{report.sq_error_bound:.6g}" if report.sq_error_bound is not None else "-"
        print(f"{name:<18} {str(report.applies):<8} {coefficient:>12} {bound:>15} {report.success_probability:>12.6g}")

    omp_sigma = omp_sigma_threshold(mu, args.s, m, args.alpha, args.x_min)
    thresholding_sigma = thresholding_sigma_threshold(mu, args.s, m, args.alpha, args.x_min, args.x_max)
    print(f"OMP condition holds for sigma <= {omp_sigma:.6g}")
    print(f"thresholding condition holds for sigma <= {thresholding_sigma:.6g}")

    half_alphas: Dict[str, Optional[float]] = {}
    for kind in (EstimatorKind.DANTZIG, EstimatorKind.BPDN, EstimatorKind.OMP):
        try:
            half_alphas[kind.value] = smallest_alpha_for_probability(kind, MEDIAN_TARGET_PROBABILITY, args.s, m)
        except InputError:
            half_alphas[kind.value] = None
    print("smallest alpha with success probability >= 1/2: " + ", ".join(
        f"{name}={alpha:.4g}" if alpha is not None else f"{name}=unattainable" for name, alpha in half_alphas.items()
    ))

    if args.output_dir:
        _emit_json(
            {
                "mu": mu,
                "s": args.s,
                "m": m,
                "sigma": args.sigma,
                "alpha": args.alpha,
                "reports": {name: report.model_dump() for name, report in table.items()},
                "omp_sigma_threshold": omp_sigma,
                "thresholding_sigma_threshold": thresholding_sigma,
                "alpha_for_half_probability": half_alphas,
            },
            args.output_dir,
            "bounds.json",
        )
    return EXIT_OK


def _load_vector(path: str) -> np.ndarray:
    vector_path = Path(path)
    if not vector_path.is_file():
        raise ConfigError(f"Vector file not found: {vector_path}")
    try:
        return np.loadtxt(vector_path, delimiter=",", ndmin=1, encoding="utf-8")
    except ValueError as e:
        raise InputError(f"Cannot parse vector file {vector_path}: {e}") from e


def cmd_estimate(config: EstimateConfig, output_dir: Optional[str] = None) -> int:
    """
    Run one estimator and write its result (and the matching guarantee) as JSON.

    tau/gamma not given explicitly are selected from sigma and alpha.
    """
    dictionary = config.dictionary.build()
    b = _load_vector(config.b_path)
    mu = coherence(dictionary) if dictionary.m >= 2 else 0.0
    tau, gamma = config.tau, config.gamma

    if config.sigma is not None and config.s is not None:
        if config.estimator is EstimatorKind.DANTZIG and tau is None:
            tau = dantzig_guarantee(mu, config.s, dictionary.m, config.sigma, config.alpha).parameter
        if config.estimator is EstimatorKind.BPDN and gamma is None:
            gamma = bpdn_guarantee(mu, config.s, dictionary.m, config.sigma, alpha=config.alpha).parameter
    if config.estimator is EstimatorKind.DANTZIG and tau is None:
        raise ConfigError("selecting tau from sigma needs 's'")
    if config.estimator is EstimatorKind.BPDN and gamma is None:
        raise ConfigError("selecting gamma from sigma needs 's'")

    estimate = run_estimator(
        config.estimator,
        dictionary,
        b,
        s=config.s,
        support=config.support,
        gamma=gamma,
        tau=tau,
        tol=config.tol,
    )
    logger.info(f"{config.estimator.value} detected support {list(estimate.detected_support)}")

    guarantee = None
    if None not in (config.sigma, config.s, config.x_min, config.x_max):
        reports = guarantee_table(mu, config.s, dictionary.m, config.sigma, config.alpha, config.x_min, config.x_max)
        report = reports.get(config.estimator.value)
        guarantee = report.model_dump() if report is not None else None

    result = {
        "version": __version__,
        "estimator": config.estimator.value,
        "dictionary": dictionary.describe(),
        "normalization_warning": dictionary.normalization_warning,
        "mu": mu,
        "parameters": {"tau": tau, "gamma": gamma, "alpha": config.alpha, "s": config.s},
        "estimate": estimate.to_dict(),
        "guarantee": guarantee,
    }
    if config.estimator is EstimatorKind.ORACLE and config.sigma is not None:
        result["crb"] = crb(dictionary, config.support, config.sigma)
    _emit_json(result, output_dir, "estimate.json")
    return EXIT_OK


def cmd_experiment(kind: ExperimentKind, config: ExperimentConfig, output_dir: str) -> int:
    started = time.perf_counter()
    table = run_experiment(config, kind)
    wall_time = time.perf_counter() - started

    out = Path(output_dir)
    trials_path = write_trial_records_csv(table.records, out / "trials.csv")
    table_path = write_table_csv(table, out / "table.csv")
    manifest_path = write_manifest(
        config.model_copy(update={"experiment": kind}),
        out,
        wall_time,
        [trials_path.name, table_path.name],
    )

    failures = sum(r.failed for r in table.records)
    print("\n" + "=" * 60)
    print(f"Experiment Summary ({kind.value})")
    print("=" * 60)
    for row in table.rows:
        if row.profile != "all":
            continue
        value = f"{row.value:.6g}" if row.value is not None else "-"
        bound = f"{row.bound:.6g}" if row.bound is not None else "-"
        print(f"{table.axis_name}={row.axis_value:<10.4g} {row.estimator:<13} {table.statistic}={value:<12} bound={bound}")
    print(f"\n{len(table.records)} trial records, {failures} solver failure(s)")
    print(f"Results: {trials_path}, {table_path}, {manifest_path}")
    return EXIT_OK


# Verification

Check = Tuple[str, bool, str]


def _check_coherence(config: VerifyConfig) -> List[Check]:
    checks = []
    for n in config.coherence_sizes:
        mu = coherence(build_two_ortho_hadamard(n))
        error = abs(mu - 1.0 / math.sqrt(n))
        checks.append((f"coherence of two-ortho n={n}", error <= 1e-12, f"mu={mu:.12g}, |mu - 1/sqrt(n)|={error:.2e}"))
    return checks


def _check_lemma(config: VerifyConfig, seed: int) -> List[Check]:
    worst = -math.inf
    for k in range(config.lemma_dictionaries):
        dictionary = build_random_gaussian(config.lemma_n, config.lemma_m, seed + k)
        mu = coherence(dictionary)
        for s in range(1, config.lemma_max_s + 1):
            delta, theta = exact_rics(dictionary, s)
            worst = max(worst, delta - (s - 1) * mu, theta - s * mu)
            for s2 in range(s + 1, config.lemma_max_s + 1):
                if s + s2 <= dictionary.m:
                    worst = max(worst, exact_rop(dictionary, s, s2) - rop_bound(mu, s, s2))
    return [(
        "exact RIC/ROP within coherence bounds",
        worst <= 1e-10,
        f"{config.lemma_dictionaries} dictionaries {config.lemma_n}x{config.lemma_m}, worst excess {worst:.3e}",
    )]


def _check_certificates(config: VerifyConfig, seed: int) -> List[Check]:
    spec = SignalSpec(s=config.certificate_s, magnitude_mode=MagnitudeMode.GAUSSIAN_NORMALIZED)
    sigma = 0.01
    worst_gap = worst_kkt = worst_feasibility = 0.0
    for k in range(config.certificate_instances):
        dictionary = build_random_gaussian(config.certificate_n, config.certificate_m, seed + k)
        mu = coherence(dictionary)
        stream = RngStream(seed, k)
        signal = gen_signal(spec, stream.substream(StreamPurpose.SIGNAL), dictionary.m)
        b = dictionary.matrix @ signal.to_dense() + sigma * gaussian(stream.substream(StreamPurpose.NOISE), dictionary.n)

        gamma = bpdn_guarantee(mu, spec.s, dictionary.m, sigma, alpha=1.0).parameter
        bpdn = bpdn_estimate(dictionary, b, gamma)
        worst_gap = max(worst_gap, bpdn.diagnostics.duality_gap)
        worst_kkt = max(worst_kkt, bpdn_kkt_residual(dictionary, b, bpdn.coefficients, gamma) / gamma)

        tau = dantzig_guarantee(mu, spec.s, dictionary.m, sigma, 1.0).parameter
        dantzig = dantzig_estimate(dictionary, b, tau)
        worst_feasibility = max(worst_feasibility, dantzig.diagnostics.feasibility_residual)
    return [
        ("BPDN duality gap", worst_gap <= 1e-8, f"worst gap {worst_gap:.3e}"),
        ("BPDN KKT residual", worst_kkt <= 1e-6, f"worst residual / gamma {worst_kkt:.3e}"),
        ("Dantzig feasibility", worst_feasibility <= 1e-8, f"worst violation beyond tau {worst_feasibility:.3e}"),
    ]


def _check_oracle(config: VerifyConfig, seed: int, threads: int) -> List[Check]:
    experiment = ExperimentConfig(
        dictionary=DictionarySpec(kind=DictionaryKind.TWO_ORTHO_HADAMARD, n=config.oracle_n),
        estimators=[EstimatorPolicy(kind=EstimatorKind.ORACLE)],
        signal=SignalSpec(
            s=config.oracle_s,
            magnitude_mode=MagnitudeMode.GAUSSIAN_NORMALIZED,
            support_mode=SupportMode.RANDOM,
        ),
        noise_variances=[config.oracle_sigma**2],
        trials=config.oracle_trials,
        master_seed=seed,
        threads=threads,
    )
    row = mse_vs_snr_experiment(experiment).row(0, EstimatorKind.ORACLE.value)
    deviation = abs(row.value - row.crb) / row.crb
    return [(
        "oracle MSE matches the CRB",
        deviation <= config.oracle_tolerance,
        f"MSE {row.value:.6g} vs CRB {row.crb:.6g} ({deviation:.2%} off, {row.trials} trials)",
    )]


def cmd_verify(config: VerifyConfig, threads: int = 1) -> int:
    """
    Run the desk-scale acceptance checks and print PASS/FAIL per criterion.

    Returns:
        0 when every check passes, 2 otherwise
    """
    seed = config.master_seed
    suites: List[Callable[[], List[Check]]] = [
        lambda: _check_coherence(config),
        lambda: _check_lemma(config, seed),
        lambda: _check_certificates(config, seed),
        lambda: _check_oracle(config, seed, threads),
    ]
    checks: List[Check] = []

    if config.dictionary_path:
        dictionary = build_dictionary(DictionaryKind.FROM_FILE, path=config.dictionary_path)
        if dictionary.normalization_warning:
            print(f"WARNING: {config.dictionary_path} columns were not unit norm; re-normalized on load")
        print(f"dictionary {config.dictionary_path}: {dictionary.n}x{dictionary.m}, mu = {coherence(dictionary):.6g}")

    for suite in suites:
        try:
            checks.extend(suite())
        except SolverError as e:
            logger.error(f"Verification suite failed: {e}")
            checks.append((type(e).__name__, False, str(e)))

    print("\n" + "=" * 60)
    print("Verification Summary")
    print("=" * 60)
    for name, passed, detail in checks:
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
    failed = sum(not passed for _, passed, _ in checks)
    print(f"\n{len(checks) - failed}/{len(checks)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_SOLVER


# Parser and entry point

def _add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=str, default=None, help="JSON config file for this command")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="Override a config value (repeatable)")
    parser.add_argument("--seed", type=int, default=None, help=f"Master seed (overrides ${SEED_ENV_VAR} and the config)")
    parser.add_argument("--threads", type=int, default=None, help="Worker threads for trial execution")
    parser.add_argument("--output-dir", type=str, default=None, help="Directory for result files and the log file")
    parser.add_argument("--log-level", type=str, default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])


def _add_dictionary_arguments(parser: argparse.ArgumentParser) -> None:
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--two-ortho-hadamard", type=int, metavar="N", help="[I H] dictionary of size N x 2N")
    source.add_argument("--random-gaussian", type=int, nargs=2, metavar=("N", "M"), help="Normalized Gaussian N x M")
    source.add_argument("--overcomplete-dct", type=int, nargs=2, metavar=("N", "M"), help="Overcomplete DCT N x M")
    source.add_argument("--dictionary-file", type=str, metavar="PATH", help="Headerless CSV dictionary")


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="sparse_guarantees",
        description="Performance guarantees and Monte Carlo experiments for sparse estimators",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Coherence and bound table of the 512 x 1024 two-ortho dictionary
  python scripts/sparse_guarantees.py coherence --two-ortho-hadamard 512

  # Guarantee constants at s=7, m=1024
  python scripts/sparse_guarantees.py bounds --mu 0.0441942 --s 7 --m 1024 --sigma 1 --alpha 0

  # Median-error sweep from a config file
  python scripts/sparse_guarantees.py experiment median --config median.json --output-dir results
        """,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    coherence_parser = commands.add_parser("coherence", help="Mutual coherence and RIC/ROP bounds")
    _add_common_arguments(coherence_parser)
    _add_dictionary_arguments(coherence_parser)
    coherence_parser.add_argument("--max-s", type=int, default=LEMMA_TABLE_MAX_S, help="Rows of the bound table")
    coherence_parser.add_argument("--exact-s", type=int, default=None, metavar="K", help="Exhaustive constants for s <= K")

    bounds_parser = commands.add_parser("bounds", help="Evaluate the guarantee calculators")
    _add_common_arguments(bounds_parser)
    _add_dictionary_arguments(bounds_parser)
    bounds_parser.add_argument("--mu", type=float, default=None, help="Coherence (instead of a dictionary)")
    bounds_parser.add_argument("--m", type=int, default=None, help="Number of atoms (with --mu)")
    bounds_parser.add_argument("--s", type=int, required=True, help="Support size")
    bounds_parser.add_argument("--sigma", type=float, required=True, help="Noise standard deviation")
    bounds_parser.add_argument("--alpha", type=float, default=1.0, help="Confidence constant (default: 1)")
    bounds_parser.add_argument("--x-min", type=float, default=0.1, help="Smallest nonzero magnitude (default: 0.1)")
    bounds_parser.add_argument("--x-max", type=float, default=1.0, help="Largest nonzero magnitude (default: 1)")
    bounds_parser.add_argument("--epsilon", type=float, default=None, help="Bounded-noise level for the adversarial bound")

    estimate_parser = commands.add_parser("estimate", help="Run one estimator on a measurement vector")
    _add_common_arguments(estimate_parser)

    experiment_parser = commands.add_parser("experiment", help="Run a Monte Carlo sweep")
    experiment_parser.add_argument("kind", choices=[k.value for k in ExperimentKind])
    _add_common_arguments(experiment_parser)

    verify_parser = commands.add_parser("verify", help="Run the desk-scale acceptance checks")
    _add_common_arguments(verify_parser)
    return parser


def _validation_message(error: ValidationError) -> str:
    return "; ".join(
        f"{'.'.join(str(part) for part in item['loc']) or 'config'}: {item['msg']}" for item in error.errors()
    )


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "coherence":
        return cmd_coherence(args)
    if args.command == "bounds":
        return cmd_bounds(args)
    if args.command == "estimate":
        if not args.config and not args.set:
            raise ConfigError("estimate needs --config (or --set values)")
        return cmd_estimate(EstimateConfig(**load_config(args.config, args.set)), args.output_dir)
    if args.command == "experiment":
        data = load_config(args.config, args.set)
        data["master_seed"] = resolve_seed(args.seed, data.get("master_seed"))
        if args.threads is not None:
            data["threads"] = args.threads
        config = ExperimentConfig(**data)
        return cmd_experiment(ExperimentKind(args.kind), config, args.output_dir or "results")
    data = load_config(args.config, args.set)
    data["master_seed"] = resolve_seed(args.seed, data.get("master_seed"))
    return cmd_verify(VerifyConfig(**data), threads=args.threads or 1)


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments, run one command and map failures to exit codes.

    Returns:
        0 on success, 1 on invalid input/configuration, 2 on solver failure
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT

    try:
        configure_logging(args.log_level, args.output_dir)
        return _dispatch(args)
    except ValidationError as e:
        message = f"invalid config: {_validation_message(e)}"
        code = EXIT_INPUT
    except (InputError, OSError, ValueError) as e:
        message = str(e)
        code = EXIT_INPUT
    except SolverError as e:
        message = f"solver failure: {e}"
        code = EXIT_SOLVER
    logger.debug(f"Exiting with code {code}: {message}")
    print(f"error: {message}", file=sys.stderr)
    return code
