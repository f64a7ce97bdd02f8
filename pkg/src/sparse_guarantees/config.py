"""
Configuration constants for the sparse-estimation guarantee toolkit

Contains numerical tolerances, solver caps, Monte Carlo defaults and the
random-stream layout shared by every module.
"""

# Linear algebra
RANK_TOLERANCE = 1e-12  # relative to the largest |R_ii| of the QR factor
SYMMETRY_TOLERANCE = 1e-12
UNIT_NORM_TOLERANCE = 1e-12
FILE_NORM_WARNING_THRESHOLD = 1e-6  # from_file dictionaries deviating by more are flagged

# Power iteration (operator norm for the BPDN step size)
POWER_ITERATION_TOLERANCE = 1e-10
POWER_ITERATION_MAX_ITER = 10_000
OPERATOR_NORM_SAFETY = 1e-6  # returned estimate is lambda_max * (1 + safety)

# Exhaustive RIC/ROP enumeration
ENUMERATION_CAP = 2_000_000
ENUMERATION_CHUNK = 20_000

# Estimators
SUPPORT_TOLERANCE = 1e-8  # |x_i| > tol * max|x_j| counts as support
BPDN_TOLERANCE = 1e-10
BPDN_MAX_ITER = 100_000
BPDN_GAP_CHECK_EVERY = 10
DANTZIG_TOLERANCE = 1e-8
DANTZIG_SOLVER_TOLERANCE = 1e-10  # HiGHS primal/dual feasibility tolerance

# Experiments
MEDIAN_TRIALS_DEFAULT = 501  # odd count keeps the median unambiguous
MSE_TRIALS_DEFAULT = 2000
FIXED_PROFILE_COUNT = 8
MEDIAN_TARGET_PROBABILITY = 0.5

# Random stream layout: stream_id = grid_index * GRID_STRIDE + trial_index
GRID_STRIDE = 10**6
FIXED_SIGNAL_STREAM_BASE = 2**62  # stream ids of the per-profile fixed signals
DICTIONARY_STREAM_ID = 2**63  # stream id used by build_random_gaussian

# CLI
SEED_ENV_VAR = "SPARSE_GUARANTEES_SEED"
LOG_FILE_NAME = "sparse_guarantees.log"
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
LEMMA_TABLE_MAX_S = 12
