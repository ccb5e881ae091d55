"""Constants for the robust loss lab."""

from logging import getLogger

# Configuration keys
CONF_LOSS_TABLE = "loss_table"
CONF_TOYFIT = "toyfit"
CONF_INTERP = "interp"

# Ground-truth polynomial of the toy problem, coeffs[k] multiplies x**k
DEFAULT_THETA_STAR = (-10.0, 20.0, 15.0, -25.0, -3.0, 6.0)
DEFAULT_FIT_DEGREE_COUNT = len(DEFAULT_THETA_STAR) + 2
DEFAULT_N_SAMPLES = 2000
DEFAULT_DELTA = 2.0
DEFAULT_ITERATIONS = 20000
DEFAULT_REPEATS = 5
DEFAULT_SEED = 0
DEFAULT_WORKERS = 1

# Grids for the desk-scale sweep; lr spans several decades because the x**7
# column dominates the gradient scale on [-2, 2]
DEFAULT_ALPHA_GRID = (0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0)
DEFAULT_LR_GRID = (1e-7, 3e-7, 1e-6, 3e-6, 1e-5)
DEFAULT_NOISE_SCALES = (0.5, 0.75, 1.0, 1.5, 2.5, 5.0)

# A fit is declared diverged once its objective exceeds this multiple of the
# objective at the zero initialisation
DIVERGENCE_LOSS_RATIO = 1e8

# Quadrature oracle
DEFAULT_QUADRATURE_HALF_WIDTH = 40.0
DEFAULT_QUADRATURE_POINTS = 100001
MIN_QUADRATURE_POINTS = 1001

# Loss table
DEFAULT_LOSS_TABLE_ALPHAS = (0.1, 1.0, 10.0)
DEFAULT_LOSS_TABLE_X_MIN = -5.0
DEFAULT_LOSS_TABLE_X_MAX = 5.0
DEFAULT_LOSS_TABLE_POINTS = 1001
LOSS_TABLE_HEADER = (
    "x",
    "huber",
    "huber_grad",
    "kl_lower",
    "kl_lower_grad",
    "kl_upper",
    "kl_upper_grad",
)

# 17 significant digits round-trip every double
FLOAT_FORMAT = ".17g"

# Golden seed for the pinned sample stream
GOLDEN_SEED = 42
GOLDEN_DRAWS = 16

# Verification profiles
PROFILE_DEFAULT = "default"
PROFILE_QUICK = "quick"

# Interpretation output formats
FORMAT_CSV = "csv"
FORMAT_JSON = "json"
FORMAT_MARKDOWN = "markdown"
OUTPUT_FORMATS = (FORMAT_CSV, FORMAT_JSON, FORMAT_MARKDOWN)

PRESET_TABLE1 = "paper-table1"
PRESET_TWO_STAGE_DETECTOR = "two-stage-detector"

# Logging
_LOGGER = getLogger(__name__)
