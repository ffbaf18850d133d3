SERVICE_NAME = "treebound"  # The application name
DEFAULT_COMMAND = "simulate"

# Environment
LOG_LEVEL_ENV = "LOG_LEVEL"
DEFAULT_LOG_LEVEL = "INFO"
OUTPUT_DIR_ENV = "TREEBOUND_OUTPUT_DIR"

# Protocol conventions (m = n, l_b = n, l_a = m + n)
DEFAULT_N = 4
DEFAULT_EXECUTIONS = 1
KEY_LEAKAGE_RATIO = 4  # warn when m + n > l_k / KEY_LEAKAGE_RATIO

# Channel, natural units by default
NATURAL_SPEED = 1.0
SPEED_OF_LIGHT_SI = 299_792_458.0  # m/s
DEFAULT_DISTANCE = 1.0
DEFAULT_EXTRA_DISTANCE = 0.0
DEFAULT_EPSILON = 0.0
DEFAULT_PROCESSING_DELAY = 0.0

# Monte Carlo
DEFAULT_SEED = 0
DEFAULT_TRIALS = 10_000
TRIAL_BLOCK_SIZE = 4096  # trials sharing one derived random stream
CONFIDENCE_LEVEL = 0.95
EXACT_INTERVAL_BELOW = 10  # Clopper-Pearson when successes < this
MAX_ENUMERATION_SPACE = 2**24
BIRTHDAY_CHUNK = 1 << 20  # terms summed per numpy pass of the exact birthday product
BIRTHDAY_SERIES_BELOW = 1e-4  # count / 2^bits under which the log series is used

# Domain separation labels of the keyed expansion
TREE_DOMAIN = b"treebound/tree/v1"
HK_DOMAIN = b"treebound/hancke-kuhn/v1"
BC_DOMAIN = b"treebound/brands-chaum/v1"

# Report schema
REPORT_FIELDS = (
    "protocol",
    "adversary",
    "n",
    "m",
    "trials",
    "successes",
    "estimate",
    "std_error",
    "predicted",
    "z",
)
BATCH_FIELDS = ("collisions", "collision_frequency", "birthday_exact", "birthday_bound")
ANALYZE_FIELDS = (
    "n",
    "m",
    "executions",
    "tree_relay",
    "tree_no_relay",
    "tree_union_relay",
    "tree_union_no_relay",
    "hk_relay",
    "hk_no_relay",
    "hk_union",
    "bc_relay",
    "bc_no_relay",
    "bc_union",
    "optimal_relay",
    "optimal_no_relay",
    "tree_bits",
)

# Exit codes
EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_TOLERANCE = 3
