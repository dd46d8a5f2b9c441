"""Configuration defaults for ClusterTest."""

import os

VERSION = "0.3.0"

# Seeding (override with CLUSTERINF_SEED or --seed)
DEFAULT_SEED = int(os.environ.get("CLUSTERINF_SEED", "0"))
DEFAULT_N_JOBS = int(os.environ.get("CLUSTERINF_N_JOBS", "1"))

# Truncation-set scan
DEFAULT_GRID_POINTS = 2048
DEFAULT_REFINE_TOL = 1e-8
DEFAULT_QUANTILE_EPS = 1e-12
SCAN_WIDEN_DECADES = 3          # bounds always include stat * 10**(+-3)
MIN_GRID_POINTS = 16

# Importance sampling
DEFAULT_IS_DRAWS = 8000
DEFAULT_IS_PILOT_DRAWS = 256
DEFAULT_IS_TARGET = 0.5
IS_ALPHA_GRID = tuple(2.0 ** -k for k in range(8, -1, -1))   # 2^-8 .. 2^0
IS_ACCEPT_WINDOW = (0.3, 0.7)
MIN_IS_DRAWS = 100

# Numerics
DEGENERACY_RTOL = 1e-12
MIN_INTERVAL_MASS = 1e-300
LI_MIN_DENOM_DF = 1000          # smallest (m-2)q for the chi^2 tail approximation as a fallback

# Experiments
DEFAULT_ALPHA_LEVEL = 0.05
DEFAULT_LINKAGE = "average"

# Paths
ROOT_DIR = os.path.dirname(os.path.abspath(__file__))
TEMPLATES_DIR = os.path.join(ROOT_DIR, "templates")
OUTPUT_DIR = os.path.join(ROOT_DIR, "output")
EXPERIMENT_DEFAULTS_PATH = os.path.join(TEMPLATES_DIR, "experiment_defaults.json")
REPORT_SCHEMA_PATH = os.path.join(TEMPLATES_DIR, "report_schema.json")
