"""
Catalog labels, enumerations and numerical defaults.
"""

# Base problem catalog
CATALOG_LABELS = ["free-line", "reflectionless", "harmonic", "torus", "free-plane"]

CATALOG_PARAMETERS = {
    "free-line": {
        "dimension": 1,
        "parameters": {},
        "description": "Free particle on the line, continuum only"
    },
    "reflectionless": {
        "dimension": 1,
        "parameters": {"kappa": "positive real, well width parameter"},
        "description": "Reflectionless sech^2 well with a single bound state"
    },
    "harmonic": {
        "dimension": 1,
        "parameters": {"omega": "positive real, oscillator frequency"},
        "description": "Harmonic oscillator, purely discrete"
    },
    "torus": {
        "dimension": 2,
        "parameters": {"L1": "positive real side", "L2": "positive real side"},
        "description": "Flat two-torus, purely discrete plane waves"
    },
    "free-plane": {
        "dimension": 2,
        "parameters": {},
        "description": "Free particle in the plane, continuum only"
    }
}

# Green's function evaluation methods
GREEN_METHODS = ["closed-form", "expansion", "anchored"]

# Bound state kinds
STATE_KINDS = ["shifted", "unchanged-node"]

# Perturbation configurations accepted by the experiment layer
PERTURBATION_KINDS = ["point", "renormalized", "centers", "curve"]

# Curve shapes accepted by the experiment layer
CURVE_SHAPES = ["circle", "ellipse", "polyline"]

# Command-line subcommands
SUBCOMMANDS = [
    "spectrum", "green", "perturb", "scatter", "renorm",
    "multicenter", "curve", "secular", "run"
]

# Exit codes
EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_SOLVER_ERROR = 2

TOOL_NAME = "deltaspec"
TOOL_VERSION = "0.3.0"

# Root search
GROUND_STATE_MAX_DOUBLINGS = 200
BISECTION_FRACTION = 1e-3
BRANCH_POINT_PROBES = [1e-2, 1e-4, 1e-6, 1e-8, 1e-10, 1e-12]

# Determinant scan
DET_GRID_PER_UNIT = 200
DET_GRID_MAX = 20000
CONDITION_LIMIT = 1e12
MIN_CENTER_SEPARATION = 1e-9

# Scattering extraction distance (in units of 1/k)
SCATTERING_DISTANCE = 40.0

# Float formatting for CSV output
CSV_FLOAT_FORMAT = "%.17g"

# Curve quadrature: acceptance threshold on the order-halving error estimate
CURVE_TOL = 1e-8
# Points closer to the curve than this many node spacings use adaptive quadrature
CURVE_NEAR_FACTOR = 4.0
