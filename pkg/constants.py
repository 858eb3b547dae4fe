from pathlib import Path

BASE_DIR = Path(__file__).resolve().parent
DOCS_DIR = BASE_DIR / "docs"
SCHEMAS_DIR = DOCS_DIR / "schemas"

# Coordinates of the jet space. First and second derivative symbols are
# internal to prolongation and never appear in user systems.
INDEPENDENT_NAME = "x"
DEPENDENT_NAMES = ("y", "z", "u")
FIRST_DERIVATIVE_NAMES = ("yp", "zp", "up")
SECOND_DERIVATIVE_NAMES = ("ypp", "zpp", "upp")
RESERVED_NAMES = frozenset(FIRST_DERIVATIVE_NAMES + SECOND_DERIVATIVE_NAMES)

DEFAULT_OPAQUE_NAMES = ("f", "g", "h", "zeta1", "zeta2", "zeta3", "h1", "h2", "h3")
OPAQUE_INDEX_SEPARATOR = "__"

DEFAULT_SEED = 42
DEFAULT_SAMPLES = 64
DEFAULT_TOLERANCE = 1e-9
DEFAULT_DRAWS = 100
DEFAULT_WORKERS = 1
SAMPLE_RANGE = 97
SAMPLE_RETRIES = 16

JORDAN_RESIDUAL_TOLERANCE = 1e-8
JORDAN_INVERSE_TOLERANCE = 1e-10
JORDAN_CONDITION_LIMIT = 1e12

# Working interval used to validate that a reparametrization is invertible.
REPARAM_DOMAIN = (0.1, 10.0)
REPARAM_DOMAIN_SAMPLES = 16

JORDAN_KINDS = ("J1", "J2", "J3", "J4")
KIND_TO_CASE = {"J1": 1, "J2": 2, "J3": 3, "J4": 4}

CASE_PARAM_NAMES = {
    1: ("alpha11", "alpha13", "alpha21", "alpha22", "alpha23", "alpha31", "alpha32", "alpha33", "alpha", "beta"),
    2: ("alpha11", "alpha21", "alpha31", "beta", "gamma", "c1", "c2", "alpha", "c"),
    3: ("alpha11", "alpha12", "alpha13", "alpha21", "alpha22", "alpha23", "alpha31", "alpha32", "alpha33", "alpha"),
    4: ("lambda", "beta", "gamma", "alpha"),
}

BRANCH_XI_NONZERO = "xi-nonzero"
BRANCH_XI_ZERO = "xi-zero"
BRANCHES = (BRANCH_XI_NONZERO, BRANCH_XI_ZERO)

VERDICT_CANONICAL = "canonical-case"
VERDICT_DEGENERATE = "degenerate"
VERDICT_TRIVIAL_ONLY = "trivial-only"
VERDICT_UNCLASSIFIED = "unclassified"

EXIT_OK = 0
EXIT_VERIFICATION_FAILED = 1
EXIT_USAGE = 2
EXIT_COMPUTATION_ERROR = 3

# Subcases of the xi = 0 branch, keyed by Jordan kind. "=0" / "!=0" are exact
# predicates on the Jordan parameters and on the shift functions h1, h2, h3.
XI_ZERO_SUBCASES = {
    "J1": (
        "a!=0,b!=0,d!=0",
        "a!=0,b!=0,d=0",
        "a!=0,b=0,d=0",
        "a=0,b=0,d=0,h1!=0",
        "a=0,b=0,d=0,h1=0,h2!=0",
    ),
    "J2": (
        "a!=0",
        "a=0,h1!=0",
        "a=0,h1=0",
    ),
    "J3": (
        "a!=0,b!=0",
        "a!=0,b=0,h3!=0",
        "a!=0,b=0,h3=0",
        "a=0,b!=0,h1!=0",
        "a=0,b!=0,h1=0",
        "a=0,b=0,h1!=0,h3!=0",
        "a=0,b=0,h1!=0,h3=0",
        "a=0,b=0,h1=0,h3!=0",
        "a=0,b=0,h1=0,h3=0",
    ),
    "J4": (
        "a!=0",
        "a=0,h3!=0",
        "a=0,h3=0",
    ),
}
