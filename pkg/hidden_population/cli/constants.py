from enum import Enum, IntEnum


class Subcommand(Enum):
    SIMULATE = "simulate"
    FIT = "fit"
    ANALYZE = "analyze"
    SIR = "sir"


class ExitCode(IntEnum):
    OK = 0
    FAILURE = 1
    USAGE = 2


MANIFEST_FILE = "manifest.json"

PANEL_FILE = "panel.csv"
TRUTH_FILE = "truth.csv"
ADJACENCY_FILE = "adjacency.txt"

DRAWS_DIR = "draws"
DRAWS_CSV_FILE = "draws.csv"
SUMMARY_FILE = "summary.csv"
ACCEPTANCE_FILE = "acceptance.csv"

COVERAGE_FILE = "coverage.csv"
MAPE_FILE = "mape.csv"
UNCAPTURED_FILE = "uncaptured.csv"
COMPONENTS_FILE = "components.csv"
LATENT_FILE = "latent.csv"

SIR_FILE = "sir.csv"

DEFAULT_LEVELS = (0.90, 0.95, 0.99)
