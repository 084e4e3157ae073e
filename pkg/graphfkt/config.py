"""
Configuration for the graph-spectral classifier
Includes data locations, numerical tolerances and the experiment config file reader
"""

import os
from io import StringIO
from pathlib import Path
from typing import Dict, Optional
from dotenv import dotenv_values, load_dotenv

from .errors import UsageError

# Load environment variables
load_dotenv()

PACKAGE_DIR = Path(__file__).resolve().parent

# Default root for command outputs written without an explicit --out
DATA_DIR = Path(os.getenv("GRAPHFKT_DATA_DIR", "./data"))

# Shipped AAL90 centroid atlas
DEFAULT_ATLAS_PATH = Path(os.getenv("GRAPHFKT_ATLAS", str(PACKAGE_DIR / "atlases" / "aal90_centroids.txt")))

# Parallel trial workers
DEFAULT_WORKERS = int(os.getenv("GRAPHFKT_WORKERS", 1))

# Numerical tolerances
ORTHONORMAL_TOL = 1e-10
ZERO_EIG_RTOL = 1e-9
WHITENING_TOL = 1e-8
FIRST_ROW_TOL = 1e-6
OFFDIAG_TOL = 1e-6
COMPLEMENTARITY_TOL = 1e-8
DEGENERATE_COLUMN_RTOL = 1e-12
LOG_VAR_FLOOR = 1e-300

# Mode report flag rule
FLAG_MULTIPLIER = 2.5

# Classifier tuning
DEFAULT_TUNING_GRID = (2, 5, 10, 15, 20)
DEFAULT_INNER_FOLDS = 5

# Trial resampling when a training split misses a class
MAX_SPLIT_ATTEMPTS = 100

# Version stamped on every JSON document we write
JSON_FORMAT_VERSION = 1

# Phenotype table column map (ABIDE-I names)
ABIDE_COLUMNS = {
    "subject_id": "SUB_ID",
    "diagnosis": "DX_GROUP",
    "age": "AGE_AT_SCAN",
    "eyes": "EYE_STATUS_AT_SCAN",
    "mean_fd": "func_mean_fd",
    "site": "SITE_ID",
}

# Integer codes used by the phenotype table
DIAGNOSIS_CODES = {1: "ASD", 2: "NT"}
EYES_OPEN_CODES = {1: True, 2: False}

# Logging
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")


def _line_of(text: str, key: str) -> int:
    for line_no, raw in enumerate(text.splitlines(), 1):
        stripped = raw.strip()
        if stripped.startswith("export "):
            stripped = stripped[len("export "):].lstrip()
        if stripped.split("=", 1)[0].strip() == key:
            return line_no
    return 0


def read_config_file(path: Path, overrides: Optional[Dict[str, str]] = None) -> Dict[str, str]:
    """
    Read a declarative ``key = value`` config file

    The file uses dotenv syntax: ``#`` comments, optional quotes and an
    optional ``export`` prefix. Keys are case-insensitive and ``-`` may
    stand for ``_``.

    Args:
        path: Config file path
        overrides: Values that replace (or add to) the file's keys

    Returns:
        Dict of raw string values, keys lower-cased
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise UsageError(f"cannot read config file {path}: {e}") from e

    values: Dict[str, str] = {}
    for key, value in dotenv_values(stream=StringIO(text), interpolate=False).items():
        if value is None:
            raise UsageError(f"{path}:{_line_of(text, key)}: expected 'key = value', got {key!r}")
        values[key.lower().replace("-", "_")] = value

    if overrides:
        values.update({k.lower().replace("-", "_"): v for k, v in overrides.items() if v is not None})

    return values
