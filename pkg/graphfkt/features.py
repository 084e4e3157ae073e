"""
Feature extraction: log-variance of projected spectra and GFT baseline variances
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Sequence, Tuple

import numpy as np

from .config import LOG_VAR_FLOOR
from .errors import DataError, DimensionMismatchError, UsageError
from .fkt import FktModel
from .spectra import NormalizedSpectra

logger = logging.getLogger(__name__)


class Banding(str, Enum):
    PER_MODE = "perMode"
    THREE_BANDS = "threeBands"

    @classmethod
    def parse(cls, value) -> "Banding":
        for banding in cls:
            if banding.value.lower() == str(value).lower():
                return banding
        raise UsageError(f"unknown banding {value!r} (choose perMode or threeBands)")


BAND_NAMES = ("low", "mid", "high")


@dataclass(frozen=True)
class FeatureVector:
    """Named feature values of one subject"""
    values: np.ndarray = field(repr=False)
    schema: Tuple[str, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        schema = tuple(self.schema)
        if values.ndim != 1 or len(values) != len(schema):
            raise DataError(f"{values.size} feature values for a schema of {len(schema)} names")
        if not np.all(np.isfinite(values)):
            raise DataError("feature values must be finite")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "schema", schema)

    def __len__(self) -> int:
        return len(self.schema)


def feature_matrix(vectors: Sequence[FeatureVector]) -> Tuple[np.ndarray, Tuple[str, ...]]:
    """
    Stack feature vectors into an n x d matrix

    Args:
        vectors: Feature vectors of one experiment

    Returns:
        (matrix, schema)
    """
    if not vectors:
        raise DataError("no feature vectors to stack")
    schema = vectors[0].schema
    for vector in vectors[1:]:
        if vector.schema != schema:
            raise DataError(f"feature schema mismatch: {vector.schema} vs {schema}")
    return np.vstack([v.values for v in vectors]), schema


def project(spectra: NormalizedSpectra, model: FktModel) -> np.ndarray:
    """Z = P Y"""
    if spectra.r != model.r:
        raise DimensionMismatchError(f"spectra have {spectra.r} modes, model expects {model.r}")
    return model.P @ spectra.Y


def _log_variance(rows: np.ndarray) -> np.ndarray:
    return np.log(np.maximum(rows.var(axis=1), LOG_VAR_FLOOR))


def fkt_features(Z: np.ndarray, dom_asd: Sequence[int], dom_nt: Sequence[int]) -> FeatureVector:
    """
    Log-variance over time of the class-dominant projected rows

    Args:
        Z: r x T projected spectra
        dom_asd: ASD-dominant dimensions (0-based, null dimension excluded)
        dom_nt: NT-dominant dimensions

    Returns:
        FeatureVector with schema [ASD_dom1..m, NT_dom1..m]
    """
    Z = np.asarray(Z, dtype=float)
    if not dom_asd or not dom_nt:
        raise UsageError("dominant dimension lists must not be empty")
    for dim in (*dom_asd, *dom_nt):
        if dim == 0:
            raise UsageError("the null dimension carries no class information and cannot be a feature")
        if not 0 < dim < Z.shape[0]:
            raise DimensionMismatchError(f"dimension {dim} outside projected matrix with {Z.shape[0]} rows")

    values = np.concatenate([_log_variance(Z[list(dom_asd)]), _log_variance(Z[list(dom_nt)])])
    schema = [f"ASD_dom{i}" for i in range(1, len(dom_asd) + 1)]
    schema += [f"NT_dom{i}" for i in range(1, len(dom_nt) + 1)]
    return FeatureVector(values, tuple(schema))


def gft_baseline_features(spectra: NormalizedSpectra, banding=Banding.PER_MODE) -> FeatureVector:
    """
    Variances over time of the normalised GFT coefficients

    perMode gives one feature per mode; threeBands pools the rows of each
    contiguous third of the modes (low, mid, high frequency) into one sample.
    """
    banding = Banding.parse(banding)
    Y = spectra.Y

    if banding is Banding.PER_MODE:
        values = Y.var(axis=1)
        schema = [f"GFT_mode_{k}" for k in range(1, spectra.r + 1)]
    else:
        bands: List[np.ndarray] = np.array_split(Y, len(BAND_NAMES), axis=0)
        values = np.array([band.ravel().var() if band.size else 0.0 for band in bands])
        schema = [f"GFT_band_{name}" for name in BAND_NAMES]

    return FeatureVector(values, tuple(schema))
