"""
Per-subject spectra and joint expectancy matrices

A subject's r x T signal matrix is taken to the GFT domain, every time
column is centred across modes and scaled to unit norm, and the result is
summarised by the trace-normalised second moment S = YY^T / tr(YY^T).
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .atlas_graph import GftBasis
from .config import DEGENERATE_COLUMN_RTOL
from .errors import DataError, DimensionMismatchError, SingleClassError, UsageError
from .utils import symmetrize

logger = logging.getLogger(__name__)


class Label(str, Enum):
    ASD = "ASD"
    NT = "NT"

    @classmethod
    def parse(cls, value) -> "Label":
        if isinstance(value, Label):
            return value
        text = str(value).strip().upper()
        for label in cls:
            if label.value == text:
                return label
        raise DataError(f"unknown diagnosis label {value!r} (expected ASD or NT)")


@dataclass(frozen=True)
class SubjectRecord:
    """One subject: label and r x T BOLD signal matrix"""
    id: str
    label: Label
    X: np.ndarray = field(repr=False)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim != 2:
            raise DataError(f"subject {self.id}: signal must be a 2-D matrix, got shape {X.shape}")
        if X.shape[1] < 2:
            raise DataError(f"subject {self.id}: needs at least 2 time-points, got {X.shape[1]}")
        if not np.all(np.isfinite(X)):
            raise DataError(f"subject {self.id}: signal contains non-finite values")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "label", Label.parse(self.label))

    @property
    def r(self) -> int:
        return self.X.shape[0]

    @property
    def T(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class NormalizedSpectra:
    """Column-centred, unit-norm GFT coefficients"""
    Y: np.ndarray = field(repr=False)
    dropped_columns: Tuple[int, ...] = ()

    @property
    def r(self) -> int:
        return self.Y.shape[0]

    @property
    def T(self) -> int:
        return self.Y.shape[1]


class ExpectancyKind(str, Enum):
    PER_SUBJECT = "perSubject"
    CLASS_MEAN_ASD = "classMean(ASD)"
    CLASS_MEAN_NT = "classMean(NT)"
    GLOBAL_MEAN = "globalMean"


@dataclass(frozen=True)
class JointExpectancy:
    S: np.ndarray = field(repr=False)
    kind: ExpectancyKind
    alpha: Optional[float] = None

    @property
    def r(self) -> int:
        return self.S.shape[0]


class ClassMeans(NamedTuple):
    S_bar: JointExpectancy
    S_asd: JointExpectancy
    S_nt: JointExpectancy
    alpha_asd: float


def gft_coefficients(X: np.ndarray, basis: GftBasis) -> np.ndarray:
    """
    GFT of every time column, X_hat = V^T X

    Args:
        X: r x T signal matrix
        basis: GFT basis of the same r

    Returns:
        r x T coefficient matrix
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != basis.r:
        raise DimensionMismatchError(f"signal has shape {X.shape}, basis expects {basis.r} rows")
    return basis.eigenvectors.T @ X


def normalize_columns(X_hat: np.ndarray) -> NormalizedSpectra:
    """
    Centre each column over the modes and scale it to unit L2 norm

    Columns with no variation across modes cannot be scaled; they are
    dropped and reported in ``dropped_columns``.

    Args:
        X_hat: r x T coefficient matrix

    Returns:
        NormalizedSpectra
    """
    X_hat = np.asarray(X_hat, dtype=float)
    if X_hat.ndim != 2 or X_hat.shape[0] < 2:
        raise UsageError(f"normalization needs an r x T matrix with r >= 2, got shape {X_hat.shape}")

    centred = X_hat - X_hat.mean(axis=0, keepdims=True)
    norms = np.linalg.norm(centred, axis=0)
    raw_norms = np.linalg.norm(X_hat, axis=0)
    degenerate = norms <= DEGENERATE_COLUMN_RTOL * np.maximum(raw_norms, np.finfo(float).tiny)

    if degenerate.all():
        raise DataError("subject has no informative time-points")

    dropped = tuple(int(i) for i in np.flatnonzero(degenerate))
    if dropped:
        logger.warning("Dropped %d degenerate time-point(s): %s", len(dropped), list(dropped))

    keep = ~degenerate
    Y = centred[:, keep] / norms[keep]
    return NormalizedSpectra(Y=Y, dropped_columns=dropped)


def joint_expectancy(spectra: NormalizedSpectra) -> JointExpectancy:
    """
    Trace-normalised second moment of the normalised spectra

    Args:
        spectra: NormalizedSpectra of one subject

    Returns:
        JointExpectancy of kind perSubject
    """
    Y = spectra.Y
    S = symmetrize(Y @ Y.T)
    trace = float(np.trace(S))
    if trace <= 0.0:
        raise DataError("joint expectancy has zero trace")
    return JointExpectancy(S=S / trace, kind=ExpectancyKind.PER_SUBJECT)


def subject_expectancy(X: np.ndarray, basis: GftBasis) -> Tuple[NormalizedSpectra, JointExpectancy]:
    """Chain GFT, column normalization and joint expectancy for one subject"""
    spectra = normalize_columns(gft_coefficients(X, basis))
    return spectra, joint_expectancy(spectra)


def class_means(subjects: Sequence[Tuple[JointExpectancy, Label]]) -> ClassMeans:
    """
    Global and per-class mean joint expectancies

    Accumulation runs left to right over ``subjects``.

    Args:
        subjects: (per-subject JointExpectancy, label) pairs

    Returns:
        ClassMeans(S_bar, S_asd, S_nt, alpha_asd)
    """
    if not subjects:
        raise SingleClassError("both classes required")

    r = subjects[0][0].r
    total = np.zeros((r, r))
    sums = {Label.ASD: np.zeros((r, r)), Label.NT: np.zeros((r, r))}
    counts = {Label.ASD: 0, Label.NT: 0}

    for expectancy, label in subjects:
        label = Label.parse(label)
        if expectancy.r != r:
            raise DimensionMismatchError(f"joint expectancy of size {expectancy.r} mixed with size {r}")
        total += expectancy.S
        sums[label] += expectancy.S
        counts[label] += 1

    if counts[Label.ASD] == 0 or counts[Label.NT] == 0:
        raise SingleClassError("both classes required")

    n_total = counts[Label.ASD] + counts[Label.NT]
    alpha_asd = counts[Label.ASD] / n_total

    return ClassMeans(
        S_bar=JointExpectancy(total / n_total, ExpectancyKind.GLOBAL_MEAN, alpha=alpha_asd),
        S_asd=JointExpectancy(sums[Label.ASD] / counts[Label.ASD], ExpectancyKind.CLASS_MEAN_ASD),
        S_nt=JointExpectancy(sums[Label.NT] / counts[Label.NT], ExpectancyKind.CLASS_MEAN_NT),
        alpha_asd=alpha_asd,
    )
