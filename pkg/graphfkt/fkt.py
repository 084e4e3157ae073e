"""
Extended Fukunaga-Koontz transform

The global mean joint expectancy is singular (every normalised column is
orthogonal to the constant vector), so whitening keeps its single null
direction with unit scaling and whitens the rest. The whitened class means
share eigenvectors on the remaining (r-1)-dimensional block, where their
eigenvalues, weighted by the class fractions, sum to one.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .config import (
    COMPLEMENTARITY_TOL,
    FIRST_ROW_TOL,
    JSON_FORMAT_VERSION,
    OFFDIAG_TOL,
    WHITENING_TOL,
    ZERO_EIG_RTOL,
)
from .errors import DataError, DimensionMismatchError, NumericalError, UsageError
from .spectra import ExpectancyKind, JointExpectancy, Label, class_means
from .utils import canonicalize_signs, offdiag_max, symmetrize

logger = logging.getLogger(__name__)

NULL_DIM = 0


def _eigh(matrix: np.ndarray, what: str) -> Tuple[np.ndarray, np.ndarray]:
    try:
        return scipy.linalg.eigh(matrix)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise NumericalError(f"eigendecomposition of the {what} failed: {e}",
                             {"finite": bool(np.isfinite(matrix).all())}) from e


@dataclass(frozen=True)
class WhiteningTransform:
    Q: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)
    gamma: np.ndarray = field(repr=False)
    Q2: np.ndarray = field(repr=False)

    @property
    def r(self) -> int:
        return self.Q.shape[0]


@dataclass(frozen=True)
class FktModel:
    """
    Discriminative projection P with complementary per-class eigenvalues

    Dimensions are 0-based; dimension 0 is the null dimension.
    """
    P: np.ndarray = field(repr=False)
    lambda_asd: np.ndarray = field(repr=False)
    lambda_nt: np.ndarray = field(repr=False)
    alpha_asd: float
    dom_asd: Tuple[int, ...] = ()
    dom_nt: Tuple[int, ...] = ()
    null_dim: int = NULL_DIM
    atlas_checksum: Optional[str] = None
    graph_kind: Optional[str] = None

    @property
    def r(self) -> int:
        return self.P.shape[0]

    @property
    def alpha_nt(self) -> float:
        return 1.0 - self.alpha_asd

    def with_dimensions(self, m: int) -> "FktModel":
        """Copy of the model with its m dominant dimensions per class selected"""
        dom_asd, dom_nt = dominant_dimensions(self, m)
        return replace(self, dom_asd=dom_asd, dom_nt=dom_nt)

    def with_provenance(self, atlas_checksum: Optional[str], graph_kind: Optional[str]) -> "FktModel":
        return replace(self, atlas_checksum=atlas_checksum, graph_kind=graph_kind)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "format_version": JSON_FORMAT_VERSION,
            "kind": "fkt_model",
            "r": self.r,
            "P": [[float(v) for v in row] for row in self.P],
            "lambda_asd": [float(v) for v in self.lambda_asd],
            "lambda_nt": [float(v) for v in self.lambda_nt],
            "alpha_asd": float(self.alpha_asd),
            "dom_asd": list(self.dom_asd),
            "dom_nt": list(self.dom_nt),
            "null_dim": self.null_dim,
            "atlas_checksum": self.atlas_checksum,
            "graph_kind": self.graph_kind,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FktModel":
        if data.get("kind") != "fkt_model":
            raise DataError(f"not a model document (kind={data.get('kind')!r})")
        if data.get("format_version") != JSON_FORMAT_VERSION:
            raise DataError(f"unsupported model format version {data.get('format_version')!r}")
        P = np.array(data["P"], dtype=float)
        r = int(data["r"])
        if P.shape != (r, r):
            raise DataError(f"model matrix has shape {P.shape}, expected {(r, r)}")
        return cls(
            P=P,
            lambda_asd=np.array(data["lambda_asd"], dtype=float),
            lambda_nt=np.array(data["lambda_nt"], dtype=float),
            alpha_asd=float(data["alpha_asd"]),
            dom_asd=tuple(int(d) for d in data.get("dom_asd", [])),
            dom_nt=tuple(int(d) for d in data.get("dom_nt", [])),
            null_dim=int(data.get("null_dim", NULL_DIM)),
            atlas_checksum=data.get("atlas_checksum"),
            graph_kind=data.get("graph_kind"),
        )


def whiten(S_bar: JointExpectancy) -> WhiteningTransform:
    """
    Whitening operator of the (singular) global mean

    Args:
        S_bar: Global mean joint expectancy

    Returns:
        WhiteningTransform with Q2 S_bar Q2^T = diag(0, 1, ..., 1)
    """
    if S_bar.kind is not ExpectancyKind.GLOBAL_MEAN:
        raise UsageError(f"whitening expects the global mean joint expectancy, got {S_bar.kind.value}")

    S = symmetrize(S_bar.S)
    eigenvalues, Q = _eigh(S, "global mean joint expectancy")
    order = np.argsort(eigenvalues, kind="stable")
    eigenvalues = eigenvalues[order]
    Q = canonicalize_signs(Q[:, order])

    tau = ZERO_EIG_RTOL * float(eigenvalues.max())
    n_null = int(np.count_nonzero(eigenvalues < tau))
    if n_null != 1:
        raise NumericalError(
            "rank deficiency ≠ 1 in the global mean joint expectancy",
            {"eigenvalues_below_tolerance": n_null, "tolerance": tau},
        )

    gamma = np.ones_like(eigenvalues)
    gamma[1:] = eigenvalues[1:] ** -0.5
    Q2 = gamma[:, None] * Q.T

    target = np.diag(np.r_[0.0, np.ones(len(eigenvalues) - 1)])
    residual = float(np.max(np.abs(Q2 @ S @ Q2.T - target)))
    if residual >= WHITENING_TOL:
        raise NumericalError("whitening residual above tolerance",
                             {"residual": residual, "smallest_nonzero_eigenvalue": float(eigenvalues[1])})

    return WhiteningTransform(Q=Q, eigenvalues=eigenvalues, gamma=gamma, Q2=Q2)


def simultaneous_diagonalize(whitening: WhiteningTransform, S_asd: JointExpectancy,
                             S_nt: JointExpectancy, alpha_asd: float) -> FktModel:
    """
    Diagonalize both whitened class means with one orthogonal block transform

    Args:
        whitening: Whitening of the global mean of the same training set
        S_asd: ASD class mean
        S_nt: NT class mean
        alpha_asd: Fraction of ASD subjects in the training set

    Returns:
        FktModel (no dominant dimensions selected yet)
    """
    r = whitening.r
    if S_asd.r != r or S_nt.r != r:
        raise DimensionMismatchError(f"class means of size {S_asd.r}/{S_nt.r} do not match whitening size {r}")
    if not 0.0 < alpha_asd < 1.0:
        raise UsageError(f"alpha_asd must be in (0, 1), got {alpha_asd}")
    alpha_nt = 1.0 - alpha_asd

    Q2 = whitening.Q2
    white_asd = symmetrize(Q2 @ S_asd.S @ Q2.T)
    white_nt = symmetrize(Q2 @ S_nt.S @ Q2.T)

    for name, matrix in (("ASD", white_asd), ("NT", white_nt)):
        first_row = float(np.max(np.abs(matrix[0, :])))
        if first_row >= FIRST_ROW_TOL:
            raise NumericalError(f"whitened {name} mean leaks into the null direction",
                                 {"first_row_residual": first_row})
        matrix[0, :] = 0.0
        matrix[:, 0] = 0.0

    block_values, block_vectors = _eigh(white_asd[1:, 1:], "whitened ASD mean")
    order = np.lexsort((np.arange(len(block_values)), -block_values))
    block_vectors = canonicalize_signs(block_vectors[:, order])

    T2 = scipy.linalg.block_diag(1.0, block_vectors)
    P = T2.T @ Q2

    diag_asd = T2.T @ white_asd @ T2
    diag_nt = T2.T @ white_nt @ T2

    for name, matrix in (("ASD", diag_asd), ("NT", diag_nt)):
        residual = offdiag_max(matrix)
        if residual >= OFFDIAG_TOL:
            raise NumericalError(f"{name} mean is not diagonal after the block transform "
                                 "(are the class means from the same training set?)",
                                 {"offdiag_residual": residual})

    lambda_asd = np.diag(diag_asd).copy()
    lambda_nt = np.diag(diag_nt).copy()

    complement = alpha_asd * lambda_asd[1:] + alpha_nt * lambda_nt[1:]
    gap = float(np.max(np.abs(complement - 1.0))) if r > 1 else 0.0
    if gap >= COMPLEMENTARITY_TOL:
        raise NumericalError("class eigenvalues are not complementary", {"max_gap": gap})

    return FktModel(P=P, lambda_asd=lambda_asd, lambda_nt=lambda_nt, alpha_asd=float(alpha_asd))


def fit_fkt(expectancies: Sequence[JointExpectancy], labels: Sequence[Label]) -> FktModel:
    """Class means, whitening and simultaneous diagonalization in one call"""
    if len(expectancies) != len(labels):
        raise DimensionMismatchError(f"{len(expectancies)} expectancies for {len(labels)} labels")
    means = class_means(list(zip(expectancies, labels)))
    whitening = whiten(means.S_bar)
    return simultaneous_diagonalize(whitening, means.S_asd, means.S_nt, means.alpha_asd)


def _top_dims(scores: np.ndarray, m: int) -> Tuple[int, ...]:
    dims = np.arange(1, len(scores) + 1)
    order = np.lexsort((dims, -scores))
    return tuple(int(d) for d in dims[order[:m]])


def dominant_dimensions(model: FktModel, m: int) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
    """
    The m most class-dominant non-null dimensions for each class

    Args:
        model: Fitted FktModel
        m: Dimensions per class, 1 <= m <= r - 1

    Returns:
        (dom_asd, dom_nt), each ordered by decreasing scaled eigenvalue
    """
    if not 1 <= int(m) <= model.r - 1:
        raise UsageError(f"m must be in [1, {model.r - 1}], got {m}")
    m = int(m)

    scores_asd = model.alpha_asd * model.lambda_asd[1:]
    scores_nt = model.alpha_nt * model.lambda_nt[1:]
    return _top_dims(scores_asd, m), _top_dims(scores_nt, m)
