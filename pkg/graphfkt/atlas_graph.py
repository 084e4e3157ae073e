"""
ROI atlases, anatomical graphs and their graph Fourier bases

An atlas gives one 3-D centroid per region of interest; the graph connects
regions with inverse-distance (or constant / random) weights and the
eigenvectors of its combinatorial Laplacian L = D - A form the GFT basis.
"""

import hashlib
import logging
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import cdist

from .config import ORTHONORMAL_TOL
from .errors import AtlasParseError, DataError, NumericalError, UsageError
from .utils import canonicalize_signs, format_float

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Roi:
    """One region of interest"""
    index: int
    name: str
    coord: Tuple[float, float, float]

    @property
    def label(self) -> str:
        """Name without its hemisphere suffix (``SFGdor.L`` -> ``SFGdor``)"""
        if self.hemisphere:
            return self.name[:-2]
        return self.name

    @property
    def hemisphere(self) -> Optional[str]:
        """``L`` / ``R`` when the name carries a hemisphere suffix"""
        if len(self.name) > 2 and self.name[-2] in "._" and self.name[-1] in "LR":
            return self.name[-1]
        return None


@dataclass(frozen=True)
class RoiAtlas:
    """
    Ordered set of ROIs; row i of every signal matrix is ROI index i + 1
    """
    rois: Tuple[Roi, ...]

    def __post_init__(self):
        if len(self.rois) < 2:
            raise DataError(f"atlas needs at least 2 ROIs, got {len(self.rois)}")

        for row, roi in enumerate(self.rois, 1):
            if roi.index != row:
                raise DataError(f"ROI indices must be contiguous 1..r in order; row {row} has index {roi.index}")
            if not all(math.isfinite(c) for c in roi.coord):
                raise DataError(f"ROI {roi.index} has a non-finite coordinate")

        seen = {}
        for roi in self.rois:
            if roi.coord in seen:
                raise DataError(f"zero distance between ROI {seen[roi.coord]} and {roi.index}")
            seen[roi.coord] = roi.index

    @property
    def r(self) -> int:
        return len(self.rois)

    @property
    def coords(self) -> np.ndarray:
        """r x 3 centroid matrix in millimetres"""
        return np.array([roi.coord for roi in self.rois], dtype=float)

    @property
    def names(self) -> List[str]:
        return [roi.name for roi in self.rois]

    def to_text(self) -> str:
        """Canonical atlas file text"""
        lines = [f"{roi.index} {roi.name} " + " ".join(format_float(c) for c in roi.coord)
                 for roi in self.rois]
        return "\n".join(lines) + "\n"

    def checksum(self) -> str:
        """SHA-256 of the canonical text, used to tie models to their atlas"""
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()


class GraphKind(str, Enum):
    KNN = "knn"
    WFC = "WFC"
    UC = "UC"
    RAND_WFC = "randWFC"
    IDENTITY = "identity"

    @classmethod
    def parse(cls, value: str) -> "GraphKind":
        for kind in cls:
            if kind.value.lower() == str(value).lower():
                return kind
        raise UsageError(f"unknown graph kind {value!r} (choose from knn, WFC, UC, randWFC)")


@dataclass(frozen=True)
class BrainGraph:
    """Symmetric, zero-diagonal, nonnegative weighted adjacency"""
    adjacency: np.ndarray = field(repr=False)
    kind: GraphKind
    k: Optional[int] = None
    seed: Optional[int] = None

    @property
    def r(self) -> int:
        return self.adjacency.shape[0]

    def describe(self) -> str:
        if self.kind is GraphKind.KNN:
            return f"knn(K={self.k})"
        if self.kind is GraphKind.RAND_WFC:
            return f"randWFC(seed={self.seed})"
        return self.kind.value

    def laplacian(self) -> np.ndarray:
        """Combinatorial Laplacian L = D - A"""
        return np.diag(self.adjacency.sum(axis=1)) - self.adjacency

    def connected_components(self) -> List[List[int]]:
        """Node index lists (0-based) of each connected component"""
        n_comp, labels = connected_components(self.adjacency > 0, directed=False)
        return [np.flatnonzero(labels == c).tolist() for c in range(n_comp)]

    def edge_count(self) -> int:
        return int(np.count_nonzero(np.triu(self.adjacency, 1)))


@dataclass(frozen=True)
class GftBasis:
    """
    Laplacian eigenvalues (ascending graph frequencies) and the matching
    orthonormal eigenvectors, one GFT mode per column
    """
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)
    kind: str

    @property
    def r(self) -> int:
        return self.eigenvectors.shape[0]


def load_atlas(path: Path) -> RoiAtlas:
    """
    Load an atlas file (``index name x y z`` per line, ``#`` comments)

    Args:
        path: Atlas file path

    Returns:
        RoiAtlas with rows in file order
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read atlas {path}: {e}") from e

    rois = []
    seen_index = {}
    seen_coord = {}

    for line_no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue

        parts = line.split()
        if len(parts) != 5:
            raise AtlasParseError(f"expected 'index name x y z', got {len(parts)} fields", line_no)

        try:
            index = int(parts[0])
        except ValueError:
            raise AtlasParseError(f"ROI index {parts[0]!r} is not an integer", line_no) from None

        try:
            coord = tuple(float(v) for v in parts[2:5])
        except ValueError:
            raise AtlasParseError(f"coordinates {parts[2:5]} are not numbers", line_no) from None

        if index in seen_index:
            raise AtlasParseError(f"duplicate ROI index {index}", line_no)
        if not all(math.isfinite(c) for c in coord):
            raise AtlasParseError(f"non-finite coordinate for ROI {index}", line_no)
        if coord in seen_coord:
            raise AtlasParseError(f"zero distance between ROI {seen_coord[coord]} and {index}", line_no)
        if index != len(rois) + 1:
            raise AtlasParseError(f"ROI index {index} out of order (expected {len(rois) + 1})", line_no)

        seen_index[index] = line_no
        seen_coord[coord] = index
        rois.append(Roi(index=index, name=parts[1], coord=coord))

    if len(rois) < 2:
        raise AtlasParseError(f"atlas {path} defines {len(rois)} ROI(s), need at least 2")

    logger.debug("Loaded atlas %s with %d ROIs", path, len(rois))
    return RoiAtlas(tuple(rois))


def _pairwise_distances(atlas: RoiAtlas) -> np.ndarray:
    dist = cdist(atlas.coords, atlas.coords)
    off = dist + np.eye(atlas.r)
    if np.any(off == 0):
        i, j = np.argwhere(off == 0)[0]
        raise DataError(f"zero distance between ROI {i + 1} and {j + 1}")
    return dist


def _mirror_upper(matrix: np.ndarray) -> np.ndarray:
    upper = np.triu(matrix, 1)
    return upper + upper.T


def build_graph(atlas: RoiAtlas, kind, K: Optional[int] = None, seed: Optional[int] = None) -> BrainGraph:
    """
    Build an anatomical graph over the atlas ROIs

    Args:
        atlas: ROI atlas
        kind: knn, WFC, UC or randWFC
        K: Neighbours kept per node (knn only)
        seed: Random weight seed (randWFC only)

    Returns:
        BrainGraph with an exactly symmetric adjacency
    """
    kind = kind if isinstance(kind, GraphKind) else GraphKind.parse(kind)
    r = atlas.r

    if kind is GraphKind.KNN:
        if K is None or not 1 <= int(K) <= r - 1:
            raise UsageError(f"K must be in [1, {r - 1}] for a knn graph, got {K}")
        K = int(K)
        dist = _pairwise_distances(atlas)
        directed = np.zeros((r, r))
        for u in range(r):
            order = np.argsort(dist[u], kind="stable")
            neighbours = [v for v in order if v != u][:K]
            directed[u, neighbours] = 1.0 / dist[u, neighbours]
        adjacency = (directed + directed.T) / 2.0
        np.fill_diagonal(adjacency, 0.0)
        graph = BrainGraph(adjacency, kind, k=K)

    elif kind is GraphKind.WFC:
        dist = _pairwise_distances(atlas)
        with np.errstate(divide="ignore"):
            weights = 1.0 / dist
        graph = BrainGraph(_mirror_upper(weights), kind)

    elif kind is GraphKind.UC:
        _pairwise_distances(atlas)
        graph = BrainGraph(_mirror_upper(np.ones((r, r))), kind)

    elif kind is GraphKind.RAND_WFC:
        if seed is None:
            raise UsageError("randWFC graphs need a seed")
        rng = np.random.default_rng(seed)
        graph = BrainGraph(_mirror_upper(rng.uniform(0.0, 1.0, size=(r, r))), kind, seed=int(seed))

    else:
        raise UsageError(f"cannot build a graph of kind {kind.value}")

    graph.adjacency.setflags(write=False)
    logger.debug("Built %s graph: %d nodes, %d edges", graph.describe(), r, graph.edge_count())
    return graph


def gft_basis(graph: BrainGraph) -> GftBasis:
    """
    Eigendecompose the graph Laplacian

    Args:
        graph: Brain graph

    Returns:
        GftBasis with ascending eigenvalues and sign-canonical eigenvectors
    """
    laplacian = graph.laplacian()

    try:
        eigenvalues, eigenvectors = scipy.linalg.eigh(laplacian)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError) as e:
        raise NumericalError(
            f"Laplacian eigendecomposition failed: {e}",
            {"condition": float(np.linalg.cond(laplacian)), "r": graph.r},
        ) from e

    order = np.argsort(eigenvalues, kind="stable")
    eigenvalues = eigenvalues[order]
    eigenvectors = eigenvectors[:, order]

    gram_error = np.max(np.abs(eigenvectors.T @ eigenvectors - np.eye(graph.r)))
    if gram_error >= ORTHONORMAL_TOL:
        q, rmat = scipy.linalg.qr(eigenvectors)
        eigenvectors = q * np.sign(np.diag(rmat))
        logger.debug("Re-orthonormalized GFT basis (gram error %.2e)", gram_error)

    n_components = len(graph.connected_components())
    if n_components > 1:
        logger.warning("%s graph has %d connected components; the zero eigenvalue is repeated",
                       graph.describe(), n_components)

    eigenvectors = canonicalize_signs(eigenvectors)
    eigenvalues.setflags(write=False)
    eigenvectors.setflags(write=False)
    return GftBasis(eigenvalues=eigenvalues, eigenvectors=eigenvectors, kind=graph.describe())


def identity_basis(r: int) -> GftBasis:
    """Identity 'basis': leaves time-series in the ROI domain (spatial filtering baseline)"""
    if r < 2:
        raise UsageError(f"identity basis needs r >= 2, got {r}")
    eigenvalues = np.zeros(r)
    eigenvectors = np.eye(r)
    eigenvalues.setflags(write=False)
    eigenvectors.setflags(write=False)
    return GftBasis(eigenvalues=eigenvalues, eigenvectors=eigenvectors, kind=GraphKind.IDENTITY.value)


_DESCRIPTOR_RE = re.compile(r"(\w+)(?:\((K|seed)=(-?\d+)\))?")


def parse_graph_descriptor(descriptor: str) -> Tuple[GraphKind, Optional[int], Optional[int]]:
    """
    Inverse of ``BrainGraph.describe`` (and of the ``identity`` basis kind)

    Args:
        descriptor: e.g. ``knn(K=2)``, ``WFC``, ``randWFC(seed=7)``, ``identity``

    Returns:
        (kind, K, seed)
    """
    match = _DESCRIPTOR_RE.fullmatch(str(descriptor).strip())
    if not match:
        raise DataError(f"unrecognised graph descriptor {descriptor!r}")
    try:
        kind = GraphKind.parse(match.group(1))
    except UsageError as e:
        raise DataError(str(e)) from None

    param, value = match.group(2), match.group(3)
    k = int(value) if param == "K" else None
    seed = int(value) if param == "seed" else None
    if (kind is GraphKind.KNN) != (k is not None) or (kind is GraphKind.RAND_WFC) != (seed is not None):
        raise DataError(f"graph descriptor {descriptor!r} has the wrong parameters for {kind.value}")
    return kind, k, seed


def basis_for_descriptor(atlas: RoiAtlas, descriptor: str) -> GftBasis:
    """Rebuild the basis a model was fitted on from its stored descriptor"""
    kind, k, seed = parse_graph_descriptor(descriptor)
    if kind is GraphKind.IDENTITY:
        return identity_basis(atlas.r)
    return gft_basis(build_graph(atlas, kind, K=k, seed=seed))
