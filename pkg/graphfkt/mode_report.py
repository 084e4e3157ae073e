"""
Which GFT modes drive the discriminative projections, and node files for
plotting a mode on the atlas
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .atlas_graph import GftBasis, RoiAtlas
from .config import FLAG_MULTIPLIER
from .errors import DataError, DimensionMismatchError, UsageError
from .fkt import FktModel
from .utils import atomic_write_text, format_float

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModeRow:
    """|P| weights of one projection row over the GFT modes"""
    name: str
    dimension: int
    weights: np.ndarray = field(repr=False)
    flagged: Tuple[bool, ...] = ()

    @property
    def flagged_modes(self) -> List[int]:
        """1-based GFT modes whose weight deviates from the row mean"""
        return [k + 1 for k, flag in enumerate(self.flagged) if flag]

    def top_modes(self, n: int) -> List[Tuple[int, float]]:
        """The n largest weights as (1-based mode, weight), ties to the lower mode"""
        order = np.lexsort((np.arange(len(self.weights)), -self.weights))
        return [(int(k) + 1, float(self.weights[k])) for k in order[:n]]


@dataclass(frozen=True)
class ModeReport:
    rows: Tuple[ModeRow, ...]
    multiplier: float = FLAG_MULTIPLIER

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": "mode_report",
            "multiplier": self.multiplier,
            "rows": [
                {
                    "name": row.name,
                    "dimension": row.dimension,
                    "modes": [
                        {"gftMode": k + 1, "weight": float(w), "flagged": bool(f)}
                        for k, (w, f) in enumerate(zip(row.weights, row.flagged))
                    ],
                }
                for row in self.rows
            ],
        }

    def to_tsv(self) -> str:
        lines = ["row\tdimension\tgft_mode\tweight\tflagged"]
        for row in self.rows:
            for k, (w, f) in enumerate(zip(row.weights, row.flagged)):
                lines.append(f"{row.name}\t{row.dimension}\t{k + 1}\t{format_float(w)}\t{int(f)}")
        return "\n".join(lines) + "\n"


def flag_outliers(weights: np.ndarray, multiplier: float = FLAG_MULTIPLIER) -> Tuple[bool, ...]:
    """|w - mean| > multiplier * population std; a constant row flags nothing"""
    weights = np.asarray(weights, dtype=float)
    std = float(weights.std())
    if std == 0.0:
        return tuple(False for _ in weights)
    return tuple(bool(f) for f in np.abs(weights - weights.mean()) > multiplier * std)


def export_mode_report(model: FktModel, dims: Optional[Sequence[int]] = None,
                       multiplier: float = FLAG_MULTIPLIER) -> ModeReport:
    """
    Per-row mode weights of the projection matrix

    Args:
        model: Fitted FktModel
        dims: 0-based projection rows; defaults to the model's dominant dimensions
        multiplier: Flag threshold in standard deviations

    Returns:
        ModeReport
    """
    if multiplier <= 0:
        raise UsageError(f"flag multiplier must be positive, got {multiplier}")

    if dims is None:
        if not model.dom_asd and not model.dom_nt:
            raise UsageError("model has no dominant dimensions selected; pass dims or choose m")
        named = [(f"ASD_dom{i}", d) for i, d in enumerate(model.dom_asd, 1)]
        named += [(f"NT_dom{i}", d) for i, d in enumerate(model.dom_nt, 1)]
    else:
        named = [(f"dim{d}", d) for d in dims]

    rows = []
    for name, dim in named:
        if not 0 <= dim < model.r:
            raise UsageError(f"projection row {dim} outside 0..{model.r - 1}")
        weights = np.abs(model.P[dim])
        rows.append(ModeRow(name=name, dimension=int(dim), weights=weights,
                            flagged=flag_outliers(weights, multiplier)))

    return ModeReport(rows=tuple(rows), multiplier=float(multiplier))


def node_file_text(atlas: RoiAtlas, basis: GftBasis, mode: int) -> str:
    """``x y z intensity size label`` per ROI for a 1-based GFT mode"""
    if atlas.r != basis.r:
        raise DimensionMismatchError(f"atlas has {atlas.r} ROIs, basis has {basis.r} modes")
    if not 1 <= mode <= basis.r:
        raise UsageError(f"mode must be in [1, {basis.r}], got {mode}")

    intensities = basis.eigenvectors[:, mode - 1]
    lines = []
    for roi, value in zip(atlas.rois, intensities):
        x, y, z = (format_float(c) for c in roi.coord)
        lines.append(f"{x} {y} {z} {format_float(value)} {format_float(abs(value))} {roi.name}")
    return "\n".join(lines) + "\n"


def export_node_file(atlas: RoiAtlas, basis: GftBasis, mode: int, path: Path) -> Path:
    """
    Write a node file for plotting one GFT mode over the atlas

    Args:
        atlas: ROI atlas
        basis: GFT basis built on that atlas
        mode: 1-based mode index
        path: Output file

    Returns:
        The written path
    """
    text = node_file_text(atlas, basis, mode)
    try:
        atomic_write_text(Path(path), text)
    except OSError as e:
        raise DataError(f"cannot write node file {path}: {e}") from e
    logger.debug("Wrote node file for mode %d to %s", mode, path)
    return Path(path)
