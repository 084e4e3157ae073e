"""
Utility functions shared across the pipeline
"""

import os
import tempfile
from pathlib import Path
from typing import List

import numpy as np

# Entries this close (relative) to the column maximum count as tied for sign choice
SIGN_TIE_RTOL = 1e-9


def canonicalize_signs(vectors: np.ndarray) -> np.ndarray:
    """
    Flip each column so its largest-magnitude entry is positive

    Near-ties in magnitude are resolved towards the first such entry,
    so the choice does not depend on rounding noise.

    Args:
        vectors: Matrix whose columns are eigenvectors

    Returns:
        New matrix with canonical column signs
    """
    out = np.array(vectors, dtype=float, copy=True)
    for j in range(out.shape[1]):
        col = out[:, j]
        mags = np.abs(col)
        peak = mags.max()
        if peak == 0.0:
            continue
        pivot = int(np.flatnonzero(mags >= peak * (1.0 - SIGN_TIE_RTOL))[0])
        if col[pivot] < 0:
            out[:, j] = -col
    return out


def offdiag_max(matrix: np.ndarray) -> float:
    """Largest absolute off-diagonal entry"""
    off = matrix - np.diag(np.diag(matrix))
    return float(np.max(np.abs(off))) if off.size else 0.0


def symmetrize(matrix: np.ndarray) -> np.ndarray:
    """Exactly symmetric copy, (M + M^T) / 2"""
    return (matrix + matrix.T) / 2.0


def derive_seeds(seed: int, count: int) -> List[int]:
    """
    Derive independent per-task seeds from a master seed

    Args:
        seed: Master seed
        count: Number of seeds needed

    Returns:
        List of 32-bit integer seeds, stable for a given (seed, count)
    """
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(child.generate_state(1)[0]) for child in children]


def format_float(value: float) -> str:
    """Decimal text with 17 significant digits (bit-exact on re-parse)"""
    return f"{float(value):.17g}"


def format_duration(seconds: float) -> str:
    """Wall time of a run: ``0.42s`` below ten seconds, else ``42s``, ``2m 15s``, ``2h 15m 30s``"""
    if seconds < 10:
        return f"{seconds:.2f}s"
    minutes, secs = divmod(int(round(seconds)), 60)
    hours, minutes = divmod(minutes, 60)
    parts = [f"{hours}h"] if hours else []
    if hours or minutes:
        parts.append(f"{minutes}m")
    parts.append(f"{secs}s")
    return " ".join(parts)


def atomic_write_text(path: Path, text: str):
    """
    Write text through a temporary file in the same directory, then rename

    Args:
        path: Destination file
        text: Full file contents
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
