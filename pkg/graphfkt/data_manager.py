"""
Data manager for storing and retrieving pipeline artefacts
Handles atomic JSON/text file I/O, cohorts, subject time-series and synthetic datasets
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from io import StringIO
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from .atlas_graph import BrainGraph, GftBasis, RoiAtlas, load_atlas
from .config import DATA_DIR, DEFAULT_WORKERS, JSON_FORMAT_VERSION
from .errors import DataError, DimensionMismatchError
from .fkt import FktModel
from .harness import TSV_COLUMNS, EvalReport
from .mode_report import ModeReport
from .phenotypes import PhenotypeRecord
from .spectra import Label, SubjectRecord
from .tree import DecisionTree
from .utils import atomic_write_text, format_float

logger = logging.getLogger(__name__)

TIMESERIES_SUFFIXES = (".txt", ".1D", ".csv")


def _json_default(value: Any):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def load_timeseries(path: Path, r: int, subject_id: Optional[str] = None) -> np.ndarray:
    """
    Read a T x r time-series text file (``#`` header lines allowed)

    Args:
        path: File with one time-point per line, one column per ROI
        r: Expected number of ROIs
        subject_id: Name used in error messages

    Returns:
        r x T signal matrix
    """
    name = subject_id or Path(path).stem
    try:
        delimiter = "," if Path(path).suffix == ".csv" else None
        values = np.loadtxt(path, comments="#", delimiter=delimiter, ndmin=2)
    except (OSError, ValueError) as e:
        raise DataError(f"subject {name}: cannot read time-series {path}: {e}") from e
    if values.shape[1] != r:
        raise DimensionMismatchError(f"subject {name}: time-series has {values.shape[1]} ROI columns, atlas has {r}")
    return values.T.copy()


class DataManager:
    """
    Manages artefact storage and retrieval
    """

    def __init__(self, root: Optional[Path] = None):
        self.root = Path(root) if root is not None else DATA_DIR
        self.models_dir = self.root / "models"
        self.reports_dir = self.root / "reports"
        self.cohorts_dir = self.root / "cohorts"
        self.graphs_dir = self.root / "graphs"
        self.synth_dir = self.root / "synthetic"

    # Models and trees

    def save_model(self, model: FktModel, path: Path):
        """Save a fitted FKT model"""
        self._save_json(path, model.to_dict())

    def load_model(self, path: Path) -> FktModel:
        return FktModel.from_dict(self._require_json(path))

    def save_tree(self, tree: DecisionTree, path: Path):
        self._save_json(path, tree.to_dict())

    def load_tree(self, path: Path) -> DecisionTree:
        return DecisionTree.from_dict(self._require_json(path))

    # Graph dumps

    def save_graph(self, graph: BrainGraph, basis: GftBasis, atlas: RoiAtlas, path: Path):
        """Save adjacency, Laplacian spectrum and GFT basis of a graph"""
        self._save_json(path, {
            "format_version": JSON_FORMAT_VERSION,
            "kind": "graph_basis",
            "graph": graph.describe(),
            "r": graph.r,
            "atlas_checksum": atlas.checksum(),
            "roi_names": atlas.names,
            "connected_components": len(graph.connected_components()),
            "adjacency": graph.adjacency,
            "eigenvalues": basis.eigenvalues,
            "eigenvectors": basis.eigenvectors,
        })

    # Reports

    def save_reports(self, reports: Sequence[EvalReport], json_path: Path, tsv_path: Optional[Path] = None):
        """
        Save evaluation reports as JSON and, optionally, as a TSV summary

        Args:
            reports: One report per method
            json_path: JSON output path
            tsv_path: Tab-separated summary path
        """
        document = {
            "format_version": JSON_FORMAT_VERSION,
            "kind": "eval_reports",
            "reports": [report.to_dict() for report in reports],
        }
        self._save_json(json_path, document)
        if tsv_path is not None:
            lines = ["\t".join(TSV_COLUMNS)] + ["\t".join(report.to_tsv_row()) for report in reports]
            self._save_text(tsv_path, "\n".join(lines) + "\n")

    def load_reports(self, path: Path) -> List[EvalReport]:
        data = self._require_json(path)
        if data.get("kind") != "eval_reports":
            raise DataError(f"{path} is not a report document")
        return [EvalReport.from_dict(r) for r in data["reports"]]

    def save_mode_report(self, report: ModeReport, json_path: Path, tsv_path: Optional[Path] = None):
        document = {"format_version": JSON_FORMAT_VERSION, **report.to_dict()}
        self._save_json(json_path, document)
        if tsv_path is not None:
            self._save_text(tsv_path, report.to_tsv())

    # Cohorts

    def save_cohort(self, records: Sequence[PhenotypeRecord], ids: Sequence[str], path: Path):
        """Save the selected subjects (id, diagnosis) in selection order"""
        by_id = {record.subject_id: record for record in records}
        frame = pd.DataFrame({
            "subject_id": list(ids),
            "diagnosis": [by_id[i].diagnosis.value for i in ids],
        })
        buffer = StringIO()
        frame.to_csv(buffer, index=False, lineterminator="\n")
        self._save_text(path, buffer.getvalue())

    def load_cohort(self, path: Path) -> List[Tuple[str, Label]]:
        try:
            frame = pd.read_csv(path, dtype=str)
        except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise DataError(f"cannot read cohort {path}: {e}") from e
        for column in ("subject_id", "diagnosis"):
            if column not in frame.columns:
                raise DataError(f"cohort {path} has no {column!r} column")
        return [(str(sid).strip(), Label.parse(dx)) for sid, dx in zip(frame["subject_id"], frame["diagnosis"])]

    # Subject time-series

    def find_timeseries(self, directory: Path, subject_id: str) -> Path:
        directory = Path(directory)
        for suffix in TIMESERIES_SUFFIXES:
            candidate = directory / f"{subject_id}{suffix}"
            if candidate.exists():
                return candidate
        raise DataError(f"subject {subject_id}: no time-series file in {directory}")

    def load_dataset(self, cohort: Sequence[Tuple[str, Label]], directory: Path, r: int,
                     workers: int = DEFAULT_WORKERS) -> List[SubjectRecord]:
        """
        Load every cohort subject's time-series in parallel

        Args:
            cohort: (subject id, label) pairs
            directory: Directory of ``<subject_id>.txt`` (or .1D/.csv) files
            r: Number of atlas ROIs
            workers: Loader threads

        Returns:
            Subjects in cohort order
        """
        def _load(entry):
            subject_id, label = entry
            path = self.find_timeseries(directory, subject_id)
            return SubjectRecord(id=subject_id, label=label, X=load_timeseries(path, r, subject_id))

        with ThreadPoolExecutor(max_workers=workers) as executor:
            subjects = list(tqdm(executor.map(_load, cohort), total=len(cohort),
                                 desc="Loading time-series", disable=None, leave=False))

        logger.info("Loaded %d subjects from %s", len(subjects), directory)
        return subjects

    # Synthetic datasets

    def save_synthetic_dataset(self, subjects: Sequence[SubjectRecord], atlas: RoiAtlas, directory: Path):
        """
        Write a dataset directory: atlas.txt, cohort.csv, timeseries/<id>.txt
        """
        directory = Path(directory)
        self._save_text(directory / "atlas.txt", atlas.to_text())

        lines = ["subject_id,diagnosis"] + [f"{s.id},{s.label.value}" for s in subjects]
        self._save_text(directory / "cohort.csv", "\n".join(lines) + "\n")

        for subject in subjects:
            rows = [" ".join(format_float(v) for v in column) for column in subject.X.T]
            header = f"# {subject.T} time-points x {subject.r} ROIs\n"
            self._save_text(directory / "timeseries" / f"{subject.id}.txt", header + "\n".join(rows) + "\n")

        logger.info("Wrote %d synthetic subjects to %s", len(subjects), directory)

    def load_synthetic_dataset(self, directory: Path, workers: int = DEFAULT_WORKERS) -> Tuple[RoiAtlas, List[SubjectRecord]]:
        directory = Path(directory)
        atlas = load_atlas(directory / "atlas.txt")
        cohort = self.load_cohort(directory / "cohort.csv")
        return atlas, self.load_dataset(cohort, directory / "timeseries", atlas.r, workers)

    # Low-level helpers

    def _save_text(self, filepath: Path, text: str):
        try:
            atomic_write_text(Path(filepath), text)
        except OSError as e:
            raise DataError(f"cannot write {filepath}: {e}") from e

    def _save_json(self, filepath: Path, data: Any):
        """Save data as JSON"""
        text = json.dumps(data, indent=2, ensure_ascii=False, default=_json_default)
        self._save_text(filepath, text + "\n")

    def _load_json(self, filepath: Path) -> Optional[Dict]:
        """Load JSON data, None when the file does not exist"""
        filepath = Path(filepath)
        if not filepath.exists():
            return None
        try:
            with open(filepath, "r", encoding="utf-8") as f:
                return json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise DataError(f"cannot load {filepath}: {e}") from e

    def _require_json(self, filepath: Path) -> Dict:
        data = self._load_json(filepath)
        if data is None:
            raise DataError(f"{filepath} does not exist")
        return data
