"""
Phenotype table loading and cohort inclusion criteria
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import pandas as pd

from .config import ABIDE_COLUMNS, DIAGNOSIS_CODES, EYES_OPEN_CODES
from .errors import DataError
from .spectra import Label

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PhenotypeRecord:
    """
    One row of the phenotype table

    Fields the table leaves empty (or marks with a negative code) are None.
    """
    subject_id: str
    diagnosis: Label
    age_years: Optional[float] = None
    eyes_open: Optional[bool] = None
    mean_fd: Optional[float] = None
    site: Optional[str] = None


@dataclass(frozen=True)
class FilterCriteria:
    """Inclusion criteria; None disables a test. Age and FD bounds are strict."""
    eyes_open: Optional[bool] = True
    max_age: Optional[float] = 18.0
    min_age: Optional[float] = None
    max_fd: Optional[float] = 0.2

    @classmethod
    def adolescent(cls) -> "FilterCriteria":
        return cls(eyes_open=True, max_age=18.0, max_fd=0.2)

    @classmethod
    def adult(cls) -> "FilterCriteria":
        return cls(eyes_open=True, max_age=None, min_age=18.0, max_fd=0.2)


def _cell(row: pd.Series, column: str) -> Optional[str]:
    if column not in row.index:
        return None
    value = row[column]
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return None
    text = str(value).strip()
    return text or None


def _number(text: Optional[str]) -> Optional[float]:
    if text is None:
        return None
    try:
        value = float(text)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def _code(text: Optional[str]) -> Optional[int]:
    value = _number(text)
    return int(value) if value is not None and value == int(value) else None


def _diagnosis(text: Optional[str]) -> Optional[Label]:
    if text is None:
        return None
    code = _code(text)
    if code is not None:
        name = DIAGNOSIS_CODES.get(code)
        return Label(name) if name else None
    try:
        return Label.parse(text)
    except DataError:
        return None


def load_phenotypes(path: Path, columns: Optional[Dict[str, str]] = None) -> List[PhenotypeRecord]:
    """
    Read a header-bearing CSV phenotype table

    Rows without a subject id or a usable diagnosis are skipped with a
    warning. Negative ages or displacements (missing-value codes) and
    unknown eye-status codes become None.

    Args:
        path: CSV file
        columns: Field -> column name map, defaults to the ABIDE names

    Returns:
        Records in file order
    """
    columns = {**ABIDE_COLUMNS, **(columns or {})}
    try:
        table = pd.read_csv(path, dtype=str, keep_default_na=True)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DataError(f"cannot read phenotype table {path}: {e}") from e

    for field_name in ("subject_id", "diagnosis"):
        if columns[field_name] not in table.columns:
            raise DataError(f"phenotype table {path} has no {columns[field_name]!r} column")

    records = []
    for row_no, (_, row) in enumerate(table.iterrows(), 2):
        subject_id = _cell(row, columns["subject_id"])
        diagnosis = _diagnosis(_cell(row, columns["diagnosis"]))
        if subject_id is None or diagnosis is None:
            logger.warning("Row %d: missing subject id or diagnosis, record skipped", row_no)
            continue

        age = _number(_cell(row, columns["age"]))
        if age is not None and age <= 0:
            age = None
        mean_fd = _number(_cell(row, columns["mean_fd"]))
        if mean_fd is not None and mean_fd < 0:
            mean_fd = None
        eyes = _code(_cell(row, columns["eyes"]))

        records.append(PhenotypeRecord(
            subject_id=subject_id,
            diagnosis=diagnosis,
            age_years=age,
            eyes_open=EYES_OPEN_CODES.get(eyes) if eyes is not None else None,
            mean_fd=mean_fd,
            site=_cell(row, columns["site"]),
        ))

    logger.info("Loaded %d phenotype records from %s", len(records), path)
    return records


def _missing_fields(record: PhenotypeRecord, criteria: FilterCriteria) -> List[str]:
    """Fields an enabled criterion needs but the record lacks"""
    missing = []
    if criteria.eyes_open is not None and record.eyes_open is None:
        missing.append("eye status")
    if (criteria.max_age is not None or criteria.min_age is not None) and record.age_years is None:
        missing.append("age")
    if criteria.max_fd is not None and record.mean_fd is None:
        missing.append("mean FD")
    return missing


def _passes(record: PhenotypeRecord, criteria: FilterCriteria) -> bool:
    if criteria.eyes_open is not None and record.eyes_open != criteria.eyes_open:
        return False
    if criteria.max_age is not None and not record.age_years < criteria.max_age:
        return False
    if criteria.min_age is not None and not record.age_years > criteria.min_age:
        return False
    if criteria.max_fd is not None and not record.mean_fd < criteria.max_fd:
        return False
    return True


def filter_subjects(records: Sequence[PhenotypeRecord], criteria: FilterCriteria) -> List[str]:
    """
    Ids of the records meeting every criterion, in input order

    Records missing a field a criterion needs are excluded with a warning,
    whether or not another criterion already rules them out.
    """
    selected = []
    for record in records:
        missing = _missing_fields(record, criteria)
        if missing:
            logger.warning("Subject %s: missing %s, excluded", record.subject_id, ", ".join(missing))
        elif _passes(record, criteria):
            selected.append(record.subject_id)
    return selected


def cohort_summary(records: Sequence[PhenotypeRecord], ids: Sequence[str]) -> Dict[str, int]:
    """Class counts of a selected cohort"""
    chosen = set(ids)
    counts = {Label.ASD.value: 0, Label.NT.value: 0}
    for record in records:
        if record.subject_id in chosen:
            counts[record.diagnosis.value] += 1
    return counts
