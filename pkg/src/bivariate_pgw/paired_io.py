"""
Paired survival records and their CSV layouts.

Wide layout: one row per subject with columns id, t1, d1, t2, d2, covariates.
Long layout: one row per member with columns id, role, time, status,
covariates; role tells member 1 from member 2.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

import inflect
import numpy as np
import pandas as pd

from bivariate_pgw.errors import DomainError, InputError
from bivariate_pgw.models_schema import ColumnMap, CovariateColumn, Layout

logger = logging.getLogger(__name__)
_inflect = inflect.engine()

# Header is line 1, so data row i sits on line i + 2.
_FIRST_DATA_LINE = 2

RETINOPATHY_COLUMNS = ColumnMap(
    id="id",
    role="trt",
    time="futime",
    status="status",
    role_values={"1": 1, "0": 2},
    covariates=[CovariateColumn(source="type", name="D", levels={"juvenile": 0.0, "adult": 1.0})],
)


@dataclass(frozen=True)
class PairedRecord:
    """
    One subject: two possibly censored times.

    Attributes:
        id: Subject key.
        t1: Observed time of member 1 (treated eye in the retinopathy data).
        d1: 1 if the member-1 time is an event, 0 if censored.
        t2: Observed time of member 2.
        d2: Event flag of member 2.
        covariates: Subject-level covariates by name.
    """
    id: str
    t1: float
    d1: int
    t2: float
    d2: int
    covariates: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name in ("t1", "t2"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise DomainError(f"record {self.id!r}: {name} must be a finite time > 0, got {value!r}")
        for name in ("d1", "d2"):
            if getattr(self, name) not in (0, 1):
                raise DomainError(f"record {self.id!r}: {name} must be 0 or 1, got {getattr(self, name)!r}")
        for key, value in self.covariates.items():
            if not math.isfinite(value):
                raise DomainError(f"record {self.id!r}: covariate {key!r} is not finite ({value!r})")


@dataclass(frozen=True)
class PairedData:
    """Column-oriented view of a list of PairedRecord, as used by the likelihood."""
    ids: np.ndarray
    t1: np.ndarray
    d1: np.ndarray
    t2: np.ndarray
    d2: np.ndarray
    covariates: Dict[str, np.ndarray]

    @classmethod
    def from_records(cls, records: Sequence[PairedRecord]) -> "PairedData":
        if not records:
            raise DomainError("paired data needs at least one record")
        names = list(records[0].covariates)
        for record in records:
            if list(record.covariates) != names:
                raise DomainError(
                    f"record {record.id!r} has covariates {sorted(record.covariates)}, expected {sorted(names)}"
                )
        return cls(
            ids=np.array([r.id for r in records], dtype=object),
            t1=np.array([r.t1 for r in records], dtype=float),
            d1=np.array([r.d1 for r in records], dtype=int),
            t2=np.array([r.t2 for r in records], dtype=float),
            d2=np.array([r.d2 for r in records], dtype=int),
            covariates={name: np.array([r.covariates[name] for r in records], dtype=float) for name in names},
        )

    def __len__(self) -> int:
        return int(self.t1.size)

    def to_records(self) -> List[PairedRecord]:
        return [
            PairedRecord(
                id=str(self.ids[i]),
                t1=float(self.t1[i]),
                d1=int(self.d1[i]),
                t2=float(self.t2[i]),
                d2=int(self.d2[i]),
                covariates={name: float(values[i]) for name, values in self.covariates.items()},
            )
            for i in range(len(self))
        ]

    def rescaled(self, factor: float) -> "PairedData":
        """Same data with every time multiplied by `factor`."""
        return PairedData(
            ids=self.ids,
            t1=self.t1 * factor,
            d1=self.d1,
            t2=self.t2 * factor,
            d2=self.d2,
            covariates=self.covariates,
        )


# -----------------------------------------------------------------------------
# Loading
# -----------------------------------------------------------------------------

def _read_frame(path: Union[str, Path]) -> Optional[pd.DataFrame]:
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except FileNotFoundError as exc:
        raise InputError(f"no such file: {path}") from exc
    except pd.errors.EmptyDataError:
        return None
    except pd.errors.ParserError as exc:
        raise InputError(f"could not parse {path}: {exc}") from exc
    frame.columns = [column.strip() for column in frame.columns]
    return frame


def _require_columns(frame: pd.DataFrame, columns: Iterable[str], path: Union[str, Path]) -> None:
    missing = [column for column in columns if column not in frame.columns]
    if missing:
        raise InputError(f"{path}: missing required {_inflect.plural('column', len(missing))} {missing}", line=1)


def _numeric(frame: pd.DataFrame, column: str) -> np.ndarray:
    values = pd.to_numeric(frame[column].str.strip(), errors="coerce")
    bad = values.isna()
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise InputError(
            f"column {column!r} has non-numeric value {frame[column].iloc[row]!r}",
            line=row + _FIRST_DATA_LINE,
        )
    return values.to_numpy(dtype=float)


def _flags(frame: pd.DataFrame, column: str) -> np.ndarray:
    values = _numeric(frame, column)
    bad = ~np.isin(values, (0.0, 1.0))
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise InputError(f"column {column!r} must hold 0/1 flags, got {values[row]!r}", line=row + _FIRST_DATA_LINE)
    return values.astype(int)


def _covariate_columns(frame: pd.DataFrame, column_map: ColumnMap, reserved: Iterable[str]) -> List[CovariateColumn]:
    if column_map.covariates is not None:
        return column_map.covariates
    reserved = set(reserved)
    return [CovariateColumn(source=c, name=c) for c in frame.columns if c not in reserved]


def _covariate_values(frame: pd.DataFrame, spec: CovariateColumn) -> np.ndarray:
    if not spec.levels:
        return _numeric(frame, spec.source)
    raw = frame[spec.source].str.strip()
    mapped = raw.map(spec.levels)
    bad = mapped.isna()
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise InputError(
            f"column {spec.source!r} has unknown level {raw.iloc[row]!r}; expected one of {sorted(spec.levels)}",
            line=row + _FIRST_DATA_LINE,
        )
    return mapped.to_numpy(dtype=float)


def _record(
    line: int,
    subject: str,
    t1: float,
    d1: int,
    t2: float,
    d2: int,
    covariates: Dict[str, float],
) -> PairedRecord:
    try:
        return PairedRecord(id=subject, t1=t1, d1=d1, t2=t2, d2=d2, covariates=covariates)
    except DomainError as exc:
        raise InputError(str(exc), line=line) from exc


def _load_wide(frame: pd.DataFrame, column_map: ColumnMap, path: Union[str, Path]) -> List[PairedRecord]:
    required = [column_map.id, column_map.t1, column_map.d1, column_map.t2, column_map.d2]
    _require_columns(frame, required, path)
    covariate_specs = _covariate_columns(frame, column_map, required)
    _require_columns(frame, [spec.source for spec in covariate_specs], path)

    ids = frame[column_map.id].str.strip().to_numpy()
    duplicated = pd.Series(ids).duplicated().to_numpy()
    if duplicated.any():
        row = int(np.flatnonzero(duplicated)[0])
        raise InputError(f"duplicate subject id {ids[row]!r}", line=row + _FIRST_DATA_LINE)

    t1, d1 = _numeric(frame, column_map.t1), _flags(frame, column_map.d1)
    t2, d2 = _numeric(frame, column_map.t2), _flags(frame, column_map.d2)
    covariates = {spec.name: _covariate_values(frame, spec) for spec in covariate_specs}
    return [
        _record(
            i + _FIRST_DATA_LINE,
            str(ids[i]),
            float(t1[i]),
            int(d1[i]),
            float(t2[i]),
            int(d2[i]),
            {name: float(values[i]) for name, values in covariates.items()},
        )
        for i in range(len(frame))
    ]


def _load_long(frame: pd.DataFrame, column_map: ColumnMap, path: Union[str, Path]) -> List[PairedRecord]:
    required = [column_map.id, column_map.role, column_map.time, column_map.status]
    _require_columns(frame, required, path)
    covariate_specs = _covariate_columns(frame, column_map, required)
    _require_columns(frame, [spec.source for spec in covariate_specs], path)

    ids = frame[column_map.id].str.strip().to_numpy()
    raw_roles = frame[column_map.role].str.strip()
    roles = raw_roles.map(column_map.role_values)
    if roles.isna().any():
        row = int(np.flatnonzero(roles.isna().to_numpy())[0])
        raise InputError(
            f"unknown role {raw_roles.iloc[row]!r}; expected one of {sorted(column_map.role_values)}",
            line=row + _FIRST_DATA_LINE,
        )
    roles = roles.to_numpy(dtype=int)
    times = _numeric(frame, column_map.time)
    status = _flags(frame, column_map.status)
    covariates = {spec.name: _covariate_values(frame, spec) for spec in covariate_specs}

    rows_by_id: Dict[str, Dict[int, int]] = {}
    order: List[str] = []
    for row, (subject, role) in enumerate(zip(ids, roles)):
        members = rows_by_id.setdefault(subject, {})
        if not members:
            order.append(subject)
        if role in members:
            raise InputError(f"duplicate (id, role) = ({subject!r}, {role})", line=row + _FIRST_DATA_LINE)
        members[role] = row

    incomplete = [subject for subject in order if len(rows_by_id[subject]) != 2]
    if incomplete:
        raise InputError(
            f"{len(incomplete)} {_inflect.plural('subject', len(incomplete))} missing a member: {incomplete}"
        )

    records: List[PairedRecord] = []
    for subject in order:
        first, second = rows_by_id[subject][1], rows_by_id[subject][2]
        values: Dict[str, float] = {}
        for name, column in covariates.items():
            if column[first] != column[second]:
                raise InputError(
                    f"subject {subject!r}: covariate {name!r} differs between members",
                    line=second + _FIRST_DATA_LINE,
                )
            values[name] = float(column[first])
        records.append(
            _record(
                first + _FIRST_DATA_LINE,
                str(subject),
                float(times[first]),
                int(status[first]),
                float(times[second]),
                int(status[second]),
                values,
            )
        )
    return records


def load_paired_csv(
    path: Union[str, Path],
    layout: Layout = "wide",
    column_map: Optional[ColumnMap] = None,
) -> List[PairedRecord]:
    """
    Read paired survival data from a UTF-8 CSV file with a header row.

    Args:
        path: File to read.
        layout: "wide" (one row per subject) or "long" (one row per member).
        column_map: Column names and level mappings; defaults to the canonical
            headers.

    Returns:
        One PairedRecord per subject, in first-appearance order. An empty file
        gives an empty list.

    Raises:
        InputError: on missing columns, unparseable values, duplicate
            (id, role) pairs or subjects lacking a member; carries the line
            number when one applies.
    """
    column_map = column_map or ColumnMap()
    frame = _read_frame(path)
    if frame is None or frame.empty:
        logger.warning("No records found in %s", path)
        return []

    if layout == "wide":
        records = _load_wide(frame, column_map, path)
    elif layout == "long":
        records = _load_long(frame, column_map, path)
    else:
        raise InputError(f"unknown layout {layout!r}; expected 'wide' or 'long'")

    logger.info("Loaded %d paired %s from %s", len(records), _inflect.plural("record", len(records)), path)
    return records


def wide_frame(records: Sequence[PairedRecord]) -> pd.DataFrame:
    """Canonical wide table: id, t1, d1, t2, d2, covariates."""
    return pd.DataFrame(
        [
            {"id": r.id, "t1": r.t1, "d1": r.d1, "t2": r.t2, "d2": r.d2, **r.covariates}
            for r in records
        ],
        columns=["id", "t1", "d1", "t2", "d2", *(records[0].covariates if records else [])],
    )


def long_from_wide(records: Sequence[PairedRecord]) -> pd.DataFrame:
    """Canonical long table: id, role, time, status, covariates; two rows per subject."""
    rows = []
    for r in records:
        rows.append({"id": r.id, "role": 1, "time": r.t1, "status": r.d1, **r.covariates})
        rows.append({"id": r.id, "role": 2, "time": r.t2, "status": r.d2, **r.covariates})
    return pd.DataFrame(rows, columns=["id", "role", "time", "status", *(records[0].covariates if records else [])])
