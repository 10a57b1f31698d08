"""CSV ingestion with optional log-return transform of price columns."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from .core import CovariatePanel
from .errors import FileNotFound, MissingColumn, NonNumericCell, NonPositivePrice

DATE_COLUMN = "date"


@dataclass(frozen=True, eq=False)
class IngestedDataset:
    """Aligned returns and covariates read from CSV.

    ``transform_log`` maps each used column to whether it was converted from
    prices to log returns; ``dropped_rows`` counts rows removed for missing
    values.
    """

    dates: Optional[tuple]
    returns: np.ndarray
    covariates: CovariatePanel
    transform_log: dict = field(default_factory=dict)
    dropped_rows: int = 0


def file_digest(*paths) -> str:
    """SHA-256 over the raw bytes of the given files, in order."""
    h = hashlib.sha256()
    for p in paths:
        h.update(Path(p).read_bytes())
    return h.hexdigest()


def read_columns(path, columns: Optional[Sequence[str]] = None, date_column: Optional[str] = DATE_COLUMN):
    """Read numeric columns (and the date column if present) from a CSV file.

    Returns ``(dates, frame, dropped)`` where ``frame`` holds float columns,
    rows with a missing value in any used column are removed and ``dropped``
    counts them.  Floats are parsed with correct rounding.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFound(f"no such file: {path}")
    raw = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    has_date = date_column is not None and date_column in raw.columns
    if columns is None:
        columns = [c for c in raw.columns if not (has_date and c == date_column)]
    for name in columns:
        if name not in raw.columns:
            raise MissingColumn(name)
    text = raw[list(columns)].apply(lambda s: s.str.strip())
    missing = text.eq("") | text.apply(lambda s: s.str.upper().isin(["NA", "NAN", "NULL"]))
    values = {}
    for name in columns:
        num = text[name].where(~missing[name]).map(_parse_float)
        bad = num.isna() & ~missing[name]
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0])
            # +2: one for the header, one for 1-based line numbers
            raise NonNumericCell(row + 2, name)
        values[name] = num
    frame = pd.DataFrame(values)
    keep = ~missing.any(axis=1).to_numpy()
    dates = tuple(raw[date_column][keep]) if has_date else None
    frame = frame[keep].reset_index(drop=True).astype(float)
    if dates is not None:
        _check_increasing(dates)
    return dates, frame, int((~keep).sum())


def _parse_float(cell) -> float:
    # Python's float() is correctly rounded, unlike pandas' fast C parser
    if not isinstance(cell, str):
        return np.nan
    try:
        v = float(cell)
    except ValueError:
        return np.nan
    return v if np.isfinite(v) else np.nan


def _check_increasing(dates) -> None:
    if len(dates) < 2:
        return
    key = pd.to_numeric(pd.Series(dates), errors="coerce")
    if key.isna().any():
        key = pd.to_datetime(pd.Series(dates), errors="raise")
    if not key.is_monotonic_increasing or key.duplicated().any():
        raise ValueError("date column must be strictly increasing")


def log_returns(prices) -> np.ndarray:
    """``log(P_t) - log(P_{t-1})``; one observation shorter than ``prices``."""
    p = np.asarray(prices, dtype=float)
    if np.any(p <= 0):
        raise NonPositivePrice(f"{int(np.sum(p <= 0))} non-positive price(s); log undefined")
    return np.diff(np.log(p))


def ingest_csv(
    path,
    value_column: Optional[str] = None,
    covariate_columns: Optional[Sequence[str]] = None,
    price_columns_to_log_return: Sequence[str] = (),
    date_column: Optional[str] = DATE_COLUMN,
) -> IngestedDataset:
    """Load a single file holding the series and its covariates.

    ``value_column`` defaults to the first non-date column and the covariates
    to every remaining column.  When any column is log-transformed every
    column loses its first row, so the series and covariates stay aligned.
    """
    dates, frame, dropped = read_columns(path, None, date_column)
    names = list(frame.columns)
    value_column = value_column or names[0]
    if value_column not in names:
        raise MissingColumn(value_column)
    if covariate_columns is None:
        covariate_columns = [c for c in names if c != value_column]
    for name in list(covariate_columns) + list(price_columns_to_log_return):
        if name not in names:
            raise MissingColumn(name)
    used = [value_column] + list(covariate_columns)
    flags = {c: c in set(price_columns_to_log_return) for c in used}
    cols = {}
    shift = 1 if any(flags.values()) else 0
    for c in used:
        x = frame[c].to_numpy()
        cols[c] = log_returns(x) if flags[c] else x[shift:]
    if dates is not None:
        dates = dates[shift:]
    return IngestedDataset(
        dates=dates,
        returns=cols[value_column],
        covariates=CovariatePanel(np.column_stack([cols[c] for c in covariate_columns]), covariate_columns),
        transform_log=flags,
        dropped_rows=dropped,
    )


def load_series_and_covariates(series_path, covariates_path, value_column: Optional[str] = None, date_column=DATE_COLUMN):
    """Read the two-file layout (``date,value`` plus ``date,X1..Xd``).

    When both files carry dates they must match row for row.
    """
    s_dates, s_frame, _ = read_columns(series_path, None, date_column)
    value_column = value_column or s_frame.columns[0]
    if value_column not in s_frame.columns:
        raise MissingColumn(value_column)
    c_dates, c_frame, _ = read_columns(covariates_path, None, date_column)
    if s_dates is not None and c_dates is not None and s_dates != c_dates:
        raise ValueError("series and covariate files have different dates")
    return s_frame[value_column].to_numpy(), CovariatePanel(c_frame.to_numpy(), tuple(c_frame.columns))


def write_frame(path, frame: pd.DataFrame) -> None:
    """Write a CSV with shortest round-trip float text, so a re-read is exact."""
    out = frame.copy()
    for c in out.columns:
        if pd.api.types.is_float_dtype(out[c]):
            out[c] = [repr(float(v)) for v in out[c]]
    out.to_csv(path, index=False)
