"""Date-aligned panel data model, CSV ingestion, alignment and uniform lagging.

A :class:`Panel` is an immutable date x column matrix of floats where ``NaN``
marks a missing cell. Columns carry a :class:`ColumnMeta` with a role from a
closed vocabulary so that downstream stages can select, e.g., every
``vol_proxy`` column without parsing names.

Column naming follows ``<ASSET>_<field>`` for per-asset data.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .errors import (
    ColumnLookupError,
    EmptyInputError,
    IntegrityError,
    ParameterError,
    SchemaError,
)

logger = logging.getLogger(__name__)

ROLES = frozenset(
    {
        "price",
        "high",
        "low",
        "volume",
        "market_cap",
        "return",
        "liquidity",
        "turnover",
        "vol_proxy",
        "resid_vol",
        "pc",
        "target",
        "feature",
        "label",
    }
)

# CSV field -> role for the per-asset input schema
CSV_FIELDS = {
    "open": "price",
    "high": "high",
    "low": "low",
    "close": "price",
    "volume": "volume",
    "market_cap": "market_cap",
}

FLOAT_FORMAT = "%.17g"


@dataclass(frozen=True)
class ColumnMeta:
    name: str
    role: str = "feature"
    asset: str | None = None

    def __post_init__(self):
        if self.role not in ROLES:
            raise ParameterError(f"unknown column role {self.role!r} for {self.name!r}")
        if not self.name:
            raise ParameterError("column name must be non-empty")


def _as_dates(dates) -> np.ndarray:
    out = np.asarray(dates, dtype="datetime64[D]")
    if out.ndim != 1:
        raise IntegrityError("dates must be one-dimensional")
    return out


class Panel:
    """Immutable date-indexed table with role-tagged columns."""

    __slots__ = ("_dates", "_columns", "_values", "_index")

    def __init__(self, dates, columns: Sequence[ColumnMeta], values):
        dates = _as_dates(dates)
        columns = tuple(columns)
        values = np.array(values, dtype=np.float64, copy=True)
        if values.ndim == 1 and len(columns) == 1:
            values = values.reshape(-1, 1)
        if values.size == 0:
            values = values.reshape(len(dates), len(columns))
        if values.shape != (len(dates), len(columns)):
            raise IntegrityError(
                f"values shape {values.shape} does not match "
                f"{len(dates)} dates x {len(columns)} columns"
            )
        if len(dates) > 1 and not np.all(dates[1:] > dates[:-1]):
            raise IntegrityError("dates must be strictly increasing without duplicates")
        names = [c.name for c in columns]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise IntegrityError(f"duplicate column names: {dup}")
        dates.setflags(write=False)
        values.setflags(write=False)
        self._dates = dates
        self._columns = columns
        self._values = values
        self._index = {n: i for i, n in enumerate(names)}

    @property
    def dates(self) -> np.ndarray:
        return self._dates

    @property
    def columns(self) -> tuple[ColumnMeta, ...]:
        return self._columns

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def names(self) -> list[str]:
        return [c.name for c in self._columns]

    @property
    def shape(self) -> tuple[int, int]:
        return self._values.shape

    def __len__(self) -> int:
        return len(self._dates)

    def __contains__(self, name) -> bool:
        return name in self._index

    def __repr__(self) -> str:
        if len(self):
            span = f"{self._dates[0]}..{self._dates[-1]}"
        else:
            span = "empty"
        return f"Panel({len(self)} dates [{span}], {len(self._columns)} columns)"

    def index_of(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise ColumnLookupError(f"unknown column {name!r}") from None

    def meta(self, name: str) -> ColumnMeta:
        return self._columns[self.index_of(name)]

    def column(self, name: str) -> np.ndarray:
        return self._values[:, self.index_of(name)]

    def matrix(self, names: Sequence[str]) -> np.ndarray:
        return self._values[:, [self.index_of(n) for n in names]]

    def names_by_role(self, role: str, asset: str | None = None) -> list[str]:
        return [
            c.name
            for c in self._columns
            if c.role == role and (asset is None or c.asset == asset)
        ]

    @property
    def assets(self) -> list[str]:
        seen = []
        for c in self._columns:
            if c.asset is not None and c.asset not in seen:
                seen.append(c.asset)
        return seen

    def select(self, names: Sequence[str]) -> "Panel":
        idx = [self.index_of(n) for n in names]
        return Panel(self._dates, [self._columns[i] for i in idx], self._values[:, idx])

    def with_columns(self, metas: Sequence[ColumnMeta], values) -> "Panel":
        """Return a new panel with ``metas`` appended (values are T x k)."""
        values = np.asarray(values, dtype=np.float64)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        if values.shape[0] != len(self):
            raise IntegrityError("appended values must have one row per date")
        return Panel(
            self._dates,
            self._columns + tuple(metas),
            np.hstack([self._values, values]) if self._columns else values,
        )

    def slice_rows(self, start: int, stop: int) -> "Panel":
        return Panel(self._dates[start:stop], self._columns, self._values[start:stop])

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(
            np.array(self._values), columns=self.names, index=pd.DatetimeIndex(self._dates)
        )
        frame.index.name = "date"
        return frame

    def to_csv(self, path, with_meta: bool = True) -> None:
        """Write the panel (and a ``<stem>_columns.csv`` metadata sidecar)."""
        path = Path(path)
        frame = self.to_frame()
        frame.index = frame.index.strftime("%Y-%m-%d")
        frame.to_csv(path, float_format=FLOAT_FORMAT, na_rep="", lineterminator="\n")
        if with_meta:
            meta = pd.DataFrame(
                {
                    "name": self.names,
                    "asset": [c.asset or "" for c in self._columns],
                    "role": [c.role for c in self._columns],
                }
            )
            meta.to_csv(_meta_path(path), index=False, lineterminator="\n")


def _meta_path(path: Path) -> Path:
    return path.with_name(path.stem + "_columns.csv")


def read_panel_csv(path) -> Panel:
    """Read a panel written by :meth:`Panel.to_csv`.

    Roles come from the metadata sidecar when present, otherwise every
    column is tagged ``feature``.
    """
    path = Path(path)
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    if "date" not in frame.columns:
        raise SchemaError(f"{path}: missing 'date' column")
    dates = _parse_dates(frame["date"], path)
    names = [c for c in frame.columns if c != "date"]
    values = np.column_stack([_to_float(frame[c]) for c in names]) if names else np.empty((len(dates), 0))
    meta_file = _meta_path(path)
    if meta_file.exists():
        meta = pd.read_csv(meta_file, dtype=str, keep_default_na=False)
        lookup = {r.name: ColumnMeta(r.name, r.role, r.asset or None) for r in meta.itertuples()}
        metas = [lookup.get(n, ColumnMeta(n)) for n in names]
    else:
        metas = [ColumnMeta(n) for n in names]
    return Panel(dates, metas, values)


def _parse_dates(col: pd.Series, path) -> np.ndarray:
    parsed = pd.to_datetime(col.str.strip(), format="%Y-%m-%d", errors="coerce")
    if parsed.isna().any():
        bad = col[parsed.isna()].iloc[0]
        raise SchemaError(f"{path}: unparseable date {bad!r} (expected YYYY-MM-DD)")
    return parsed.values.astype("datetime64[D]")


def _to_float(col: pd.Series) -> np.ndarray:
    return pd.to_numeric(col.str.strip(), errors="coerce").to_numpy(dtype=np.float64)


def load_asset_csv(path, asset: str) -> Panel:
    """Load one asset's daily CSV (``date,open,high,low,close,volume,market_cap``).

    Only ``date`` and ``close`` are required. Unparseable numeric cells become
    missing; rows are returned sorted by date.
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise EmptyInputError(f"{path}: file is empty") from None
    frame.columns = [c.strip().lower() for c in frame.columns]
    missing = {"date", "close"} - set(frame.columns)
    if missing:
        raise SchemaError(f"{path}: missing required columns {sorted(missing)}")
    if len(frame) == 0:
        raise EmptyInputError(f"{path}: no data rows")
    dates = _parse_dates(frame["date"], path)
    order = np.argsort(dates, kind="stable")
    dates = dates[order]
    dup = dates[1:] == dates[:-1]
    if dup.any():
        raise IntegrityError(f"{path}: duplicate date {dates[1:][dup][0]}")
    metas = []
    cols = []
    for field, role in CSV_FIELDS.items():
        if field in frame.columns:
            metas.append(ColumnMeta(f"{asset}_{field}", role, asset))
            cols.append(_to_float(frame[field])[order])
    return Panel(dates, metas, np.column_stack(cols))


def align_panels(panels: Sequence[Panel], policy: str = "inner") -> Panel:
    """Join panels on dates; ``inner`` intersects, ``union`` fills with missing."""
    if not panels:
        raise EmptyInputError("align_panels needs at least one panel")
    if policy not in ("inner", "union"):
        raise ParameterError(f"unknown alignment policy {policy!r}")
    metas = [m for p in panels for m in p.columns]
    names = [m.name for m in metas]
    if len(set(names)) != len(names):
        dup = sorted({n for n in names if names.count(n) > 1})
        raise IntegrityError(f"column name collision when aligning: {dup}")
    if policy == "inner":
        dates = panels[0].dates
        for p in panels[1:]:
            dates = np.intersect1d(dates, p.dates)
    else:
        dates = np.unique(np.concatenate([p.dates for p in panels]))
    blocks = []
    for p in panels:
        block = np.full((len(dates), p.shape[1]), np.nan)
        if len(p):
            pos = np.clip(np.searchsorted(p.dates, dates), 0, len(p) - 1)
            hit = p.dates[pos] == dates
            block[hit] = p.values[pos[hit]]
        blocks.append(block)
    values = np.hstack(blocks) if blocks else np.empty((len(dates), 0))
    return Panel(dates, metas, values)


def lag_columns(p: Panel, cols: Iterable[str] | None, days: int, keep_original: bool = False) -> Panel:
    """Shift the selected columns ``days`` rows forward in time.

    The value at row ``t`` of ``<name>_lag<days>`` is the original value at
    ``t - days``; the first ``days`` rows are missing. By default the lagged
    column replaces the original in place.
    """
    if int(days) != days or days < 1:
        raise ParameterError("days must be a positive integer")
    days = int(days)
    names = p.names if cols is None else list(cols)
    idx = [p.index_of(n) for n in names]
    shifted = np.full((len(p), len(idx)), np.nan)
    if days < len(p):
        shifted[days:] = p.values[: len(p) - days][:, idx]
    new_metas = [
        ColumnMeta(f"{p.columns[i].name}_lag{days}", p.columns[i].role, p.columns[i].asset)
        for i in idx
    ]
    if keep_original:
        return p.with_columns(new_metas, shifted)
    metas = list(p.columns)
    values = np.array(p.values)
    for k, i in enumerate(idx):
        metas[i] = new_metas[k]
        values[:, i] = shifted[:, k]
    return Panel(p.dates, metas, values)
