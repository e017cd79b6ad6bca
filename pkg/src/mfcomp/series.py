"""Series container, price CSV ingestion, returns and volatility."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

__all__ = [
    "Kind",
    "Series",
    "SeriesError",
    "load_price_csv",
    "load_series_csv",
    "log_returns",
    "volatility",
]


class SeriesError(ValueError):
    """Raised for malformed input series or unreadable input files."""


class Kind(str, enum.Enum):
    PRICE = "price"
    RETURN = "return"
    VOLATILITY = "volatility"
    GENERIC_POSITIVE = "generic-positive"


@dataclass(frozen=True)
class Series:
    """Immutable ordered sample with a kind tag.

    ``values`` is stored as a read-only float64 array, so a ``Series`` can be
    shared between concurrent analyses.
    """

    values: np.ndarray
    kind: Kind = Kind.GENERIC_POSITIVE
    label: str = ""
    seed_provenance: dict[str, Any] | None = field(default=None, compare=False)

    def __post_init__(self):
        arr = np.array(self.values, dtype=float, copy=True).ravel()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "kind", Kind(self.kind))
        if not np.all(np.isfinite(arr)):
            raise SeriesError("series contains non-finite values")
        if self.kind in (Kind.VOLATILITY, Kind.GENERIC_POSITIVE):
            if arr.size and arr.min() < 0:
                raise SeriesError(f"{self.kind.value} series has negative values")
        if self.kind is Kind.PRICE and arr.size and arr.min() <= 0:
            raise SeriesError("price series must be strictly positive")

    def __len__(self) -> int:
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def with_values(self, values, **changes) -> "Series":
        kw = {"kind": self.kind, "label": self.label, "seed_provenance": None}
        kw.update(changes)
        return Series(values, **kw)

    def require_analyzable(self) -> None:
        """Check the preconditions shared by every analysis operation."""
        if len(self) < 2:
            raise SeriesError("analysis needs at least 2 values")
        if self.values.min() < 0:
            raise SeriesError("analysis needs a non-negative series")
        if not self.values.max() > 0:
            raise SeriesError("series sums to zero; the measure is undefined")


def _as_series(x, kind: Kind = Kind.GENERIC_POSITIVE) -> Series:
    return x if isinstance(x, Series) else Series(x, kind=kind)


def _parse_float(text: str) -> float | None:
    try:
        val = float(text)
    except ValueError:
        return None
    return val if math.isfinite(val) else None


def _read_column(path, column: str | int) -> tuple[list[float], list[int]]:
    path = Path(path)
    if not path.is_file():
        raise SeriesError(f"missing file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise SeriesError(f"empty file: {path}")

    if isinstance(column, str) and not column.lstrip("-").isdigit():
        header = [c.strip() for c in rows[0]]
        if column not in header:
            raise SeriesError(f"column {column!r} not found in header {header}")
        idx, start = header.index(column), 1
    else:
        idx = int(column)
        # an optional single header row: the first row if it fails to parse
        first = rows[0][idx].strip() if idx < len(rows[0]) else ""
        start = 0 if _parse_float(first) is not None else 1

    values, rownums = [], []
    for n, row in enumerate(rows[start:], start=start + 1):
        cell = row[idx].strip() if idx < len(row) else ""
        val = _parse_float(cell)
        if val is None:
            raise SeriesError(f"unparsable value {cell!r} at row {n}")
        values.append(val)
        rownums.append(n)
    return values, rownums


def load_price_csv(path, column: str | int = 0, label: str | None = None) -> Series:
    """Read one column of a UTF-8 CSV as a price series.

    ``column`` is a header name or a zero-based index. Dates or other columns
    are ignored. Rows are 1-based in error messages, counting the header.
    """
    values, rownums = _read_column(path, column)
    for val, n in zip(values, rownums):
        if val <= 0:
            raise SeriesError(f"non-positive price at row {n}")
    return Series(values, kind=Kind.PRICE, label=label or Path(path).stem)


def load_series_csv(
    path, column: str | int = 0, kind: Kind | str = Kind.GENERIC_POSITIVE
) -> Series:
    """Read one column as a series of the given kind (volatility, etc.)."""
    values, _ = _read_column(path, column)
    return Series(values, kind=Kind(kind), label=Path(path).stem)


def log_returns(prices: Series) -> Series:
    """r(t) = ln P_t - ln P_{t-1}."""
    prices = _as_series(prices, Kind.PRICE)
    if len(prices) < 2:
        raise SeriesError("need at least 2 prices to form a return")
    if prices.values.min() <= 0:
        raise SeriesError("prices must be strictly positive")
    r = np.diff(np.log(prices.values))
    return Series(r, kind=Kind.RETURN, label=prices.label)


def volatility(returns: Series) -> Series:
    """v(t) = |r(t)|."""
    returns = _as_series(returns, Kind.RETURN)
    return Series(np.abs(returns.values), kind=Kind.VOLATILITY, label=returns.label)
