"""Price panel ingestion and conversion to normalized log returns.

The functional API keeps the natural panel orientation, stocks along
rows and days along columns.  :class:`ReturnNormalizer` follows the
scikit-learn convention instead and expects ``(n_days, n_stocks)``.
"""

from __future__ import annotations

import csv
import datetime as _dt
import io
import math
import os
from dataclasses import dataclass, field
from typing import IO, Mapping, Optional, Sequence, Union

import numpy as np
from sklearn.base import BaseEstimator, OneToOneFeatureMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import ValidationError, as_float_matrix

__all__ = [
    "DELTA_T_DAYS",
    "PricePanel",
    "ReturnMatrix",
    "ReturnNormalizer",
    "log_returns",
    "normalize_returns",
    "parse_prices",
    "parse_sectors",
    "returns_from_panel",
    "write_prices",
    "write_sectors",
]

#: Return horizon in trading days. Fixed; other horizons are not supported.
DELTA_T_DAYS = 1

Source = Union[str, os.PathLike, IO[bytes], IO[str], bytes]


@dataclass(frozen=True)
class PricePanel:
    """Daily prices of ``N`` stocks over ``T + 1`` dates.

    ``prices[i, d]`` is the price of ``stock_ids[i]`` on ``dates[d]``.
    """

    stock_ids: tuple
    dates: tuple
    prices: np.ndarray
    sectors: Optional[Mapping[str, str]] = field(default=None, compare=False)

    def __post_init__(self):
        ids = tuple(str(s) for s in self.stock_ids)
        dates = tuple(str(d) for d in self.dates)
        prices = np.array(self.prices, dtype=float)
        if prices.ndim != 2 or prices.shape != (len(ids), len(dates)):
            raise ValidationError(
                f"prices shape {prices.shape} does not match "
                f"({len(ids)} stocks, {len(dates)} dates)"
            )
        if len(set(ids)) != len(ids):
            dup = next(s for s in ids if ids.count(s) > 1)
            raise ValidationError(f"duplicate stock id {dup!r}")
        if len(ids) < 3:
            raise ValidationError(f"need at least 3 stocks, got {len(ids)}")
        if len(dates) < 3:
            raise ValidationError(f"need at least 3 dates (2 returns), got {len(dates)}")
        if not np.all(np.isfinite(prices)) or np.any(prices <= 0):
            i, d = np.argwhere(~(prices > 0) | ~np.isfinite(prices))[0]
            raise ValidationError(f"non-positive price at (stock {ids[i]!r}, date {dates[d]!r})")
        bad = _first_unordered(dates)
        if bad is not None:
            raise ValidationError(f"dates not strictly increasing at {dates[bad]!r}")
        if self.sectors is not None:
            sectors = {str(k): str(v) for k, v in self.sectors.items()}
            object.__setattr__(self, "sectors", sectors)
        prices.setflags(write=False)
        object.__setattr__(self, "stock_ids", ids)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "prices", prices)

    @property
    def n_stocks(self) -> int:
        return len(self.stock_ids)

    @property
    def n_days(self) -> int:
        """Number of return days ``T`` (one fewer than the number of dates)."""
        return len(self.dates) - 1

    def with_sectors(self, sectors: Mapping[str, str]) -> "PricePanel":
        return PricePanel(self.stock_ids, self.dates, self.prices, sectors)


@dataclass(frozen=True)
class ReturnMatrix:
    """Normalized returns, shape ``(N, T)``, zero mean and unit population std per row."""

    stock_ids: tuple
    values: np.ndarray
    raw_means: np.ndarray
    raw_stds: np.ndarray

    def __post_init__(self):
        values = as_float_matrix(self.values, "values").copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "stock_ids", tuple(str(s) for s in self.stock_ids))
        if len(self.stock_ids) != values.shape[0]:
            raise ValidationError("stock_ids length does not match number of rows")

    @property
    def n_stocks(self) -> int:
        return self.values.shape[0]

    @property
    def n_days(self) -> int:
        return self.values.shape[1]


# --------------------------------------------------------------------------- #
# CSV input / output
# --------------------------------------------------------------------------- #


def _open_text(source: Source) -> tuple[IO[str], bool]:
    if isinstance(source, bytes):
        return io.StringIO(source.decode("utf-8-sig"), newline=""), True
    if isinstance(source, (str, os.PathLike)):
        return open(source, "r", encoding="utf-8-sig", newline=""), True
    if isinstance(source, io.TextIOBase):
        return source, False
    data = source.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8-sig")
    return io.StringIO(data, newline=""), True


def _date_key(labels: Sequence[str]):
    try:
        return [_dt.date.fromisoformat(s) for s in labels]
    except ValueError:
        pass
    try:
        return [float(s) for s in labels]
    except ValueError:
        return list(labels)


def _first_unordered(labels: Sequence[str]) -> Optional[int]:
    keys = _date_key(labels)
    for d in range(1, len(keys)):
        if not keys[d] > keys[d - 1]:
            return d
    return None


def parse_prices(source: Source) -> PricePanel:
    """Read a ``date,<id_1>,...,<id_N>`` price CSV into a :class:`PricePanel`.

    Errors name the offending location as ``(row, col)``, both 1-based
    and counting the header as row 1.
    """
    fh, close = _open_text(source)
    try:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    finally:
        if close:
            fh.close()
    if not rows:
        raise ValidationError("empty price file")
    header = [c.strip() for c in rows[0]]
    if len(header) < 2 or header[0].lower() != "date":
        raise ValidationError("header must start with 'date' followed by stock ids")
    ids = header[1:]
    seen = set()
    for col, sid in enumerate(ids, start=2):
        if not sid:
            raise ValidationError(f"empty stock id at (1,{col})")
        if sid in seen:
            raise ValidationError(f"duplicate stock id {sid!r} at (1,{col})")
        seen.add(sid)

    dates = []
    prices = np.empty((len(ids), len(rows) - 1))
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ValidationError(
                f"ragged row {r}: expected {len(header)} cells, got {len(row)}"
            )
        dates.append(row[0].strip())
        for c, cell in enumerate(row[1:], start=2):
            try:
                value = float(cell)
            except ValueError:
                raise ValidationError(f"non-numeric price {cell!r} at ({r},{c})") from None
            if not (value > 0) or not math.isfinite(value):
                raise ValidationError(f"non-positive price at ({r},{c})")
            prices[c - 2, r - 2] = value
    bad = _first_unordered(dates)
    if bad is not None:
        raise ValidationError(f"dates not strictly increasing at ({bad + 2},1)")
    return PricePanel(tuple(ids), tuple(dates), prices)


def write_prices(panel: PricePanel, dest: Union[str, os.PathLike, IO[str]]) -> None:
    """Write ``panel`` in the format read by :func:`parse_prices` (round-trip exact)."""
    lines = [",".join(("date",) + panel.stock_ids)]
    for d, date in enumerate(panel.dates):
        lines.append(",".join([date] + [repr(float(p)) for p in panel.prices[:, d]]))
    text = "\n".join(lines) + "\n"
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        dest.write(text)


def parse_sectors(source: Source) -> dict:
    """Read a ``stock_id,sector_code`` CSV. A header row is optional."""
    fh, close = _open_text(source)
    try:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    finally:
        if close:
            fh.close()
    if rows and [c.strip().lower() for c in rows[0]] == ["stock_id", "sector_code"]:
        start, rows = 2, rows[1:]
    else:
        start = 1
    sectors = {}
    for r, row in enumerate(rows, start=start):
        if len(row) != 2:
            raise ValidationError(f"ragged sector row {r}: expected 2 cells, got {len(row)}")
        sid, code = row[0].strip(), row[1].strip()
        if not sid or not code:
            raise ValidationError(f"empty stock id or sector code at row {r}")
        if sid in sectors:
            raise ValidationError(f"duplicate stock id {sid!r} at ({r},1)")
        sectors[sid] = code
    return sectors


def write_sectors(sectors: Mapping[str, str], dest: Union[str, os.PathLike, IO[str]]) -> None:
    text = "stock_id,sector_code\n" + "".join(f"{k},{v}\n" for k, v in sectors.items())
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        dest.write(text)


# --------------------------------------------------------------------------- #
# Returns
# --------------------------------------------------------------------------- #


def log_returns(panel: PricePanel) -> np.ndarray:
    """One-day log returns, shape ``(N, T)``.

    Computed as the log of the price ratio, which equals the difference of
    logs and is exactly invariant to rescaling a stock's prices by a power
    of two.
    """
    p = panel.prices
    return np.log(p[:, DELTA_T_DAYS:] / p[:, :-DELTA_T_DAYS])


def normalize_returns(raw, stock_ids: Optional[Sequence[str]] = None) -> ReturnMatrix:
    """Standardize each row to zero mean and unit population standard deviation.

    Parameters
    ----------
    raw : array of shape (N, T)
        Raw returns, one row per stock.
    stock_ids : sequence of str, optional
        Row labels; defaults to ``"0", "1", ...``.

    Raises
    ------
    ValidationError
        If any row has zero variance.
    """
    raw = as_float_matrix(raw, "raw returns")
    if stock_ids is None:
        stock_ids = [str(i) for i in range(raw.shape[0])]
    if len(stock_ids) != raw.shape[0]:
        raise ValidationError("stock_ids length does not match number of rows")
    means = raw.mean(axis=1)
    # two-pass population std; algebraically sqrt(<R^2> - <R>^2)
    stds = raw.std(axis=1, ddof=0)
    flat = (np.ptp(raw, axis=1) == 0) | (stds == 0)
    if np.any(flat):
        sid = stock_ids[int(np.flatnonzero(flat)[0])]
        raise ValidationError(f"zero variance returns for stock {sid!r}")
    values = (raw - means[:, None]) / stds[:, None]
    return ReturnMatrix(tuple(stock_ids), values, means, stds)


def returns_from_panel(panel: PricePanel) -> ReturnMatrix:
    return normalize_returns(log_returns(panel), panel.stock_ids)


class ReturnNormalizer(OneToOneFeatureMixin, TransformerMixin, BaseEstimator):
    """Per-stock standardization with population standard deviation.

    Like :class:`sklearn.preprocessing.StandardScaler` but refuses
    zero-variance columns instead of silently leaving them unscaled.
    ``X`` has shape ``(n_days, n_stocks)``.

    Attributes
    ----------
    mean_ : ndarray of shape (n_stocks,)
    scale_ : ndarray of shape (n_stocks,)
    """

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_samples=2)
        stats = normalize_returns(X.T)
        self.mean_ = stats.raw_means
        self.scale_ = stats.raw_stds
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self)
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValidationError(
                f"X has {X.shape[1]} stocks, normalizer was fitted on {self.n_features_in_}"
            )
        return (X - self.mean_) / self.scale_
