"""Detrended fluctuation analysis (linear detrending) of a scalar series.

The exponent ``theta`` of ``F(t) ~ t**theta`` classifies memory:
about 0.5 for white noise, 0.5-1 for long-range correlated series,
1 for 1/f noise and above 1 for non-stationary (e.g. integrated) series.
"""

from __future__ import annotations

import json
import math
import os
import warnings
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import ValidationError, as_float_vector

__all__ = [
    "MAX_GAP_FRACTION",
    "MIN_CROSSOVER_GAIN",
    "Crossover",
    "DFA",
    "DfaResult",
    "default_fit_range",
    "default_scales",
    "dfa",
    "dfa_profile",
    "fill_gaps",
    "fit_crossover",
    "fit_exponent",
    "fluctuation_function",
    "write_dfa",
]

MIN_SERIES_LENGTH = 16
MIN_SCALE = 4
N_SCALES = 20
MAX_GAP_FRACTION = 0.10
MIN_CROSSOVER_GAIN = 0.2


@dataclass(frozen=True)
class Crossover:
    t_c: int
    theta_below: float
    theta_above: float
    sse_gain: float


@dataclass(frozen=True)
class DfaResult:
    scales: np.ndarray
    fluctuations: np.ndarray
    theta: float
    fit_range: tuple
    crossover: Optional[Crossover] = None
    gap_fraction: float = 0.0

    def to_dict(self) -> dict:
        return {
            "theta": self.theta,
            "fit_range": [int(self.fit_range[0]), int(self.fit_range[1])],
            "crossover": asdict(self.crossover) if self.crossover else None,
            "gap_fraction": self.gap_fraction,
            "n_scales": int(len(self.scales)),
        }


def default_scales(n: int, n_scales: int = N_SCALES) -> np.ndarray:
    """About ``n_scales`` unique log-spaced integers in ``[4, n // 4]``."""
    if n < MIN_SERIES_LENGTH:
        raise ValidationError(f"series too short for DFA: {n} < {MIN_SERIES_LENGTH}")
    grid = np.geomspace(MIN_SCALE, n // 4, n_scales)
    return np.unique(np.round(grid).astype(int))


def default_fit_range(scales: Sequence[int]) -> tuple[int, int]:
    """Drop the two smallest and two largest scales."""
    scales = np.asarray(scales)
    if len(scales) < 8:
        raise ValidationError(f"need at least 8 scales for the default fit range, got {len(scales)}")
    return int(scales[2]), int(scales[-3])


def fill_gaps(series, max_gap_fraction: float = MAX_GAP_FRACTION) -> tuple[np.ndarray, float]:
    """Replace ``NaN`` entries with the mean of the defined ones.

    Returns the filled copy and the fraction of entries that were missing.
    """
    a = as_float_vector(series, allow_nan=True)
    gaps = np.isnan(a)
    frac = float(gaps.mean()) if len(a) else 0.0
    if frac > max_gap_fraction:
        raise ValidationError(
            f"{frac:.1%} of the series is undefined (limit {max_gap_fraction:.0%})"
        )
    if frac:
        a = a.copy()
        a[gaps] = a[~gaps].mean()
    return a, frac


def dfa_profile(series) -> np.ndarray:
    """Cumulative sum of deviations from the series mean."""
    a = as_float_vector(series, allow_nan=True)
    if len(a) < MIN_SERIES_LENGTH:
        raise ValidationError(f"series too short for DFA: {len(a)} < {MIN_SERIES_LENGTH}")
    if np.any(np.isnan(a)):
        raise ValidationError("series has undefined entries; fill them first (see fill_gaps)")
    return np.cumsum(a - a.mean())


def fluctuation_function(profile, scales: Sequence[int]) -> np.ndarray:
    """RMS residual of per-window linear fits to ``profile`` for each scale.

    Windows of size ``s`` tile the first ``(T // s) * s`` points; the
    trailing remainder is dropped and the mean is taken over the tiled
    points only.
    """
    b = as_float_vector(profile, "profile")
    n = len(b)
    out = np.empty(len(scales))
    for idx, s in enumerate(scales):
        s = int(s)
        if not (MIN_SCALE <= s and 4 * s <= n):
            raise ValidationError(f"scale {s} outside [{MIN_SCALE}, {n}/4]")
        w = b[: n // s * s].reshape(-1, s)
        x = np.arange(s) - (s - 1) / 2.0
        slope = (w @ x) / (x @ x)
        resid = w - w.mean(axis=1, keepdims=True) - slope[:, None] * x
        out[idx] = math.sqrt(np.mean(resid * resid))
    return out


def _line(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Least-squares slope and residual sum of squares."""
    xc = x - x.mean()
    yc = y - y.mean()
    slope = float(xc @ yc / (xc @ xc))
    resid = yc - slope * xc
    return slope, float(resid @ resid)


def _usable(scales, fluctuations, fit_range=None):
    t = np.asarray(scales, dtype=float)
    f = np.asarray(fluctuations, dtype=float)
    if t.shape != f.shape:
        raise ValidationError("scales and fluctuations differ in length")
    mask = np.ones(len(t), dtype=bool)
    if fit_range is not None:
        lo, hi = fit_range
        mask &= (t >= lo) & (t <= hi)
    zero = mask & ~(f > 0)
    if np.any(zero):
        warnings.warn(
            f"excluding {int(zero.sum())} scale(s) with F(t) = 0 from the fit",
            RuntimeWarning,
            stacklevel=3,
        )
    mask &= f > 0
    return t[mask], f[mask]


def fit_exponent(scales, fluctuations, fit_range: Optional[tuple] = None) -> float:
    """Slope of ``log F`` against ``log t`` over ``fit_range`` (inclusive)."""
    t, f = _usable(scales, fluctuations, fit_range)
    if len(t) < 4:
        raise ValidationError(f"need at least 4 usable points to fit, got {len(t)}")
    return _line(np.log(t), np.log(f))[0]


def fit_crossover(scales, fluctuations, min_gain: float = MIN_CROSSOVER_GAIN) -> Optional[Crossover]:
    """Best two-segment log-log fit, or ``None`` if it barely beats one line.

    Every interior scale is tried as the breakpoint; it belongs to both
    segments and each segment keeps at least three points.  The relative
    SSE reduction over a single line must reach ``min_gain``.
    """
    t, f = _usable(scales, fluctuations)
    if len(t) < 8:
        raise ValidationError(f"insufficient points for a crossover fit: {len(t)} < 8")
    if t[-1] < 10 * t[0]:
        raise ValidationError("insufficient span for a crossover fit: less than one decade")
    x, y = np.log(t), np.log(f)
    _, sse_single = _line(x, y)
    best = None
    for b in range(2, len(x) - 2):
        lo_slope, lo_sse = _line(x[: b + 1], y[: b + 1])
        hi_slope, hi_sse = _line(x[b:], y[b:])
        total = lo_sse + hi_sse
        if best is None or total < best[0]:
            best = (total, b, lo_slope, hi_slope)
    total, b, lo_slope, hi_slope = best
    spread = float(((y - y.mean()) ** 2).sum())
    if sse_single <= 1e-20 * max(spread, 1.0):
        gain = 0.0
    else:
        gain = (sse_single - total) / sse_single
    if gain < min_gain:
        return None
    return Crossover(int(t[b]), lo_slope, hi_slope, float(gain))


def dfa(
    series,
    scales: Optional[Sequence[int]] = None,
    fit_range: Optional[tuple] = None,
    crossover: bool = False,
    max_gap_fraction: float = MAX_GAP_FRACTION,
) -> DfaResult:
    """Full DFA: gap filling, profile, fluctuation function and fits.

    Parameters
    ----------
    series : array-like of shape (T,)
        May contain ``NaN`` for undefined days (at most ``max_gap_fraction``).
    scales : sequence of int, optional
        Defaults to :func:`default_scales`.
    fit_range : (int, int), optional
        Inclusive scale range for the exponent; defaults to
        :func:`default_fit_range`.  The crossover search uses the same range.
    crossover : bool
        Also run :func:`fit_crossover`.
    """
    filled, gap_fraction = fill_gaps(series, max_gap_fraction)
    profile = dfa_profile(filled)
    scales = default_scales(len(profile)) if scales is None else np.asarray(scales, dtype=int)
    if np.any(np.diff(scales) <= 0):
        raise ValidationError("scales must be strictly increasing")
    fluct = fluctuation_function(profile, scales)
    if fit_range is None:
        fit_range = default_fit_range(scales)
    fit_range = (int(fit_range[0]), int(fit_range[1]))
    theta = fit_exponent(scales, fluct, fit_range)
    cross = None
    if crossover:
        in_range = (scales >= fit_range[0]) & (scales <= fit_range[1])
        cross = fit_crossover(scales[in_range], fluct[in_range])
    scales = np.array(scales)
    scales.setflags(write=False)
    fluct.setflags(write=False)
    return DfaResult(scales, fluct, theta, fit_range, cross, gap_fraction)


def write_dfa(result: DfaResult, csv_path, json_path=None) -> None:
    """``scale,F`` rows plus an optional JSON sidecar with the fit results."""
    lines = ["scale,F"] + [
        f"{int(s)},{float(f)!r}" for s, f in zip(result.scales, result.fluctuations)
    ]
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
    if json_path is not None:
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(result.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


class DFA(BaseEstimator):
    """Estimator wrapper around :func:`dfa`.

    ``fit`` accepts a 1-D series (or a single-column 2-D array).

    Attributes
    ----------
    theta_ : float
    scales_, fluctuations_ : ndarray
    crossover_ : Crossover or None
    result_ : DfaResult
    """

    def __init__(self, scales=None, fit_range=None, crossover: bool = False,
                 max_gap_fraction: float = MAX_GAP_FRACTION):
        self.scales = scales
        self.fit_range = fit_range
        self.crossover = crossover
        self.max_gap_fraction = max_gap_fraction

    def fit(self, X, y=None):
        x = np.asarray(X, dtype=float)
        if x.ndim == 2 and x.shape[1] == 1:
            x = x[:, 0]
        self.result_ = dfa(x, self.scales, self.fit_range, self.crossover, self.max_gap_fraction)
        self.theta_ = self.result_.theta
        self.scales_ = self.result_.scales
        self.fluctuations_ = self.result_.fluctuations
        self.crossover_ = self.result_.crossover
        return self

    def predict(self, scales):
        """Fitted power law ``F(t)`` evaluated at ``scales``."""
        check_is_fitted(self)
        t = np.asarray(scales, dtype=float)
        lo, hi = self.result_.fit_range
        s, f = _usable(self.scales_, self.fluctuations_, (lo, hi))
        intercept = np.mean(np.log(f)) - self.theta_ * np.mean(np.log(s))
        return np.exp(intercept) * t ** self.theta_
