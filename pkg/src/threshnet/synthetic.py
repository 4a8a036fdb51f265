"""Seeded factor-model markets with planted sectors and volatility regimes.

Raw returns follow

    R_i(t) = v(t) * (beta * m(t) + gamma * s_g(i)(t) + sigma * e_i(t))

with independent standard normal market, sector and idiosyncratic
factors and a piecewise-constant volatility multiplier ``v(t)``.  Each
factor is drawn from its own Philox stream keyed by ``(seed, kind,
index)``, so any single stock can be regenerated on its own.
"""

from __future__ import annotations

import datetime as _dt
import math
import string
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._validation import ValidationError
from .market_data import PricePanel

__all__ = [
    "MarketSpec",
    "Regime",
    "RegimePanel",
    "generate_panel",
    "generate_returns",
    "regime_calm_vs_volatile",
    "sector_labels",
]

_MARKET, _SECTOR, _STOCK = 0, 1, 2
_FIRST_DATE = _dt.date(2000, 1, 1)


@dataclass(frozen=True)
class Regime:
    """Days ``t_start..t_end`` (1-based, inclusive) with returns scaled by ``vol_multiplier``."""

    t_start: int
    t_end: int
    vol_multiplier: float


@dataclass(frozen=True)
class MarketSpec:
    n_stocks: int
    n_days: int
    market_beta: float = 1.0
    n_sectors: int = 1
    sector_gamma: float = 0.0
    noise_sigma: float = 1.0
    regimes: Sequence[Regime] = field(default_factory=tuple)
    seed: int = 0

    def __post_init__(self):
        regimes = tuple(r if isinstance(r, Regime) else Regime(*r) for r in self.regimes)
        object.__setattr__(self, "regimes", regimes)
        if self.n_stocks < 3 or self.n_days < 2:
            raise ValidationError("need n_stocks >= 3 and n_days >= 2")
        if not 1 <= self.n_sectors <= self.n_stocks:
            raise ValidationError("n_sectors must be in [1, n_stocks]")
        for name in ("market_beta", "sector_gamma"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValidationError(f"{name} must be finite and >= 0, got {v!r}")
        if not (math.isfinite(self.noise_sigma) and self.noise_sigma > 0):
            raise ValidationError("noise_sigma must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")
        spans = sorted((r.t_start, r.t_end) for r in regimes)
        for r in regimes:
            if not 1 <= r.t_start <= r.t_end <= self.n_days:
                raise ValidationError(f"regime {r} outside [1, {self.n_days}]")
            if not (math.isfinite(r.vol_multiplier) and r.vol_multiplier > 0):
                raise ValidationError(f"regime {r} needs a positive vol_multiplier")
        for (_, e1), (s2, _) in zip(spans, spans[1:]):
            if s2 <= e1:
                raise ValidationError("regimes overlap")

    def sector_of(self) -> np.ndarray:
        """Sector index of every stock: contiguous, near-equal blocks."""
        return np.arange(self.n_stocks) * self.n_sectors // self.n_stocks


def _stream(seed: int, kind: int, index: int, n: int) -> np.ndarray:
    ss = np.random.SeedSequence(seed, spawn_key=(kind, index))
    return np.random.Generator(np.random.Philox(ss)).standard_normal(n)


def sector_labels(n_sectors: int) -> list[str]:
    if n_sectors <= 26:
        return list(string.ascii_uppercase[:n_sectors])
    return [f"S{g}" for g in range(n_sectors)]


def volatility_profile(spec: MarketSpec) -> np.ndarray:
    v = np.ones(spec.n_days)
    for r in spec.regimes:
        v[r.t_start - 1 : r.t_end] = r.vol_multiplier
    return v


def generate_returns(spec: MarketSpec) -> np.ndarray:
    """Raw returns of shape ``(n_stocks, n_days)``."""
    n, t = spec.n_stocks, spec.n_days
    market = _stream(spec.seed, _MARKET, 0, t)
    sectors = np.array([_stream(spec.seed, _SECTOR, g, t) for g in range(spec.n_sectors)])
    noise = np.array([_stream(spec.seed, _STOCK, i, t) for i in range(n)])
    g = spec.sector_of()
    common = spec.market_beta * market + spec.sector_gamma * sectors[g]
    return volatility_profile(spec) * (common + spec.noise_sigma * noise)


def generate_panel(spec: MarketSpec) -> PricePanel:
    """Price panel with ``P_i(0) = 1`` and the planted sector map attached."""
    raw = generate_returns(spec)
    log_p = np.concatenate([np.zeros((spec.n_stocks, 1)), np.cumsum(raw, axis=1)], axis=1)
    width = len(str(spec.n_stocks - 1))
    ids = tuple(f"S{i:0{width}d}" for i in range(spec.n_stocks))
    dates = tuple((_FIRST_DATE + _dt.timedelta(days=d)).isoformat() for d in range(spec.n_days + 1))
    labels = sector_labels(spec.n_sectors)
    sectors = {sid: labels[g] for sid, g in zip(ids, spec.sector_of())}
    return PricePanel(ids, dates, np.exp(log_p), sectors)


@dataclass(frozen=True)
class RegimePanel:
    panel: PricePanel
    volatile: tuple
    calm: tuple


def regime_calm_vs_volatile(spec: MarketSpec, calm: Optional[tuple] = None) -> RegimePanel:
    """Generate a panel and annotate its most volatile regime plus a calm window.

    The calm window has the volatile window's length and defaults to
    starting at day ``n_days // 4``; if that overlaps any regime, the
    first non-overlapping position is used instead.
    """
    if not spec.regimes:
        raise ValidationError("spec needs at least one regime")
    hot = max(spec.regimes, key=lambda r: r.vol_multiplier)
    volatile = (hot.t_start, hot.t_end)
    length = hot.t_end - hot.t_start + 1
    if calm is None:
        starts = [max(1, spec.n_days // 4)] + list(range(1, spec.n_days - length + 2))
        for s in starts:
            e = s + length - 1
            if e <= spec.n_days and all(e < r.t_start or s > r.t_end for r in spec.regimes):
                calm = (s, e)
                break
        else:
            raise ValidationError("no calm window of matching length fits outside the regimes")
    calm = (int(calm[0]), int(calm[1]))
    if not 1 <= calm[0] <= calm[1] <= spec.n_days:
        raise ValidationError(f"calm window {calm} outside [1, {spec.n_days}]")
    return RegimePanel(generate_panel(spec), volatile, calm)
