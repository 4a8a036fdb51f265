"""Instantaneous cross-correlations and the static/dynamic edge thresholds.

Day indices ``t`` are 1-based throughout the public API, so ``t`` runs
over ``1..T`` as in the output files.
"""

from __future__ import annotations

import enum
import logging
import math
import os
from dataclasses import dataclass
from typing import IO, Optional, Union

import numpy as np

from ._validation import ValidationError, check_day
from .market_data import ReturnMatrix

__all__ = [
    "DEFAULT_MULTIPLIERS",
    "STUDIED_RANGES",
    "CorrelationFrame",
    "ThresholdKind",
    "ThresholdPolicy",
    "cross_correlation_frame",
    "dynamic_baseline",
    "read_thresholds",
    "static_baseline",
    "threshold_at",
    "threshold_series",
    "write_thresholds",
]

logger = logging.getLogger(__name__)

DEFAULT_MULTIPLIERS = (0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0)

# multiplier ranges studied for each threshold kind
STUDIED_RANGES = {"static": (0.25, 4.0), "dynamic": (0.25, 6.0)}

# bound on the (chunk x pairs) product buffer used by the baselines
_MAX_BUFFER = 1 << 22


class ThresholdKind(str, enum.Enum):
    STATIC = "static"
    DYNAMIC = "dynamic"


@dataclass(frozen=True)
class CorrelationFrame:
    """``values[i, j] = r_i(t) * r_j(t)`` for one day (diagonal included)."""

    t: int
    values: np.ndarray

    @property
    def n(self) -> int:
        return self.values.shape[0]


def cross_correlation_frame(returns: ReturnMatrix, t: int) -> CorrelationFrame:
    k = check_day(t, returns.n_days)
    r = returns.values[:, k]
    values = np.multiply.outer(r, r)
    values.setflags(write=False)
    return CorrelationFrame(int(t), values)


def _pair_sums(values: np.ndarray) -> np.ndarray:
    """Per-day sum of ``r_i r_j`` over pairs ``i < j``, shape ``(T,)``.

    Pairs are laid out in canonical (i, then j) order and each day is
    reduced on its own contiguous row, so every day's sum is independent
    of how days are chunked or scheduled.
    """
    n, n_days = values.shape
    iu, ju = np.triu_indices(n, k=1)
    by_day = np.ascontiguousarray(values.T)
    out = np.empty(n_days)
    step = max(1, _MAX_BUFFER // max(1, len(iu)))
    for a in range(0, n_days, step):
        block = by_day[a:a + step]
        # fancy indexing may hand back a Fortran-ordered buffer, which would
        # change numpy's summation order; force one contiguous row per day
        prod = np.multiply(block[:, iu], block[:, ju], order="C")
        out[a:a + step] = prod.sum(axis=1)
    return out


def static_baseline(returns: ReturnMatrix) -> float:
    """Average of ``G_ij(t)`` over all pairs ``i < j`` and all days."""
    n, n_days = returns.values.shape
    total = math.fsum(_pair_sums(returns.values))
    return total / (n * (n - 1) // 2 * n_days)


def dynamic_baseline(returns: ReturnMatrix) -> np.ndarray:
    """Per-day average of ``G_ij(t)`` over all pairs ``i < j``, shape ``(T,)``."""
    n = returns.n_stocks
    # dividing by the integer pair count keeps exact sums exact
    return _pair_sums(returns.values) / (n * (n - 1) // 2)


@dataclass(frozen=True)
class ThresholdPolicy:
    """Edge-creation rule ``zeta = multiplier * Q_s`` or ``multiplier * Q_d(t)``.

    Build with :meth:`static` or :meth:`dynamic` rather than directly.
    """

    kind: ThresholdKind
    multiplier: float
    q_static: Optional[float] = None
    q_dynamic: Optional[np.ndarray] = None

    def __post_init__(self):
        kind = ThresholdKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if not (self.multiplier > 0 and math.isfinite(self.multiplier)):
            raise ValidationError(f"multiplier must be positive, got {self.multiplier!r}")
        if kind is ThresholdKind.STATIC:
            if self.q_static is None or self.q_dynamic is not None:
                raise ValidationError("static policy needs q_static and no q_dynamic")
        else:
            if self.q_dynamic is None or self.q_static is not None:
                raise ValidationError("dynamic policy needs q_dynamic and no q_static")
            q = np.array(self.q_dynamic, dtype=float)
            q.setflags(write=False)
            object.__setattr__(self, "q_dynamic", q)
        if not self.in_studied_range:
            lo, hi = STUDIED_RANGES[kind.value]
            logger.info(
                "%s multiplier %g is outside the studied range [%g, %g]",
                kind.value, self.multiplier, lo, hi,
            )

    @classmethod
    def static(cls, returns: ReturnMatrix, multiplier: float = 1.0) -> "ThresholdPolicy":
        return cls(ThresholdKind.STATIC, float(multiplier), q_static=static_baseline(returns))

    @classmethod
    def dynamic(cls, returns: ReturnMatrix, multiplier: float = 1.0) -> "ThresholdPolicy":
        return cls(ThresholdKind.DYNAMIC, float(multiplier), q_dynamic=dynamic_baseline(returns))

    @classmethod
    def build(cls, kind, returns: ReturnMatrix, multiplier: float = 1.0) -> "ThresholdPolicy":
        if ThresholdKind(kind) is ThresholdKind.STATIC:
            return cls.static(returns, multiplier)
        return cls.dynamic(returns, multiplier)

    @property
    def in_studied_range(self) -> bool:
        lo, hi = STUDIED_RANGES[self.kind.value]
        return lo <= self.multiplier <= hi

    @property
    def label(self) -> str:
        return f"{self.kind.value}_x{self.multiplier:g}"


def threshold_at(policy: ThresholdPolicy, t: int) -> float:
    if policy.kind is ThresholdKind.STATIC:
        return policy.multiplier * policy.q_static
    return float(policy.multiplier * policy.q_dynamic[check_day(t, len(policy.q_dynamic))])


def threshold_series(policy: ThresholdPolicy, n_days: int) -> np.ndarray:
    """``threshold_at`` for every ``t = 1..n_days`` (bitwise identical values)."""
    if policy.kind is ThresholdKind.STATIC:
        return np.full(n_days, policy.multiplier * policy.q_static)
    if len(policy.q_dynamic) != n_days:
        raise ValidationError(
            f"dynamic policy covers {len(policy.q_dynamic)} days, returns have {n_days}"
        )
    return policy.multiplier * policy.q_dynamic


def write_thresholds(
    q_static: float, q_dynamic, dest: Union[str, os.PathLike, IO[str]]
) -> None:
    """Write ``# Q_s=<value>`` followed by ``t,Q_d`` rows."""
    lines = [f"# Q_s={float(q_static)!r}", "t,Q_d"]
    lines += [f"{t},{float(q)!r}" for t, q in enumerate(q_dynamic, start=1)]
    text = "\n".join(lines) + "\n"
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        dest.write(text)


def read_thresholds(path: Union[str, os.PathLike]) -> tuple[float, np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().strip()
        if not first.startswith("# Q_s="):
            raise ValidationError("thresholds file lacks '# Q_s=' metadata line")
        q_static = float(first[len("# Q_s="):])
        if fh.readline().strip() != "t,Q_d":
            raise ValidationError("thresholds file lacks 't,Q_d' header")
        q_dynamic = [float(line.split(",")[1]) for line in fh if line.strip()]
    return q_static, np.array(q_dynamic)
