"""Per-day threshold graphs and their topology statistics.

Each day ``t`` gives an undirected simple graph with an edge ``{i, j}``
whenever ``r_i(t) r_j(t) > zeta(t)`` (strict).  Undefined
assortativity values are stored as ``NaN``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import IO, Optional, Sequence, Union

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import ValidationError, check_window
from .correlation import (
    CorrelationFrame,
    ThresholdKind,
    ThresholdPolicy,
    static_baseline,
    threshold_series,
)
from .market_data import ReturnMatrix

__all__ = [
    "DegreeEnsemble",
    "SnapshotGraph",
    "ThresholdNetwork",
    "TopologySeries",
    "TwoPeaks",
    "average_clustering",
    "average_degree",
    "build_snapshot",
    "clustering_coefficients",
    "degree_assortativity",
    "degree_ensemble",
    "degree_envelope",
    "node_clustering",
    "topology_series",
    "two_peaks",
    "windowed_average_degree",
    "write_degree_histogram",
    "write_topology",
]


@dataclass(frozen=True)
class SnapshotGraph:
    """Graph of one day. ``adjacency`` is a dense symmetric boolean matrix."""

    t: int
    adjacency: np.ndarray
    degrees: np.ndarray
    edge_count: int

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @classmethod
    def from_adjacency(cls, adjacency, t: int = 0) -> "SnapshotGraph":
        adj = np.array(adjacency, dtype=bool)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValidationError("adjacency must be square")
        if np.any(np.diag(adj)):
            raise ValidationError("self-loops are not allowed")
        if not np.array_equal(adj, adj.T):
            raise ValidationError("adjacency must be symmetric")
        return cls._trusted(adj, t)

    @classmethod
    def from_edges(cls, n: int, edges: Sequence[tuple[int, int]], t: int = 0) -> "SnapshotGraph":
        adj = np.zeros((n, n), dtype=bool)
        for i, j in edges:
            if i == j:
                raise ValidationError(f"self-loop at node {i}")
            adj[i, j] = adj[j, i] = True
        return cls._trusted(adj, t)

    @classmethod
    def _trusted(cls, adj: np.ndarray, t: int) -> "SnapshotGraph":
        adj.setflags(write=False)
        degrees = adj.sum(axis=1)
        degrees.setflags(write=False)
        return cls(int(t), adj, degrees, int(degrees.sum()) // 2)


def build_snapshot(frame: CorrelationFrame, zeta: float) -> SnapshotGraph:
    adj = frame.values > zeta
    np.fill_diagonal(adj, False)
    return SnapshotGraph._trusted(adj, frame.t)


def node_clustering(g: SnapshotGraph, i: int) -> float:
    """Fraction of neighbour pairs of ``i`` that are linked; 0 when degree < 2."""
    nbrs = np.flatnonzero(g.adjacency[i])
    k = len(nbrs)
    if k < 2:
        return 0.0
    links = int(g.adjacency[np.ix_(nbrs, nbrs)].sum()) // 2
    return 2.0 * links / (k * (k - 1))


def clustering_coefficients(g: SnapshotGraph) -> np.ndarray:
    """Vectorized :func:`node_clustering` for every node."""
    return _clustering(g.adjacency, g.degrees)


def _clustering(adj: np.ndarray, degrees: np.ndarray) -> np.ndarray:
    a = adj.astype(float)
    # integer-valued float products are exact well below 2**53
    links = ((a @ a) * a).sum(axis=1) / 2.0
    k = degrees.astype(float)
    c = np.zeros(len(k))
    ok = degrees >= 2
    c[ok] = 2.0 * links[ok] / (k[ok] * (k[ok] - 1))
    return c


def average_clustering(g: SnapshotGraph) -> float:
    return float(clustering_coefficients(g).mean())


def average_degree(g: SnapshotGraph) -> float:
    return 2.0 * g.edge_count / g.n


def degree_assortativity(g: SnapshotGraph) -> Optional[float]:
    """Degree correlation across edge endpoints, or ``None`` when undefined.

    Evaluated from exact integer edge sums, so degenerate graphs (no edges,
    or all endpoint degrees equal) are detected without rounding.
    """
    return _assortativity(g.adjacency, g.degrees)


def _assortativity(adj: np.ndarray, degrees: np.ndarray) -> Optional[float]:
    iu, ju = np.nonzero(np.triu(adj, k=1))
    m = len(iu)
    if m == 0:
        return None
    dj = degrees[iu].astype(np.int64)
    dk = degrees[ju].astype(np.int64)
    s1 = int((dj + dk).sum())
    s2 = int((dj * dj + dk * dk).sum())
    sjk = int((dj * dk).sum())
    # both terms scaled by 4 M^2
    num = 4 * m * sjk - s1 * s1
    den = 2 * m * s2 - s1 * s1
    if den == 0:
        return None
    return num / den


# --------------------------------------------------------------------------- #
# Time series over all days
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class TopologySeries:
    """Per-day clustering ``C(t)``, average degree ``K(t)`` and assortativity ``r(t)``.

    ``node_degrees`` has shape ``(N, T)``. ``assortativity`` holds ``NaN``
    on days where it is undefined.
    """

    clustering: np.ndarray
    degree: np.ndarray
    assortativity: np.ndarray
    node_degrees: np.ndarray

    @property
    def n_days(self) -> int:
        return len(self.clustering)

    @property
    def mean_clustering(self) -> float:
        return float(np.mean(self.clustering))

    @property
    def mean_degree(self) -> float:
        return float(np.mean(self.degree))

    @property
    def mean_assortativity(self) -> Optional[float]:
        defined = self.assortativity[~np.isnan(self.assortativity)]
        return float(np.mean(defined)) if len(defined) else None

    def series(self, name: str) -> np.ndarray:
        return {
            "clustering": self.clustering,
            "degree": self.degree,
            "assortativity": self.assortativity,
        }[name]


def topology_series(returns: ReturnMatrix, policy: ThresholdPolicy) -> TopologySeries:
    n, n_days = returns.values.shape
    zeta = threshold_series(policy, n_days)
    by_day = np.ascontiguousarray(returns.values.T)
    clustering = np.empty(n_days)
    degree = np.empty(n_days)
    assort = np.full(n_days, np.nan)
    node_degrees = np.empty((n, n_days), dtype=np.int32)
    diag = np.eye(n, dtype=bool)
    for d in range(n_days):
        r = by_day[d]
        adj = np.multiply.outer(r, r) > zeta[d]
        adj[diag] = False
        deg = adj.sum(axis=1)
        node_degrees[:, d] = deg
        clustering[d] = _clustering(adj, deg).mean()
        degree[d] = 2.0 * (int(deg.sum()) // 2) / n
        a = _assortativity(adj, deg)
        if a is not None:
            assort[d] = a
    for arr in (clustering, degree, assort, node_degrees):
        arr.setflags(write=False)
    return TopologySeries(clustering, degree, assort, node_degrees)


def windowed_average_degree(series: TopologySeries, t_start: int, t_end: int) -> float:
    """Mean of ``K(t)`` over the closed 1-based window ``[t_start, t_end]``."""
    a, b = check_window(t_start, t_end, series.n_days)
    return float(np.mean(series.degree[a:b]))


def degree_envelope(
    series: TopologySeries, lower: float = 0.05, upper: float = 0.95, window: Optional[int] = None
) -> np.ndarray:
    """Lower and upper quantiles of ``K(t)``.

    With ``window`` set, quantiles are taken over consecutive
    non-overlapping blocks of that many days (a trailing partial block is
    dropped) and an array of shape ``(n_blocks, 2)`` is returned;
    otherwise a single ``(lower, upper)`` pair over all days.
    """
    if not 0 <= lower <= upper <= 1:
        raise ValidationError("quantiles must satisfy 0 <= lower <= upper <= 1")
    k = series.degree
    if window is None:
        return np.quantile(k, [lower, upper])
    if not 1 <= window <= len(k):
        raise ValidationError(f"window must be in [1, {len(k)}]")
    blocks = k[: len(k) // window * window].reshape(-1, window)
    return np.quantile(blocks, [lower, upper], axis=1).T


# --------------------------------------------------------------------------- #
# Degree ensemble
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class DegreeEnsemble:
    """Histogram of ``k_i(t)`` pooled over all nodes and days; ``counts[k]``."""

    counts: np.ndarray
    total: int

    @classmethod
    def from_degrees(cls, node_degrees) -> "DegreeEnsemble":
        deg = np.asarray(node_degrees)
        n = deg.shape[0]
        counts = np.bincount(deg.ravel(), minlength=n).astype(np.int64)
        if len(counts) > n:
            raise ValidationError(f"degree above N-1 = {n - 1}")
        return cls(counts, int(deg.size))

    @property
    def probabilities(self) -> np.ndarray:
        return self.counts / self.total

    def as_dict(self) -> dict:
        return {k: int(c) for k, c in enumerate(self.counts) if c}


def degree_ensemble(returns: ReturnMatrix, policy: ThresholdPolicy) -> DegreeEnsemble:
    return DegreeEnsemble.from_degrees(topology_series(returns, policy).node_degrees)


@dataclass(frozen=True)
class TwoPeaks:
    low_mode: int
    trough: Optional[int]
    high_mode: Optional[int]

    @property
    def bimodal(self) -> bool:
        return self.high_mode is not None


def two_peaks(ensemble: DegreeEnsemble, smooth: int = 1) -> TwoPeaks:
    """Locate a mode near ``k = 0`` and a second mode beyond a trough.

    The probabilities are optionally smoothed with a centred moving
    average of odd width ``smooth``.  The low mode is the first local
    maximum; the trough is the first local minimum after it; the high
    mode is the maximum beyond the trough.  ``high_mode`` is ``None``
    when no trough separates two maxima.
    """
    if smooth < 1 or smooth % 2 == 0:
        raise ValidationError("smooth must be a positive odd integer")
    p = ensemble.probabilities
    if smooth > 1:
        kernel = np.ones(smooth)
        p = np.convolve(p, kernel, mode="same") / np.convolve(np.ones_like(p), kernel, mode="same")
    k = 0
    while k + 1 < len(p) and p[k + 1] >= p[k]:
        k += 1
    low = k
    while k + 1 < len(p) and p[k + 1] <= p[k]:
        k += 1
    if k + 1 >= len(p):
        return TwoPeaks(low, None, None)
    trough = k
    high = trough + int(np.argmax(p[trough:]))
    return TwoPeaks(low, trough, high)


# --------------------------------------------------------------------------- #
# Output files
# --------------------------------------------------------------------------- #


def _write_text(text: str, dest) -> None:
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        dest.write(text)


def write_topology(series: TopologySeries, dest: Union[str, os.PathLike, IO[str]]) -> None:
    """``t,C,K,r`` rows; ``r`` is left empty where undefined."""
    lines = ["t,C,K,r"]
    for d in range(series.n_days):
        r = series.assortativity[d]
        r_cell = "" if np.isnan(r) else repr(float(r))
        lines.append(
            f"{d + 1},{float(series.clustering[d])!r},{float(series.degree[d])!r},{r_cell}"
        )
    _write_text("\n".join(lines) + "\n", dest)


def write_degree_histogram(ensemble: DegreeEnsemble, dest: Union[str, os.PathLike, IO[str]]) -> None:
    lines = ["k,count,probability"]
    for k, (c, p) in enumerate(zip(ensemble.counts, ensemble.probabilities)):
        lines.append(f"{k},{int(c)},{float(p)!r}")
    _write_text("\n".join(lines) + "\n", dest)


# --------------------------------------------------------------------------- #
# Estimator
# --------------------------------------------------------------------------- #


class ThresholdNetwork(TransformerMixin, BaseEstimator):
    """Map a return panel to the per-day topology of its threshold network.

    ``X`` holds normalized returns with shape ``(n_days, n_stocks)``
    (see :class:`~threshnet.market_data.ReturnNormalizer`).  A static
    policy learns ``Q_s`` during :meth:`fit` and reuses it in
    :meth:`transform`; a dynamic policy recomputes ``Q_d(t)`` from the
    transformed data itself.

    Parameters
    ----------
    kind : {"dynamic", "static"}
    multiplier : float
        Coefficient applied to the baseline.

    Attributes
    ----------
    q_static_ : float
        Static baseline of the training data (set for both kinds).
    topology_ : TopologySeries
        Series of the training data.
    """

    def __init__(self, kind: str = "dynamic", multiplier: float = 1.0):
        self.kind = kind
        self.multiplier = multiplier

    def _returns(self, X) -> ReturnMatrix:
        X = check_array(X, ensure_min_samples=1, ensure_min_features=3)
        ids = [str(i) for i in range(X.shape[1])]
        return ReturnMatrix(ids, X.T, np.zeros(X.shape[1]), np.ones(X.shape[1]))

    def _policy(self, returns: ReturnMatrix) -> ThresholdPolicy:
        if ThresholdKind(self.kind) is ThresholdKind.STATIC:
            return ThresholdPolicy(ThresholdKind.STATIC, float(self.multiplier), q_static=self.q_static_)
        return ThresholdPolicy.dynamic(returns, self.multiplier)

    def fit(self, X, y=None):
        returns = self._returns(X)
        self.n_features_in_ = returns.n_stocks
        self.q_static_ = static_baseline(returns)
        self.topology_ = topology_series(returns, self._policy(returns))
        return self

    def transform(self, X):
        check_is_fitted(self)
        returns = self._returns(X)
        if returns.n_stocks != self.n_features_in_:
            raise ValidationError(
                f"X has {returns.n_stocks} stocks, network was fitted on {self.n_features_in_}"
            )
        s = topology_series(returns, self._policy(returns))
        return np.column_stack([s.clustering, s.degree, s.assortativity])

    def get_feature_names_out(self, input_features=None):
        return np.array(["clustering", "degree", "assortativity"], dtype=object)
