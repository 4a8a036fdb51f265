"""Eigen-analysis of the cross-correlation matrix of individual degree series."""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import IO, Mapping, Optional, Sequence, Union

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import NumericalError, ValidationError

__all__ = [
    "DEFAULT_TOP_M",
    "DegreeCorrelationMatrix",
    "DegreeSpectrum",
    "EigenReport",
    "NormalizedDegrees",
    "SectorProjection",
    "degree_correlation_matrix",
    "eigen_decompose",
    "normalize_degree_series",
    "assign_components",
    "localize_components",
    "sector_projection",
    "sector_recovery",
    "varimax",
    "write_eigen",
]

DEFAULT_TOP_M = 4


@dataclass(frozen=True)
class NormalizedDegrees:
    values: np.ndarray
    stock_ids: tuple
    excluded: tuple


@dataclass(frozen=True)
class DegreeCorrelationMatrix:
    values: np.ndarray
    stock_ids: tuple
    excluded: tuple

    @property
    def effective_n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class EigenReport:
    """Eigenvalues in descending order; ``eigenvectors[:, m]`` pairs with ``eigenvalues[m]``."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    stock_ids: tuple


@dataclass(frozen=True)
class SectorProjection:
    """Mean ``|u_i|`` per sector (columns) for each leading eigenvector (rows)."""

    sectors: tuple
    means: np.ndarray
    dominant: tuple


def normalize_degree_series(node_degrees, stock_ids: Optional[Sequence[str]] = None) -> NormalizedDegrees:
    """Standardize each node's degree series; constant series are excluded.

    ``node_degrees`` has shape ``(N, T)``.
    """
    k = np.asarray(node_degrees, dtype=float)
    if k.ndim != 2:
        raise ValidationError(f"degree panel must be 2-dimensional, got shape {k.shape}")
    if stock_ids is None:
        stock_ids = [str(i) for i in range(k.shape[0])]
    if len(stock_ids) != k.shape[0]:
        raise ValidationError("stock_ids length does not match number of rows")
    keep = np.ptp(k, axis=1) > 0
    if not np.any(keep):
        raise ValidationError("every degree series has zero variance; nothing to correlate")
    kept = k[keep]
    z = (kept - kept.mean(axis=1, keepdims=True)) / kept.std(axis=1, keepdims=True)
    z.setflags(write=False)
    ids = tuple(s for s, ok in zip(stock_ids, keep) if ok)
    excluded = tuple(s for s, ok in zip(stock_ids, keep) if not ok)
    return NormalizedDegrees(z, ids, excluded)


def degree_correlation_matrix(nd: NormalizedDegrees) -> DegreeCorrelationMatrix:
    """``F_ij = (1/T) sum_t k_i(t) k_j(t)`` on the normalized degrees.

    Each entry is reduced along its own contiguous row product, upper
    triangle first and mirrored, so the result is exactly symmetric and
    does not depend on BLAS threading.
    """
    z = np.ascontiguousarray(nd.values)
    n, n_days = z.shape
    f = np.empty((n, n))
    for i in range(n):
        f[i, i:] = (z[i] * z[i:]).sum(axis=1) / n_days
        f[i:, i] = f[i, i:]
    f.setflags(write=False)
    return DegreeCorrelationMatrix(f, nd.stock_ids, nd.excluded)


# entries this close to the column maximum count as tied for the sign rule
SIGN_TIE_TOL = 1e-9


def _lead_signs(v: np.ndarray) -> np.ndarray:
    mag = np.abs(v)
    lead = np.argmax(mag >= mag.max(axis=0) - SIGN_TIE_TOL, axis=0)
    signs = np.sign(v[lead, np.arange(v.shape[1])])
    return np.where(signs == 0, 1.0, signs)


def eigen_decompose(matrix: DegreeCorrelationMatrix) -> EigenReport:
    """Dense symmetric eigendecomposition with a deterministic sign convention.

    Each eigenvector is flipped so that its largest-magnitude component
    (first one on ties, up to ``SIGN_TIE_TOL``) is positive.
    """
    f = np.asarray(matrix.values, dtype=float)

    def failure(reason):
        return NumericalError(
            f"eigendecomposition failed ({reason}); size={f.shape[0]}, "
            f"finite={bool(np.all(np.isfinite(f)))}, max|F|={np.nanmax(np.abs(f)):.3g}, "
            f"asymmetry={np.nanmax(np.abs(f - f.T)):.3g}"
        )

    if not np.all(np.isfinite(f)):
        raise failure("matrix has non-finite entries")
    try:
        w, v = np.linalg.eigh(f)
    except np.linalg.LinAlgError as exc:
        raise failure(exc) from exc
    w = w[::-1].copy()
    v = v[:, ::-1].copy()
    v *= _lead_signs(v)
    w.setflags(write=False)
    v.setflags(write=False)
    return EigenReport(w, v, matrix.stock_ids)


def sector_projection(
    report: EigenReport, sectors: Mapping[str, str], top_m: int = DEFAULT_TOP_M
) -> SectorProjection:
    missing = [s for s in report.stock_ids if s not in sectors]
    if missing:
        raise ValidationError(f"missing sector labels for {len(missing)} stock(s), e.g. {missing[0]!r}")
    top_m = min(top_m, len(report.eigenvalues))
    labels = np.array([sectors[s] for s in report.stock_ids])
    names = tuple(sorted(set(labels)))
    u = np.abs(report.eigenvectors[:, :top_m])
    means = np.column_stack([u[labels == g].mean(axis=0) for g in names])
    dominant = tuple(names[j] for j in np.argmax(means, axis=1))
    return SectorProjection(names, means, dominant)


def varimax(loadings, tol: float = 1e-10, max_iter: int = 500) -> np.ndarray:
    """Orthogonal varimax rotation of the columns of ``loadings``."""
    a = np.asarray(loadings, dtype=float)
    p, k = a.shape
    rot = np.eye(k)
    crit = 0.0
    for _ in range(max_iter):
        b = a @ rot
        u, s, vt = np.linalg.svd(a.T @ (b ** 3 - b * ((b ** 2).sum(axis=0) / p)))
        rot = u @ vt
        new = s.sum()
        if new <= crit * (1 + tol):
            break
        crit = new
    return a @ rot


def localize_components(report: EigenReport, n_components: int) -> EigenReport:
    """Varimax-rotate the leading ``n_components`` eigenvectors.

    Equal-sized sectors give (near-)degenerate eigenvalues, and any
    rotation inside such an eigenspace is an equally valid set of
    eigenvectors; varimax picks the one whose vectors are most localized
    on groups of stocks.  The returned "eigenvalues" are the variance
    captured by each rotated vector, sorted descending, and the usual sign
    convention is applied.
    """
    if not 1 <= n_components <= len(report.eigenvalues):
        raise ValidationError(f"n_components must be in [1, {len(report.eigenvalues)}]")
    v = report.eigenvectors[:, :n_components]
    rotated = varimax(v)
    coef = v.T @ rotated
    captured = (report.eigenvalues[:n_components, None] * coef ** 2).sum(axis=0)
    order = np.argsort(-captured, kind="stable")
    rotated = rotated[:, order]
    rotated *= _lead_signs(rotated)
    return EigenReport(captured[order], rotated, report.stock_ids)


def assign_components(report: EigenReport, top_m: int) -> np.ndarray:
    """Index of the leading vector with the largest ``|u_i|`` for each stock."""
    return np.argmax(np.abs(report.eigenvectors[:, :top_m]), axis=1)


def sector_recovery(report: EigenReport, sectors: Mapping[str, str], n_components: int) -> float:
    """Fraction of stocks whose localized component points at their own sector.

    Rotates the leading ``n_components`` eigenvectors with
    :func:`localize_components`, labels every rotated vector with its
    dominant sector, and attaches each stock to the vector where its
    loading is largest.
    """
    local = localize_components(report, n_components)
    proj = sector_projection(local, sectors, n_components)
    comp = assign_components(local, n_components)
    hits = [proj.dominant[c] == sectors[s] for s, c in zip(local.stock_ids, comp)]
    return float(np.mean(hits))


def write_eigen(
    report: EigenReport,
    eigen_path: Union[str, os.PathLike],
    vectors_path: Union[str, os.PathLike],
    sectors: Optional[Mapping[str, str]] = None,
    top_m: int = DEFAULT_TOP_M,
) -> None:
    """``eigen.csv`` (``index,eigenvalue``) and ``eigenvectors.csv``
    (``stock_id,sector,u0..``)."""
    with open(eigen_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("index,eigenvalue\n")
        for m, lam in enumerate(report.eigenvalues):
            fh.write(f"{m},{float(lam)!r}\n")
    top_m = min(top_m, len(report.eigenvalues))
    with open(vectors_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(["stock_id", "sector"] + [f"u{m}" for m in range(top_m)]) + "\n")
        for i, sid in enumerate(report.stock_ids):
            sector = sectors.get(sid, "") if sectors else ""
            cells = [repr(float(x)) for x in report.eigenvectors[i, :top_m]]
            fh.write(",".join([sid, sector] + cells) + "\n")


class DegreeSpectrum(TransformerMixin, BaseEstimator):
    """PCA-like decomposition of a degree panel through its correlation matrix.

    ``X`` is a degree panel of shape ``(n_days, n_stocks)``, for example
    ``ThresholdNetwork().fit(R).topology_.node_degrees.T``.  Stocks with a
    constant degree are dropped during :meth:`fit`.

    Attributes
    ----------
    eigenvalues_ : ndarray
        All eigenvalues of the degree correlation matrix, descending.
    components_ : ndarray of shape (top_m, n_included)
    support_ : ndarray of bool, shape (n_stocks,)
        Stocks kept in the matrix.
    """

    def __init__(self, top_m: int = DEFAULT_TOP_M):
        self.top_m = top_m

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_samples=2)
        self.n_features_in_ = X.shape[1]
        nd = normalize_degree_series(X.T)
        self.support_ = np.ptp(X, axis=0) > 0
        self.mean_ = X[:, self.support_].mean(axis=0)
        self.scale_ = X[:, self.support_].std(axis=0)
        report = eigen_decompose(degree_correlation_matrix(nd))
        self.report_ = report
        self.eigenvalues_ = report.eigenvalues
        self.components_ = report.eigenvectors[:, : self.top_m].T
        return self

    def transform(self, X):
        check_is_fitted(self)
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValidationError(
                f"X has {X.shape[1]} stocks, spectrum was fitted on {self.n_features_in_}"
            )
        z = (X[:, self.support_] - self.mean_) / self.scale_
        return z @ self.components_.T
