"""End-to-end analysis run: thresholds, topology, DFA and spectra per multiplier.

All numbers written here come from the library modules; this module only
schedules the work and serializes results.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import shutil
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import __version__
from ._validation import ValidationError
from .correlation import (
    DEFAULT_MULTIPLIERS,
    ThresholdKind,
    ThresholdPolicy,
    dynamic_baseline,
    static_baseline,
    write_thresholds,
)
from .dfa import DfaResult, dfa, fit_crossover, write_dfa
from .market_data import ReturnMatrix, parse_prices, parse_sectors, returns_from_panel
from .network import (
    DegreeEnsemble,
    TopologySeries,
    degree_envelope,
    topology_series,
    two_peaks,
    windowed_average_degree,
    write_degree_histogram,
    write_topology,
)
from .spectral import (
    DEFAULT_TOP_M,
    EigenReport,
    degree_correlation_matrix,
    eigen_decompose,
    normalize_degree_series,
    sector_projection,
    write_eigen,
)

__all__ = [
    "DFA_SERIES",
    "RunConfig",
    "UnitResult",
    "analyze_unit",
    "emit_figure_data",
    "run_pipeline",
    "with_crossover",
]

logger = logging.getLogger(__name__)

DFA_SERIES = ("clustering", "degree", "assortativity")


@dataclass
class RunConfig:
    input_prices: str
    output_dir: str
    input_sectors: Optional[str] = None
    threshold_kinds: Sequence[str] = ("static", "dynamic")
    multipliers: Sequence[float] = DEFAULT_MULTIPLIERS
    dfa_series: Sequence[str] = DFA_SERIES
    windows: Sequence[tuple] = ()
    fit_range: Optional[tuple] = None
    top_m: int = DEFAULT_TOP_M
    parallelism: int = 1

    def __post_init__(self):
        self.threshold_kinds = tuple(ThresholdKind(k).value for k in self.threshold_kinds)
        if not self.threshold_kinds:
            raise ValidationError("at least one threshold kind is required")
        self.multipliers = tuple(float(m) for m in self.multipliers)
        if not self.multipliers or any(not m > 0 for m in self.multipliers):
            raise ValidationError("multipliers must be a non-empty list of positive numbers")
        if len(set(self.multipliers)) != len(self.multipliers):
            raise ValidationError("multipliers must be unique")
        unknown = set(self.dfa_series) - set(DFA_SERIES)
        if unknown:
            raise ValidationError(f"unknown DFA series {sorted(unknown)}; choose from {DFA_SERIES}")
        self.dfa_series = tuple(s for s in DFA_SERIES if s in self.dfa_series)
        self.windows = tuple((int(a), int(b)) for a, b in self.windows)
        if self.fit_range is not None:
            self.fit_range = (int(self.fit_range[0]), int(self.fit_range[1]))
        if self.parallelism < 1:
            raise ValidationError("parallelism must be >= 1")

    def provenance(self) -> dict:
        """Settings that determine the results (paths and parallelism excluded)."""
        return {
            "threshold_kinds": list(self.threshold_kinds),
            "multipliers": list(self.multipliers),
            "dfa_series": list(self.dfa_series),
            "windows": [list(w) for w in self.windows],
            "fit_range": list(self.fit_range) if self.fit_range else None,
            "top_m": self.top_m,
        }


@dataclass
class UnitResult:
    kind: str
    multiplier: float
    in_studied_range: bool
    topology: TopologySeries
    ensemble: DegreeEnsemble
    dfa: dict = field(default_factory=dict)
    dfa_errors: dict = field(default_factory=dict)
    crossover_notes: dict = field(default_factory=dict)
    windows: list = field(default_factory=list)
    envelope: tuple = ()
    peaks: Optional[dict] = None
    eigen: Optional[EigenReport] = None
    excluded: tuple = ()
    spectral_error: Optional[str] = None

    @property
    def label(self) -> str:
        return f"{self.kind}_x{self.multiplier:g}"


def with_crossover(result: DfaResult) -> tuple[DfaResult, Optional[str]]:
    """Add a crossover fit over the fit range when there are enough scales.

    Short series keep their single exponent; the reason the breakpoint
    search could not run is returned instead of raised.
    """
    lo, hi = result.fit_range
    keep = (result.scales >= lo) & (result.scales <= hi)
    try:
        cross = fit_crossover(result.scales[keep], result.fluctuations[keep])
    except ValidationError as exc:
        return result, str(exc)
    return replace(result, crossover=cross), None


def analyze_unit(returns: ReturnMatrix, kind: str, multiplier: float, config: RunConfig) -> UnitResult:
    """Everything computed for one (threshold kind, multiplier) pair."""
    policy = ThresholdPolicy.build(kind, returns, multiplier)
    series = topology_series(returns, policy)
    ensemble = DegreeEnsemble.from_degrees(series.node_degrees)
    peaks = two_peaks(ensemble)
    res = UnitResult(
        kind, multiplier, policy.in_studied_range, series, ensemble,
        envelope=tuple(float(x) for x in degree_envelope(series)),
        peaks={"low_mode": peaks.low_mode, "trough": peaks.trough, "high_mode": peaks.high_mode},
    )
    for a, b in config.windows:
        res.windows.append({"t_start": a, "t_end": b, "K_mean": windowed_average_degree(series, a, b)})
    for name in config.dfa_series:
        try:
            result = dfa(series.series(name), fit_range=config.fit_range)
        except ValidationError as exc:
            # degenerate series (e.g. no edges at all) are reported, not fatal
            res.dfa_errors[name] = str(exc)
            continue
        res.dfa[name], note = with_crossover(result)
        if note:
            res.crossover_notes[name] = note
    try:
        nd = normalize_degree_series(series.node_degrees, returns.stock_ids)
    except ValidationError as exc:
        res.spectral_error = str(exc)
    else:
        res.eigen = eigen_decompose(degree_correlation_matrix(nd))
        res.excluded = nd.excluded
    return res


def _unit_job(args):
    return analyze_unit(*args)


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _dump_json(obj, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def emit_figure_data(
    out_dir: str,
    returns: ReturnMatrix,
    q_static: float,
    q_dynamic: np.ndarray,
    units: Sequence[UnitResult],
    sectors: Optional[dict],
    top_m: int = DEFAULT_TOP_M,
) -> list[str]:
    """Write every data product under ``out_dir``; returns relative paths written."""
    written = []

    def rel(*parts):
        path = os.path.join(*parts)
        written.append(os.path.relpath(path, out_dir).replace(os.sep, "/"))
        return path

    write_thresholds(q_static, q_dynamic, rel(out_dir, "thresholds.csv"))
    summary_units = []
    sweep_rows = []
    for u in units:
        d = os.path.join(out_dir, u.label)
        os.makedirs(d, exist_ok=True)
        write_topology(u.topology, rel(d, "topology.csv"))
        write_degree_histogram(u.ensemble, rel(d, "degree_hist.csv"))
        for name, result in u.dfa.items():
            write_dfa(result, rel(d, f"dfa_{name}.csv"), rel(d, f"dfa_{name}.json"))
        spectral = {"error": u.spectral_error}
        if u.eigen is not None:
            write_eigen(u.eigen, rel(d, "eigen.csv"), rel(d, "eigenvectors.csv"), sectors, top_m)
            spectral = {
                "eigenvalues": [float(x) for x in u.eigen.eigenvalues[:top_m]],
                "effective_n": len(u.eigen.stock_ids),
                "excluded": list(u.excluded),
            }
            if sectors:
                proj = sector_projection(u.eigen, sectors, top_m)
                with open(rel(d, "sector_projection.csv"), "w", encoding="utf-8", newline="") as fh:
                    w = csv.writer(fh, lineterminator="\n")
                    w.writerow(["eigenvector", "dominant"] + list(proj.sectors))
                    for m, row in enumerate(proj.means):
                        w.writerow([m, proj.dominant[m]] + [repr(float(x)) for x in row])
                spectral["dominant_sectors"] = list(proj.dominant)
        dfa_block = {name: r.to_dict() for name, r in u.dfa.items()}
        for name, note in u.crossover_notes.items():
            dfa_block[name]["crossover_note"] = note
        dfa_block.update({name: {"error": msg} for name, msg in u.dfa_errors.items()})
        summary_units.append({
            "kind": u.kind,
            "multiplier": u.multiplier,
            "in_studied_range": u.in_studied_range,
            "C_mean": u.topology.mean_clustering,
            "K_mean": u.topology.mean_degree,
            "r_mean": u.topology.mean_assortativity,
            "windows": u.windows,
            "K_envelope_5_95": list(u.envelope),
            "degree_peaks": u.peaks,
            "dfa": dfa_block,
            "spectral": spectral,
        })
        sweep_rows.append([u.kind, repr(u.multiplier), repr(u.topology.mean_clustering),
                           repr(u.topology.mean_degree),
                           "" if u.topology.mean_assortativity is None else repr(u.topology.mean_assortativity)]
                          + ["" if s not in u.dfa else repr(u.dfa[s].theta) for s in DFA_SERIES])
    with open(rel(out_dir, "sweep.csv"), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kind", "multiplier", "C_mean", "K_mean", "r_mean"] + [f"theta_{s}" for s in DFA_SERIES])
        w.writerows(sweep_rows)
    _dump_json({
        "n_stocks": returns.n_stocks,
        "n_days": returns.n_days,
        "Q_s": q_static,
        "results": summary_units,
    }, rel(out_dir, "summary.json"))
    return written


def run_pipeline(config: RunConfig) -> dict:
    """Run the full analysis and return the manifest (also written to disk).

    Outputs are staged in a temporary sibling directory and moved into
    ``config.output_dir`` only after every step succeeded.
    """
    panel = parse_prices(config.input_prices)
    sectors = None
    if config.input_sectors:
        sectors = parse_sectors(config.input_sectors)
        missing = [s for s in panel.stock_ids if s not in sectors]
        if missing:
            raise ValidationError(f"sector file lacks {len(missing)} stock(s), e.g. {missing[0]!r}")
    returns = returns_from_panel(panel)
    q_static = static_baseline(returns)
    q_dynamic = dynamic_baseline(returns)

    jobs = [(returns, k, m, config) for k in config.threshold_kinds for m in config.multipliers]
    if config.parallelism > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.parallelism) as pool:
            units = list(pool.map(_unit_job, jobs))
    else:
        units = [_unit_job(j) for j in jobs]

    out = os.path.abspath(config.output_dir)
    parent = os.path.dirname(out)
    os.makedirs(parent, exist_ok=True)
    stage = tempfile.mkdtemp(prefix=".threshnet-", dir=parent)
    try:
        written = emit_figure_data(stage, returns, q_static, q_dynamic, units, sectors, config.top_m)
        manifest = {
            "tool": "threshnet",
            "version": __version__,
            "config": config.provenance(),
            "inputs": {
                "prices": _sha256(config.input_prices),
                "sectors": _sha256(config.input_sectors) if config.input_sectors else None,
            },
            "artifacts": [
                {"path": p, "sha256": _sha256(os.path.join(stage, p))} for p in sorted(written)
            ],
        }
        _dump_json(manifest, os.path.join(stage, "manifest.json"))
        os.makedirs(out, exist_ok=True)
        for p in sorted(written) + ["manifest.json"]:
            dest = os.path.join(out, p)
            os.makedirs(os.path.dirname(dest), exist_ok=True)
            os.replace(os.path.join(stage, p), dest)
    finally:
        shutil.rmtree(stage, ignore_errors=True)
    logger.info("wrote %d artifacts to %s", len(written) + 1, out)
    return manifest
