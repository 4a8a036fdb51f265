"""Financial correlation networks with static and dynamic thresholds."""

from ._validation import NumericalError, ValidationError
from .correlation import (
    DEFAULT_MULTIPLIERS,
    CorrelationFrame,
    ThresholdKind,
    ThresholdPolicy,
    cross_correlation_frame,
    dynamic_baseline,
    static_baseline,
    threshold_at,
)
from .dfa import DFA, DfaResult, dfa, fit_crossover, fit_exponent
from .market_data import (
    PricePanel,
    ReturnMatrix,
    ReturnNormalizer,
    log_returns,
    normalize_returns,
    parse_prices,
    parse_sectors,
    returns_from_panel,
)
from .network import (
    DegreeEnsemble,
    SnapshotGraph,
    ThresholdNetwork,
    TopologySeries,
    build_snapshot,
    degree_ensemble,
    topology_series,
    two_peaks,
    windowed_average_degree,
)
from .spectral import DegreeSpectrum, EigenReport, eigen_decompose, sector_projection
from .synthetic import MarketSpec, Regime, generate_panel, regime_calm_vs_volatile

__version__ = "0.1.0"
