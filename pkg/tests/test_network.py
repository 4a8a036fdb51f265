import io
import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from threshnet import (
    CorrelationFrame,
    DegreeEnsemble,
    MarketSpec,
    ReturnMatrix,
    SnapshotGraph,
    ThresholdNetwork,
    ThresholdPolicy,
    ValidationError,
    build_snapshot,
    cross_correlation_frame,
    degree_ensemble,
    generate_panel,
    normalize_returns,
    returns_from_panel,
    topology_series,
    two_peaks,
    windowed_average_degree,
)
from threshnet.correlation import threshold_at
from threshnet.network import (
    average_clustering,
    average_degree,
    clustering_coefficients,
    degree_assortativity,
    degree_envelope,
    node_clustering,
    write_degree_histogram,
    write_topology,
)

import naive
from conftest import random_returns


def _frame(values, t=1):
    return CorrelationFrame(t, np.asarray(values, dtype=float))


def _gnp(n, p, seed):
    rng = np.random.default_rng(seed)
    edges = [(i, j) for i, j in itertools.combinations(range(n), 2) if rng.random() < p]
    return SnapshotGraph.from_edges(n, edges), set(edges)


def _edge_set(g):
    return {(i, j) for i, j in zip(*np.nonzero(np.triu(g.adjacency)))}


def test_threshold_extremes():
    v = np.array([[9.0, 0.2, -0.1], [0.2, 9.0, 0.5], [-0.1, 0.5, 9.0]])
    empty = build_snapshot(_frame(v), 0.5)
    assert empty.edge_count == 0 and not empty.degrees.any()
    full = build_snapshot(_frame(v), -0.2)
    np.testing.assert_array_equal(full.degrees, [2, 2, 2])
    assert not np.diag(full.adjacency).any()


def test_four_node_edge_set():
    v = np.array([
        [1.0, 0.30, -0.20, 0.10],
        [0.30, 1.0, 0.25, 0.25],
        [-0.20, 0.25, 1.0, 0.40],
        [0.10, 0.25, 0.40, 1.0],
    ])
    g = build_snapshot(_frame(v), 0.25)
    # 0.25 itself is not above the threshold
    assert _edge_set(g) == {(0, 1), (2, 3)}
    np.testing.assert_array_equal(g.degrees, [1, 1, 1, 1])
    assert _edge_set(g) == naive.frame_edges(v.tolist(), 0.25)


def test_snapshot_validation():
    with pytest.raises(ValidationError):
        SnapshotGraph.from_adjacency([[1, 0], [0, 0]])
    with pytest.raises(ValidationError):
        SnapshotGraph.from_adjacency([[0, 1], [0, 0]])
    with pytest.raises(ValidationError):
        SnapshotGraph.from_edges(3, [(1, 1)])


def test_clustering_examples():
    k4 = SnapshotGraph.from_edges(4, list(itertools.combinations(range(4), 2)))
    assert [node_clustering(k4, i) for i in range(4)] == [1.0] * 4
    path = SnapshotGraph.from_edges(3, [(0, 1), (1, 2)])
    assert node_clustering(path, 1) == 0.0
    assert node_clustering(path, 0) == 0.0
    assert average_clustering(SnapshotGraph.from_edges(5, [])) == 0.0
    assert average_clustering(k4) == 1.0


@pytest.mark.parametrize("seed", range(5))
def test_clustering_matches_triangle_enumeration(seed):
    g, edges = _gnp(8, 0.5, seed)
    expected = naive.clustering(8, edges)
    assert [node_clustering(g, i) for i in range(8)] == expected
    np.testing.assert_array_equal(clustering_coefficients(g), expected)
    assert abs(average_clustering(g) - np.mean([node_clustering(g, i) for i in range(8)])) <= 1e-15


def test_degree_examples():
    for n in range(3, 9):
        star = SnapshotGraph.from_edges(n, [(0, j) for j in range(1, n)])
        assert average_degree(star) == pytest.approx(2 * (n - 1) / n, abs=1e-15)
    assert average_degree(SnapshotGraph.from_edges(4, [])) == 0.0


@pytest.mark.parametrize("n", range(3, 11))
def test_star_assortativity_is_minus_one(n):
    star = SnapshotGraph.from_edges(n, [(0, j) for j in range(1, n)])
    assert abs(degree_assortativity(star) + 1.0) <= 1e-12


def test_regular_and_empty_assortativity_undefined():
    assert degree_assortativity(SnapshotGraph.from_edges(5, list(itertools.combinations(range(5), 2)))) is None
    assert degree_assortativity(SnapshotGraph.from_edges(6, [(i, (i + 1) % 6) for i in range(6)])) is None
    assert degree_assortativity(SnapshotGraph.from_edges(4, [])) is None


@pytest.mark.parametrize("seed", range(8))
def test_assortativity_matches_edge_loop(seed):
    g, edges = _gnp(10, 0.4, seed)
    expected = naive.assortativity(10, edges)
    got = degree_assortativity(g)
    if expected is None:
        assert got is None
    else:
        assert got == pytest.approx(expected, abs=1e-12)


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 14), st.floats(0.05, 0.95), st.integers(0, 10**6))
def test_graph_invariants(n, p, seed):
    g, edges = _gnp(n, p, seed)
    assert int(g.degrees.sum()) == 2 * g.edge_count == 2 * len(edges)
    assert np.all((0 <= g.degrees) & (g.degrees <= max(n - 1, 0)))
    c = clustering_coefficients(g)
    assert np.all((0 <= c) & (c <= 1))
    r = degree_assortativity(g)
    if r is not None:
        assert -1 - 1e-9 <= r <= 1 + 1e-9


def test_clique_members_have_unit_clustering():
    # a 4-clique plus a pendant: clique members whose neighbours are all in the clique
    g = SnapshotGraph.from_edges(5, list(itertools.combinations(range(4), 2)) + [(3, 4)])
    assert [node_clustering(g, i) for i in range(3)] == [1.0, 1.0, 1.0]
    assert node_clustering(g, 3) == pytest.approx(0.5)


@settings(max_examples=200, deadline=None)
@given(st.integers(3, 12), st.integers(0, 2**32 - 1))
def test_raising_zeta_never_adds_edges(n, seed):
    rng = np.random.default_rng(seed)
    f = cross_correlation_frame(random_returns(rng, n=n, t=3), 2)
    zetas = np.sort(rng.normal(0, 1, 6))
    prev = None
    for z in zetas:
        g = build_snapshot(f, z)
        if prev is not None:
            assert not np.any(g.adjacency & ~prev.adjacency)
            assert g.edge_count <= prev.edge_count
            assert average_degree(g) <= average_degree(prev)
        prev = g


def test_identical_stocks_under_dynamic_have_no_edges():
    # base already has zero mean and unit population std, and dyadic scalings
    # normalize back to it bit for bit, so every G_ij(t) equals Q_d(t) exactly
    base = np.array([1.0, -1.0, 2.0, -2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    raw = np.vstack([base, 2.0 * base, 0.5 * base, 4.0 * base, 0.25 * base])
    r = normalize_returns(raw)
    np.testing.assert_array_equal(r.values, np.tile(base, (5, 1)))
    s = topology_series(r, ThresholdPolicy.dynamic(r))
    assert np.all(s.degree == 0)
    assert np.all(s.clustering == 0)
    assert np.all(np.isnan(s.assortativity))
    assert s.mean_assortativity is None


def test_static_series_matches_single_day_oracle():
    r = returns_from_panel(generate_panel(MarketSpec(15, 60, market_beta=1.0, seed=3)))
    pol = ThresholdPolicy.static(r)
    s = topology_series(r, pol)
    for t in (1, 7, 23, 41, 60):
        g = build_snapshot(cross_correlation_frame(r, t), threshold_at(pol, t))
        assert s.clustering[t - 1] == average_clustering(g)
        assert s.degree[t - 1] == average_degree(g)
        np.testing.assert_array_equal(s.node_degrees[:, t - 1], g.degrees)
        a = degree_assortativity(g)
        if a is None:
            assert np.isnan(s.assortativity[t - 1])
        else:
            assert s.assortativity[t - 1] == a


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("kind", ["static", "dynamic"])
def test_series_matches_naive_reference(seed, kind):
    rng = np.random.default_rng(seed)
    r = random_returns(rng)
    pol = ThresholdPolicy.build(kind, r, float(rng.choice([0.5, 1.0, 2.0])))
    zetas = [threshold_at(pol, t) for t in range(1, r.n_days + 1)]
    cs, ks, rs, degs = naive.topology(r.values.tolist(), zetas)
    s = topology_series(r, pol)
    np.testing.assert_allclose(s.clustering, cs, rtol=0, atol=1e-12)
    np.testing.assert_allclose(s.degree, ks, rtol=0, atol=1e-12)
    for got, exp in zip(s.assortativity, rs):
        assert (np.isnan(got) and exp is None) or abs(got - exp) <= 1e-12
    np.testing.assert_array_equal(s.node_degrees.T, degs)


def test_series_bounds_and_means(factor_returns):
    s = topology_series(factor_returns, ThresholdPolicy.static(factor_returns))
    n = factor_returns.n_stocks
    assert np.all((s.clustering >= 0) & (s.clustering <= 1))
    assert np.all((s.degree >= 0) & (s.degree <= n - 1))
    r = s.assortativity[~np.isnan(s.assortativity)]
    assert np.all(np.abs(r) <= 1 + 1e-9)
    assert s.mean_clustering == pytest.approx(s.clustering.mean())
    assert s.mean_assortativity == pytest.approx(r.mean())
    assert set(s.series("degree")) == set(s.degree)
    with pytest.raises(KeyError):
        s.series("betweenness")


def test_windowed_average(factor_returns):
    s = topology_series(factor_returns, ThresholdPolicy.dynamic(factor_returns))
    assert windowed_average_degree(s, 1, s.n_days) == pytest.approx(s.mean_degree, rel=1e-14)
    assert windowed_average_degree(s, 17, 17) == s.degree[16]
    assert windowed_average_degree(s, 10, 19) == pytest.approx(s.degree[9:19].mean(), rel=1e-15)
    for a, b in [(0, 5), (5, 4), (1, s.n_days + 1)]:
        with pytest.raises(ValidationError):
            windowed_average_degree(s, a, b)


def test_degree_envelope(factor_returns):
    s = topology_series(factor_returns, ThresholdPolicy.dynamic(factor_returns))
    lo, hi = degree_envelope(s)
    assert lo == np.quantile(s.degree, 0.05) and hi == np.quantile(s.degree, 0.95)
    blocks = degree_envelope(s, window=50)
    assert blocks.shape == (6, 2) and np.all(blocks[:, 0] <= blocks[:, 1])
    with pytest.raises(ValidationError):
        degree_envelope(s, lower=0.9, upper=0.1)


def test_ensemble_extremes(factor_returns):
    r = factor_returns
    n, t = r.n_stocks, r.n_days
    none = degree_ensemble(r, ThresholdPolicy("static", 1.0, q_static=1e9))
    assert none.as_dict() == {0: n * t}
    every = degree_ensemble(r, ThresholdPolicy("static", 1.0, q_static=-1e9))
    assert every.as_dict() == {n - 1: n * t}
    assert every.total == n * t and len(every.counts) == n


def test_ensemble_matches_naive(rng):
    r = random_returns(rng, n=9, t=14)
    pol = ThresholdPolicy.dynamic(r, 0.5)
    _, _, _, degs = naive.topology(r.values.tolist(), [threshold_at(pol, t) for t in range(1, 15)])
    flat = [k for day in degs for k in day]
    ens = degree_ensemble(r, pol)
    assert ens.as_dict() == {k: flat.count(k) for k in set(flat)}
    assert int(ens.counts.sum()) == 9 * 14
    assert ens.probabilities.sum() == pytest.approx(1.0, abs=1e-12)


def test_two_peaks_on_hand_histograms():
    def ens(counts):
        c = np.asarray(counts)
        return DegreeEnsemble(c, int(c.sum()))

    peaks = two_peaks(ens([50, 20, 5, 2, 8, 15, 9, 1]))
    assert (peaks.low_mode, peaks.trough, peaks.high_mode) == (0, 3, 5) and peaks.bimodal
    single = two_peaks(ens([50, 20, 5, 2, 1, 0, 0]))
    assert not single.bimodal and single.low_mode == 0
    assert two_peaks(ens([1, 3, 9, 3, 1])).low_mode == 2
    with pytest.raises(ValidationError):
        two_peaks(ens([1, 2]), smooth=2)


def test_factor_panel_dynamic_ensemble_is_bimodal():
    r = returns_from_panel(generate_panel(MarketSpec(30, 400, market_beta=1.0, seed=11)))
    peaks = two_peaks(degree_ensemble(r, ThresholdPolicy.dynamic(r)))
    assert peaks.low_mode == 0 and peaks.bimodal
    assert 0.35 * 30 <= peaks.high_mode <= 0.65 * 30


def test_output_files(factor_returns):
    s = topology_series(factor_returns, ThresholdPolicy.dynamic(factor_returns, 3.0))
    buf = io.StringIO()
    write_topology(s, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "t,C,K,r" and len(lines) == s.n_days + 1
    for t, line in enumerate(lines[1:], start=1):
        tt, c, k, r = line.split(",")
        assert int(tt) == t and float(c) == s.clustering[t - 1] and float(k) == s.degree[t - 1]
        assert (r == "") == bool(np.isnan(s.assortativity[t - 1]))
    ens = DegreeEnsemble.from_degrees(s.node_degrees)
    buf = io.StringIO()
    write_degree_histogram(ens, buf)
    rows = [x.split(",") for x in buf.getvalue().splitlines()]
    assert rows[0] == ["k", "count", "probability"]
    assert sum(int(c) for _, c, _ in rows[1:]) == ens.total
    assert abs(sum(float(p) for _, _, p in rows[1:]) - 1.0) <= 1e-9


def test_threshold_network_estimator(factor_returns):
    X = factor_returns.values.T
    est = ThresholdNetwork(kind="static", multiplier=1.5)
    out = est.fit_transform(X)
    ref = topology_series(normalize_returns(X.T), ThresholdPolicy.static(normalize_returns(X.T), 1.5))
    np.testing.assert_array_equal(out[:, 0], ref.clustering)
    np.testing.assert_array_equal(out[:, 1], ref.degree)
    assert list(est.get_feature_names_out()) == ["clustering", "degree", "assortativity"]
    assert est.get_params() == {"kind": "static", "multiplier": 1.5}
    twin = clone(est).set_params(kind="dynamic")
    assert twin.kind == "dynamic" and not hasattr(twin, "topology_")
