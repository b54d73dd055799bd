import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netscale.classify import AccuracyEstimate, EstimatorConfig
from netscale.graph import Graph
from netscale.perturb import PerturbationSpec, delta_grid
from netscale.scale import (
    CellFailure,
    ScanResult,
    accuracy_gap,
    aux_measures,
    build_report,
    intrinsic_scale,
    measure_correlations,
    pearson,
    read_scan_csv,
    render_report,
    render_scale_table,
    resilience,
    robustness,
    robustness_from_accuracy,
    run_scan,
    write_scan_csv,
)

from conftest import graph_from_nx

M = 1000


def _scan(kappas, columns, network="net", fail=()):
    """ScanResult from {delta: [accuracy per kappa]}; ``fail`` lists (kappa, delta) failures."""
    specs = [PerturbationSpec.fraction(d, M) for d in columns]
    grid = {}
    for spec, accs in zip(specs, columns.values()):
        for k, a in zip(kappas, accs):
            if (k, spec.delta) in fail:
                grid[(k, spec.label)] = CellFailure(k, spec, "boom")
            else:
                grid[(k, spec.label)] = AccuracyEstimate(k, spec, a, 0.01, 3, 100, "joint_feature_bayes")
    return ScanResult(network, list(kappas), specs, grid, {"m": M, "infinity_multiplier": 20}, 0)


# intrinsic scale


def test_kappa_star_first_crossing():
    scan = _scan([4, 8, 12], {math.inf: [0.6, 0.8, 0.96]})
    spec = scan.find_delta(math.inf)
    assert intrinsic_scale(scan, 0.95, spec) == 12
    assert intrinsic_scale(scan, 0.7, spec) == 8
    assert intrinsic_scale(scan, 0.6, spec) == 4


def test_kappa_star_threshold_reached_exactly():
    scan = _scan([4, 8], {math.inf: [0.69, 0.7]})
    assert intrinsic_scale(scan, 0.7, scan.find_delta(math.inf)) == 8


def test_kappa_star_beyond_grid():
    scan = _scan([4, 8, 12], {0.0: [0.5, 0.5, 0.5]})
    assert intrinsic_scale(scan, 0.7, scan.delta_grid[0]) is None


@pytest.mark.parametrize("tau", [0.5, 0.3, 1.0, 1.2])
def test_kappa_star_threshold_range(tau):
    scan = _scan([4], {math.inf: [0.9]})
    with pytest.raises(ValueError):
        intrinsic_scale(scan, tau, scan.delta_grid[0])


def test_kappa_star_unknown_delta():
    scan = _scan([4], {math.inf: [0.9]})
    with pytest.raises(KeyError):
        intrinsic_scale(scan, 0.9, PerturbationSpec.fraction(0.3, M))


def test_kappa_star_skips_failed_cells():
    scan = _scan([4, 8, 12], {math.inf: [0.99, 0.8, 0.99]}, fail={(4, math.inf)})
    assert intrinsic_scale(scan, 0.95, scan.delta_grid[0]) == 12


accuracy_lists = st.lists(st.floats(0.0, 1.0), min_size=1, max_size=8)


@given(accuracy_lists, st.floats(0.51, 0.99), st.floats(0.51, 0.99))
def test_kappa_star_monotone_in_tau(accs, t1, t2):
    lo, hi = sorted((t1, t2))
    kappas = [4 * (i + 1) for i in range(len(accs))]
    scan = _scan(kappas, {math.inf: accs})
    spec = scan.delta_grid[0]
    a, b = intrinsic_scale(scan, lo, spec), intrinsic_scale(scan, hi, spec)
    if b is not None:
        assert a is not None and a <= b
    if a is not None:
        assert accs[kappas.index(a)] >= lo
        assert all(x < lo for x in accs[: kappas.index(a)])


def test_scan_requires_increasing_kappa():
    with pytest.raises(ValueError):
        ScanResult("x", [8, 4], [], {})


# robustness, resilience, gap


@pytest.mark.parametrize(
    "acc, gamma", [(0.6, 2.302585092994046), (1.0, 0.6931471805599453), (0.75, 1.3862943611198906)]
)
def test_robustness_values(acc, gamma):
    assert robustness_from_accuracy(acc) == pytest.approx(gamma, rel=1e-12)


@pytest.mark.parametrize("acc", [0.5, 0.49, 0.0])
def test_robustness_at_or_below_chance(acc):
    assert robustness_from_accuracy(acc) is None


def test_robustness_reads_ten_percent_column():
    scan = _scan([4, 8], {0.1: [0.6, 0.7], math.inf: [0.9, 0.99]})
    assert robustness(scan, 8) == pytest.approx(-math.log(0.2))
    with pytest.raises(KeyError):
        robustness(_scan([4], {math.inf: [0.9]}), 4)


@given(st.floats(0.5000001, 1.0))
def test_robustness_positive_and_decreasing(acc):
    g = robustness_from_accuracy(acc)
    assert g >= math.log(2) - 1e-12
    assert robustness_from_accuracy(min(1.0, acc + 0.01)) <= g


@pytest.mark.parametrize("d", [2, 3, 6])
def test_resilience_regular(d):
    g = graph_from_nx(nx.random_regular_graph(d, 20, seed=1))
    assert resilience(g) == pytest.approx(d)


def test_resilience_star():
    star = Graph(5, [[0, 1], [0, 2], [0, 3], [0, 4]])
    assert resilience(star) == pytest.approx(20 / 8)
    big = graph_from_nx(nx.star_graph(999))
    assert resilience(big) == pytest.approx((999**2 + 999) / (2 * 999))


def test_resilience_edgeless():
    with pytest.raises(ValueError):
        resilience(Graph(4, np.empty((0, 2))))


@given(st.lists(st.tuples(st.integers(0, 9), st.integers(0, 9)).filter(lambda e: e[0] != e[1]), min_size=1))
def test_resilience_at_least_average_degree(edges):
    g = Graph(10, edges)
    assert resilience(g) >= 2 * g.m / g.n - 1e-12


@pytest.mark.parametrize("best, gap", [(0.9983, 0.0017), (1.0, 0.0), (0.9942, 0.0058)])
def test_accuracy_gap(best, gap):
    scan = _scan([4, 8, 12], {math.inf: [0.7, best, 0.9]})
    assert accuracy_gap(scan) == pytest.approx(gap, abs=1e-12)


@given(accuracy_lists)
def test_accuracy_gap_range(accs):
    scan = _scan([4 * (i + 1) for i in range(len(accs))], {math.inf: accs})
    assert 0.0 <= accuracy_gap(scan) <= 1.0


def test_accuracy_gap_needs_infinite_column():
    with pytest.raises(KeyError):
        accuracy_gap(_scan([4], {0.1: [0.9]}))


# auxiliary measures


def test_aux_path_of_three():
    aux = aux_measures(Graph(3, [[0, 1], [1, 2]]), pair_fraction=1.0)
    assert aux.avg_degree == pytest.approx(4 / 3)
    assert aux.avg_path_length == pytest.approx(4 / 3)
    assert aux.diameter_est == 2


def test_aux_complete_graph():
    aux = aux_measures(graph_from_nx(nx.complete_graph(5)), pair_fraction=1.0)
    assert aux.avg_path_length == 1.0 and aux.diameter_est == 1
    assert aux.avg_degree == 4.0


def test_aux_uses_largest_component():
    G = nx.disjoint_union(nx.path_graph(10), nx.path_graph(3))
    aux = aux_measures(graph_from_nx(G), pair_fraction=1.0)
    assert aux.diameter_est == 9
    assert aux.component_fraction == pytest.approx(10 / 13)
    ref = nx.average_shortest_path_length(nx.path_graph(10))
    assert aux.avg_path_length == pytest.approx(ref)


def test_aux_sampled_path_length_near_exact():
    G = nx.connected_watts_strogatz_graph(400, 6, 0.1, seed=3)
    aux = aux_measures(graph_from_nx(G), pair_fraction=0.2, seed=1)
    assert aux.avg_path_length == pytest.approx(nx.average_shortest_path_length(G), rel=0.05)
    assert aux.diameter_est <= nx.diameter(G)


def test_aux_single_vertex_component():
    with pytest.raises(ValueError):
        aux_measures(Graph(3, np.empty((0, 2))))


# pearson


def test_pearson_examples():
    assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
    assert pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    assert pearson([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8)


def test_pearson_constant_input():
    with pytest.raises(ValueError):
        pearson([1, 1, 1], [1, 2, 3])
    with pytest.raises(ValueError):
        pearson([1], [2])


# intrinsic scale against neighborhood and distance measures for twelve networks
TWELVE_NETWORKS = {
    "kappa": [7, 10, 10, 12, 12, 12, 13, 14, 17, 20, 20, 20],
    "cluster_size": [5.95, 82.42, 12.26, 10.88, 8.47, 48.45, 9.77, 19.08, 17.65, 7.68, 18.56, 199.65],
    "avg_degree": [2.83, 43.7, 6.46, 5.53, 5.58, 24.4, 6.62, 11.7, 9.67, 2.86, 16.9, 52.1],
    "avg_path_length": [308.91, 3.83, 4.25, 11.97, 3.5, 4.36, 6.79, 6.34, 4.62, 4.86, 3.28, 2.55],
    "diameter": [753, 7, 7, 31, 4, 10, 15, 16, 11, 10, 6, 4],
}


@pytest.mark.parametrize(
    "measure, r",
    [("cluster_size", 0.3266), ("avg_degree", 0.2257), ("avg_path_length", -0.5047), ("diameter", -0.5043)],
)
def test_pearson_on_twelve_network_table(measure, r):
    assert pearson(TWELVE_NETWORKS["kappa"], TWELVE_NETWORKS[measure]) == pytest.approx(r, abs=5e-5)


pairs = st.integers(3, 20).flatmap(
    lambda n: st.tuples(*(st.lists(st.floats(-1e3, 1e3), min_size=n, max_size=n) for _ in range(2)))
)


@given(pairs)
def test_pearson_symmetric_and_bounded(xy):
    x, y = xy
    try:
        r = pearson(x, y)
    except ValueError:
        return
    assert -1.0 <= r <= 1.0
    assert pearson(y, x) == pytest.approx(r, abs=1e-9)


def test_measure_correlations_skips_beyond_grid():
    reports = []
    for i, (k, cs) in enumerate([(4, 1.0), (8, 2.0), (12, 3.5), (None, 100.0)]):
        accs = [0.99 if k is not None and kk >= k else 0.6 for kk in (4, 8, 12)]
        rep = build_report(_scan([4, 8, 12], {math.inf: accs}, f"n{i}"), taus=(0.95,))
        rep.aux = aux_measures(graph_from_nx(nx.path_graph(5 + i)), pair_fraction=1.0, cluster_size=cs)
        reports.append(rep)
    corr = measure_correlations(reports, 0.95)
    assert corr["cluster_size"] == pytest.approx(pearson([4, 8, 12], [1.0, 2.0, 3.5]))
    assert reports[0].correlations == corr


# reports and tables


def test_report_is_deterministic():
    scan = _scan([4, 8], {0.1: [0.55, 0.8], math.inf: [0.9, 0.97]})
    g = graph_from_nx(nx.cycle_graph(9))
    a = render_report(build_report(scan, g, aux=aux_measures(g, pair_fraction=1.0)))
    b = render_report(build_report(scan, g, aux=aux_measures(g, pair_fraction=1.0)))
    assert a == b
    assert "kappa_star[tau=0.95,delta=inf] = 8" in a
    assert "kappa_star[tau=0.95,delta=0.1] = *" in a
    assert "resilience_beta = 2.0" in a


def test_report_zero_column_is_beyond_grid():
    scan = _scan([4, 8], {0.0: [0.5, 0.49], math.inf: [0.9, 0.97]})
    rep = build_report(scan)
    assert all(rep.kappa_star[(t, "0.0")] is None for t in rep.taus)


def test_report_lists_failed_cells():
    scan = _scan([4, 8], {math.inf: [0.9, 0.97]}, fail={(4, math.inf)})
    text = render_report(build_report(scan))
    assert "failed_cell = kappa=4 delta=inf: boom" in text


def test_scale_table_layout():
    a = build_report(_scan([4, 8], {0.1: [0.6, 0.96], math.inf: [0.9, 0.97]}, "alpha"), taus=(0.95,))
    b = build_report(_scan([4, 8], {0.1: [0.5, 0.5], math.inf: [0.96, 0.97]}, "beta"), taus=(0.95,))
    lines = render_scale_table([a, b]).splitlines()
    assert "10%" in lines[1] and "inf" in lines[1]
    assert lines[2].split() == ["alpha", "|", "8", "|", "8"]
    assert lines[3].split() == ["beta", "|", "*", "|", "4"]


# scan CSV


def test_scan_csv_round_trip(tmp_path):
    scan = _scan([4, 8, 16], {0.1: [0.55, 0.6, 0.7], 0.5: [0.6, 0.7, 0.8], math.inf: [0.7, 0.9, 0.99]})
    write_scan_csv(scan, tmp_path / "s.csv")
    back = read_scan_csv(tmp_path / "s.csv")
    assert back.kappa_grid == scan.kappa_grid
    assert [s.label for s in back.delta_grid] == [s.label for s in scan.delta_grid]
    for spec in scan.delta_grid:
        assert back.find_delta(spec.delta).swap_count == spec.swap_count
        for (k, a), (k2, b) in zip(scan.column(spec), back.column(back.find_delta(spec.delta))):
            assert k == k2 and a.accuracy_mean == b.accuracy_mean and a.accuracy_std == b.accuracy_std
    assert render_report(build_report(back)).split("config.")[0] == render_report(build_report(scan)).split(
        "config."
    )[0]


def test_scan_csv_failed_cells(tmp_path):
    scan = _scan([4, 8], {math.inf: [0.9, 0.97]}, fail={(8, math.inf)})
    write_scan_csv(scan, tmp_path / "s.csv")
    text = (tmp_path / "s.csv").read_text()
    assert "# failed kappa=8 delta=inf: boom" in text
    back = read_scan_csv(tmp_path / "s.csv")
    assert [c.kappa for c in back.failed_cells] == [8]


def test_scan_csv_rejects_foreign_header(tmp_path):
    (tmp_path / "x.csv").write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_scan_csv(tmp_path / "x.csv")


# run_scan


def _clustered():
    return graph_from_nx(nx.powerlaw_cluster_graph(300, 3, 0.6, seed=5))


def test_run_scan_cache_and_parallel_agree(tmp_path):
    g = _clustered()
    specs = delta_grid(g.m, [0.0, 0.5], True, 20)
    cfg = EstimatorConfig(samples_per_class=300, repeats=2)
    seen = []
    first = run_scan(g, [4, 6], specs, cfg, seed=1, cache_dir=tmp_path, on_cell=seen.append)
    assert len(seen) == 6 and not first.failed_cells
    assert len(list((tmp_path / "cells").glob("*.json"))) == 6

    def forbidden(*_):
        raise AssertionError("cached cell was recomputed")

    again = run_scan(g, [4, 6], specs, cfg, seed=1, cache_dir=tmp_path, perturb_fn=forbidden)
    par = run_scan(g, [4, 6], specs, cfg, seed=1, jobs=2)
    for spec in specs:
        means = [e.accuracy_mean for _, e in first.column(spec)]
        assert means == [e.accuracy_mean for _, e in again.column(spec)]
        assert means == [e.accuracy_mean for _, e in par.column(spec)]
    zero = specs[0]
    assert all(abs(e.accuracy_mean - 0.5) < 0.1 for _, e in first.column(zero))
    assert build_report(first).kappa_star[(0.95, zero.label)] is None


def test_run_scan_records_failures_and_continues():
    g = _clustered()
    specs = delta_grid(g.m, [0.1], False)

    def flaky(graph, spec, seed):
        raise RuntimeError("no swaps today")

    scan = run_scan(g, [4, 6], specs, EstimatorConfig(samples_per_class=50, repeats=1), perturb_fn=flaky)
    assert len(scan.failed_cells) == 2
    assert "no swaps today" in scan.failed_cells[0].message


def test_run_scan_rejects_empty_grids():
    with pytest.raises(ValueError):
        run_scan(_clustered(), [], delta_grid(10, [0.1]))


@settings(max_examples=10)
@given(st.lists(st.sampled_from([0.55, 0.7, 0.8, 0.92, 0.97]), min_size=2, max_size=5))
def test_report_kappa_star_consistent_with_columns(accs):
    kappas = [4 * (i + 1) for i in range(len(accs))]
    rep = build_report(_scan(kappas, {math.inf: accs}))
    for tau in rep.taus:
        k = rep.kappa_star[(tau, "inf")]
        expected = next((kk for kk, a in zip(kappas, accs) if a >= tau), None)
        assert k == expected
