import csv
import itertools
import random
from collections import deque
from fractions import Fraction

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netscale.features import (
    FEATURE_NAMES,
    SignatureImage,
    avg_neighbor_degree,
    canonical_order,
    clustering_coefficient,
    feature_matrix,
    feature_vector,
    mean_signature,
    signature_image,
    signature_stack,
    write_feature_csv,
    write_pgm,
)
from netscale.graph import Graph
from netscale.sampler import SubgraphSample, sample_many
from netscale.seeding import derive_seeds32

from conftest import graph_from_nx, sample_from_edges


def _reference_order(adj: np.ndarray):
    """Degree-preferring BFS written from the rule; also reports whether any degree tie was broken."""
    k = adj.shape[0]
    deg = adj.sum(axis=1).astype(int)
    top = deg.max()
    roots = [v for v in range(k) if deg[v] == top]
    tied = len(roots) > 1
    order, seen, queue = [roots[0]], {roots[0]}, deque([roots[0]])
    while queue:
        v = queue.popleft()
        fresh = [w for w in range(k) if adj[v, w] and w not in seen]
        fresh.sort(key=lambda w: (-deg[w], w))
        if len({deg[w] for w in fresh}) < len(fresh):
            tied = True
        for w in fresh:
            seen.add(w)
            order.append(w)
            queue.append(w)
    return order, tied


def _relabel(s: SubgraphSample, perm) -> SubgraphSample:
    perm = np.asarray(perm)
    return SubgraphSample(s.vertices[perm], s.counts[np.ix_(perm, perm)], s.label)


@st.composite
def connected_samples(draw, max_k=9):
    k = draw(st.integers(2, max_k))
    # random spanning tree plus random extra edges keeps the sample connected
    edges = [(draw(st.integers(0, i - 1)), i) for i in range(1, k)]
    extra = draw(st.lists(st.tuples(st.integers(0, k - 1), st.integers(0, k - 1)), max_size=2 * k))
    edges += [(a, b) for a, b in extra if a != b]
    return sample_from_edges(edges, k)


# canonical order


def test_star_center_first():
    s = sample_from_edges([(1, 0), (1, 2), (1, 3), (1, 4)])
    order = canonical_order(s).tolist()
    assert order[0] == 1 and sorted(order[1:]) == [0, 2, 3, 4]
    assert order == [1, 0, 2, 3, 4]


def test_path_middle_first_then_visit_order():
    s = sample_from_edges([(0, 1), (1, 2)])
    assert canonical_order(s).tolist() == [1, 0, 2]


def test_tie_rules_by_hand():
    # root 2 (degree 3); its neighbors 0,1 (degree 2) before 3 (degree 1); 0 < 1 by visit index
    s = sample_from_edges([(2, 0), (2, 1), (2, 3), (0, 4), (1, 5)])
    assert canonical_order(s).tolist() == [2, 0, 1, 3, 4, 5]
    # root tie: vertices 0 and 3 both have degree 2 in the path 1-0-3-2 -> earliest visited wins
    s = sample_from_edges([(1, 0), (0, 3), (3, 2)])
    assert canonical_order(s).tolist()[0] == 0


def test_children_of_earlier_parent_come_first():
    # 0 is root; 1 (deg 2) precedes 2 (deg 2); the leaf 4 under 2 has larger degree than leaf 3
    # under 1, but BFS keeps parent order
    s = sample_from_edges([(0, 1), (0, 2), (0, 5), (1, 3), (2, 4), (4, 6), (4, 7)])
    assert canonical_order(s).tolist() == [0, 1, 2, 5, 3, 4, 6, 7]


@given(connected_samples())
@settings(max_examples=300)
def test_kernel_matches_reference(s):
    ref, _ = _reference_order(s.simple)
    assert canonical_order(s).tolist() == ref


def _tie_order_preserving_perm(deg, rng: random.Random):
    """Random relabeling that keeps the relative order of vertices sharing a degree."""
    slots = list(deg)
    rng.shuffle(slots)
    pools = {d: [v for v in range(len(deg)) if deg[v] == d] for d in set(deg)}
    return [pools[d].pop(0) for d in slots]


@given(connected_samples())
@settings(max_examples=200)
def test_canonical_image_invariant_when_tie_order_is_kept(s):
    # every connected graph on 4..7 vertices breaks at least one degree tie, so
    # invariance is checked for relabelings that leave those tie-breaks intact
    rng = random.Random(int(s.counts.sum()))
    deg = s.simple.sum(axis=1).astype(int).tolist()
    base = signature_image(s).pixels
    for _ in range(10):
        perm = _tie_order_preserving_perm(deg, rng)
        assert np.array_equal(signature_image(_relabel(s, perm)).pixels, base)


@pytest.mark.parametrize(
    "G", [nx.star_graph(5), nx.cycle_graph(7), nx.complete_graph(6)], ids=str
)
def test_canonical_image_invariant_when_ties_are_symmetric(G):
    rng = random.Random(1)
    s = sample_from_edges(G.edges(), G.number_of_nodes())
    base = signature_image(s).pixels
    for _ in range(50):
        perm = list(range(s.kappa))
        rng.shuffle(perm)
        assert np.array_equal(signature_image(_relabel(s, perm)).pixels, base)


def test_disconnected_subgraph_is_rejected():
    s = sample_from_edges([(0, 1), (2, 3)])
    with pytest.raises(ValueError):
        canonical_order(s)
    with pytest.raises(ValueError):
        signature_stack([s])


# signature images


def test_triangle_image():
    img = signature_image(sample_from_edges([(0, 1), (1, 2), (2, 0)]))
    assert img.pixels.tolist() == [[0, 1, 1], [1, 0, 1], [1, 1, 0]]


def test_path_image_row_sums():
    k = 7
    img = signature_image(sample_from_edges([(i, i + 1) for i in range(k - 1)]))
    assert sorted(img.pixels.sum(axis=1).tolist()) == [1, 1] + [2] * (k - 2)


def test_parallel_edges_collapse_in_image():
    single = signature_image(sample_from_edges([(0, 1)]))
    double = signature_image(sample_from_edges([(0, 1), (0, 1)]))
    assert np.array_equal(single.pixels, double.pixels)
    assert single.key() == double.key()


@given(connected_samples())
@settings(max_examples=200)
def test_image_invariants(s):
    img = signature_image(s)
    order = canonical_order(s)
    px = img.pixels
    assert np.array_equal(px, px.T) and not px.diagonal().any()
    assert px.sum(axis=1).tolist() == s.simple.sum(axis=1)[order].tolist()
    assert int(np.triu(px, 1).sum()) == int(np.triu(s.simple, 1).sum())
    assert np.array_equal(signature_stack([s, s])[1], px)


def test_image_keys_separate_shapes():
    a = signature_image(sample_from_edges([(0, 1), (1, 2), (2, 3)]))
    b = signature_image(sample_from_edges([(0, 1), (0, 2), (0, 3)]))
    assert a.key() != b.key()


# clustering and neighbor degree


def _brute_clustering(G: nx.Graph) -> Fraction:
    total = Fraction(0)
    for v in G:
        nb = list(G[v])
        if len(nb) < 2:
            continue
        closed = sum(1 for a, b in itertools.combinations(nb, 2) if G.has_edge(a, b))
        total += Fraction(closed, len(nb) * (len(nb) - 1) // 2)
    return total / G.number_of_nodes()


def test_clustering_examples():
    assert clustering_coefficient(Graph(3, [[0, 1], [1, 2], [2, 0]])) == 1.0
    assert clustering_coefficient(Graph(4, [[0, 1], [0, 2], [0, 3]])) == 0.0


def test_clustering_k4_minus_edge():
    K = nx.complete_graph(4)
    K.remove_edge(0, 1)
    # degree-3 vertices close 2 of 3 pairs, degree-2 vertices close their only pair
    assert _brute_clustering(K) == Fraction(5, 6)
    assert clustering_coefficient(graph_from_nx(K)) == pytest.approx(5 / 6, abs=1e-12)
    assert nx.average_clustering(K) == pytest.approx(5 / 6)


def test_neighbor_degree_examples():
    assert avg_neighbor_degree(graph_from_nx(nx.random_regular_graph(4, 12, seed=1))) == pytest.approx(4.0)
    assert avg_neighbor_degree(Graph(4, [[0, 1], [0, 2], [0, 3]])) == pytest.approx(2.5)
    assert avg_neighbor_degree(Graph(3, [[0, 1], [1, 2]])) == pytest.approx(5 / 3)
    assert avg_neighbor_degree(Graph(3, np.empty((0, 2)))) == 0.0


def test_features_match_brute_force_on_random_graphs():
    rng = random.Random(7)
    for trial in range(1000):
        n = rng.randint(1, 12)
        G = nx.gnp_random_graph(n, rng.uniform(0.0, 0.8), seed=trial)
        g = Graph.from_edges(list(G.edges()), n=n)
        assert clustering_coefficient(g) == pytest.approx(float(_brute_clustering(G)), abs=1e-12)
        nbr = nx.average_neighbor_degree(G)
        active = [v for v in G if G.degree(v) > 0]
        expected = sum(nbr[v] for v in active) / len(active) if active else 0.0
        assert avg_neighbor_degree(g) == pytest.approx(expected, abs=1e-12)


def test_parallel_edges_do_not_change_features():
    g = Graph(3, [[0, 1], [0, 1], [1, 2], [2, 0]])
    assert clustering_coefficient(g) == 1.0
    assert avg_neighbor_degree(g) == 2.0


# feature vectors


def test_clique_features():
    k = 6
    fv = feature_vector(sample_from_edges(itertools.combinations(range(k), 2), k))
    assert (fv.clustering_C, fv.edge_density, fv.max_degree_norm) == (1.0, 1.0, 1.0)
    assert fv.neighbor_degree_r == k - 1
    assert fv.connected == 1 and fv.component_count_norm == 1 / k


def test_path_features():
    k = 8
    fv = feature_vector(sample_from_edges([(i, i + 1) for i in range(k - 1)], k))
    assert fv.clustering_C == 0.0
    assert fv.edge_density == pytest.approx(2 / k)
    assert fv.max_degree_norm == pytest.approx(2 / (k - 1))


def test_component_features_on_split_graph():
    fv = feature_vector(sample_from_edges([(0, 1), (2, 3)], 5))
    assert fv.connected == 0
    assert fv.component_count_norm == pytest.approx(3 / 5)


def test_walk_samples_are_connected_features():
    g = graph_from_nx(nx.barabasi_albert_graph(300, 2, seed=0))
    x = feature_matrix(sample_many(g, 10, derive_seeds32(1, "f", count=500)))
    assert np.all(x[:, FEATURE_NAMES.index("connected")] == 1)
    assert np.all(np.isfinite(x))
    assert np.all((x[:, 0] >= 0) & (x[:, 0] <= 1) & (x[:, 3] >= 0) & (x[:, 3] <= 1))


@given(connected_samples())
@settings(max_examples=200)
def test_batched_features_agree_with_graph_functions(s):
    row = feature_matrix([s])[0]
    sub = s.subgraph
    assert row[0] == pytest.approx(clustering_coefficient(sub), abs=1e-12)
    assert row[1] == pytest.approx(avg_neighbor_degree(sub), abs=1e-12)
    assert row[2] == 1.0


def test_feature_matrix_rejects_mixed_sizes():
    with pytest.raises(ValueError):
        feature_matrix([sample_from_edges([(0, 1)]), sample_from_edges([(0, 1), (1, 2)])])
    assert feature_matrix([]).shape == (0, len(FEATURE_NAMES))


# mean signatures and export


def test_mean_of_one_image_is_itself():
    img = signature_image(sample_from_edges([(0, 1), (1, 2)]))
    assert np.array_equal(mean_signature([img]).pixels, img.pixels)


def test_mean_of_image_and_complement():
    k = 5
    px = np.zeros((k, k), dtype=np.uint8)
    px[0, 1:] = px[1:, 0] = 1
    comp = (1 - px) * (1 - np.eye(k, dtype=np.uint8))
    m = mean_signature([SignatureImage(k, px), SignatureImage(k, comp)]).pixels
    off = ~np.eye(k, dtype=bool)
    assert np.all(m[off] == 0.5) and np.all(np.diag(m) == 0)


def test_mean_signature_errors():
    with pytest.raises(ValueError):
        mean_signature([])
    with pytest.raises(ValueError):
        mean_signature([SignatureImage(2, np.zeros((2, 2))), SignatureImage(3, np.zeros((3, 3)))])


def test_facebook_mean_signatures_move_under_randomization(facebook):
    from netscale.perturb import PerturbationSpec, perturb

    gd, _ = perturb(facebook, PerturbationSpec.infinity(facebook.m), seed=1)

    def mean(g, tag):
        return mean_signature(signature_stack(sample_many(g, 64, derive_seeds32(0, tag, count=5000)))).pixels

    base, again, rand = mean(facebook, "a"), mean(facebook, "b"), mean(gd, "c")
    assert np.abs(base - rand).sum() > np.abs(base - again).sum()


def test_pgm_output(tmp_path):
    sig = mean_signature(np.array([[[0, 1], [1, 0]], [[0, 0], [0, 0]]], dtype=np.uint8))
    path = tmp_path / "m.pgm"
    write_pgm(sig, path, ["seed=1"])
    data = path.read_bytes()
    head = b"P5\n# seed=1\n2 2\n255\n"
    assert data.startswith(head)
    assert list(data[len(head):]) == [255, 128, 128, 255]


def test_feature_csv(tmp_path):
    samples = [sample_from_edges([(0, 1), (1, 2)]), sample_from_edges([(0, 1), (1, 2), (2, 0)])]
    write_feature_csv(samples, tmp_path / "f.csv")
    rows = list(csv.reader(open(tmp_path / "f.csv")))
    assert rows[0] == ["label", "C", "r", "connected", "density", "maxdeg", "comps"]
    assert float(rows[2][1]) == 1.0 and len(rows) == 3
