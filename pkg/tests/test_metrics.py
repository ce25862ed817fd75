import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reebgw.fixtures import quadrant_example
from reebgw.graph import GraphError, ScalarGraph, random_graph
from reebgw.metrics import (DistanceMatrix, MetricKind, distance_matrix, max_sym_reeb_radius,
                            reeb_distance, reeb_radius, shortest_path, sym_reeb_radius)
from oracles import path_metrics
from strategies import graphs

PATH = ScalarGraph.from_values({"v0": 0, "v1": 1, "v2": 3}, [("v0", "v1"), ("v1", "v2")])
# centre c with three leaves
Y = ScalarGraph.from_values({"c": 1, "l0": 0, "l2": 2, "l5": 5},
                            [("c", "l0"), ("c", "l2"), ("c", "l5")])


@pytest.mark.parametrize("fn", [reeb_radius, sym_reeb_radius, max_sym_reeb_radius,
                                reeb_distance, shortest_path])
def test_zero_on_diagonal(fn):
    for v in PATH.ids:
        assert fn(PATH, v, v) == 0.0


def test_path_graph_values():
    assert reeb_radius(PATH, "v0", "v2") == 3
    assert reeb_radius(PATH, "v2", "v0") == 3
    assert sym_reeb_radius(PATH, "v0", "v2") == 3
    assert reeb_distance(PATH, "v0", "v2") == 3
    assert shortest_path(PATH, "v0", "v2") == 3
    M = distance_matrix(PATH, "sym-reeb-radius").values
    assert M.tolist() == [[0, 1, 3], [1, 0, 2], [3, 2, 0]]


def test_y_graph_values():
    assert reeb_radius(Y, "l0", "l5") == 5
    assert reeb_radius(Y, "l0", "l2") == 2
    assert reeb_radius(Y, "l2", "l0") == 2
    assert max_sym_reeb_radius(Y, "l0", "l2") == 2


def test_reeb_radius_is_asymmetric_on_quadrant_example():
    g = quadrant_example()
    # the best route from v11 dips to v8; from v10 it never leaves [8, 11]
    assert reeb_radius(g, "v11", "v10") == 11 - 8
    assert reeb_radius(g, "v10", "v11") == 2
    assert not distance_matrix(g, "reeb-radius").is_symmetric
    assert shortest_path(g, "v11", "v10") == (11 - 9) + (9 - 8) + (10 - 8)


def test_reeb_distance_identity_failure():
    # a tied edge: distinct nodes at Reeb distance 0
    g = ScalarGraph.from_values({"a": 0, "b": 0, "c": 2}, [("a", "b"), ("b", "c")])
    assert reeb_distance(g, "a", "b") == 0.0
    # two different pairs spanning the same range get the same value
    h = ScalarGraph.from_values({"a": 0, "b": 3, "c": 1, "d": 4}, [("a", "b"), ("b", "c"), ("c", "d")])
    assert reeb_distance(h, "a", "b") == reeb_distance(h, "c", "d") == 3


def test_zigzag_detour_changes_only_shortest_path():
    # replace edge v1-v2 by a chain whose values wander inside [1, 3]
    noisy = ScalarGraph.from_values(
        {"v0": 0, "v1": 1, "z1": 2.5, "z2": 1.5, "z3": 2.75, "v2": 3},
        [("v0", "v1"), ("v1", "z1"), ("z1", "z2"), ("z2", "z3"), ("z3", "v2")])
    for a in PATH.ids:
        for b in PATH.ids:
            assert sym_reeb_radius(noisy, a, b) == sym_reeb_radius(PATH, a, b)
    assert shortest_path(noisy, "v0", "v2") > shortest_path(PATH, "v0", "v2")


@settings(max_examples=200)
@given(graphs(min_nodes=2, max_nodes=10, max_extra=3), st.data())
def test_monotone_subdivision(g, data):
    # interpolated subdivision points leave both metrics unchanged on old nodes
    a, b = g.edges[data.draw(st.integers(0, g.n_edges - 1))]
    t = data.draw(st.floats(0.05, 0.95))
    fa, fb = g.value(a), g.value(b)
    values = dict(g.nodes)
    values["zz"] = fa + t * (fb - fa)
    edges = [e for e in g.edges if e != (a, b)] + [(a, "zz"), ("zz", b)]
    h = ScalarGraph.from_values(values, edges)
    idx = [h.index_of[i] for i in g.ids]
    for kind in ("sym-reeb-radius", "shortest-path"):
        Dg = distance_matrix(g, kind).values
        Dh = distance_matrix(h, kind).values[np.ix_(idx, idx)]
        assert np.allclose(Dg, Dh, atol=1e-12)


def test_unknown_node_and_disconnected():
    with pytest.raises(GraphError, match="unknown node"):
        reeb_radius(PATH, "v0", "nope")
    bad = ScalarGraph.from_values({"a": 0, "b": 1}, [])
    with pytest.raises(GraphError, match="disconnected"):
        distance_matrix(bad)


def test_single_node_matrix():
    g = ScalarGraph.from_values({"a": 4.0})
    for kind in MetricKind:
        assert distance_matrix(g, kind).values.tolist() == [[0.0]]


@pytest.mark.parametrize("kind", list(MetricKind))
def test_matches_path_enumeration_exactly(kind):
    rng = np.random.default_rng(7)
    for _ in range(25):
        g = random_graph(rng, int(rng.integers(1, 9)), int(rng.integers(0, 5)), integer_values=True)
        expected = path_metrics(g)[kind.value]
        assert np.array_equal(distance_matrix(g, kind).values, expected)


@settings(max_examples=60)
@given(graphs(max_nodes=8, max_extra=4))
def test_matches_path_enumeration_real_values(g):
    oracle = path_metrics(g)
    for kind in MetricKind:
        assert np.allclose(distance_matrix(g, kind).values, oracle[kind.value], rtol=0, atol=1e-12)


def check_metric_axioms(D: np.ndarray, tol: float = 1e-9) -> None:
    n = len(D)
    assert np.all(D >= -tol)
    assert np.allclose(D, D.T, atol=tol)
    off = D[~np.eye(n, dtype=bool)]
    assert np.all(off > tol)
    assert np.all(np.diag(D) == 0)
    # D[i,k] <= D[i,j] + D[j,k] for all triples
    assert np.all(D[:, None, :] <= D[:, :, None] + D[None, :, :] + tol)


@settings(max_examples=100)
@given(graphs(min_nodes=5, max_nodes=20, max_extra=6))
def test_sym_reeb_radius_is_a_metric(g):
    check_metric_axioms(distance_matrix(g, "sym-reeb-radius").values)


@settings(max_examples=100)
@given(graphs(min_nodes=2, max_nodes=20, max_extra=6))
def test_reeb_radius_triangle_inequality(g):
    R = distance_matrix(g, "reeb-radius").values
    assert np.all(R[:, None, :] <= R[:, :, None] + R[None, :, :] + 1e-9)


@settings(max_examples=100)
@given(graphs(min_nodes=2, max_nodes=15), st.floats(0, 0.5), st.integers(0, 2**32 - 1))
def test_perturbation_bound(g, eps, seed):
    delta = np.random.default_rng(seed).uniform(-eps, eps, g.n_nodes)
    D0 = distance_matrix(g, "sym-reeb-radius").values
    D1 = distance_matrix(g.with_values(g.f + delta), "sym-reeb-radius").values
    assert np.abs(D1 - D0).max() <= 2 * np.abs(delta).max() + 1e-12


@settings(max_examples=50)
@given(graphs(min_nodes=2, max_nodes=12))
def test_max_sym_dominates_sym(g):
    assert np.all(distance_matrix(g, "max-sym-reeb-radius").values
                  >= distance_matrix(g, "sym-reeb-radius").values)


def test_threads_bit_identical():
    g = random_graph(np.random.default_rng(3), 40, 10)
    for kind in MetricKind:
        a = distance_matrix(g, kind, threads=1).values
        b = distance_matrix(g, kind, threads=4).values
        assert a.tobytes() == b.tobytes()


def test_csv_round_trip():
    g = random_graph(np.random.default_rng(1), 6, 2)
    D = distance_matrix(g)
    E = DistanceMatrix.from_csv(D.to_csv())
    assert E.ids == D.ids and np.array_equal(E.values, D.values)
    assert D.to_csv().splitlines()[0] == "node," + ",".join(g.ids)


def test_non_generic_warns():
    g = ScalarGraph.from_values({"a": 0, "b": 0, "c": 1}, [("a", "c"), ("b", "c")])
    with pytest.warns(UserWarning, match="non-generic"):
        distance_matrix(g, "sym-reeb-radius")
