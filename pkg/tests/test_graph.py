import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from quadformation.graph import (
    CommGraph,
    GraphError,
    h_matrix,
    is_connected,
    laplacian,
    min_eigenvalue,
    validate_graph,
)


def closure(n, edges):
    """Reachability oracle: boolean transitive closure by repeated squaring."""
    reach = np.eye(n, dtype=bool)
    for i, j in edges:
        reach[i, j] = reach[j, i] = True
    for _ in range(n):
        reach = (reach.astype(int) @ reach.astype(int)) > 0
    return reach


def reachable_all(n, edges):
    return bool(closure(n, edges).all())


def every_component_hears_leader(n, edges, links):
    reach = closure(n, edges)
    return all(any(links[j] for j in range(n) if reach[i, j]) for i in range(n))


def all_graphs(n):
    pairs = list(itertools.combinations(range(n), 2))
    for mask in range(1 << len(pairs)):
        yield [p for k, p in enumerate(pairs) if mask >> k & 1]


def test_two_node_laplacian():
    assert np.array_equal(laplacian(CommGraph(2, [(0, 1)], [0, 0])), [[1, -1], [-1, 1]])


def test_ring_laplacian_spectrum():
    g = CommGraph.ring(4)
    a = g.adjacency
    assert np.array_equal(laplacian(g), 2 * np.eye(4) - a)
    assert np.allclose(np.sort(np.linalg.eigvalsh(laplacian(g))), [0, 2, 2, 4], atol=1e-12)


def test_edgeless_laplacian_is_zero():
    assert not laplacian(CommGraph(3, [], [1, 0, 0])).any()


def test_h_matrix_two_nodes():
    assert np.array_equal(h_matrix(CommGraph(2, [(0, 1)], [1, 0])), [[2, -1], [-1, 1]])


def test_ring_h_spectrum_against_characteristic_polynomial():
    # det(H - l I) = (l - 2)(l^3 - 7 l^2 + 12 l - 2) for the ring with one leader link
    expected = np.sort(np.append(np.roots([1, -7, 12, -2]).real, 2.0))
    got = np.linalg.eigvalsh(h_matrix(CommGraph.ring(4, [1, 0, 0, 0])))
    assert np.allclose(got, expected, atol=1e-12)
    assert got[0] == pytest.approx(0.18639, abs=1e-5)


def test_no_leader_link_gives_h_equal_l():
    g = CommGraph.ring(4, [0, 0, 0, 0])
    assert np.array_equal(h_matrix(g), laplacian(g))
    assert min_eigenvalue(h_matrix(g)) == pytest.approx(0.0, abs=1e-12)


def test_min_eigenvalue_examples():
    assert min_eigenvalue(np.eye(3)) == pytest.approx(1.0)
    assert min_eigenvalue([[2, -1], [-1, 1]]) == pytest.approx((3 - math.sqrt(5)) / 2, abs=1e-14)
    assert min_eigenvalue(laplacian(CommGraph.ring(4))) == pytest.approx(0.0, abs=1e-12)


def test_min_eigenvalue_rejects_asymmetric_and_non_square():
    with pytest.raises(ValueError):
        min_eigenvalue([[1, 2], [0, 1]])
    with pytest.raises(ValueError):
        min_eigenvalue(np.ones((2, 3)))


def test_graph_reports():
    assert validate_graph(CommGraph.ring(4, [1, 0, 0, 0])).passed
    pairs = validate_graph(CommGraph(4, [(0, 1), (2, 3)], [1, 0, 0, 0]))
    assert not pairs.passed and "not connected" in pairs.problems()[0]
    deaf = validate_graph(CommGraph.ring(4, [0, 0, 0, 0]))
    assert not deaf.passed and "leader link" in deaf.problems()[0]


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_exhaustive_positive_definiteness(n):
    for edges in all_graphs(n):
        for links in itertools.product((0, 1), repeat=n):
            g = CommGraph(n, edges, links)
            lap = laplacian(g)
            ones = np.ones(n)
            assert not (ones @ lap).any() and not (lap @ ones).any()
            h = h_matrix(g)
            assert np.array_equal(h, h.T)
            usable = reachable_all(n, edges) and any(links)
            assert is_connected(g) == reachable_all(n, edges)
            # H > 0 exactly when each component contains a leader-linked agent;
            # connected with some link is the sufficient case the validator demands
            pd = min_eigenvalue(h) > 1e-10
            assert pd == every_component_hears_leader(n, edges, links)
            assert validate_graph(g).passed == usable
            if usable:
                assert pd


@given(st.integers(1, 7), st.data())
def test_dict_round_trip_is_one_based(n, data):
    pairs = list(itertools.combinations(range(n), 2))
    edges = data.draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    links = data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    g = CommGraph(n, edges, links)
    d = g.to_dict()
    assert all(min(e) >= 1 for e in d["edges"])
    assert CommGraph.from_dict(d) == g


@pytest.mark.parametrize(
    "args",
    [
        (2, [(0, 0)], [1, 0]),
        (2, [(0, 2)], [1, 0]),
        (2, [(0, 1)], [2, 0]),
        (2, [(0, 1)], [1]),
        (0, [], []),
    ],
)
def test_malformed_graphs_rejected(args):
    with pytest.raises(GraphError):
        CommGraph(*args)


def test_zero_index_rejected_in_json():
    with pytest.raises(GraphError):
        CommGraph.from_dict({"n": 2, "edges": [[0, 1]], "leader_links": [1, 0]})


def test_adjacency_is_read_only():
    with pytest.raises(ValueError):
        CommGraph.ring(3).adjacency[0, 1] = 5.0
