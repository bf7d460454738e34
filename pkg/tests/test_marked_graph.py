from __future__ import annotations

import itertools

import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from qpmix.errors import ConfigError, DataFormatError, RetryExhaustedError
from qpmix.marked_graph import (
    MarkedGraph, density, format_graph, is_decomposable, parse_graph, read_graph, sample_dregular,
    write_graph,
)


def brute_force_decomposable(g: MarkedGraph) -> bool:
    """Search every vertex subset for an induced cycle of length > 3, and every
    simple path for a continuous-only route between non-adjacent discrete vertices."""
    G = nx.Graph()
    G.add_nodes_from(range(g.n_vertices))
    G.add_edges_from(g.edges)
    for k in range(4, g.n_vertices + 1):
        for S in itertools.combinations(range(g.n_vertices), k):
            H = G.subgraph(S)
            if all(deg == 2 for _, deg in H.degree()) and nx.is_connected(H):
                return False
    disc = [v for v in range(g.n_vertices) if g.discrete[v]]
    for a, b in itertools.combinations(disc, 2):
        if G.has_edge(a, b):
            continue
        for path in nx.all_simple_paths(G, a, b):
            if not any(g.discrete[v] for v in path[1:-1]):
                return False
    return True


def test_perfect_matching():
    g = sample_dregular(4, 1, 0, seed=7)
    assert len(g.edges) == 2
    assert list(g.degrees()) == [1, 1, 1, 1]


def test_full_sized_regular_graph():
    for seed in range(5):
        g = sample_dregular(50, 3, 2, seed=seed)
        assert list(g.degrees()) == [3] * 50
        assert not g.has_edge(0, 1)
        assert g.discrete_vertices == [0, 1]


def test_degree_audit_many_configs():
    for p, d, nd in [(10, 3, 2), (20, 4, 3), (30, 7, 2), (12, 11, 1), (9, 2, 0)]:
        for seed in range(3):
            g = sample_dregular(p, d, nd, seed)
            adj = {v: set() for v in range(p)}
            for u, v in g.edges:
                adj[u].add(v)
                adj[v].add(u)
            assert all(len(adj[v]) == d for v in range(p))
            assert not any(g.discrete[u] and g.discrete[v] for u, v in g.edges)


def test_triangle_with_two_discrete_is_impossible():
    pairs = list(itertools.combinations(range(3), 2))
    regular = [E for k in range(4) for E in itertools.combinations(pairs, k)
               if all(sum(v in e for e in E) == 2 for v in range(3))]
    assert regular == [tuple(pairs)]  # only the triangle, which joins 0 and 1
    for seed in (0, 1):
        with pytest.raises(RetryExhaustedError, match="10000 attempts"):
            sample_dregular(3, 2, 2, seed=seed)


def test_infeasible_degree():
    with pytest.raises(ConfigError, match="even"):
        sample_dregular(5, 3, 0, seed=1)
    with pytest.raises(ConfigError):
        sample_dregular(4, 4, 0, seed=1)


def test_sampler_is_deterministic():
    assert sample_dregular(40, 5, 2, seed=99) == sample_dregular(40, 5, 2, seed=99)
    assert sample_dregular(40, 5, 2, seed=99) != sample_dregular(40, 5, 2, seed=100)


def test_density():
    assert density(MarkedGraph.from_edges(5, [])) == 0.0
    assert density(MarkedGraph.from_edges(5, itertools.combinations(range(5), 2))) == 1.0
    assert density(sample_dregular(50, 3, 2, seed=1)) == pytest.approx(3 / 49)


def test_invalid_graphs():
    with pytest.raises(ConfigError):
        MarkedGraph.from_edges(3, [(1, 1)])
    with pytest.raises(ConfigError):
        MarkedGraph.from_edges(3, [(0, 3)])


# decomposability: small constructed marked graphs in the style of the
# textbook examples (one decomposable, three that are not)
EXAMPLE_GRAPHS = {
    "a": (MarkedGraph.from_edges(4, [(0, 1), (0, 2), (1, 2), (2, 3)], n_discrete=1), True),
    "b": (MarkedGraph.from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)], n_discrete=0), False),
    "c": (MarkedGraph.from_edges(3, [(0, 2), (1, 2)], n_discrete=2), False),
    "d": (MarkedGraph.from_edges(5, [(0, 2), (0, 3), (2, 3), (1, 3), (1, 4), (3, 4)], n_discrete=2), False),
}


@pytest.mark.parametrize("name", sorted(EXAMPLE_GRAPHS))
def test_textbook_examples(name):
    g, expected = EXAMPLE_GRAPHS[name]
    assert is_decomposable(g) is expected
    assert brute_force_decomposable(g) is expected


def test_decomposability_basics():
    assert is_decomposable(MarkedGraph.from_edges(3, [(0, 1), (0, 2), (1, 2)]))
    assert not is_decomposable(MarkedGraph.from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)]))
    # adjacent discrete vertices sharing a continuous neighbour are fine
    assert is_decomposable(MarkedGraph.from_edges(3, [(0, 1), (0, 2), (1, 2)], n_discrete=2))


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 6).flatmap(lambda n: st.tuples(
    st.just(n),
    st.sets(st.sampled_from(list(itertools.combinations(range(n), 2))) if n > 1 else st.nothing()),
    st.sets(st.integers(0, n - 1), max_size=3),
)))
def test_decomposable_matches_brute_force(args):
    n, edges, disc = args
    g = MarkedGraph(n, tuple(v in disc for v in range(n)), frozenset(edges))
    assert is_decomposable(g) == brute_force_decomposable(g)


def test_graph_file_roundtrip(tmp_path):
    g = sample_dregular(20, 3, 2, seed=4)
    path = tmp_path / "g.txt"
    write_graph(g, path, comments=["made by a test"])
    assert read_graph(path) == g
    text = path.read_text().splitlines()
    assert text[1] == "p 20 2"
    body = [tuple(map(int, ln.split())) for ln in text[2:]]
    assert body == sorted(body) and all(u < v for u, v in body)


def test_graph_file_with_arbitrary_marks():
    g = MarkedGraph(4, (False, True, False, True), frozenset({(0, 1), (2, 3)}))
    assert parse_graph(format_graph(g)) == g


@pytest.mark.parametrize("text,line", [
    ("", None), ("q 3 0\n", 1), ("p 3 0\n0 1\n0 x\n", 3), ("p 3 0\n0 5\n", 2), ("p 3 0\n1 1\n", 2),
])
def test_graph_file_errors(text, line):
    with pytest.raises(DataFormatError) as exc:
        parse_graph(text, "g.txt")
    if line is not None:
        assert f"g.txt:{line}:" in str(exc.value)
