"""Marked graphs: undirected graphs whose vertices are discrete or continuous.

By convention the discrete vertices occupy the lowest indices, which keeps
graph files, model files and dataset columns aligned.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, DataFormatError, RetryExhaustedError

DEFAULT_MAX_ATTEMPTS = 10_000


def _norm_edge(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class MarkedGraph:
    """Immutable marked graph on vertices ``0..n_vertices-1``.

    ``discrete[v]`` is True when vertex ``v`` is discrete. Edges are stored as
    sorted ``(u, v)`` tuples with ``u < v``.
    """

    n_vertices: int
    discrete: tuple[bool, ...]
    edges: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self):
        if len(self.discrete) != self.n_vertices:
            raise ConfigError("marks length does not match n_vertices")
        normed = set()
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise ConfigError(f"self-loop at vertex {u}")
            if not (0 <= u < self.n_vertices and 0 <= v < self.n_vertices):
                raise ConfigError(f"edge ({u}, {v}) out of range")
            normed.add(_norm_edge(u, v))
        object.__setattr__(self, "edges", frozenset(normed))
        object.__setattr__(self, "discrete", tuple(bool(x) for x in self.discrete))

    @classmethod
    def from_edges(cls, n_vertices: int, edges: Iterable[tuple[int, int]], n_discrete: int = 0) -> "MarkedGraph":
        marks = tuple(v < n_discrete for v in range(n_vertices))
        return cls(n_vertices, marks, frozenset(edges))

    @property
    def n_discrete(self) -> int:
        return sum(self.discrete)

    @property
    def discrete_vertices(self) -> list[int]:
        return [v for v in range(self.n_vertices) if self.discrete[v]]

    @property
    def continuous_vertices(self) -> list[int]:
        return [v for v in range(self.n_vertices) if not self.discrete[v]]

    def has_edge(self, u: int, v: int) -> bool:
        return _norm_edge(u, v) in self.edges

    def neighbors(self, v: int) -> set[int]:
        out = set()
        for a, b in self.edges:
            if a == v:
                out.add(b)
            elif b == v:
                out.add(a)
        return out

    def adjacency(self) -> list[set[int]]:
        adj: list[set[int]] = [set() for _ in range(self.n_vertices)]
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        return adj

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_vertices, dtype=int)
        for a, b in self.edges:
            deg[a] += 1
            deg[b] += 1
        return deg

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)


def density(g: MarkedGraph) -> float:
    if g.n_vertices < 2:
        raise ConfigError("density needs at least two vertices")
    return len(g.edges) / (g.n_vertices * (g.n_vertices - 1) / 2)


# ---------------------------------------------------------------------------
# uniform d-regular sampling


def _has_suitable_pair(points: list[int], adj: list[set[int]]) -> bool:
    distinct = sorted(set(points))
    for i, u in enumerate(distinct):
        for v in distinct[i + 1:]:
            if v not in adj[u]:
                return True
    return False


def _pairing_attempt(p: int, d: int, rng: np.random.Generator) -> list[set[int]] | None:
    """One run of the Steger-Wormald pairing process; None on a dead end."""
    points = [v for v in range(p) for _ in range(d)]
    adj: list[set[int]] = [set() for _ in range(p)]
    misses = 0
    while points:
        m = len(points)
        i, j = rng.integers(0, m, size=2)
        u, v = points[i], points[j]
        if i == j or u == v or v in adj[u]:
            misses += 1
            if misses > 4 * m:
                if not _has_suitable_pair(points, adj):
                    return None
                misses = 0
            continue
        misses = 0
        adj[u].add(v)
        adj[v].add(u)
        for k in sorted((i, j), reverse=True):
            points[k] = points[-1]
            points.pop()
    return adj


def sample_dregular(p: int, d: int, n_discrete: int, seed: int,
                    max_attempts: int = DEFAULT_MAX_ATTEMPTS) -> MarkedGraph:
    """Sample a d-regular marked graph with no edge between discrete vertices.

    Graphs come from the Steger-Wormald pairing process; graphs joining two
    discrete vertices are rejected and resampled. Pairing dead ends and
    rejections both count against ``max_attempts``.
    """
    if d < 0 or p <= 0 or d >= p:
        raise ConfigError(f"infeasible degree: need 0 <= d < p, got p={p}, d={d}")
    if (p * d) % 2:
        raise ConfigError(f"infeasible degree: p*d must be even, got p={p}, d={d}")
    if not 0 <= n_discrete <= p:
        raise ConfigError(f"n_discrete must be in [0, {p}], got {n_discrete}")
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        adj = _pairing_attempt(p, d, rng)
        if adj is None:
            continue
        if any(v < n_discrete for u in range(n_discrete) for v in adj[u]):
            continue
        edges = frozenset((u, v) for u in range(p) for v in adj[u] if u < v)
        return MarkedGraph.from_edges(p, edges, n_discrete)
    raise RetryExhaustedError(
        f"no {d}-regular graph on {p} vertices without discrete-discrete edges "
        f"after {max_attempts} attempts"
    )


# ---------------------------------------------------------------------------
# decomposability


def _is_chordal(adj: list[set[int]]) -> bool:
    # maximum cardinality search, then check the reverse order is a perfect elimination ordering
    n = len(adj)
    weight = [0] * n
    numbered = [False] * n
    order = []
    for _ in range(n):
        v = max((u for u in range(n) if not numbered[u]), key=lambda u: (weight[u], -u))
        numbered[v] = True
        order.append(v)
        for w in adj[v]:
            if not numbered[w]:
                weight[w] += 1
    pos = {v: i for i, v in enumerate(order)}
    for v in order:
        earlier = [w for w in adj[v] if pos[w] < pos[v]]
        if not earlier:
            continue
        parent = max(earlier, key=lambda w: pos[w])
        if any(w != parent and w not in adj[parent] for w in earlier):
            return False
    return True


def _has_forbidden_path(g: MarkedGraph, adj: list[set[int]]) -> bool:
    disc = g.discrete_vertices
    for i, a in enumerate(disc):
        for b in disc[i + 1:]:
            if b in adj[a]:
                continue
            seen = {a}
            queue = deque(w for w in adj[a] if not g.discrete[w])
            seen.update(queue)
            while queue:
                x = queue.popleft()
                if b in adj[x]:
                    return True
                for w in adj[x]:
                    if w not in seen and not g.discrete[w]:
                        seen.add(w)
                        queue.append(w)
    return False


def is_decomposable(g: MarkedGraph) -> bool:
    """True iff g is chordal and no path of continuous vertices joins two non-adjacent discrete vertices."""
    adj = g.adjacency()
    return _is_chordal(adj) and not _has_forbidden_path(g, adj)


# ---------------------------------------------------------------------------
# edge-list files


def write_graph(g: MarkedGraph, path: str | Path, comments: Sequence[str] = ()) -> None:
    Path(path).write_text(format_graph(g, comments))


def format_graph(g: MarkedGraph, comments: Sequence[str] = ()) -> str:
    """Header ``p <n_vertices> <n_discrete>`` then one ``u v`` line per edge.

    Discrete vertices are ``0..n_discrete-1`` unless a ``discrete v1,v2,...``
    line follows the header. Lines starting with ``#`` are comments;
    ``comments`` are written first.
    """
    disc = g.discrete_vertices
    lines = [f"# {c}" for c in comments] + [f"p {g.n_vertices} {len(disc)}"]
    if disc != list(range(len(disc))):
        lines.append("discrete " + ",".join(str(v) for v in disc))
    lines += [f"{u} {v}" for u, v in g.sorted_edges()]
    return "\n".join(lines) + "\n"


def read_graph(path: str | Path) -> MarkedGraph:
    return parse_graph(Path(path).read_text(), str(path))


def parse_graph(text: str, source: str = "<graph>") -> MarkedGraph:
    lines = [(k, ln) for k, ln in enumerate(text.splitlines(), start=1)
             if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise DataFormatError(f"{source}: empty graph file")
    hl, first = lines[0]
    head = first.split()
    if len(head) != 3 or head[0] != "p":
        raise DataFormatError(f"{source}:{hl}: expected 'p <n_vertices> <n_discrete>'")
    try:
        n, nd = int(head[1]), int(head[2])
    except ValueError:
        raise DataFormatError(f"{source}:{hl}: non-integer header fields") from None
    if n < 1 or not 0 <= nd <= n:
        raise DataFormatError(f"{source}:{hl}: invalid vertex counts")
    marks = tuple(v < nd for v in range(n))
    body = lines[1:]
    if body and body[0][1].split()[0] == "discrete":
        lineno, line = body.pop(0)
        try:
            disc = {int(x) for x in line.split(None, 1)[1].split(",")}
        except (ValueError, IndexError):
            raise DataFormatError(f"{source}:{lineno}: expected 'discrete v1,v2,...'") from None
        if len(disc) != nd or not all(0 <= v < n for v in disc):
            raise DataFormatError(f"{source}:{lineno}: discrete list does not match the header count")
        marks = tuple(v in disc for v in range(n))
    edges = []
    for lineno, line in body:
        parts = line.split()
        try:
            u, v = (int(x) for x in parts)
        except ValueError:
            raise DataFormatError(f"{source}:{lineno}: expected 'u v', got {line!r}") from None
        if not (0 <= u < n and 0 <= v < n) or u == v:
            raise DataFormatError(f"{source}:{lineno}: invalid edge ({u}, {v})")
        edges.append((u, v))
    return MarkedGraph(n, marks, frozenset(edges))
