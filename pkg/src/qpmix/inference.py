"""qp-graphs, edge rankings and precision-recall evaluation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .marked_graph import MarkedGraph
from .nrr import NrrMatrix


@dataclass(frozen=True)
class PrCurve:
    """Ranked-retrieval precision-recall curve.

    ``points`` holds one (recall, precision) pair per retrieved edge, in rank
    order and truncated at ``recall_cap``; when the next hit would overshoot
    the cap, a final point at exactly ``recall_cap`` is linearly interpolated.
    """

    points: tuple[tuple[float, float], ...]
    recall_cap: float = 1.0

    @property
    def recall(self) -> np.ndarray:
        return np.array([r for r, _ in self.points])

    @property
    def precision(self) -> np.ndarray:
        return np.array([p for _, p in self.points])


def qp_graph(m: NrrMatrix, threshold: float) -> MarkedGraph:
    """Keep pair (a, b) as an edge iff its rate is defined and below ``threshold``."""
    if not 0 <= threshold <= 1:
        raise ConfigError(f"threshold must lie in [0, 1], got {threshold}")
    edges = [(u, v) for u, v, val, _ in m.entries()
             if val < threshold and not (m.marks[u] and m.marks[v])]
    return MarkedGraph(m.p, m.marks, frozenset(edges))


def rank_edges(m: NrrMatrix) -> list[tuple[int, int]]:
    """Defined pairs by increasing rate; ties go to the lexicographically smaller pair."""
    entries = [(val, u, v) for u, v, val, _ in m.entries() if not (m.marks[u] and m.marks[v])]
    entries.sort()
    return [(u, v) for _, u, v in entries]


def admissible_truth(truth: MarkedGraph) -> set[tuple[int, int]]:
    return {(u, v) for u, v in truth.edges if not (truth.discrete[u] and truth.discrete[v])}


def precision_recall(ranked: list[tuple[int, int]], truth: MarkedGraph, recall_cap: float = 1.0) -> PrCurve:
    if not 0 < recall_cap <= 1:
        raise ConfigError("recall_cap must lie in (0, 1]")
    positives = admissible_truth(truth)
    if not positives:
        raise ConfigError("the reference graph has no admissible edges")
    total = len(positives)
    points = []
    hits = 0
    k = 0
    for u, v in ranked:
        if not (0 <= u < truth.n_vertices and 0 <= v < truth.n_vertices):
            raise ConfigError(f"ranked pair ({u}, {v}) outside the reference vertex set")
        if truth.discrete[u] and truth.discrete[v]:
            continue
        k += 1
        if (min(u, v), max(u, v)) in positives:
            hits += 1
        recall = hits / total
        if recall > recall_cap + 1e-12:
            r0, p0 = points[-1] if points else (0.0, hits / k)
            w = (recall_cap - r0) / (recall - r0)
            points.append((recall_cap, p0 + w * (hits / k - p0)))
            break
        points.append((recall, hits / k))
    return PrCurve(tuple(points), recall_cap)


def auc(c: PrCurve) -> float:
    """Trapezoidal area under the curve on [0, recall_cap], divided by recall_cap.

    Precision at recall 0 is taken from the first point, and the curve stops
    at its last recall (no extrapolation beyond it).
    """
    if not c.points:
        raise ConfigError("empty precision-recall curve")
    r = np.concatenate([[0.0], c.recall])
    p = np.concatenate([[c.precision[0]], c.precision])
    area = float(np.sum(np.diff(r) * (p[1:] + p[:-1]) / 2.0))
    return area / c.recall_cap


def format_ranking(m: NrrMatrix) -> str:
    lines = ["rank\tu\tv\tnrr"]
    for k, (u, v) in enumerate(rank_edges(m), start=1):
        lines.append(f"{k}\t{u}\t{v}\t{float(m.values[u, v])!r}")
    return "\n".join(lines) + "\n"


def format_curve(c: PrCurve) -> str:
    lines = [f"# recall_cap={c.recall_cap!r}", "recall\tprecision"]
    lines += [f"{r!r}\t{p!r}" for r, p in c.points]
    return "\n".join(lines) + "\n"
