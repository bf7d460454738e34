"""Homogeneous conditional-Gaussian models and their random synthesis.

Joint discrete levels are indexed in C order over the discrete vertices
(``numpy.ravel_multi_index`` with ``levels``), so the last discrete vertex
varies fastest. Continuous coordinates follow the graph's continuous
vertices in increasing index order.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, ConvergenceError, DataFormatError, NumericalError
from .marked_graph import MarkedGraph

MODEL_FORMAT = "qpmix-model/1"
LOG_2PI = math.log(2 * math.pi)


@dataclass(frozen=True, eq=False)
class CGModel:
    graph: MarkedGraph
    levels: tuple[int, ...]
    p_table: np.ndarray   # (|I|,)
    mu_table: np.ndarray  # (|I|, |Gamma|)
    sigma: np.ndarray     # (|Gamma|, |Gamma|)

    def __post_init__(self):
        nd = self.graph.n_discrete
        if len(self.levels) != nd:
            raise ConfigError(f"expected {nd} level counts, got {len(self.levels)}")
        if any(int(l) < 1 for l in self.levels):
            raise ConfigError("level counts must be positive")
        n_cells = int(np.prod(self.levels, dtype=np.int64)) if nd else 1
        n_cont = self.graph.n_vertices - nd
        p = np.asarray(self.p_table, dtype=float)
        if p.shape != (n_cells,):
            raise ConfigError(f"p_table must have {n_cells} entries")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ConfigError("p_table must be a probability vector")
        mu = np.asarray(self.mu_table, dtype=float).reshape(n_cells, n_cont)
        sigma = np.asarray(self.sigma, dtype=float).reshape(n_cont, n_cont)
        if not np.array_equal(sigma, sigma.T):
            raise ConfigError("sigma must be symmetric")
        if n_cont:
            _cholesky(sigma, "sigma")
        object.__setattr__(self, "levels", tuple(int(l) for l in self.levels))
        object.__setattr__(self, "p_table", p)
        object.__setattr__(self, "mu_table", mu)
        object.__setattr__(self, "sigma", sigma)

    @property
    def n_cells(self) -> int:
        return self.p_table.shape[0]

    @property
    def n_cont(self) -> int:
        return self.sigma.shape[0]

    def cell_levels(self) -> np.ndarray:
        """(|I|, |Delta|) array of the per-variable levels of every joint level."""
        if not self.levels:
            return np.zeros((1, 0), dtype=int)
        return np.stack(np.unravel_index(np.arange(self.n_cells), self.levels), axis=1)


@dataclass(frozen=True, eq=False)
class CanonicalParams:
    graph: MarkedGraph
    levels: tuple[int, ...]
    g_table: np.ndarray  # (|I|,)
    h_table: np.ndarray  # (|I|, |Gamma|)
    K: np.ndarray


def _cholesky(a: np.ndarray, what: str) -> np.ndarray:
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        raise NumericalError(f"{what} is not positive definite") from None


def moment_to_canonical(m: CGModel) -> CanonicalParams:
    L = _cholesky(m.sigma, "covariance matrix")
    logdet = 2.0 * np.log(np.diag(L)).sum()
    K = np.linalg.inv(m.sigma)
    K = (K + K.T) / 2
    h = m.mu_table @ K
    with np.errstate(divide="ignore"):
        logp = np.log(m.p_table)
    quad = np.einsum("ij,ij->i", m.mu_table, h)
    g = logp - 0.5 * logdet - 0.5 * quad - 0.5 * m.n_cont * LOG_2PI
    return CanonicalParams(m.graph, m.levels, g, h, K)


def canonical_to_moment(c: CanonicalParams) -> CGModel:
    K = np.asarray(c.K, dtype=float)
    L = _cholesky(K, "precision matrix")
    logdet_k = 2.0 * np.log(np.diag(L)).sum()
    sigma = np.linalg.inv(K)
    sigma = (sigma + sigma.T) / 2
    h = np.asarray(c.h_table, dtype=float)
    mu = h @ sigma
    quad = np.einsum("ij,ij->i", mu, h)
    n_cont = K.shape[0]
    logp = np.asarray(c.g_table, dtype=float) - 0.5 * logdet_k + 0.5 * quad + 0.5 * n_cont * LOG_2PI
    finite = np.isfinite(logp)
    if not finite.any():
        raise NumericalError("g_table does not define a normalizable density")
    p = np.zeros_like(logp)
    p[finite] = np.exp(logp[finite] - logp[finite].max())
    p /= p.sum()
    return CGModel(c.graph, c.levels, p, mu, sigma)


# ---------------------------------------------------------------------------
# random synthesis


def random_target_correlations(n_cont: int, rho: float, seed: int, jitter: float = 0.1) -> np.ndarray:
    """Unit-diagonal correlation target with off-diagonal mean ``rho``.

    Off-diagonal entries are ``rho`` plus uniform noise on
    ``[-jitter*|rho|, jitter*|rho|]``. When the result is not positive
    definite the noise is shrunk toward the equicorrelation matrix, which is
    positive definite for ``-1/(n_cont-1) < rho < 1`` and keeps the mean at
    ``rho``.
    """
    lower = -1.0 / (n_cont - 1) if n_cont > 1 else -math.inf
    if not (lower < rho < 1):
        raise ConfigError(f"rho must satisfy {lower:.6g} < rho < 1 for {n_cont} continuous variables, got {rho}")
    rng = np.random.default_rng(seed)
    base = np.full((n_cont, n_cont), float(rho))
    np.fill_diagonal(base, 1.0)
    noise = np.triu(rng.uniform(-jitter * abs(rho), jitter * abs(rho), size=(n_cont, n_cont)), 1)
    noise = noise + noise.T
    floor = 1e-3 * min(1 - rho, 1 + (n_cont - 1) * rho) if n_cont > 1 else 0.0
    lam = 1.0
    for _ in range(200):
        target = base + lam * noise
        if n_cont == 0 or np.linalg.eigvalsh(target)[0] > floor:
            return target
        lam *= 0.9
    return base


def complete_covariance(g: MarkedGraph, target: np.ndarray, tol: float = 1e-8,
                        max_iter: int = 5000) -> np.ndarray:
    """Positive-definite Sigma matching ``target`` on the diagonal and on
    continuous edges, with zero precision entries on continuous non-edges.

    Cycles over the continuous vertices, refitting each column by regression
    on its graph neighbours (covariance selection with known zero pattern).
    """
    target = np.asarray(target, dtype=float)
    cont = g.continuous_vertices
    k = len(cont)
    if target.shape != (k, k):
        raise ConfigError(f"target must be {k}x{k}")
    if not np.allclose(target, target.T, atol=0, rtol=0):
        raise ConfigError("target must be symmetric")
    _cholesky(target, "target correlation matrix")
    if k == 0:
        return target.copy()
    idx = {v: i for i, v in enumerate(cont)}
    nbrs = [[] for _ in range(k)]
    for u, v in g.edges:
        if u in idx and v in idx:
            nbrs[idx[u]].append(idx[v])
            nbrs[idx[v]].append(idx[u])
    nbrs = [sorted(x) for x in nbrs]
    edge_mask = np.zeros((k, k), dtype=bool)
    for i, ns in enumerate(nbrs):
        edge_mask[i, ns] = True
    nonedge = ~edge_mask
    np.fill_diagonal(nonedge, False)

    W = target.copy()
    if not nonedge.any():
        return W
    for _ in range(max_iter):
        prev = W.copy()
        for j in range(k):
            ns = nbrs[j]
            col = np.zeros(k)
            if ns:
                beta = np.linalg.solve(W[np.ix_(ns, ns)], target[ns, j])
                col = W[:, ns] @ beta
            col[j] = target[j, j]
            W[:, j] = col
            W[j, :] = col
        if np.max(np.abs(W - prev)) < 1e-14:
            break
    W = (W + W.T) / 2
    K = np.linalg.inv(W)
    zero_viol = np.max(np.abs(K[nonedge])) if nonedge.any() else 0.0
    keep = edge_mask | np.eye(k, dtype=bool)
    match_viol = np.max(np.abs(W[keep] - target[keep]))
    if zero_viol > tol or match_viol > tol:
        raise ConvergenceError(
            f"covariance completion did not converge in {max_iter} sweeps "
            f"(max |K| off-graph {zero_viol:.3g}, max edge mismatch {match_viol:.3g})"
        )
    _cholesky(W, "completed covariance")
    return W


def sample_mixed_interactions(g: MarkedGraph, levels: tuple[int, ...], sigma_h: float, seed: int) -> np.ndarray:
    """h(i) for every joint level i, shape (|I|, |Gamma|).

    Each continuous vertex gets one N(0, sigma_h) draw per joint level of its
    discrete neighbours, or a single draw if it has none.
    """
    if sigma_h < 0:
        raise ConfigError("sigma_h must be non-negative")
    disc = g.discrete_vertices
    if len(levels) != len(disc):
        raise ConfigError(f"expected {len(disc)} level counts, got {len(levels)}")
    levels = tuple(int(l) for l in levels)
    n_cells = int(np.prod(levels, dtype=np.int64)) if levels else 1
    cells = (np.stack(np.unravel_index(np.arange(n_cells), levels), axis=1)
             if levels else np.zeros((1, 0), dtype=int))
    pos = {v: i for i, v in enumerate(disc)}
    rng = np.random.default_rng(seed)
    cont = g.continuous_vertices
    adj = g.adjacency()
    h = np.zeros((n_cells, len(cont)))
    for k, gamma in enumerate(cont):
        A = sorted(pos[v] for v in adj[gamma] if g.discrete[v])
        if A:
            sub_levels = tuple(levels[a] for a in A)
            z = rng.normal(0.0, sigma_h, size=int(np.prod(sub_levels)))
            h[:, k] = z[np.ravel_multi_index(tuple(cells[:, a] for a in A), sub_levels)]
        else:
            h[:, k] = rng.normal(0.0, sigma_h)
    return h


def build_model(g: MarkedGraph, rho: float, sigma_h: float, levels: tuple[int, ...] | None = None,
                seed: int = 0, tol: float = 1e-8, max_iter: int = 5000) -> CGModel:
    if levels is None:
        levels = (2,) * g.n_discrete
    levels = tuple(int(l) for l in levels)
    s_target, s_h = np.random.SeedSequence(seed).generate_state(2, np.uint64)
    n_cont = g.n_vertices - g.n_discrete
    target = random_target_correlations(n_cont, rho, int(s_target))
    sigma = complete_covariance(g, target, tol=tol, max_iter=max_iter)
    h = sample_mixed_interactions(g, levels, sigma_h, int(s_h))
    n_cells = h.shape[0]
    return CGModel(g, levels, np.full(n_cells, 1.0 / n_cells), h @ sigma, sigma)


# ---------------------------------------------------------------------------
# model files


def model_to_dict(m: CGModel) -> dict:
    disc = m.graph.discrete_vertices
    return {
        "format": MODEL_FORMAT,
        "n_vertices": m.graph.n_vertices,
        "n_discrete": len(disc),
        "edges": [list(e) for e in m.graph.sorted_edges()],
        "levels": list(m.levels),
        "p_table": m.p_table.tolist(),
        "mu_table": m.mu_table.tolist(),
        "sigma": m.sigma.tolist(),
    }


def model_from_dict(d: dict) -> CGModel:
    if d.get("format") != MODEL_FORMAT:
        raise DataFormatError(f"unsupported model format {d.get('format')!r}")
    try:
        g = MarkedGraph.from_edges(int(d["n_vertices"]), [tuple(e) for e in d["edges"]], int(d["n_discrete"]))
        n_cont = g.n_vertices - g.n_discrete
        return CGModel(
            g,
            tuple(d["levels"]),
            np.array(d["p_table"], dtype=float),
            np.array(d["mu_table"], dtype=float).reshape(-1, n_cont),
            np.array(d["sigma"], dtype=float).reshape(n_cont, n_cont),
        )
    except (KeyError, TypeError) as exc:
        raise DataFormatError(f"malformed model file: {exc}") from None


def format_model(m: CGModel, config: dict | None = None) -> str:
    doc = model_to_dict(m)
    if config is not None:
        doc["config"] = config
    return json.dumps(doc, indent=1) + "\n"


def write_model(m: CGModel, path: str | Path, config: dict | None = None) -> None:
    Path(path).write_text(format_model(m, config))


def read_model(path: str | Path) -> CGModel:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}:{exc.lineno}: {exc.msg}") from None
    return model_from_dict(d)
