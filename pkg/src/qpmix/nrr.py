"""Non-rejection rates over randomly sampled conditioning subsets.

For a pair (a, b) the rate is the fraction of size-q conditioning subsets Q,
drawn uniformly from the vertices other than a and b, for which the test of
X_a independent of X_b given X_Q does not reject. When there are no more
candidate subsets than requested draws, every subset is tested exactly once.

Draws for a pair come from ``rng_for(seed, min(a, b), max(a, b))``, so a
matrix does not depend on evaluation order or on the number of threads.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from ._seeds import rng_for
from .citest import TESTS, batch_pvalues, ci_stats_batch
from .errors import ConfigError, DataFormatError, NoFeasibleSubsetError
from .sampler import MixedDataset
from .stats import PooledSSD

NRR_FORMAT = "qpmix-nrr/1"
PAIRS_PER_TASK = 32


@dataclass(frozen=True, eq=False)
class NrrMatrix:
    """Symmetric p x p matrix of non-rejection rates; NaN marks undefined entries."""

    values: np.ndarray
    feasible: np.ndarray
    marks: tuple[bool, ...]
    q: tuple[int, ...]
    n_subsets: int = 100
    alpha: float = 0.05
    restrict_continuous: bool = False
    seed: int = 0
    test: str = "exact"
    info: dict = field(default_factory=dict)

    @property
    def p(self) -> int:
        return len(self.marks)

    @property
    def defined(self) -> np.ndarray:
        return ~np.isnan(self.values)

    def entries(self) -> list[tuple[int, int, float, int]]:
        """Defined upper-triangle entries as (u, v, nrr, feasible), u < v."""
        iu, iv = np.nonzero(np.triu(self.defined, 1))
        return [(int(u), int(v), float(self.values[u, v]), int(self.feasible[u, v])) for u, v in zip(iu, iv)]


def _candidates(d: MixedDataset, a: int, b: int, restrict_continuous: bool) -> list[int]:
    return [v for v in range(d.p) if v != a and v != b and not (restrict_continuous and d.is_discrete(v))]


def _check_args(d: MixedDataset, q: int, n_subsets: int, alpha: float, test: str) -> None:
    if q < 0:
        raise ConfigError("q must be non-negative")
    if not q + 2 < d.n:
        raise ConfigError(f"q + 2 < n is required, got q={q}, n={d.n}")
    if n_subsets < 1:
        raise ConfigError("n_subsets must be positive")
    if not 0 < alpha < 1:
        raise ConfigError("alpha must lie in (0, 1)")
    if test not in TESTS:
        raise ConfigError(f"unknown test {test!r}")


def conditioning_subsets(d: MixedDataset, a: int, b: int, q: int, n_subsets: int,
                         restrict_continuous: bool, seed: int) -> list[tuple[int, ...]]:
    cand = _candidates(d, a, b, restrict_continuous)
    if q > len(cand):
        raise ConfigError(f"q={q} exceeds the {len(cand)} candidate conditioning vertices")
    if math.comb(len(cand), q) <= n_subsets:
        return list(itertools.combinations(cand, q))
    rng = rng_for(seed, min(a, b), max(a, b))
    picks = np.argsort(rng.random((n_subsets, len(cand))), axis=1, kind="stable")[:, :q]
    arr = np.asarray(cand)[picks]
    return [tuple(int(v) for v in row) for row in arr]


def _rates(pooled: PooledSSD, pairs: Sequence[tuple[int, int]], q: int, n_subsets: int, alpha: float,
           restrict_continuous: bool, seed: int, test: str) -> list[tuple[int, int, float, int]]:
    """(a, b, rate, feasible) for every pair with at least one feasible test.

    p-values for all pairs are evaluated in one vectorised call.
    """
    parts = []
    for a, b in pairs:
        Qs = conditioning_subsets(pooled.data, a, b, q, n_subsets, restrict_continuous, seed)
        parts.append(ci_stats_batch(pooled, a, b, Qs))
    if not parts:
        return []
    lam, sa, sb, df, ok = (np.concatenate(x) for x in zip(*parts))
    pvals = batch_pvalues(lam, sa, sb, df, ok, pooled.data.n, test)
    out = []
    start = 0
    for (a, b), part in zip(pairs, parts):
        stop = start + len(part[0])
        f = ok[start:stop]
        n_ok = int(f.sum())
        if n_ok:
            out.append((a, b, float(np.count_nonzero(pvals[start:stop][f] >= alpha)) / n_ok, n_ok))
        start = stop
    return out


def nrr_pair(d: MixedDataset, a: int, b: int, q: int, n_subsets: int = 100, alpha: float = 0.05,
             restrict_continuous: bool = False, seed: int = 0, test: str = "exact",
             pooled: PooledSSD | None = None) -> tuple[float, int]:
    """Non-rejection rate of (a, b) and the number of feasible tests behind it."""
    _check_args(d, q, n_subsets, alpha, test)
    if a == b:
        raise ConfigError("a and b must differ")
    if d.is_discrete(a) and d.is_discrete(b):
        raise ConfigError(f"vertices {a} and {b} are both discrete")
    if pooled is None:
        pooled = PooledSSD(d)
    res = _rates(pooled, [(a, b)], q, n_subsets, alpha, restrict_continuous, seed, test)
    if not res:
        raise NoFeasibleSubsetError(f"no feasible conditioning subset for pair ({a}, {b}) at q={q}")
    return res[0][2], res[0][3]


def admissible_pairs(marks: Sequence[bool]) -> list[tuple[int, int]]:
    p = len(marks)
    return [(a, b) for a in range(p) for b in range(a + 1, p) if not (marks[a] and marks[b])]


def nrr_matrix(d: MixedDataset, q: int, n_subsets: int = 100, alpha: float = 0.05,
               restrict_continuous: bool = False, seed: int = 0, test: str = "exact",
               threads: int = 1) -> NrrMatrix:
    _check_args(d, q, n_subsets, alpha, test)
    p = d.p
    values = np.full((p, p), np.nan)
    feas = np.zeros((p, p), dtype=np.int64)
    pooled = PooledSSD(d)
    pairs = admissible_pairs(d.marks)
    chunks = [pairs[i:i + PAIRS_PER_TASK] for i in range(0, len(pairs), PAIRS_PER_TASK)]

    def run(chunk):
        return _rates(pooled, chunk, q, n_subsets, alpha, restrict_continuous, seed, test)

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, chunks))
    else:
        results = [run(c) for c in chunks]
    for chunk_res in results:
        for a, b, rate, n_ok in chunk_res:
            values[a, b] = values[b, a] = rate
            feas[a, b] = feas[b, a] = n_ok
    return NrrMatrix(values, feas, d.marks, (q,), n_subsets, alpha, restrict_continuous, seed, test)


def average_nrr(ms: Sequence[NrrMatrix]) -> NrrMatrix:
    """Entrywise mean over the matrices in which each entry is defined."""
    if not ms:
        raise ConfigError("need at least one matrix")
    first = ms[0]
    for m in ms[1:]:
        if m.values.shape != first.values.shape or m.marks != first.marks:
            raise ConfigError("NRR matrices differ in dimension or vertex marks")
    if len(ms) == 1:
        return first
    stack = np.stack([m.values for m in ms])
    defined = ~np.isnan(stack)
    count = defined.sum(axis=0)
    total = np.where(defined, stack, 0.0).sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        values = np.where(count > 0, total / count, np.nan)
    feas = sum(m.feasible for m in ms)
    q = tuple(itertools.chain.from_iterable(m.q for m in ms))
    return replace(first, values=values, feasible=feas, q=q)


# ---------------------------------------------------------------------------
# long-form files


def _fmt_bool(x: bool) -> str:
    return "true" if x else "false"


def format_nrr(m: NrrMatrix) -> str:
    disc = [v for v in range(m.p) if m.marks[v]]
    meta = {
        "q": ",".join(str(x) for x in m.q),
        "n_subsets": str(m.n_subsets),
        "alpha": repr(float(m.alpha)),
        "restrict_continuous": _fmt_bool(m.restrict_continuous),
        "seed": str(m.seed),
        "test": m.test,
        "p": str(m.p),
        "discrete": ",".join(str(v) for v in disc),
        "pair_seed": "SeedSequence(entropy=seed, spawn_key=(min(u,v), max(u,v)))",
    }
    for k, v in m.info.items():
        meta.setdefault(k, str(v))
    lines = [f"# {NRR_FORMAT}"] + [f"# {k}={v}" for k, v in meta.items()]
    lines.append("u\tv\tnrr\tfeasible")
    lines += [f"{u}\t{v}\t{val!r}\t{f}" for u, v, val, f in m.entries()]
    return "\n".join(lines) + "\n"


def write_nrr(m: NrrMatrix, path: str | Path) -> None:
    Path(path).write_text(format_nrr(m))


def parse_nrr(text: str, source: str = "<nrr>") -> NrrMatrix:
    meta: dict[str, str] = {}
    rows = []
    header_seen = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                k, v = body.split("=", 1)
                meta[k.strip()] = v.strip()
            continue
        parts = line.split("\t")
        if not header_seen:
            if parts != ["u", "v", "nrr", "feasible"]:
                raise DataFormatError(f"{source}:{lineno}: expected header 'u v nrr feasible'")
            header_seen = True
            continue
        if len(parts) != 4:
            raise DataFormatError(f"{source}:{lineno}: expected 4 tab-separated fields")
        try:
            rows.append((int(parts[0]), int(parts[1]), float(parts[2]), int(parts[3])))
        except ValueError:
            raise DataFormatError(f"{source}:{lineno}: malformed row {line!r}") from None
    try:
        p = int(meta["p"])
        disc = {int(x) for x in meta.get("discrete", "").split(",") if x}
        q = tuple(int(x) for x in meta["q"].split(",") if x)
        m = NrrMatrix(
            values=np.full((p, p), np.nan),
            feasible=np.zeros((p, p), dtype=np.int64),
            marks=tuple(v in disc for v in range(p)),
            q=q,
            n_subsets=int(meta.get("n_subsets", 100)),
            alpha=float(meta.get("alpha", 0.05)),
            restrict_continuous=meta.get("restrict_continuous", "false") == "true",
            seed=int(meta.get("seed", 0)),
            test=meta.get("test", "exact"),
        )
    except (KeyError, ValueError) as exc:
        raise DataFormatError(f"{source}: missing or malformed metadata ({exc})") from None
    for u, v, val, f in rows:
        if not (0 <= u < p and 0 <= v < p) or u == v:
            raise DataFormatError(f"{source}: pair ({u}, {v}) out of range")
        if not 0 <= val <= 1:
            raise DataFormatError(f"{source}: rate {val} for ({u}, {v}) outside [0, 1]")
        m.values[u, v] = m.values[v, u] = val
        m.feasible[u, v] = m.feasible[v, u] = f
    return m


def read_nrr(path: str | Path) -> NrrMatrix:
    return parse_nrr(Path(path).read_text(), str(path))
