"""Sufficient statistics and likelihood-ratio statistics on marginal subsets.

Two routes compute the same quantities. The reference route
(:func:`compute_suffstats`, :func:`lr_continuous`, :func:`lr_mixed`) builds the
per-cell sums and determinants literally. The batched route
(:class:`PooledSSD`, :func:`batch_schur`) pools centred cross-products once per
discrete conditioning set and evaluates many conditioning subsets at a time;
the NRR estimator uses it.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import SingularMatrixError
from .sampler import MixedDataset

SINGULAR_RTOL = 1e-12


def chol_logdet(a: np.ndarray, name: str = "matrix") -> float:
    """log|a| through a Cholesky factorisation; an empty matrix has determinant 1.

    Raises SingularMatrixError when a pivot is <= SINGULAR_RTOL times the
    largest diagonal entry.
    """
    a = np.array(a, dtype=float)
    k = a.shape[0]
    if k == 0:
        return 0.0
    thresh = SINGULAR_RTOL * max(float(np.max(np.diag(a))), 0.0)
    logdet = 0.0
    for j in range(k):
        piv = a[j, j]
        if not piv > thresh:
            raise SingularMatrixError(f"{name} is singular (pivot {piv:.3g} at position {j})")
        logdet += np.log(piv)
        col = a[j + 1:, j] / piv
        a[j + 1:, j + 1:] -= np.outer(col, a[j, j + 1:])
    return float(logdet)


@dataclass(frozen=True, eq=False)
class SuffStats:
    """Per-cell statistics of a marginal dataset.

    Cells are the joint levels of ``disc_vars`` (C order over ``levels``).
    Arrays are indexed by flat cell: ``n_i`` (cells,), ``s_i`` (cells, k),
    ``ss_i`` (cells, k, k) with k = len(cont_vars).
    """

    disc_vars: tuple[int, ...]
    cont_vars: tuple[int, ...]
    levels: tuple[int, ...]
    n_i: np.ndarray
    s_i: np.ndarray
    ss_i: np.ndarray

    @property
    def n(self) -> int:
        return int(self.n_i.sum())

    @property
    def ybar_i(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.s_i / self.n_i[:, None]

    @property
    def ssd_i(self) -> np.ndarray:
        return _cell_ssd(self.n_i, self.s_i, self.ss_i)

    def _marginal(self, A: Sequence[int] | None):
        if A is None:
            return self.n_i, self.s_i, self.ss_i
        A = set(A)
        unknown = A - set(self.disc_vars)
        if unknown:
            raise ValueError(f"{sorted(unknown)} are not discrete variables of this subset")
        drop = tuple(ax for ax, v in enumerate(self.disc_vars) if v not in A)
        k = len(self.cont_vars)
        shape = self.levels
        n = self.n_i.reshape(shape).sum(axis=drop).reshape(-1)
        s = self.s_i.reshape(shape + (k,)).sum(axis=drop).reshape(-1, k)
        ss = self.ss_i.reshape(shape + (k, k)).sum(axis=drop).reshape(-1, k, k)
        return n, s, ss

    def ssd(self, B: Iterable[int] | None = None, A: Sequence[int] | None = None) -> np.ndarray:
        """SSD of continuous coordinates B pooled within the cells of the discrete set A.

        ``B=None`` means every continuous variable; ``A=None`` pools within
        the cells of every discrete variable of the subset.
        """
        n, s, ss = self._marginal(A)
        pooled = _cell_ssd(n, s, ss).sum(axis=0)
        if B is None:
            return pooled
        idx = [self.cont_vars.index(v) for v in B]
        return pooled[np.ix_(idx, idx)]

    def n_observed_cells(self, A: Sequence[int] | None = None) -> int:
        n, _, _ = self._marginal(A)
        return int(np.count_nonzero(n))


def _cell_ssd(n, s, ss):
    out = np.zeros_like(ss)
    nz = n > 0
    out[nz] = ss[nz] - s[nz][:, :, None] * s[nz][:, None, :] / n[nz][:, None, None]
    return out


def _cell_codes(d: MixedDataset, disc_vars: Sequence[int]) -> tuple[np.ndarray, tuple[int, ...]]:
    levels = tuple(d.level_count(v) for v in disc_vars)
    if not disc_vars:
        return np.zeros(d.n, dtype=np.int64), ()
    cols = tuple(d.discrete_data[:, d.col_index(v)] for v in disc_vars)
    return np.ravel_multi_index(cols, levels), levels


def compute_suffstats(d: MixedDataset, vars: Iterable[int]) -> SuffStats:
    vars = sorted(set(int(v) for v in vars))
    if not vars:
        raise ValueError("vars must be nonempty")
    disc = tuple(v for v in vars if d.is_discrete(v))
    cont = tuple(v for v in vars if not d.is_discrete(v))
    codes, levels = _cell_codes(d, disc)
    n_cells = int(np.prod(levels, dtype=np.int64)) if levels else 1
    Y = d.continuous_data[:, [d.col_index(v) for v in cont]]
    k = len(cont)
    n_i = np.bincount(codes, minlength=n_cells).astype(float)
    s_i = np.zeros((n_cells, k))
    ss_i = np.zeros((n_cells, k, k))
    np.add.at(s_i, codes, Y)
    np.add.at(ss_i, codes, Y[:, :, None] * Y[:, None, :])
    return SuffStats(disc, cont, levels, n_i, s_i, ss_i)


def _lr_from_logdets(st: SuffStats, num: list, den: list) -> float:
    total = 0.0
    for B, A, name in num:
        total += chol_logdet(st.ssd(B, A), name)
    for B, A, name in den:
        total -= chol_logdet(st.ssd(B, A), name)
    return float(min(np.exp(total), 1.0))


def lr_continuous_stats(st: SuffStats, gamma: int, eta: int) -> float:
    G = list(st.cont_vars)
    rest = [v for v in G if v not in (gamma, eta)]
    return _lr_from_logdets(
        st,
        [(G, None, "ssd_Gamma"), (rest, None, "ssd_Gamma\\{gamma,eta}")],
        [([v for v in G if v != gamma], None, "ssd_Gamma\\{gamma}"),
         ([v for v in G if v != eta], None, "ssd_Gamma\\{eta}")],
    )


def lr_mixed_stats(st: SuffStats, delta: int, gamma: int) -> float:
    G = list(st.cont_vars)
    G_star = [v for v in G if v != gamma]
    D_star = [v for v in st.disc_vars if v != delta]
    return _lr_from_logdets(
        st,
        [(G, None, "ssd_Gamma"), (G_star, D_star, "ssd_Gamma*(Delta*)")],
        [(G_star, None, "ssd_Gamma*"), (G, D_star, "ssd_Gamma(Delta*)")],
    )


def _check_pair(d: MixedDataset, a: int, b: int, Q: Iterable[int]) -> list[int]:
    Q = [int(v) for v in Q]
    if a == b:
        raise ValueError("the two test vertices must differ")
    if a in Q or b in Q:
        raise ValueError("test vertices must not be in the conditioning set")
    if len(set(Q)) != len(Q):
        raise ValueError("conditioning set has repeated vertices")
    return Q


def lr_continuous(d: MixedDataset, gamma: int, eta: int, Q: Iterable[int] = ()) -> float:
    """Likelihood ratio (to the power 2/n) for a missing continuous edge."""
    Q = _check_pair(d, gamma, eta, Q)
    if d.is_discrete(gamma) or d.is_discrete(eta):
        raise ValueError("lr_continuous needs two continuous vertices")
    return lr_continuous_stats(compute_suffstats(d, [gamma, eta, *Q]), gamma, eta)


def lr_mixed(d: MixedDataset, delta: int, gamma: int, Q: Iterable[int] = ()) -> float:
    """Likelihood ratio (to the power 2/n) for a missing discrete-continuous edge."""
    Q = _check_pair(d, delta, gamma, Q)
    if not d.is_discrete(delta) or d.is_discrete(gamma):
        raise ValueError("lr_mixed needs a discrete delta and a continuous gamma")
    return lr_mixed_stats(compute_suffstats(d, [delta, gamma, *Q]), delta, gamma)


# ---------------------------------------------------------------------------
# batched route


class PooledSSD:
    """Pooled SSD matrices over all continuous columns, one per discrete set.

    ``get(D)`` returns the |Gamma| x |Gamma| matrix of cross-products of the
    continuous columns centred at their cell means, cells being the joint
    levels of the discrete vertices ``D``, together with the number of
    observed cells. Results are cached; safe to share between threads.
    """

    def __init__(self, d: MixedDataset):
        self.data = d
        self._cache: dict[tuple[int, ...], tuple[np.ndarray, int]] = {}
        self._lock = threading.Lock()

    def get(self, D: Sequence[int]) -> tuple[np.ndarray, int]:
        key = tuple(sorted(int(v) for v in D))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        with self._lock:
            hit = self._cache.get(key)
            if hit is None:
                hit = self._compute(key)
                self._cache[key] = hit
        return hit

    def _compute(self, D: tuple[int, ...]) -> tuple[np.ndarray, int]:
        d = self.data
        codes, _ = _cell_codes(d, D)
        uniq, inv = np.unique(codes, return_inverse=True)
        Y = d.continuous_data
        counts = np.bincount(inv, minlength=len(uniq)).astype(float)
        sums = np.zeros((len(uniq), Y.shape[1]))
        np.add.at(sums, inv, Y)
        R = Y - (sums / counts[:, None])[inv]
        S = R.T @ R
        S = (S + S.T) / 2
        S.setflags(write=False)
        return S, len(uniq)


def batch_schur(M: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Eliminate the leading k coordinates of a stack of symmetric matrices.

    Returns the Schur complements of the trailing blocks, a mask that is
    False where some elimination pivot is <= SINGULAR_RTOL times the
    matrix's largest diagonal entry, and those per-matrix thresholds. Only elementwise operations are used,
    so each matrix's result does not depend on the rest of the stack.
    """
    A = np.array(M, dtype=float)
    scale = np.max(np.diagonal(A, axis1=1, axis2=2), axis=1) if A.shape[1] else np.zeros(len(A))
    thresh = SINGULAR_RTOL * scale
    ok = np.ones(A.shape[0], dtype=bool)
    for j in range(k):
        piv = A[:, j, j]
        ok &= piv > thresh
        piv = np.where(ok, piv, 1.0)
        col = A[:, j + 1:, j] / piv[:, None]
        A[:, j + 1:, j + 1:] -= col[:, :, None] * A[:, j, None, j + 1:]
    return A[:, k:, k:], ok, thresh
