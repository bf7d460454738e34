"""Exact (beta) and asymptotic (chi-square) conditional-independence tests.

Small likelihood ratios are evidence against independence, so exact
p-values are lower beta tails. Level counts are effective counts: only joint
levels observed in the data enter the shape parameters and degrees of freedom.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, SampleSizeError, SingularMatrixError
from .sampler import MixedDataset
from .special import chi2_sf, reg_inc_beta
from .stats import PooledSSD, batch_schur, compute_suffstats, lr_continuous_stats, lr_mixed_stats

TESTS = ("exact", "asymptotic")


class DiscretePairError(ConfigError):
    """Both test vertices are discrete; such pairs are never tested."""


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_exact: float
    p_asymptotic: float
    df: int
    beta_a: float
    beta_b: float
    effective_I: int
    n: int
    test: str = "exact"
    alpha: float = 0.05

    __test__ = False  # not a pytest class

    @property
    def p_value(self) -> float:
        return self.p_exact if self.test == "exact" else self.p_asymptotic

    @property
    def reject(self) -> bool:
        return self.p_value < self.alpha


def _beta_lower(lam, a, b):
    return reg_inc_beta(a, b, np.clip(lam, 0.0, 1.0))


def exact_test_continuous(lam: float, n: int, n_cont: int, n_levels: int) -> float:
    """P-value of a missing continuous edge: lam ~ Beta((n - |Gamma| - |I| + 1)/2, 1/2)."""
    a = (n - n_cont - n_levels + 1) / 2
    if a <= 0:
        raise SampleSizeError(f"n={n} too small for |Gamma|={n_cont}, |I|={n_levels}")
    return _beta_lower(lam, a, 0.5)


def exact_test_mixed(lam: float, n: int, n_cont: int, n_levels: int, levels_delta: int, levels_rest: int) -> float:
    """P-value of a missing mixed edge:
    lam ~ Beta((n - |Gamma| - |I| + 1)/2, |I_rest| (|I_delta| - 1)/2)."""
    a = (n - n_cont - n_levels + 1) / 2
    b = levels_rest * (levels_delta - 1) / 2
    if a <= 0 or b <= 0:
        raise SampleSizeError(f"non-positive beta shapes a={a}, b={b}")
    return _beta_lower(lam, a, b)


def asymptotic_test(lam: float, n: int, df: int) -> float:
    """P-value of -n log(lam) against chi-square with df degrees of freedom."""
    if not 0 < lam <= 1:
        raise ValueError(f"likelihood ratio must lie in (0, 1], got {lam}")
    if df < 1:
        raise ValueError("df must be at least 1")
    return chi2_sf(-n * math.log(lam), df)


def ci_test(d: MixedDataset, a: int, b: int, Q: Iterable[int] = (), alpha: float = 0.05,
            test: str = "exact") -> TestResult:
    """Test X_a independent of X_b given X_Q.

    Raises DiscretePairError for two discrete vertices, and an
    InfeasibleTestError subclass when the statistics are singular or the
    sample is too small for the null distribution.
    """
    if test not in TESTS:
        raise ConfigError(f"unknown test {test!r}")
    Q = [int(v) for v in Q]
    da, db = d.is_discrete(a), d.is_discrete(b)
    if da and db:
        raise DiscretePairError(f"vertices {a} and {b} are both discrete")
    if a == b or a in Q or b in Q or len(set(Q)) != len(Q):
        raise ValueError("invalid test vertices or conditioning set")
    st = compute_suffstats(d, [a, b, *Q])
    n = st.n
    n_cont = len(st.cont_vars)
    I_all = st.n_observed_cells()
    if not (da or db):
        lam = lr_continuous_stats(st, a, b)
        shape_a, shape_b, df = (n - n_cont - I_all + 1) / 2, 0.5, 1
    else:
        delta, gamma = (a, b) if da else (b, a)
        lam = lr_mixed_stats(st, delta, gamma)
        I_rest = st.n_observed_cells([v for v in st.disc_vars if v != delta])
        shape_a, shape_b, df = (n - n_cont - I_all + 1) / 2, (I_all - I_rest) / 2, I_all - I_rest
    if shape_a <= 0 or shape_b <= 0:
        raise SampleSizeError(f"non-positive beta shapes a={shape_a}, b={shape_b} (n={n}, |I|={I_all})")
    if lam <= 0:
        raise SingularMatrixError("likelihood ratio is zero")
    return TestResult(
        statistic=lam,
        p_exact=float(_beta_lower(lam, shape_a, shape_b)),
        p_asymptotic=float(chi2_sf(-n * math.log(lam), df)),
        df=int(df), beta_a=shape_a, beta_b=shape_b, effective_I=I_all, n=n,
        test=test, alpha=alpha,
    )


# ---------------------------------------------------------------------------
# batched route used by the NRR estimator


def ci_stats_batch(pooled: PooledSSD, a: int, b: int, Qs: Sequence[Sequence[int]]):
    """Likelihood ratios and null-distribution parameters for many conditioning sets.

    Returns arrays ``(lam, shape_a, shape_b, df, feasible)``, one entry per
    element of ``Qs``.
    """
    d = pooled.data
    if d.is_discrete(a) and d.is_discrete(b):
        raise DiscretePairError(f"vertices {a} and {b} are both discrete")
    mixed = d.is_discrete(a) or d.is_discrete(b)
    if mixed:
        delta, gamma = (a, b) if d.is_discrete(a) else (b, a)
    n = d.n
    m = len(Qs)
    lam_out = np.ones(m)
    sa = np.zeros(m)
    sb = np.zeros(m)
    dfs = np.zeros(m, dtype=np.int64)
    feasible = np.zeros(m, dtype=bool)
    marks = d.marks
    pos = d._pos
    groups: dict[tuple, list[int]] = {}
    for k, Q in enumerate(Qs):
        D = tuple(sorted(v for v in Q if marks[v]))
        groups.setdefault((D, len(Q) - len(D)), []).append(k)
    for (D, _), members in sorted(groups.items()):
        rows = np.array(members)
        C = np.array([[pos[v] for v in Qs[k] if not marks[v]] for k in members],
                     dtype=np.int64).reshape(len(members), -1)
        c = C.shape[1]
        if not mixed:
            S, I_obs = pooled.get(D)
            idx = np.concatenate([C, np.tile([pos[a], pos[b]], (len(members), 1))], axis=1)
            T, ok, thr = batch_schur(S[idx[:, :, None], idx[:, None, :]], c)
            t11, t22, t12 = T[:, 0, 0], T[:, 1, 1], T[:, 0, 1]
            ok &= t11 > thr
            resid = t22 - t12 * t12 / np.where(ok, t11, 1.0)
            ok &= resid > thr
            lam = np.where(ok, resid / np.where(ok, t22, 1.0), 1.0)
            shape_a, shape_b, df = (n - (c + 2) - I_obs + 1) / 2, 0.5, 1
        else:
            S1, I1 = pooled.get(D + (delta,))
            S0, I0 = pooled.get(D)
            idx = np.concatenate([C, np.full((len(members), 1), pos[gamma])], axis=1)
            sel = (idx[:, :, None], idx[:, None, :])
            T1, ok1, thr1 = batch_schur(S1[sel], c)
            T0, ok0, thr0 = batch_schur(S0[sel], c)
            t1, t0 = T1[:, 0, 0], T0[:, 0, 0]
            ok = ok1 & ok0 & (t1 > thr1) & (t0 > thr0)
            lam = np.where(ok, np.minimum(t1 / np.where(ok, t0, 1.0), 1.0), 1.0)
            shape_a, shape_b, df = (n - (c + 1) - I1 + 1) / 2, (I1 - I0) / 2, I1 - I0
        if shape_a <= 0 or shape_b <= 0:
            continue
        lam_out[rows] = lam
        sa[rows] = shape_a
        sb[rows] = shape_b
        dfs[rows] = df
        feasible[rows] = ok
    return lam_out, sa, sb, dfs, feasible


def batch_pvalues(lam, shape_a, shape_b, df, feasible, n: int, test: str = "exact") -> np.ndarray:
    """p-values for the output of :func:`ci_stats_batch`; NaN where infeasible."""
    out = np.full(len(lam), np.nan)
    if feasible.any():
        if test == "exact":
            out[feasible] = _beta_lower(lam[feasible], shape_a[feasible], shape_b[feasible])
        else:
            out[feasible] = chi2_sf(-n * np.log(lam[feasible]), df[feasible])
    return out


def ci_test_batch(pooled: PooledSSD, a: int, b: int, Qs: Sequence[Sequence[int]],
                  test: str = "exact") -> tuple[np.ndarray, np.ndarray]:
    """p-values of X_a indep X_b | X_Q for many conditioning sets.

    Returns ``(pvalues, feasible)``; infeasible entries carry NaN.
    """
    lam, sa, sb, df, ok = ci_stats_batch(pooled, a, b, Qs)
    return batch_pvalues(lam, sa, sb, df, ok, pooled.data.n, test), ok
