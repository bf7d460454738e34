"""Regularized incomplete beta and upper incomplete gamma functions.

Both accept scalars or arrays and broadcast. The continued fractions are
evaluated with the modified Lentz method; every element is iterated until
the whole batch has converged.
"""
from __future__ import annotations

import numpy as np
from scipy.special import betaln, gammaln

_EPS = 1e-16
_FPMIN = 1e-300
_MAXIT = 100_000


def _fix(v: np.ndarray) -> np.ndarray:
    return np.where(np.abs(v) < _FPMIN, _FPMIN, v)


def _betacf(a, b, x):
    out = np.empty_like(x)
    active = np.arange(x.size)
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = np.ones_like(x)
    d = 1.0 / _fix(1.0 - qab * x / qap)
    h = d.copy()
    for m in range(1, _MAXIT + 1):
        m2 = 2.0 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 / _fix(1.0 + aa * d)
        c = _fix(1.0 + aa / c)
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 / _fix(1.0 + aa * d)
        c = _fix(1.0 + aa / c)
        delta = d * c
        h *= delta
        done = np.abs(delta - 1.0) < _EPS * 4
        if done.all():
            out[active] = h
            return out
        if done.any():
            out[active[done]] = h[done]
            keep = ~done
            active, a, b, x, qab, qap, qam, c, d, h = (
                v[keep] for v in (active, a, b, x, qab, qap, qam, c, d, h))
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def reg_inc_beta(a, b, x):
    """I_x(a, b) for a, b > 0 and 0 <= x <= 1."""
    a, b, x = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float),
                                  np.asarray(x, dtype=float))
    if np.any(~(a > 0)) or np.any(~(b > 0)):
        raise ValueError("reg_inc_beta needs a > 0 and b > 0")
    if np.any(~((x >= 0) & (x <= 1))):
        raise ValueError("reg_inc_beta needs 0 <= x <= 1")
    out = np.where(x >= 1.0, 1.0, 0.0)
    inner = (x > 0) & (x < 1)
    if inner.any():
        ai, bi, xi = a[inner], b[inner], x[inner]
        swap = xi > (ai + 1.0) / (ai + bi + 2.0)
        aa = np.where(swap, bi, ai)
        bb = np.where(swap, ai, bi)
        xx = np.where(swap, 1.0 - xi, xi)
        logx = np.where(swap, np.log1p(-xi), np.log(xi))
        log1mx = np.where(swap, np.log(xi), np.log1p(-xi))
        front = np.exp(aa * logx + bb * log1mx - betaln(aa, bb)) / aa
        val = front * _betacf(aa, bb, xx)
        out[inner] = np.where(swap, 1.0 - val, val)
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def _gamma_series(s, x):
    out = np.empty_like(x)
    active = np.arange(x.size)
    s0, x0 = s, x
    total = 1.0 / s
    term = total.copy()
    ap = s.copy()
    for _ in range(_MAXIT):
        ap = ap + 1.0
        term = term * x / ap
        total = total + term
        done = np.abs(term) < np.abs(total) * _EPS
        if done.any():
            out[active[done]] = total[done]
            keep = ~done
            if not keep.any():
                return out * np.exp(-x0 + s0 * np.log(x0) - gammaln(s0))
            active, s, x, total, term, ap = (v[keep] for v in (active, s, x, total, term, ap))
    raise ArithmeticError("incomplete gamma series did not converge")


def _gamma_cf(s, x):
    out = np.empty_like(x)
    active = np.arange(x.size)
    s0, x0 = s, x
    b = x + 1.0 - s
    c = np.full_like(x, 1.0 / _FPMIN)
    d = 1.0 / _fix(b)
    h = d.copy()
    for i in range(1, _MAXIT + 1):
        an = -i * (i - s)
        b = b + 2.0
        d = 1.0 / _fix(an * d + b)
        c = _fix(b + an / c)
        delta = d * c
        h *= delta
        done = np.abs(delta - 1.0) < _EPS * 4
        if done.any():
            out[active[done]] = h[done]
            keep = ~done
            if not keep.any():
                return np.exp(-x0 + s0 * np.log(x0) - gammaln(s0)) * out
            active, s, b, c, d, h = (v[keep] for v in (active, s, b, c, d, h))
    raise ArithmeticError("incomplete gamma continued fraction did not converge")


def reg_inc_gamma_upper(s, x):
    """Q(s, x) = Gamma(s, x) / Gamma(s) for s > 0 and x >= 0."""
    s, x = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(x, dtype=float))
    if np.any(~(s > 0)):
        raise ValueError("reg_inc_gamma_upper needs s > 0")
    if np.any(~(x >= 0)):
        raise ValueError("reg_inc_gamma_upper needs x >= 0")
    out = np.where(np.isinf(x), 0.0, 1.0)
    use_series = (x > 0) & (x < s + 1.0)
    use_cf = (x >= s + 1.0) & np.isfinite(x)
    if use_series.any():
        out[use_series] = 1.0 - _gamma_series(s[use_series], x[use_series])
    if use_cf.any():
        out[use_cf] = _gamma_cf(s[use_cf], x[use_cf])
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def chi2_sf(stat, df):
    return reg_inc_gamma_upper(np.asarray(df, dtype=float) / 2.0, np.asarray(stat, dtype=float) / 2.0)
