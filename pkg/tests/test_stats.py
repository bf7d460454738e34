from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qpmix.cg_model import build_model
from qpmix.errors import SingularMatrixError
from qpmix.marked_graph import sample_dregular
from qpmix.sampler import sample_dataset
from qpmix.stats import (
    PooledSSD, batch_schur, chol_logdet, compute_suffstats, lr_continuous, lr_mixed,
)

from conftest import make_dataset


def test_single_column_by_hand():
    st_ = compute_suffstats(make_dataset(cont=[1.0, 2.0, 3.0]), [0])
    assert st_.n == 3
    assert st_.s_i[0, 0] == 6
    assert st_.ybar_i[0, 0] == 2
    assert st_.ssd()[0, 0] == pytest.approx(2.0)


def test_one_discrete_one_continuous_by_hand():
    d = make_dataset(disc=[0, 0, 1], cont=[1.0, 3.0, 5.0])
    s = compute_suffstats(d, [0, 1])
    assert list(s.n_i) == [2, 1]
    assert list(s.ybar_i[:, 0]) == [2, 5]
    assert s.ssd_i[0, 0, 0] == pytest.approx(2) and s.ssd_i[1, 0, 0] == pytest.approx(0)
    assert s.ssd(A=[0])[0, 0] == pytest.approx(2)
    assert s.ssd()[0, 0] == pytest.approx(2)
    # pooled over no discrete variable: plain SSD around the grand mean
    assert s.ssd(A=[])[0, 0] == pytest.approx(((np.array([1, 3, 5]) - 3) ** 2).sum())


def test_ssd_matches_sample_covariance(rng):
    y = rng.normal(size=(40, 4))
    s = compute_suffstats(make_dataset(cont=y), range(4))
    np.testing.assert_allclose(s.ssd(), 39 * np.cov(y, rowvar=False), rtol=1e-12)


def test_pooling_identity(rng):
    d = make_dataset(disc=rng.integers(0, 3, size=(60, 2)), cont=rng.normal(size=(60, 3)))
    s = compute_suffstats(d, range(5))
    assert s.n == 60
    np.testing.assert_allclose(s.ssd(), s.ssd_i.sum(axis=0))
    for cell in s.ssd_i:
        assert np.linalg.eigvalsh(cell)[0] > -1e-10


def test_lr_continuous_is_one_minus_r_squared(rng):
    for _ in range(20):
        y = rng.normal(size=(15, 2))
        y[:, 1] += 0.5 * y[:, 0]
        r = np.corrcoef(y, rowvar=False)[0, 1]
        assert lr_continuous(make_dataset(cont=y), 0, 1) == pytest.approx(1 - r * r, abs=1e-12)


def test_lr_mixed_is_anova_ratio(rng):
    for _ in range(20):
        g = rng.integers(0, 2, 20)
        g[:2] = [0, 1]
        y = rng.normal(size=20) + g
        within = sum(((y[g == k] - y[g == k].mean()) ** 2).sum() for k in (0, 1))
        total = ((y - y.mean()) ** 2).sum()
        assert lr_mixed(make_dataset(disc=g, cont=y), 0, 1) == pytest.approx(within / total, rel=1e-12)


def test_singular_inputs():
    y = np.random.default_rng(1).normal(size=(10, 1))
    with pytest.raises(SingularMatrixError, match="ssd"):
        lr_continuous(make_dataset(cont=np.hstack([y, y])), 0, 1)
    with pytest.raises(SingularMatrixError):
        lr_mixed(make_dataset(disc=[0, 1] * 5, cont=np.ones(10)), 0, 1)


def test_constant_discrete_column_uses_observed_cells(rng):
    d = make_dataset(disc=np.zeros(12, dtype=int), cont=rng.normal(size=12), levels=(2,))
    s = compute_suffstats(d, [0, 1])
    assert s.n_observed_cells() == 1
    assert lr_mixed(d, 0, 1) == pytest.approx(1.0)


def test_chol_logdet():
    a = np.array([[4.0, 1.0], [1.0, 3.0]])
    assert chol_logdet(a) == pytest.approx(np.log(11.0))
    assert chol_logdet(np.zeros((0, 0))) == 0.0
    with pytest.raises(SingularMatrixError):
        chol_logdet(np.array([[1.0, 1.0], [1.0, 1.0]]), "test")


def _random_mixed(seed, n=30):
    m = build_model(sample_dregular(10, 3, 2, seed=seed), 0.5, 2.0, (2, 3), seed=seed)
    return sample_dataset(m, n, seed=seed)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.data())
def test_invariances(seed, data):
    d = _random_mixed(seed % 50)
    cont = list(range(2, 10))
    g, e = data.draw(st.lists(st.sampled_from(cont), min_size=2, max_size=2, unique=True))
    Q = data.draw(st.lists(st.sampled_from([v for v in range(10) if v not in (g, e)]), max_size=3, unique=True))
    lam = lr_continuous(d, g, e, Q)
    assert 0 < lam <= 1
    perm = np.random.default_rng(seed).permutation(d.n)
    shuffled = make_dataset(disc=d.discrete_data[perm], cont=d.continuous_data[perm], levels=d.levels)
    assert lr_continuous(shuffled, g, e, Q) == pytest.approx(lam, rel=1e-9)
    lam_m = lr_mixed(d, 1, g, [v for v in Q if v != 1])
    relabeled = d.discrete_data.copy()
    relabeled[:, 1] = (2 - relabeled[:, 1])  # reverse the three levels of vertex 1
    d2 = make_dataset(disc=relabeled, cont=d.continuous_data, levels=d.levels)
    assert lr_mixed(d2, 1, g, [v for v in Q if v != 1]) == pytest.approx(lam_m, rel=1e-9)
    assert 0 < lam_m <= 1


def test_pooled_route_matches_reference(rng):
    d = _random_mixed(3, n=40)
    pooled = PooledSSD(d)
    for D in [(), (0,), (1,), (0, 1)]:
        S, n_obs = pooled.get(D)
        ref = compute_suffstats(d, [*D, *range(2, 10)])
        np.testing.assert_allclose(S, ref.ssd(), rtol=1e-10, atol=1e-10)
        assert n_obs == ref.n_observed_cells()


def test_batch_schur_matches_dense(rng):
    A = rng.normal(size=(5, 6, 6))
    M = A @ A.transpose(0, 2, 1) + np.eye(6)
    T, ok, _ = batch_schur(M, 4)
    assert ok.all()
    for k in range(5):
        ref = M[k, 4:, 4:] - M[k, 4:, :4] @ np.linalg.solve(M[k, :4, :4], M[k, :4, 4:])
        np.testing.assert_allclose(T[k], ref, rtol=1e-10, atol=1e-12)
    M[2, 1, :] = M[2, 0, :]
    M[2, :, 1] = M[2, :, 0]
    _, ok, _ = batch_schur(M, 4)
    assert list(ok) == [True, True, False, True, True]
