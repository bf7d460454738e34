from __future__ import annotations

import logging

import pytest

from qpmix.errors import ConfigError
from qpmix.experiments import (
    AccuracyConfig, PRESETS, Type1Config, accuracy_experiment, format_accuracy, format_type1, type1_experiment,
)


def test_type1_small_run_is_deterministic():
    cfg = Type1Config(n_list=(25, 50), n_replicates=300, seed=5)
    rows = type1_experiment(cfg)
    assert [(r.fixture, r.n) for r in rows] == [("continuous", 25), ("continuous", 50), ("mixed", 25), ("mixed", 50)]
    for r in rows:
        assert r.replicates == 300 and r.feasible == 300
        assert 0 <= r.alpha_hat("exact") <= 0.15
    text = format_type1(cfg, rows)
    assert text == format_type1(cfg, type1_experiment(Type1Config(n_list=(25, 50), n_replicates=300, seed=5, threads=4)))
    assert "alpha_hat_exact\talpha_hat_asymptotic" in text
    assert '"n_replicates": 300' in text.splitlines()[1]


def test_type1_single_test_column():
    cfg = Type1Config(n_list=(30,), n_replicates=20, fixtures=("mixed",), tests=("asymptotic",))
    lines = format_type1(cfg, type1_experiment(cfg)).splitlines()
    assert lines[-2].split("\t")[-1] == "alpha_hat_asymptotic"
    assert len(lines[-1].split("\t")) == 5


@pytest.mark.parametrize("bad", [
    dict(n_replicates=0), dict(n_list=()), dict(alpha=0.0), dict(fixtures=("x",)), dict(tests=("z",)),
])
def test_type1_config_errors(bad):
    with pytest.raises(ConfigError):
        type1_experiment(Type1Config(**bad))


def test_accuracy_small_grid():
    cfg = AccuracyConfig(p=20, d_list=(3,), rho_list=(0.2, 0.8), sigma_list=(1.0, 4.0),
                         n_graphs=1, n_paramsets=1, n_datasets=2, n_subsets=20)
    rows = accuracy_experiment(cfg)
    assert [(r.d, r.rho, r.sigma) for r in rows] == [(3, 0.2, 1.0), (3, 0.8, 4.0)]
    assert all(len(r.aucs) == 2 and r.failed == 0 and 0 <= r.mean_auc <= 1 for r in rows)
    text = format_accuracy(cfg, rows)
    again = format_accuracy(cfg, accuracy_experiment(AccuracyConfig(**{**cfg.__dict__, "threads": 3})))
    assert text == again
    assert text.splitlines()[3] == "d\trho\tsigma\truns\tfailed\tmean_auc\tsd_auc"


def test_accuracy_failures_mark_the_cell_missing(caplog):
    # a 3-regular graph on 4 vertices is K4, which joins the two discrete vertices
    cfg = AccuracyConfig(p=4, d_list=(3,), rho_list=(0.5,), sigma_list=(1.0,), n_graphs=1, n_paramsets=1,
                         n_datasets=1, n=10, q=1)
    with caplog.at_level(logging.WARNING):
        rows = accuracy_experiment(cfg)
    assert rows[0].failed == 1 and rows[0].aucs == ()
    assert "NA" in format_accuracy(cfg, rows).splitlines()[-1]
    assert "construction failed" in caplog.text


def test_full_preset_and_scaling():
    cfg = PRESETS["full"]
    assert (cfg.p, cfg.n_discrete, cfg.d_list, cfg.n, cfg.q, cfg.n_subsets) == (50, 2, (3, 4, 7), 25, 3, 100)
    assert cfg.rho_list == (0.2, 0.4, 0.6, 0.8) and cfg.sigma_list == (1.0, 2.0, 3.0, 4.0)
    small = cfg.scaled(0.2)
    assert (small.n_graphs, small.n_paramsets, small.n_datasets) == (1, 1, 1)
    assert cfg.scaled(0.01).n_graphs == 1
    with pytest.raises(ConfigError):
        cfg.scaled(0)


def test_accuracy_config_errors():
    with pytest.raises(ConfigError):
        accuracy_experiment(AccuracyConfig(rho_list=(0.2,), sigma_list=(1.0, 2.0)))
    with pytest.raises(ConfigError):
        accuracy_experiment(AccuracyConfig(n_graphs=0))
