"""Simulation harnesses: type-I error calibration and structure-recovery accuracy.

Both harnesses derive every random stream from the master seed and a tuple of
grid coordinates (see :mod:`qpmix._seeds`), and reduce results in grid order,
so tables do not depend on the number of worker threads.

Seed keys
---------
type1     dataset   ``(fixture_index, n, replicate)``
accuracy  graph     ``(1, d, graph)``          shared by every (rho, sigma)
          model     ``(2, d, graph, cell, paramset)``
          dataset   ``(3, d, graph, cell, paramset, dataset)``, also the NRR seed
"""
from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from typing import Callable, Sequence

import numpy as np

from ._seeds import derive_seed
from .cg_model import build_model
from .citest import TESTS, ci_test
from .errors import ConfigError, InfeasibleTestError, QpMixError
from .fixtures import FIXTURES, load_fixture
from .inference import auc, precision_recall, rank_edges
from .marked_graph import sample_dregular
from .nrr import nrr_matrix
from .sampler import sample_dataset

log = logging.getLogger(__name__)

TYPE1_FORMAT = "qpmix-type1/1"
ACCURACY_FORMAT = "qpmix-accuracy/1"
REPLICATES_PER_TASK = 250


def _map(fn: Callable, items: Sequence, threads: int) -> list:
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _fmt(x: float) -> str:
    return "NA" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


def _header(fmt: str, cfg) -> list[str]:
    # the thread count cannot change any result, so it is left out of the echo
    # to keep outputs byte-identical across thread counts
    echo = {k: v for k, v in asdict(cfg).items() if k != "threads"}
    return [f"# {fmt}", "# config=" + json.dumps(echo, sort_keys=True)]


# ---------------------------------------------------------------------------
# type-I error


@dataclass(frozen=True)
class Type1Config:
    n_list: tuple[int, ...] = (25, 50, 75, 100)
    n_replicates: int = 2000
    alpha: float = 0.05
    fixtures: tuple[str, ...] = ("continuous", "mixed")
    tests: tuple[str, ...] = ("exact", "asymptotic")
    seed: int = 1
    threads: int = 1

    def validate(self) -> None:
        if self.n_replicates < 1:
            raise ConfigError("n_replicates must be positive; the table would be empty")
        if not self.n_list or any(n < 5 for n in self.n_list):
            raise ConfigError("n_list must be nonempty with every n >= 5")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        for f in self.fixtures:
            if f not in FIXTURES:
                raise ConfigError(f"unknown fixture {f!r}")
        if not self.fixtures or not self.tests:
            raise ConfigError("need at least one fixture and one test")
        for t in self.tests:
            if t not in TESTS:
                raise ConfigError(f"unknown test {t!r}")


@dataclass(frozen=True)
class Type1Row:
    fixture: str
    n: int
    replicates: int
    feasible: int
    rejections: dict[str, int]

    def alpha_hat(self, test: str) -> float:
        return self.rejections[test] / self.feasible if self.feasible else math.nan


def type1_experiment(cfg: Type1Config) -> list[Type1Row]:
    """Rejection fractions at nominal alpha on the frozen null fixtures.

    Every replicate is tested with each requested test on the same dataset.
    Replicates whose test is infeasible are left out of the denominator.
    """
    cfg.validate()
    names = list(FIXTURES)
    fixtures = {f: load_fixture(f) for f in cfg.fixtures}
    tasks = []
    for f in cfg.fixtures:
        for n in cfg.n_list:
            for start in range(0, cfg.n_replicates, REPLICATES_PER_TASK):
                tasks.append((f, n, start, min(start + REPLICATES_PER_TASK, cfg.n_replicates)))

    def run(task):
        f, n, start, stop = task
        fx = fixtures[f]
        counts = dict.fromkeys(cfg.tests, 0)
        feasible = 0
        for r in range(start, stop):
            d = sample_dataset(fx.model, n, derive_seed(cfg.seed, names.index(f), n, r))
            try:
                res = ci_test(d, fx.a, fx.b, fx.Q)
            except InfeasibleTestError:
                continue
            feasible += 1
            if "exact" in counts:
                counts["exact"] += res.p_exact < cfg.alpha
            if "asymptotic" in counts:
                counts["asymptotic"] += res.p_asymptotic < cfg.alpha
        return (f, n), feasible, counts

    totals: dict[tuple[str, int], list] = {}
    for key, feasible, counts in _map(run, tasks, cfg.threads):
        acc = totals.setdefault(key, [0, dict.fromkeys(cfg.tests, 0)])
        acc[0] += feasible
        for t, c in counts.items():
            acc[1][t] += int(c)
    return [Type1Row(f, n, cfg.n_replicates, *totals[(f, n)]) for f in cfg.fixtures for n in cfg.n_list]


def format_type1(cfg: Type1Config, rows: Sequence[Type1Row]) -> str:
    lines = _header(TYPE1_FORMAT, cfg)
    lines.append("# dataset_seed=derive_seed(seed, fixture_index, n, replicate); fixture_index: "
                 + ",".join(f"{i}={f}" for i, f in enumerate(FIXTURES)))
    lines.append("\t".join(["fixture", "n", "replicates", "feasible"] + [f"alpha_hat_{t}" for t in cfg.tests]))
    for r in rows:
        lines.append("\t".join([r.fixture, str(r.n), str(r.replicates), str(r.feasible)]
                               + [_fmt(r.alpha_hat(t)) for t in cfg.tests]))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# accuracy


@dataclass(frozen=True)
class AccuracyConfig:
    p: int = 50
    n_discrete: int = 2
    d_list: tuple[int, ...] = (3, 4, 7)
    rho_list: tuple[float, ...] = (0.2, 0.4, 0.6, 0.8)
    sigma_list: tuple[float, ...] = (1.0, 2.0, 3.0, 4.0)
    n_graphs: int = 5
    n_paramsets: int = 5
    n_datasets: int = 5
    n: int = 25
    q: int = 3
    n_subsets: int = 100
    alpha: float = 0.05
    recall_cap: float = 1.0
    seed: int = 1
    threads: int = 1

    def validate(self) -> None:
        if len(self.rho_list) != len(self.sigma_list) or not self.rho_list:
            raise ConfigError("rho_list and sigma_list must be nonempty and of equal length")
        if not self.d_list:
            raise ConfigError("d_list must be nonempty")
        if min(self.n_graphs, self.n_paramsets, self.n_datasets) < 1:
            raise ConfigError("n_graphs, n_paramsets and n_datasets must be positive")
        if not 0 < self.recall_cap <= 1:
            raise ConfigError("recall_cap must lie in (0, 1]")
        if not self.q + 2 < self.n:
            raise ConfigError(f"q + 2 < n is required, got q={self.q}, n={self.n}")

    def scaled(self, factor: float) -> "AccuracyConfig":
        """Replicate counts multiplied by ``factor`` and rounded, at least 1."""
        if factor <= 0:
            raise ConfigError("scale must be positive")
        s = lambda k: max(1, int(round(k * factor)))
        return replace(self, n_graphs=s(self.n_graphs), n_paramsets=s(self.n_paramsets),
                       n_datasets=s(self.n_datasets))


PRESETS = {"full": AccuracyConfig()}


@dataclass(frozen=True)
class AccuracyRow:
    d: int
    rho: float
    sigma: float
    aucs: tuple[float, ...]
    failed: int

    @property
    def mean_auc(self) -> float:
        return float(np.mean(self.aucs)) if self.aucs else math.nan

    @property
    def sd_auc(self) -> float:
        return float(np.std(self.aucs, ddof=1)) if len(self.aucs) > 1 else math.nan


def _accuracy_unit(cfg: AccuracyConfig, d: int, g: int, cell: int, j: int) -> tuple[list[float], int]:
    """AUCs of every dataset drawn from one (graph, parameter set); failures are counted."""
    rho, sigma = cfg.rho_list[cell], cfg.sigma_list[cell]
    where = f"d={d} rho={rho} sigma={sigma} graph={g} paramset={j}"
    try:
        graph = sample_dregular(cfg.p, d, cfg.n_discrete, derive_seed(cfg.seed, 1, d, g))
        model = build_model(graph, rho, sigma, seed=derive_seed(cfg.seed, 2, d, g, cell, j))
    except QpMixError as exc:
        log.warning("%s: model construction failed: %s", where, exc)
        return [], cfg.n_datasets
    out, failed = [], 0
    for r in range(cfg.n_datasets):
        s = derive_seed(cfg.seed, 3, d, g, cell, j, r)
        try:
            data = sample_dataset(model, cfg.n, s)
            m = nrr_matrix(data, cfg.q, cfg.n_subsets, cfg.alpha, seed=s)
            out.append(auc(precision_recall(rank_edges(m), graph, cfg.recall_cap)))
        except QpMixError as exc:
            log.warning("%s dataset=%d: %s", where, r, exc)
            failed += 1
    return out, failed


def accuracy_experiment(cfg: AccuracyConfig) -> list[AccuracyRow]:
    """Mean AUC per (d, rho, sigma) over graphs x parameter sets x datasets."""
    cfg.validate()
    units = [(d, g, cell, j) for d in cfg.d_list for cell in range(len(cfg.rho_list))
             for g in range(cfg.n_graphs) for j in range(cfg.n_paramsets)]
    results = _map(lambda u: _accuracy_unit(cfg, *u), units, cfg.threads)
    rows = []
    for d in cfg.d_list:
        for cell, (rho, sigma) in enumerate(zip(cfg.rho_list, cfg.sigma_list)):
            aucs, failed = [], 0
            for u, (vals, nf) in zip(units, results):
                if u[0] == d and u[2] == cell:
                    aucs += vals
                    failed += nf
            rows.append(AccuracyRow(d, rho, sigma, tuple(aucs), failed))
    return rows


def format_accuracy(cfg: AccuracyConfig, rows: Sequence[AccuracyRow]) -> str:
    lines = _header(ACCURACY_FORMAT, cfg)
    lines.append("# graph_seed=derive_seed(seed, 1, d, graph); model_seed=derive_seed(seed, 2, d, graph, cell, paramset); "
                 "data_seed=nrr_seed=derive_seed(seed, 3, d, graph, cell, paramset, dataset)")
    lines.append("d\trho\tsigma\truns\tfailed\tmean_auc\tsd_auc")
    for r in rows:
        lines.append(f"{r.d}\t{r.rho!r}\t{r.sigma!r}\t{len(r.aucs)}\t{r.failed}\t{_fmt(r.mean_auc)}\t{_fmt(r.sd_auc)}")
    return "\n".join(lines) + "\n"
