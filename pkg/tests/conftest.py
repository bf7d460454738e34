from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings

from qpmix.sampler import MixedDataset

# fixed example generation so a given checkout always runs the same cases
settings.register_profile("repro", derandomize=True)
settings.load_profile("repro")


def make_dataset(disc=None, cont=None, levels=None) -> MixedDataset:
    """Dataset with discrete columns first, then continuous ones."""
    disc = np.zeros((len(cont), 0), dtype=np.int64) if disc is None else np.asarray(disc, dtype=np.int64)
    cont = np.asarray(cont, dtype=float)
    if disc.ndim == 1:
        disc = disc[:, None]
    if cont.ndim == 1:
        cont = cont[:, None]
    nd = disc.shape[1]
    if levels is None:
        levels = tuple(int(disc[:, j].max()) + 1 for j in range(nd))
    marks = (True,) * nd + (False,) * cont.shape[1]
    return MixedDataset(marks, tuple(levels), disc, cont)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, shown in the terminal summary
ACCEPTANCE: dict[int, str] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
