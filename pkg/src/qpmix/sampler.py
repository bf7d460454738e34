"""Mixed datasets and i.i.d. sampling from a CG model."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .cg_model import CGModel
from .errors import ConfigError, DataFormatError, NumericalError


@dataclass(frozen=True, eq=False)
class MixedDataset:
    """n observations over p marked columns.

    ``discrete_data`` holds the discrete columns (in vertex order) and
    ``continuous_data`` the continuous ones. ``marks[v]`` is True for
    discrete vertices; ``levels`` gives one cardinality per discrete column.
    """

    marks: tuple[bool, ...]
    levels: tuple[int, ...]
    discrete_data: np.ndarray
    continuous_data: np.ndarray
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        marks = tuple(bool(m) for m in self.marks)
        disc = np.asarray(self.discrete_data, dtype=np.int64)
        cont = np.asarray(self.continuous_data, dtype=float)
        nd = sum(marks)
        n = disc.shape[0] if disc.ndim == 2 and disc.size else cont.shape[0]
        disc = disc.reshape(n, nd)
        cont = cont.reshape(n, len(marks) - nd)
        if len(self.levels) != nd:
            raise ConfigError(f"expected {nd} level counts, got {len(self.levels)}")
        levels = tuple(int(l) for l in self.levels)
        for j, l in enumerate(levels):
            col = disc[:, j]
            if col.size and (col.min() < 0 or col.max() >= l):
                raise ConfigError(f"discrete column {j} has values outside [0, {l})")
        if not np.all(np.isfinite(cont)):
            raise DataFormatError("continuous data contains missing or non-finite values")
        pos = np.zeros(len(marks), dtype=np.int64)
        pos[np.array(marks, dtype=bool)] = np.arange(nd)
        pos[~np.array(marks, dtype=bool)] = np.arange(len(marks) - nd)
        disc.setflags(write=False)
        cont.setflags(write=False)
        object.__setattr__(self, "marks", marks)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "discrete_data", disc)
        object.__setattr__(self, "continuous_data", cont)
        object.__setattr__(self, "_pos", pos)

    @property
    def n(self) -> int:
        return self.continuous_data.shape[0] if self.continuous_data.size else self.discrete_data.shape[0]

    @property
    def p(self) -> int:
        return len(self.marks)

    def is_discrete(self, v: int) -> bool:
        return self.marks[v]

    def col_index(self, v: int) -> int:
        """Position of vertex ``v`` within its (discrete or continuous) block."""
        return int(self._pos[v])

    def level_count(self, v: int) -> int:
        return self.levels[self.col_index(v)]

    def column_names(self) -> list[str]:
        if self.names is not None:
            return list(self.names)
        return [f"x{v}" for v in range(self.p)]


def sample_dataset(m: CGModel, n: int, seed: int) -> MixedDataset:
    """Draw n rows: a joint level from p(i), then y ~ N(mu(i), Sigma) via the Cholesky factor."""
    if n < 1:
        raise ConfigError("n must be at least 1")
    try:
        L = np.linalg.cholesky(m.sigma)
    except np.linalg.LinAlgError:
        raise NumericalError("model covariance is not positive definite") from None
    rng = np.random.default_rng(seed)
    cells = rng.choice(m.n_cells, size=n, p=m.p_table)
    z = rng.standard_normal((n, m.n_cont))
    y = m.mu_table[cells] + z @ L.T
    disc = m.cell_levels()[cells]
    return MixedDataset(m.graph.discrete, m.levels, disc, y)


# ---------------------------------------------------------------------------
# CSV files


def format_csv(d: MixedDataset, comments: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    names = d.column_names()
    w.writerow([f"{nm}:{'d' if d.marks[v] else 'c'}" for v, nm in enumerate(names)])
    for r in range(d.n):
        row = []
        for v in range(d.p):
            j = d.col_index(v)
            row.append(str(int(d.discrete_data[r, j])) if d.marks[v] else repr(float(d.continuous_data[r, j])))
        w.writerow(row)
    return buf.getvalue()


def write_csv(d: MixedDataset, path: str | Path, comments: Sequence[str] = ()) -> None:
    Path(path).write_text(format_csv(d, comments))


def parse_csv(text: str, source: str = "<data>", levels: Sequence[int] | None = None) -> MixedDataset:
    """Parse the ``name:d`` / ``name:c`` CSV format.

    Leading lines starting with ``#`` are comments. Discrete cardinalities
    default to ``max value + 1`` per column.
    """
    lines = text.splitlines()
    skip = 0
    while skip < len(lines) and lines[skip].startswith("#"):
        skip += 1
    rows = list(csv.reader(lines[skip:]))
    if not rows:
        raise DataFormatError(f"{source}: empty file")
    names, marks = [], []
    for k, field in enumerate(rows[0]):
        name, sep, kind = field.strip().rpartition(":")
        if not sep or kind not in ("d", "c") or not name:
            raise DataFormatError(f"{source}:{skip + 1}: column {k + 1} header {field!r} must end in ':d' or ':c'")
        names.append(name)
        marks.append(kind == "d")
    p = len(marks)
    disc_rows, cont_rows = [], []
    for lineno, row in enumerate(rows[1:], start=skip + 2):
        if not row or all(not x.strip() for x in row):
            continue
        if len(row) != p:
            raise DataFormatError(f"{source}:{lineno}: expected {p} fields, got {len(row)}")
        dr, cr = [], []
        for k, x in enumerate(row):
            x = x.strip()
            if marks[k]:
                try:
                    val = int(x)
                except ValueError:
                    raise DataFormatError(f"{source}:{lineno}: column {names[k]!r}: {x!r} is not a non-negative integer") from None
                if val < 0:
                    raise DataFormatError(f"{source}:{lineno}: column {names[k]!r}: negative level {val}")
                dr.append(val)
            else:
                try:
                    val = float(x)
                except ValueError:
                    raise DataFormatError(f"{source}:{lineno}: column {names[k]!r}: {x!r} is not a number") from None
                if not np.isfinite(val):
                    raise DataFormatError(f"{source}:{lineno}: column {names[k]!r}: non-finite value")
                cr.append(val)
        disc_rows.append(dr)
        cont_rows.append(cr)
    if not disc_rows:
        raise DataFormatError(f"{source}: no data rows")
    nd = sum(marks)
    disc = np.array(disc_rows, dtype=np.int64).reshape(len(disc_rows), nd)
    cont = np.array(cont_rows, dtype=float).reshape(len(cont_rows), p - nd)
    if levels is None:
        levels = tuple(int(disc[:, j].max()) + 1 for j in range(nd))
    return MixedDataset(tuple(marks), tuple(levels), disc, cont, tuple(names))


def read_csv(path: str | Path, levels: Sequence[int] | None = None) -> MixedDataset:
    return parse_csv(Path(path).read_text(), str(path), levels)
