"""Command-line driver.

Subcommands: simulate, nrr, infer, eval, type1, accuracy. Options may also be
given in a JSON file passed with ``--config``; flags on the command line win.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from pathlib import Path
from typing import Sequence

from . import INTERFACE_VERSION, __version__
from ._seeds import derive_seed
from .cg_model import MODEL_FORMAT, build_model, format_model
from .citest import TESTS
from .errors import ConfigError, DataFormatError, NumericalError, QpMixError
from .experiments import (
    ACCURACY_FORMAT, PRESETS, TYPE1_FORMAT, AccuracyConfig, Type1Config, accuracy_experiment,
    format_accuracy, format_type1, type1_experiment,
)
from .fixtures import FIXTURES
from .inference import auc, format_curve, format_ranking, precision_recall, qp_graph, rank_edges
from .marked_graph import format_graph, read_graph, sample_dregular
from .nrr import NRR_FORMAT, average_nrr, nrr_matrix, read_nrr, format_nrr
from .sampler import format_csv, read_csv, sample_dataset

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3

# options that name where results go or how fast they are computed; they are
# not echoed so that outputs stay byte-identical across runs that differ only
# in these
_NOT_ECHOED = {"command", "config", "threads", "out", "out_dir", "curve", "func"}

log = logging.getLogger("qpmix")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


class _Repeat(argparse.Action):
    """Like ``append``, but the first flag on the command line replaces the default."""

    def __call__(self, parser, namespace, values, option_string=None):
        seen = f"_seen_{self.dest}"
        items = list(getattr(namespace, self.dest) or []) if getattr(namespace, seen, False) else []
        items.append(values)
        setattr(namespace, self.dest, items)
        setattr(namespace, seen, True)


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in str(text).split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in str(text).split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _version_text() -> str:
    formats = ", ".join([MODEL_FORMAT, NRR_FORMAT, TYPE1_FORMAT, ACCURACY_FORMAT])
    return f"qpmix {__version__} (interface {INTERFACE_VERSION}; formats: {formats})"


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=1, help="master seed (default 1)")
    common.add_argument("--threads", type=int, default=1, help="worker threads; results do not depend on it")
    common.add_argument("--config", help="JSON file of option values; command-line flags win")

    ap = _Parser(prog="qpmix", description="Limited-order structure learning for mixed graphical models.")
    ap.add_argument("--version", action="version", version=_version_text())
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common], help="sample a graph, a model and a dataset")
    p.add_argument("--p", type=int, default=50, help="number of vertices")
    p.add_argument("--d", type=int, default=3, help="vertex degree")
    p.add_argument("--discrete", type=int, default=2, help="number of discrete vertices")
    p.add_argument("--levels", type=_int_list, default=None, help="discrete level counts (default all 2)")
    p.add_argument("--rho", type=float, default=0.6, help="mean target correlation")
    p.add_argument("--sigma-h", type=float, default=3.0, help="sd of the mixed interaction parameters")
    p.add_argument("--n", type=int, default=25, help="sample size")
    p.add_argument("--out-dir", default=".", help="output directory")
    p.add_argument("--prefix", default="sim", help="output file prefix")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("nrr", parents=[common], help="estimate non-rejection rates from a dataset")
    p.add_argument("data", help="dataset CSV")
    p.add_argument("--q", type=int, action=_Repeat, default=[3],
                   help="conditioning order; repeat to average over several orders")
    p.add_argument("--subsets", type=int, default=100, help="conditioning subsets per pair")
    p.add_argument("--alpha", type=float, default=0.05, help="test level")
    p.add_argument("--test", choices=TESTS, default="exact")
    p.add_argument("--restrict-continuous", action="store_true",
                   help="draw conditioning vertices from the continuous ones only")
    p.add_argument("-o", "--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_nrr)

    p = sub.add_parser("infer", parents=[common], help="threshold or rank an NRR file")
    p.add_argument("nrr", help="NRR file")
    p.add_argument("--threshold", type=float, help="keep pairs with rate below this value")
    p.add_argument("--rank", action="store_true", help="write the full edge ranking")
    p.add_argument("-o", "--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", parents=[common], help="precision-recall and AUC against a reference graph")
    p.add_argument("--truth", required=True, help="reference graph file")
    p.add_argument("--nrr", required=True, help="NRR file")
    p.add_argument("--recall-cap", type=float, default=1.0)
    p.add_argument("--curve", help="curve output file (default <nrr>.pr.tsv)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("type1", parents=[common], help="type-I error calibration on the null fixtures")
    p.add_argument("--replicates", type=int, default=2000)
    p.add_argument("--n", type=_int_list, default=(25, 50, 75, 100), help="comma-separated sample sizes")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--fixture", choices=[*FIXTURES, "both"], default="both")
    p.add_argument("--test", choices=[*TESTS, "both"], default="both")
    p.add_argument("-o", "--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_type1)

    p = sub.add_parser("accuracy", parents=[common], help="structure-recovery accuracy grid")
    p.add_argument("--preset", choices=sorted(PRESETS), default="full")
    p.add_argument("--scale", type=float, default=1.0,
                   help="multiply graph, parameter-set and dataset counts (minimum 1)")
    p.add_argument("--p", type=int)
    p.add_argument("--discrete", type=int)
    p.add_argument("--d", type=_int_list, help="comma-separated degrees")
    p.add_argument("--rho", type=_float_list, help="comma-separated correlations")
    p.add_argument("--sigma", type=_float_list, help="comma-separated interaction sds, paired with --rho")
    p.add_argument("--graphs", type=int)
    p.add_argument("--paramsets", type=int)
    p.add_argument("--datasets", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--q", type=int)
    p.add_argument("--subsets", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--recall-cap", type=float)
    p.add_argument("-o", "--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_accuracy)
    return ap


def _apply_config_file(ap: argparse.ArgumentParser, args: argparse.Namespace, argv: Sequence[str]):
    """Re-parse with the config file's values as defaults, so explicit flags win."""
    try:
        doc = json.loads(Path(args.config).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config file {args.config}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{args.config}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{args.config}: expected a JSON object")
    subparser = ap._subparsers._group_actions[0].choices[args.command]
    known = {a.dest: a for a in subparser._actions}
    defaults = {}
    for key, value in doc.items():
        dest = key.lstrip("-").replace("-", "_")
        if dest not in known or dest in ("help", "config"):
            raise ConfigError(f"{args.config}: unknown option {key!r} for {args.command}")
        action = known[dest]
        if action.type is not None and not isinstance(value, list):
            value = action.type(value) if isinstance(value, str) else value
        if action.type in (_int_list, _float_list) and isinstance(value, (list, int, float)):
            value = tuple(value) if isinstance(value, list) else (value,)
        if isinstance(action, _Repeat) and not isinstance(value, list):
            value = [value]
        defaults[dest] = value
    subparser.set_defaults(**defaults)
    return ap.parse_args(argv)


def _echo(args: argparse.Namespace) -> str:
    cfg = {k: v for k, v in vars(args).items() if k not in _NOT_ECHOED and not k.startswith("_")}
    return json.dumps(cfg, sort_keys=True, default=list)


def _write_outputs(files: dict[Path, str]) -> None:
    """Write every file or none.

    Files are staged as temporaries next to their targets and renamed into
    place; if a rename fails, files already moved are rolled back.
    """
    staged, backups, placed = [], {}, []
    try:
        for path, text in files.items():
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
            staged.append((tmp, path))
            with os.fdopen(fd, "w") as fh:
                fh.write(text)
        for tmp, path in staged:
            if path.is_file():
                fd, bak = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".bak")
                os.close(fd)
                os.replace(path, bak)
                backups[path] = bak
            os.replace(tmp, path)
            placed.append(path)
    except BaseException:
        for path in placed:
            path.unlink(missing_ok=True)
        for path, bak in backups.items():
            os.replace(bak, path)
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)
        raise
    for bak in backups.values():
        os.unlink(bak)


def _emit(text: str, out: str | None) -> None:
    if out:
        _write_outputs({Path(out): text})
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    if args.n < 1:
        raise ConfigError("--n must be at least 1")
    echo = _echo(args)
    graph_seed = derive_seed(args.seed, 0)
    model_seed = derive_seed(args.seed, 1)
    data_seed = derive_seed(args.seed, 2)
    comments = [f"config={echo}",
                "seeds: graph=derive_seed(seed, 0), model=derive_seed(seed, 1), data=derive_seed(seed, 2)"]
    g = sample_dregular(args.p, args.d, args.discrete, graph_seed)
    m = build_model(g, args.rho, args.sigma_h, args.levels, seed=model_seed)
    data = sample_dataset(m, args.n, data_seed)
    out = Path(args.out_dir)
    files = {
        out / f"{args.prefix}_graph.txt": format_graph(g, comments),
        out / f"{args.prefix}_model.json": format_model(m, json.loads(echo)),
        out / f"{args.prefix}_data.csv": format_csv(data, comments),
    }
    _write_outputs(files)
    for path in files:
        log.info("wrote %s", path)
    return EXIT_OK


def cmd_nrr(args) -> int:
    data = read_csv(args.data)
    ms = [nrr_matrix(data, q, args.subsets, args.alpha, args.restrict_continuous, args.seed,
                     args.test, threads=args.threads) for q in args.q]
    m = average_nrr(ms)
    m.info.update({"n": data.n, "config": _echo(args)})
    _emit(format_nrr(m), args.out)
    return EXIT_OK


def cmd_infer(args) -> int:
    if args.threshold is None and not args.rank:
        raise ConfigError("infer needs --threshold, --rank or both")
    m = read_nrr(args.nrr)
    parts = []
    if args.threshold is not None:
        parts.append(format_graph(qp_graph(m, args.threshold), [f"config={_echo(args)}"]))
    if args.rank:
        parts.append(("" if parts else f"# config={_echo(args)}\n") + format_ranking(m))
    _emit("\n".join(parts), args.out)
    return EXIT_OK


def cmd_eval(args) -> int:
    truth = read_graph(args.truth)
    m = read_nrr(args.nrr)
    if truth.n_vertices != m.p or truth.discrete != m.marks:
        raise DataFormatError("reference graph and NRR file disagree on vertices or marks")
    curve = precision_recall(rank_edges(m), truth, args.recall_cap)
    value = auc(curve)
    curve_path = Path(args.curve) if args.curve else Path(str(args.nrr) + ".pr.tsv")
    _write_outputs({curve_path: f"# config={_echo(args)}\n" + format_curve(curve)})
    print(f"auc\t{value!r}")
    return EXIT_OK


def cmd_type1(args) -> int:
    cfg = Type1Config(
        n_list=args.n, n_replicates=args.replicates, alpha=args.alpha,
        fixtures=tuple(FIXTURES) if args.fixture == "both" else (args.fixture,),
        tests=TESTS if args.test == "both" else (args.test,),
        seed=args.seed, threads=args.threads,
    )
    _emit(format_type1(cfg, type1_experiment(cfg)), args.out)
    return EXIT_OK


_ACCURACY_FLAGS = {
    "p": "p", "discrete": "n_discrete", "d": "d_list", "rho": "rho_list", "sigma": "sigma_list",
    "graphs": "n_graphs", "paramsets": "n_paramsets", "datasets": "n_datasets", "n": "n", "q": "q",
    "subsets": "n_subsets", "alpha": "alpha", "recall_cap": "recall_cap",
}


def cmd_accuracy(args) -> int:
    cfg = PRESETS[args.preset]
    over = {field: getattr(args, flag) for flag, field in _ACCURACY_FLAGS.items() if getattr(args, flag) is not None}
    cfg = AccuracyConfig(**{**cfg.__dict__, **over, "seed": args.seed, "threads": args.threads})
    if args.scale != 1.0:
        cfg = cfg.scaled(args.scale)
    _emit(format_accuracy(cfg, accuracy_experiment(cfg)), args.out)
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    ap = build_parser()
    try:
        try:
            args = ap.parse_args(argv)
        except SystemExit as exc:  # --help and --version
            return int(exc.code or 0)
        if args.config:
            args = _apply_config_file(ap, args, argv)
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        return args.func(args)
    except ConfigError as exc:
        print(f"qpmix: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataFormatError, OSError) as exc:
        msg = f"{exc.filename}: {exc.strerror}" if isinstance(exc, OSError) and exc.filename else exc
        print(f"qpmix: data error: {msg}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"qpmix: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except QpMixError as exc:
        print(f"qpmix: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
