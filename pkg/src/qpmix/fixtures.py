"""Frozen four-vertex models for the type-I error calibration study.

Vertices 0 and 1 are binary discrete, 2 and 3 continuous; the two discrete
variables are never adjacent. ``continuous`` lacks the edge 2-3 and the null
tested is 2 indep 3 given {0, 1}. ``mixed`` lacks the edge 0-2 and the null is
0 indep 2 given {1, 3}.

The shipped JSON files were produced by :func:`build_fixture` with the
parameters in ``FIXTURES``; ``tests/test_fixtures.py`` checks they still agree.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

from .cg_model import CGModel, build_model, model_from_dict, model_to_dict
from .errors import ConfigError
from .marked_graph import MarkedGraph


@dataclass(frozen=True)
class Fixture:
    name: str
    model: CGModel
    a: int
    b: int
    Q: tuple[int, ...]


FIXTURES = {
    "continuous": dict(edges=[(0, 2), (0, 3), (1, 2), (1, 3)], test=(2, 3, (0, 1)), rho=0.5, sigma_h=2.0, seed=20110601),
    "mixed": dict(edges=[(0, 3), (1, 2), (1, 3), (2, 3)], test=(0, 2, (1, 3)), rho=0.5, sigma_h=2.0, seed=20110602),
}


def build_fixture(name: str) -> Fixture:
    params = FIXTURES[name]
    g = MarkedGraph.from_edges(4, params["edges"], n_discrete=2)
    m = build_model(g, params["rho"], params["sigma_h"], (2, 2), seed=params["seed"])
    a, b, Q = params["test"]
    return Fixture(name, m, a, b, tuple(Q))


def fixture_to_json(f: Fixture) -> str:
    params = FIXTURES[f.name]
    doc = {
        "name": f.name,
        "test": {"a": f.a, "b": f.b, "Q": list(f.Q)},
        "build": {"rho": params["rho"], "sigma_h": params["sigma_h"], "seed": params["seed"]},
        "model": model_to_dict(f.model),
    }
    return json.dumps(doc, indent=1) + "\n"


def load_fixture(name: str) -> Fixture:
    if name not in FIXTURES:
        raise ConfigError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}")
    text = resources.files("qpmix").joinpath("data").joinpath(f"null_{name}.json").read_text()
    doc = json.loads(text)
    t = doc["test"]
    return Fixture(name, model_from_dict(doc["model"]), int(t["a"]), int(t["b"]), tuple(t["Q"]))
