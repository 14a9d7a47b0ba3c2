"""YAML run configuration: parsing, validation and rendering.

Node ids in the document are one-based, as in the usual adjacency notation;
they are shifted to zero-based on load. Example::

    plant: {n: 1}
    graph:
      nodes: 3
      edges: [[1, 2, 1.0], [2, 3, 1.0]]   # (from, to, weight)
    roots: [1]
    gains: {k1: 0.5, k2: 1.0, f1: 1.5, f2: 0.5}
    mode: partial-state
    sim: {steps: 5000, seed: 1}
"""

from __future__ import annotations

import math
from typing import Any

import numpy as np
import yaml

from .engine import (
    MODES,
    ConfigError,
    InitialConditions,
    SimConfig,
    default_record_every,
)
from .graph import DegreeBounds, Graph, RootSet
from .protocol import ZETA_BAR_FORMS, GainSet, gain_region_contains

TOP_KEYS = {"plant", "graph", "roots", "bounds", "gains", "mode", "zeta_bar_form", "sim"}
REQUIRED_TOP = {"plant", "graph", "roots", "gains", "mode", "sim"}
SECTION_KEYS = {
    "plant": ({"n"}, {"n"}),
    "graph": ({"nodes", "edges"}, {"nodes", "edges"}),
    "gains": ({"k1", "k2", "f1", "f2"}, {"k1", "k2"}),
    "sim": ({"steps", "record_every", "seed", "low", "high",
             "agent_states", "exo_state", "chi", "xhat"}, {"steps"}),
}


def _check_keys(section: str, mapping: Any, allowed: set, required: set):
    if not isinstance(mapping, dict):
        raise ConfigError(f"{section}: expected a mapping")
    unknown = sorted(set(map(str, mapping)) - allowed)
    if unknown:
        raise ConfigError(f"{section}: unknown key(s) {unknown}")
    missing = sorted(required - set(mapping))
    if missing:
        raise ConfigError(f"{section}: missing key(s) {missing}")


def _int(value, field, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{field}: expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{field}: must be >= {minimum}, got {value}")
    return value


def _real(value, field):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{field}: expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{field}: must be finite")
    return float(value)


def _array(value, field):
    if value is None:
        return None
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{field}: not a numeric array") from exc
    return arr


def load_document(document: str) -> dict:
    try:
        data = yaml.safe_load(document)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigError(f"parse error{where}: {problem}") from exc
    if not isinstance(data, dict):
        raise ConfigError("parse error: document must be a mapping at top level")
    return data


def parse_config(document: str, allow_uncertified: bool = False) -> SimConfig:
    """Parse and fully validate a YAML configuration document.

    Gains outside the admissible region are rejected unless
    ``allow_uncertified`` is set (the CLI ``--force`` flag).
    """
    data = load_document(document)
    if "roots" not in data or data.get("roots") in (None, []):
        raise ConfigError("roots: roots required (nonempty list of node ids)")
    _check_keys("<document>", data, TOP_KEYS, REQUIRED_TOP)
    for name, (allowed, required) in SECTION_KEYS.items():
        _check_keys(name, data[name], allowed, required)

    n = _int(data["plant"]["n"], "plant.n", 1)

    gsec = data["graph"]
    nodes = _int(gsec["nodes"], "graph.nodes", 1)
    if not isinstance(gsec["edges"], list):
        raise ConfigError("graph.edges: expected a list of [from, to, weight]")
    edges = []
    for k, e in enumerate(gsec["edges"]):
        field = f"graph.edges[{k}]"
        if not isinstance(e, (list, tuple)) or len(e) not in (2, 3):
            raise ConfigError(f"{field}: expected [from, to] or [from, to, weight]")
        src = _int(e[0], f"{field}.from", 1)
        dst = _int(e[1], f"{field}.to", 1)
        w = _real(e[2], f"{field}.weight") if len(e) == 3 else 1.0
        if src > nodes or dst > nodes:
            raise ConfigError(f"{field}: node id outside 1..{nodes}")
        if src == dst:
            raise ConfigError(f"{field}: self-loops are not allowed")
        if w < 0:
            raise ConfigError(f"{field}: weight must be nonnegative")
        edges.append((src - 1, dst - 1, w))
    graph = Graph.from_edges(nodes, edges)

    roots_raw = data["roots"]
    if not isinstance(roots_raw, list):
        raise ConfigError("roots: expected a list of node ids")
    roots = [_int(r, "roots", 1) for r in roots_raw]
    if any(r > nodes for r in roots):
        raise ConfigError(f"roots: node id outside 1..{nodes}")
    root_set = RootSet([r - 1 for r in roots], nodes)

    try:
        bounds = DegreeBounds.for_graph(graph, data.get("bounds"))
    except ValueError as exc:
        raise ConfigError(f"bounds: {exc}") from exc

    gsec = data["gains"]
    gains = GainSet(*(_real(gsec[k], f"gains.{k}") for k in ("k1", "k2")),
                    **{k: _real(gsec[k], f"gains.{k}") for k in ("f1", "f2") if k in gsec})
    if not allow_uncertified and not gain_region_contains(gains.k1, gains.k2):
        raise ConfigError(f"gains: gain region violated by (k1, k2) = ({gains.k1}, {gains.k2})")

    mode = data["mode"]
    if mode not in MODES:
        raise ConfigError(f"mode: expected one of {MODES}, got {mode!r}")
    form = data.get("zeta_bar_form", "expanded")
    if form not in ZETA_BAR_FORMS:
        raise ConfigError(f"zeta_bar_form: expected one of {ZETA_BAR_FORMS}, got {form!r}")

    sim = data["sim"]
    steps = _int(sim["steps"], "sim.steps", 1)
    record_every = _int(sim.get("record_every", default_record_every(nodes)), "sim.record_every", 1)
    init = InitialConditions(
        seed=_int(sim.get("seed", 0), "sim.seed", 0),
        low=_real(sim.get("low", -10.0), "sim.low"),
        high=_real(sim.get("high", 10.0), "sim.high"),
        agent_states=_array(sim.get("agent_states"), "sim.agent_states"),
        exo_state=_array(sim.get("exo_state"), "sim.exo_state"),
        chi=_array(sim.get("chi"), "sim.chi"),
        xhat=_array(sim.get("xhat"), "sim.xhat"),
    )
    cfg = SimConfig(n, graph, root_set, bounds, gains, mode, steps, record_every, init, form)
    # surface shape errors in explicit arrays now rather than mid-run
    cfg.init.resolve(cfg.n_agents, cfg.n)
    return cfg


def render_config(cfg: SimConfig) -> str:
    """YAML document that parses back to ``cfg``."""
    init = cfg.init
    sim = {"steps": cfg.steps, "record_every": cfg.record_every, "seed": init.seed,
           "low": init.low, "high": init.high}
    for key in ("agent_states", "exo_state", "chi", "xhat"):
        value = getattr(init, key)
        if value is not None:
            sim[key] = np.asarray(value).tolist()
    doc = {
        "plant": {"n": cfg.n},
        "graph": {"nodes": cfg.n_agents,
                  "edges": [[s + 1, d + 1, w] for s, d, w in cfg.graph.edges()]},
        "roots": sorted(r + 1 for r in cfg.roots.members),
        "bounds": cfg.bounds.dbar_in.tolist(),
        "gains": {"k1": cfg.gains.k1, "k2": cfg.gains.k2, "f1": cfg.gains.f1, "f2": cfg.gains.f2},
        "mode": cfg.mode,
        "zeta_bar_form": cfg.zeta_bar_form,
        "sim": sim,
    }
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None)
