"""Scenario files: parsing, validation, serialization, and the built-in DER.1 instance."""

from __future__ import annotations

import json
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from . import errors
from .attack_graph import AttackGraph, Edge, build_graph
from .defender import DynamicsParams, make_defender_module
from .engine import Event, validate_schedule
from .errors import ParseError, ScenarioValidationError
from .game import Defender, GameSpec, SolverConfig
from .hioa import HioaSignature

DEFAULT_STEPS = 100


@dataclass(frozen=True)
class Scenario:
    name: str
    graph: AttackGraph
    defenders: tuple[Defender, ...]
    params: DynamicsParams = field(default_factory=DynamicsParams)
    solver: SolverConfig = field(default_factory=SolverConfig)
    events: tuple[Event, ...] = ()
    steps: int = DEFAULT_STEPS
    initial_attack_risk: float = 1.0

    @property
    def game(self) -> GameSpec:
        cached = self.__dict__.get("_game")
        if cached is None:
            cached = GameSpec(self.graph, self.defenders)
            object.__setattr__(self, "_game", cached)
        return cached

    def modules(self) -> list[HioaSignature]:
        return [make_defender_module(self.game, d.id, self.params, self.solver) for d in self.defenders]


def to_dict(s: Scenario) -> dict[str, Any]:
    return {
        "name": s.name,
        "nodes": sorted(s.graph.nodes),
        "source": s.graph.source,
        "edges": [{"from": e.src, "to": e.dst, "p0": e.p0} for e in s.graph.edges],
        "defenders": [
            {
                "id": d.id,
                "assets": [{"node": n, "loss": l} for n, l in d.assets],
                "edges": [[a, b] for a, b in d.edges],
                "budget": d.budget,
            }
            for d in s.defenders
        ],
        "params": {
            "h": s.params.h,
            "tau_I": s.params.tau_I,
            "eps_dev": s.params.eps_dev,
            "stability_window": s.params.stability_window,
        },
        "solver": {
            "max_iterations": s.solver.max_iterations,
            "tolerance": s.solver.tolerance,
            "step0": s.solver.step0,
            "smoothing": s.solver.smoothing,
        },
        "events": [
            {"time": ev.time, "module": ev.module, "kind": ev.kind, "value": ev.value} for ev in s.events
        ],
        "steps": s.steps,
        "initial_attack_risk": s.initial_attack_risk,
    }


def dumps(s: Scenario) -> str:
    return json.dumps(to_dict(s), indent=2) + "\n"


def save(s: Scenario, path: str | Path) -> None:
    Path(path).write_text(dumps(s), encoding="utf-8")


# parsing -----------------------------------------------------------------

def _need(obj: Mapping, key: str, where: str, kind: type | tuple[type, ...]):
    if key not in obj:
        raise ParseError(f"missing required key {key!r}", field=f"{where}{key}")
    val = obj[key]
    if not isinstance(val, kind) or (isinstance(val, bool) and bool not in _as_tuple(kind)):
        raise ParseError(f"wrong type for {key!r}: {type(val).__name__}", field=f"{where}{key}")
    return val


def _opt(obj: Mapping, key: str, where: str, kind, default):
    if key not in obj or obj[key] is None and default is None:
        return default
    return _need(obj, key, where, kind)


def _as_tuple(kind) -> tuple:
    return kind if isinstance(kind, tuple) else (kind,)


_NUM = (int, float)


def _invalid(exc: Exception, entity: str) -> ScenarioValidationError:
    return ScenarioValidationError(f"{entity}: {exc}", entity=entity, kind=type(exc).__name__)


def from_dict(data: Any) -> Scenario:
    """Build a validated scenario from decoded JSON.

    Raises ParseError for shape problems (missing keys, wrong types) and
    ScenarioValidationError for bad values or unresolved references.
    """
    if not isinstance(data, dict):
        raise ParseError("top level must be a JSON object")
    nodes = _need(data, "nodes", "", list)
    source = _need(data, "source", "", str)
    raw_edges = _need(data, "edges", "", list)
    edges = []
    for i, e in enumerate(raw_edges):
        where = f"edges[{i}]."
        if not isinstance(e, dict):
            raise ParseError("edge must be an object", field=f"edges[{i}]")
        edges.append(Edge(_need(e, "from", where, str), _need(e, "to", where, str), _need(e, "p0", where, _NUM)))
    for i, n in enumerate(nodes):
        if not isinstance(n, str):
            raise ParseError("node labels must be strings", field=f"nodes[{i}]")
    try:
        graph = build_graph(nodes, edges, source)
    except errors.GraphError as exc:
        raise _invalid(exc, "graph") from exc

    defenders = []
    for i, d in enumerate(_need(data, "defenders", "", list)):
        where = f"defenders[{i}]."
        if not isinstance(d, dict):
            raise ParseError("defender must be an object", field=f"defenders[{i}]")
        did = _need(d, "id", where, str)
        assets = []
        for j, a in enumerate(_need(d, "assets", where, list)):
            aw = f"{where}assets[{j}]."
            if not isinstance(a, dict):
                raise ParseError("asset must be an object", field=aw[:-1])
            assets.append((_need(a, "node", aw, str), _need(a, "loss", aw, _NUM)))
        ctl = []
        for j, pair in enumerate(_need(d, "edges", where, list)):
            if not (isinstance(pair, list) and len(pair) == 2 and all(isinstance(p, str) for p in pair)):
                raise ParseError("controlled edge must be a [from, to] pair", field=f"{where}edges[{j}]")
            ctl.append((pair[0], pair[1]))
        budget = _need(d, "budget", where, _NUM)
        try:
            defenders.append(Defender(did, tuple(assets), tuple(ctl), budget))
        except errors.GameError as exc:
            raise _invalid(exc, f"defender {did}") from exc
    try:
        game = GameSpec(graph, tuple(defenders))
    except errors.GameError as exc:
        raise _invalid(exc, "defenders") from exc

    p = _opt(data, "params", "", dict, {})
    try:
        params = DynamicsParams(
            h=_opt(p, "h", "params.", _NUM, 1.0),
            tau_I=_opt(p, "tau_I", "params.", _NUM, 3.0),
            eps_dev=_opt(p, "eps_dev", "params.", _NUM, 1e-3),
            stability_window=_opt(p, "stability_window", "params.", int, 3),
        )
    except errors.GameError as exc:
        raise _invalid(exc, "params") from exc

    sv = _opt(data, "solver", "", dict, {})
    try:
        solver = SolverConfig(
            max_iterations=_opt(sv, "max_iterations", "solver.", int, 5000),
            tolerance=_opt(sv, "tolerance", "solver.", _NUM, 1e-6),
            step0=_opt(sv, "step0", "solver.", _NUM, None),
            smoothing=_opt(sv, "smoothing", "solver.", _NUM, 0.01),
        )
    except errors.GameError as exc:
        raise _invalid(exc, "solver") from exc

    events = []
    ids = {d.id for d in defenders}
    for i, ev in enumerate(_opt(data, "events", "", list, [])):
        where = f"events[{i}]."
        if not isinstance(ev, dict):
            raise ParseError("event must be an object", field=f"events[{i}]")
        module = _need(ev, "module", where, str)
        if module not in ids:
            raise ScenarioValidationError(
                f"event {i} targets unknown module {module!r}", entity=f"events[{i}]", kind="UnknownDefender"
            )
        if "value" not in ev:
            raise ParseError("missing required key 'value'", field=f"{where}value")
        try:
            events.append(Event(_need(ev, "time", where, _NUM), module, _need(ev, "kind", where, str), ev["value"]))
        except errors.ScheduleError as exc:
            raise _invalid(exc, f"events[{i}]") from exc
    try:
        validate_schedule(events)
    except errors.ScheduleError as exc:
        raise _invalid(exc, "events") from exc

    steps = _opt(data, "steps", "", int, DEFAULT_STEPS)
    if steps < 1:
        raise ScenarioValidationError("steps must be >= 1", entity="steps", kind="ValidationError")
    risk = _opt(data, "initial_attack_risk", "", _NUM, 1.0)
    if not risk >= 0:
        raise ScenarioValidationError("initial_attack_risk must be >= 0", entity="initial_attack_risk")

    scenario = Scenario(
        name=_opt(data, "name", "", str, ""),
        graph=graph,
        defenders=game.defenders,
        params=params,
        solver=solver,
        events=tuple(events),
        steps=steps,
        initial_attack_risk=float(risk),
    )
    try:
        scenario.modules()
    except errors.AutomatonError as exc:
        raise _invalid(exc, "modules") from exc
    return scenario


def loads(text: str) -> Scenario:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", line=exc.lineno) from exc
    return from_dict(data)


def parse_scenario(path: str | Path) -> Scenario:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror or exc}") from exc
    return loads(text)


# DER.1 -------------------------------------------------------------------

# Stepping-stone topology: HMIs (w1 EV, w2 PV, w3 shared gateway) lead to
# the EV charger controller (w4) and PV inverter (w5), whose compromise is
# the physical failure G1 / G0; either failure implies G.
DER1_NODES = ("s", "w1", "w2", "w3", "w4", "w5", "G0", "G1", "G")
DER1_EDGES = (
    ("s", "w1"),
    ("s", "w2"),
    ("s", "w3"),
    ("w3", "w1"),
    ("w3", "w2"),
    ("w1", "w4"),
    ("w2", "w5"),
    ("w4", "G1"),
    ("w5", "G0"),
    ("G1", "G"),
    ("G0", "G"),
)
DER1_EV_EDGES = (("s", "w1"), ("w3", "w1"), ("w1", "w4"), ("w4", "G1"), ("G1", "G"))
DER1_PV_EDGES = (("s", "w2"), ("w3", "w2"), ("w2", "w5"), ("w5", "G0"), ("G0", "G"))


def build_der1(
    p0: float = 0.8,
    loss_equipment: float = 100.0,
    loss_shared: float = 50.0,
    budget: float = 2.0,
) -> Scenario:
    """Two-defender DER.1 scenario: defender "1" guards the EV side, "2" the PV side.

    Numeric values are defaults chosen for the scenario, not measurements.
    """
    graph = build_graph(DER1_NODES, [Edge(a, b, p0) for a, b in DER1_EDGES], "s")
    defenders = (
        Defender("1", (("G1", loss_equipment), ("G", loss_shared)), DER1_EV_EDGES, budget),
        Defender("2", (("G0", loss_equipment), ("G", loss_shared)), DER1_PV_EDGES, budget),
    )
    return Scenario(name="DER.1", graph=graph, defenders=defenders)
