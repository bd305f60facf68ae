"""Random instance generators shared by the test modules."""

from __future__ import annotations

import math

import numpy as np

from hioasec.attack_graph import Edge, build_graph
from hioasec.engine import Event
from hioasec.game import Defender, GameSpec


def random_dag(rng: np.random.Generator, max_nodes: int = 6, density: float = 0.5):
    n = int(rng.integers(3, max_nodes + 1))
    nodes = ["s"] + [f"v{i}" for i in range(1, n)]
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or rng.random() < density:
                edges.append(Edge(nodes[i], nodes[j], float(rng.uniform(0.2, 1.0))))
    return build_graph(nodes, edges, "s")


def random_game(rng: np.random.Generator, *, max_nodes: int = 6, max_edges: int = 4,
                max_budget: float = 2.0, n_defenders: int = 2) -> GameSpec:
    graph = random_dag(rng, max_nodes)
    keys = list(graph.edge_keys)
    targets = sorted(graph.nodes - {"s"})
    defenders = []
    for k in range(n_defenders):
        ne = int(rng.integers(1, min(max_edges, len(keys)) + 1))
        ctl = [keys[i] for i in sorted(rng.choice(len(keys), ne, replace=False))]
        na = int(rng.integers(1, min(3, len(targets)) + 1))
        assets = [(targets[i], float(rng.uniform(1.0, 100.0)))
                  for i in sorted(rng.choice(len(targets), na, replace=False))]
        defenders.append(Defender(str(k + 1), tuple(assets), tuple(ctl),
                                  float(rng.uniform(0.0, max_budget))))
    return GameSpec(graph, tuple(defenders))


def random_feasible(rng: np.random.Generator, n: int, budget: float) -> np.ndarray:
    if n == 0:
        return np.zeros(0)
    w = rng.dirichlet(np.ones(n + 1))[:n]
    return w * budget


def random_profile(rng: np.random.Generator, game: GameSpec, skip: str | None = None):
    return {d.id: random_feasible(rng, d.n_edges, d.budget)
            for d in game.defenders if d.id != skip}


def random_schedule(rng: np.random.Generator, modules, steps: int, h: float, n_events: int):
    events = []
    for _ in range(n_events):
        t = float(rng.integers(0, steps)) * h
        if rng.random() < 0.5:
            t += float(rng.uniform(0, h))
        m = str(rng.choice(modules))
        if rng.random() < 0.35:
            events.append(Event(t, m, "set_fail", bool(rng.random() < 0.7)))
        else:
            value = 0.0 if rng.random() < 0.3 else float(rng.uniform(0.1, 3.0))
            events.append(Event(t, m, "set_attack_risk", value))
    events.sort(key=lambda e: (e.time, e.module))
    return events


def grid_bound(game: GameSpec, k: str, others, grid_step: float) -> float:
    """Cost gap the grid alone can explain.

    Rounding the continuous optimum down onto the grid moves it by at most
    n * grid_step in l1, and every partial derivative of the cost is bounded
    by the cost terms at zero own investment.
    """
    model = game.model(k)
    return model.lipschitz(model.offsets(others)) * game.defender(k).n_edges * grid_step


def close(a: float, b: float, tol: float = 1e-12) -> bool:
    return math.isclose(a, b, rel_tol=tol, abs_tol=tol)


def rename_variable(sig, old: str, new: str):
    """Copy of ``sig`` with variable ``old`` renamed to ``new`` in declarations,
    guards and initial valuations. Update functions are left untouched, so
    the result is only fit for static checks."""
    import dataclasses

    from hioasec.expr import Expr, TimerReached, Var
    from hioasec.hioa import HioaSignature

    def sub(e):
        if isinstance(e, Var):
            return Var(new) if e.name == old else e
        if isinstance(e, TimerReached):
            return TimerReached(new if e.name == old else e.name, e.threshold)
        changes = {}
        for f in dataclasses.fields(e):
            v = getattr(e, f.name)
            if isinstance(v, Expr):
                changes[f.name] = sub(v)
            elif isinstance(v, tuple) and v and isinstance(v[0], Expr):
                changes[f.name] = tuple(sub(a) for a in v)
        return dataclasses.replace(e, **changes) if changes else e

    variables = tuple(dataclasses.replace(v, name=new) if v.name == old else v for v in sig.variables)
    transitions = tuple(dataclasses.replace(t, guard=sub(t.guard)) for t in sig.transitions)
    initial = tuple((m, {(new if k == old else k): v for k, v in val.items()}) for m, val in sig.initial)
    return HioaSignature(
        name=sig.name,
        modes=sig.modes,
        variables=variables,
        transitions=transitions,
        initial=initial,
        updates=sig.updates,
        functions=sig.functions,
        outputs=sig.outputs,
        flows=sig.flows,
        stutter_completion=sig.stutter_completion,
    )


def fuzz_transitions(game: GameSpec, k: str, n_steps: int, rng: np.random.Generator, params=None):
    """Random walk of defender ``k``'s automaton under random inputs.

    Opponent vectors come from a small pool so best responses are cached.
    Returns ``(fired_count, violations)`` where violations describe any
    forbidden move, any transition whose guard did not hold, or a mode
    invariant that disagreed with the enabled guards.
    """
    from hioasec.defender import DynamicsParams, fail_var, invest_var, make_defender_module, opponents, risk_var
    from hioasec.hioa import mode_invariant, step

    params = params or DynamicsParams(tau_I=2.0, stability_window=2)
    sig = make_defender_module(game, k, params)
    opp = opponents(game, k)
    pools = {
        j: [tuple(float(v) for v in random_feasible(rng, game.defender(j).n_edges, game.defender(j).budget))
            for _ in range(3)]
        for j in opp
    }
    risks = [0.0, 0.5, 1.0]
    mode, state = sig.initial[0]
    inputs = {risk_var(k): 1.0, fail_var(k): False}
    inputs.update({invest_var(j): pools[j][0] for j in opp})
    fired = 0
    violations = []
    for i in range(n_steps):
        if rng.random() < 0.3:
            inputs[risk_var(k)] = risks[int(rng.integers(3))]
        if rng.random() < 0.3:
            for j in opp:
                inputs[invest_var(j)] = pools[j][int(rng.integers(3))]
        inputs[fail_var(k)] = bool(rng.random() < 0.02)
        if mode == "fail" and rng.random() < 0.05:
            # Restart the walk so every mode keeps being exercised.
            mode, state = sig.initial[0]
        env = {**state, **inputs}
        enabled = [t for t in sig.outgoing(mode) if t.guard.evaluate(env)]
        inv = mode_invariant(sig, mode).evaluate(env)
        if inv == bool(enabled):
            violations.append((i, mode, "invariant disagrees with guards"))
        r = step(sig, mode, state, inputs)
        if r.fired is not None:
            fired += 1
            if not r.fired.guard.evaluate(env):
                violations.append((i, mode, f"{r.fired.name} fired with false guard"))
            if r.fired is not enabled[0]:
                violations.append((i, mode, "fired transition is not the first enabled one"))
        if mode == "startup" and r.mode == "fail":
            violations.append((i, mode, "startup -> fail"))
        if mode == "fail" and r.mode != "fail":
            violations.append((i, mode, "left fail"))
        if r.mode != mode and r.fired is None:
            violations.append((i, mode, "mode changed without a transition"))
        mode, state = r.mode, r.state
    return fired, violations
