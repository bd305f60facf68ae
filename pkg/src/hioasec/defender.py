"""Four-mode defender automaton: startup, normal, alternate, fail.

Each defender's subnetwork is one automaton. In normal and alternate
modes the defender moves its investment halfway from the value it held
one sample earlier towards its best response to the other defenders'
last reported investments. Startup counts a timer up while the attack
probability evolves as ``p + p**2``; fail pins every probability at one.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, replace
from typing import Any

import numpy as np

from .errors import GameError, WrongMode
from .expr import And, Apply, Cmp, Const, Not, Or, Var, is_true, timer_reached
from .game import GameSpec, SolverConfig, best_response
from .hioa import HioaSignature, Transition, VariableDecl

MODES = ("startup", "normal", "alternate", "fail")
EVENTS = ("timer_elapsed", "deviation_detected", "stability_reached", "fail_triggered", "none")


@dataclass(frozen=True)
class DynamicsParams:
    h: float = 1.0
    tau_I: float = 3.0
    eps_dev: float = 1e-3
    stability_window: int = 3

    def __post_init__(self) -> None:
        if not self.h > 0:
            raise GameError("sample period h must be > 0")
        if not self.tau_I > 0:
            raise GameError("tau_I must be > 0")
        if not self.eps_dev > 0:
            raise GameError("eps_dev must be > 0")
        if isinstance(self.stability_window, bool) or not isinstance(self.stability_window, int):
            raise GameError("stability_window must be an integer")
        if self.stability_window < 1:
            raise GameError("stability_window must be >= 1")


@dataclass(frozen=True)
class ModuleState:
    mode: str
    x: tuple[float, ...]
    tau: float
    p0: tuple[float, ...]
    p: tuple[float, ...]
    x_prev: tuple[float, ...]
    others_prev: tuple[float, ...]
    risk_prev: float = 0.0
    stability_counter: int = 0
    converged: bool = True


@dataclass(frozen=True)
class InputRecord:
    attack_risk: float
    fail_event: bool
    # Opponent id -> reported investment vector, in defender declaration order.
    x_others: Mapping[str, tuple[float, ...]]

    def __post_init__(self) -> None:
        if not self.attack_risk >= 0:
            raise GameError(f"attack_risk must be >= 0, got {self.attack_risk}")

    def flat_others(self) -> tuple[float, ...]:
        out: list[float] = []
        for vec in self.x_others.values():
            out.extend(vec)
        return tuple(out)


# variable naming ---------------------------------------------------------

def var(name: str, k: str) -> str:
    return f"{name}_{k}"


def risk_var(k: str) -> str:
    return f"Attack_Risk_{k}"


def fail_var(k: str) -> str:
    return f"Fail_Event_{k}"


def invest_var(k: str) -> str:
    return f"x_{k}"


def opponents(game: GameSpec, k: str) -> tuple[str, ...]:
    game.defender(k)
    return tuple(d.id for d in game.defenders if d.id != k)


# update laws -------------------------------------------------------------

def _require(s: ModuleState, *modes: str) -> None:
    if s.mode not in modes:
        raise WrongMode(f"update for {modes} applied in mode {s.mode!r}")


def startup_update(s: ModuleState, params: DynamicsParams) -> ModuleState:
    """``p <- clamp(p + p**2, 0, 1)`` per edge and ``tau <- tau + h``."""
    _require(s, "startup")
    p = tuple(min(max(v + v * v, 0.0), 1.0) for v in s.p)
    return replace(s, p=p, tau=s.tau + params.h)


def _fail_law(s: ModuleState) -> ModuleState:
    return replace(s, p=(1.0,) * len(s.p), tau=0.0)


def fail_update(s: ModuleState) -> ModuleState:
    """Every edge probability goes to one; investments stay frozen."""
    _require(s, "fail")
    return _fail_law(s)


def _others_on_own_edges(game: GameSpec, k: str, x_others: Mapping[str, Sequence[float]]) -> np.ndarray:
    d = game.defender(k)
    col = {key: i for i, key in enumerate(d.edges)}
    extra = np.zeros(d.n_edges)
    for j, vec in x_others.items():
        dj = game.defender(j)
        for key, v in zip(dj.edges, vec):
            i = col.get(key)
            if i is not None:
                extra[i] += v
    return extra


def reported_investment(s: ModuleState, attack_risk: float) -> tuple[float, ...]:
    if attack_risk == 0:
        return (0.0,) * len(s.x)
    return s.x


def valuation(
    s: ModuleState, inp: InputRecord, game: GameSpec, k: str
) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Reported ``(p_k, x_k)``.

    Without attack risk the reported investment is zero. Edge probabilities
    apply the response function to the total investment on each edge,
    including opponents' spending on shared edges.
    """
    x_out = reported_investment(s, inp.attack_risk)
    total = np.asarray(x_out, dtype=float) + _others_on_own_edges(game, k, inp.x_others)
    p = tuple(float(b * math.exp(-t)) for b, t in zip(s.p0, total))
    return p, x_out


def is_quiet(s: ModuleState, inp: InputRecord, params: DynamicsParams) -> bool:
    now = inp.flat_others()
    if len(now) != len(s.others_prev):
        raise GameError("opponent vector length changed between samples")
    drift = max((abs(a - b) for a, b in zip(now, s.others_prev)), default=0.0)
    return drift <= params.eps_dev and inp.attack_risk == s.risk_prev


def normal_update(
    s: ModuleState,
    inp: InputRecord,
    game: GameSpec,
    k: str,
    solver: SolverConfig,
    params: DynamicsParams | None = None,
    *,
    response: np.ndarray | None = None,
    converged: bool = True,
) -> ModuleState:
    """Damped best response ``x <- (x_prev + x*) / 2`` with ``tau <- 0``.

    ``response`` short-circuits the solver with a precomputed best response.
    """
    _require(s, "normal", "alternate")
    params = params or DynamicsParams()
    if response is None:
        br = best_response(game, k, {j: np.asarray(v) for j, v in inp.x_others.items()}, solver)
        response, converged = br.x, br.converged
    x_new = tuple(float(v) for v in 0.5 * (np.asarray(s.x_prev) + np.asarray(response)))
    counter = s.stability_counter + 1 if is_quiet(s, inp, params) else 0
    nxt = replace(
        s,
        x=x_new,
        x_prev=s.x,
        tau=0.0,
        others_prev=inp.flat_others(),
        risk_prev=float(inp.attack_risk),
        stability_counter=counter,
        converged=bool(converged),
    )
    p, _ = valuation(nxt, inp, game, k)
    return replace(nxt, p=p)


def transition_event(s: ModuleState, inp: InputRecord, params: DynamicsParams) -> str:
    """Classify what the current sample means for the automaton in ``s.mode``."""
    if s.mode == "fail":
        return "none"
    if s.mode == "startup":
        # Failure during startup is deliberately not modelled.
        return "timer_elapsed" if s.tau >= params.tau_I - 1e-9 else "none"
    if inp.fail_event:
        return "fail_triggered"
    if not is_quiet(s, inp, params):
        return "deviation_detected"
    if s.mode == "alternate" and s.stability_counter + 1 >= params.stability_window:
        return "stability_reached"
    return "none"


# automaton ---------------------------------------------------------------

def initial_state(game: GameSpec, k: str, p: Sequence[float] | None = None) -> ModuleState:
    d = game.defender(k)
    n = d.n_edges
    width = sum(game.defender(j).n_edges for j in opponents(game, k))
    zeros = (0.0,) * n
    return ModuleState(
        mode="startup",
        x=zeros,
        tau=0.0,
        p0=zeros,
        p=zeros if p is None else tuple(float(v) for v in p),
        x_prev=zeros,
        others_prev=(0.0,) * width,
    )


_FIELDS = (
    ("x", "x"),
    ("p", "p"),
    ("tau", "tau"),
    ("p0", "p0"),
    ("x_prev", "x_prev"),
    ("others_prev", "others_prev"),
    ("risk_prev", "risk_prev"),
    ("counter", "stability_counter"),
    ("converged", "converged"),
)


def to_valuation(k: str, s: ModuleState) -> dict[str, Any]:
    return {var(short, k): getattr(s, attr) for short, attr in _FIELDS}


def from_valuation(k: str, mode: str, val: Mapping[str, Any]) -> ModuleState:
    return ModuleState(mode=mode, **{attr: val[var(short, k)] for short, attr in _FIELDS})


def input_record(game: GameSpec, k: str, inputs: Mapping[str, Any]) -> InputRecord:
    return InputRecord(
        attack_risk=inputs[risk_var(k)],
        fail_event=inputs[fail_var(k)],
        x_others={j: tuple(inputs[invest_var(j)]) for j in opponents(game, k)},
    )


def make_defender_module(
    game: GameSpec,
    k: str,
    params: DynamicsParams | None = None,
    solver: SolverConfig | None = None,
    *,
    initial_p: Sequence[float] | None = None,
) -> HioaSignature:
    """Build defender ``k``'s automaton.

    Transitions, in priority order within each mode:

    * startup -> normal when the timer reaches ``tau_I`` (calibration reset)
    * normal -> fail and alternate -> fail on ``Fail_Event``
    * normal -> alternate when opponents move by more than ``eps_dev`` or
      the attack risk changes
    * alternate -> normal after ``stability_window`` quiet samples

    Fail has no outgoing transitions. ``x_k`` is a wired output; ``p_k`` is
    monitor-only.
    """
    params = params or DynamicsParams()
    solver = solver or SolverConfig()
    d = game.defender(k)
    n = d.n_edges
    opp = opponents(game, k)
    width = sum(game.defender(j).n_edges for j in opp)
    baseline = tuple(game.graph.edge(*key).p0 for key in d.edges)

    variables = (
        VariableDecl(var("x", k), "output", "vector", n),
        VariableDecl(var("p", k), "output", "vector", n, monitor=True),
        VariableDecl(var("tau", k), "internal", "timer"),
        VariableDecl(var("p0", k), "internal", "vector", n),
        VariableDecl(var("x_prev", k), "internal", "vector", n),
        VariableDecl(var("others_prev", k), "internal", "vector", width),
        VariableDecl(var("risk_prev", k), "internal", "real"),
        VariableDecl(var("counter", k), "internal", "integer"),
        VariableDecl(var("converged", k), "internal", "boolean"),
        VariableDecl(risk_var(k), "input", "real"),
        VariableDecl(fail_var(k), "input", "boolean"),
    ) + tuple(VariableDecl(invest_var(j), "input", "vector", game.defender(j).n_edges) for j in opp)

    responses: dict[tuple, tuple[np.ndarray, bool]] = {}

    def respond(inp: InputRecord) -> tuple[np.ndarray, bool]:
        key = tuple(inp.x_others.items())
        hit = responses.get(key)
        if hit is None:
            br = best_response(game, k, {j: np.asarray(v) for j, v in inp.x_others.items()}, solver)
            hit = (br.x, br.converged)
            if len(responses) > 4096:
                responses.clear()
            responses[key] = hit
        return hit

    def law(mode: str, fn):
        def run(state, inputs):
            s = from_valuation(k, mode, state)
            inp = input_record(game, k, inputs)
            return to_valuation(k, fn(s, inp))

        return run

    def startup_law(s, inp):
        return startup_update(s, params)

    def normal_law(s, inp):
        x_star, ok = respond(inp)
        return normal_update(s, inp, game, k, solver, params, response=x_star, converged=ok)

    def fail_law(s, inp):
        return fail_update(s)

    def calibrate(s, inp):
        zeros = (0.0,) * n
        nxt = replace(
            s,
            p0=baseline,
            x=zeros,
            x_prev=zeros,
            tau=0.0,
            others_prev=inp.flat_others(),
            risk_prev=float(inp.attack_risk),
            stability_counter=0,
        )
        p, _ = valuation(nxt, inp, game, k)
        return replace(nxt, p=p)

    def switch(s, inp):
        return replace(normal_law(s, inp), stability_counter=0)

    def to_fail(s, inp):
        return _fail_law(s)

    functions = {
        "startup": law("startup", startup_law),
        "normal": law("normal", normal_law),
        "alternate": law("alternate", normal_law),
        "fail": law("fail", fail_law),
        "calibrate": law("startup", calibrate),
        "enter_alternate": law("normal", switch),
        "return_normal": law("alternate", switch),
        "to_fail": law("normal", to_fail),
    }

    others = Apply("concat", tuple(Var(invest_var(j)) for j in opp))
    deviation = Or(
        (
            Cmp(">", Apply("linf_dist", (others, Var(var("others_prev", k)))), Const(params.eps_dev)),
            Cmp("!=", Var(risk_var(k)), Var(var("risk_prev", k))),
        )
    )
    stability = And(
        (Not(deviation), Cmp(">=", Var(var("counter", k)), Const(params.stability_window - 1)))
    )
    failed = is_true(fail_var(k))
    transitions = (
        Transition("boot", "startup", timer_reached(var("tau", k), params.tau_I), "calibrate", "normal"),
        Transition("fail_from_normal", "normal", failed, "to_fail", "fail"),
        Transition("deviate", "normal", deviation, "enter_alternate", "alternate"),
        Transition("fail_from_alternate", "alternate", failed, "to_fail", "fail"),
        Transition("stabilize", "alternate", stability, "return_normal", "normal"),
    )

    def outputs(state, inputs):
        risk = inputs.get(risk_var(k), 0.0)
        x = state[var("x", k)]
        return {var("x", k): (0.0,) * n if risk == 0 else x, var("p", k): state[var("p", k)]}

    init = initial_state(game, k, initial_p)
    flows = {m: {var("x", k): 0.0} for m in MODES}
    return HioaSignature(
        name=k,
        modes=MODES,
        variables=variables,
        transitions=transitions,
        initial=(("startup", to_valuation(k, init)),),
        updates={"startup": "startup", "normal": "normal", "alternate": "alternate", "fail": "fail"},
        functions=functions,
        outputs=outputs,
        flows=flows,
    )
