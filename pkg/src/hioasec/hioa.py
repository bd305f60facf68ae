"""Hybrid input/output automata with sampled (discrete-time) semantics.

A signature bundles modes, typed variables, guarded transitions with named
reset functions, per-mode update functions, initial states and an output
map. Flows are recorded per mode for documentation; every flow in this
package is ``dx/dt = 0`` between samples, so a step either fires the first
enabled transition or applies the mode's update function.
"""

from __future__ import annotations

from collections.abc import Callable, Hashable, Iterable, Mapping
from dataclasses import dataclass, field
from typing import Any, NamedTuple

from .errors import (
    AutomatonError,
    Incompatible,
    UndefinedUpdate,
    UnknownMode,
    ValuationTypeError,
)
from .expr import TRUE, And, Expr, Not

Valuation = dict[str, Any]
Mode = Hashable
StateFn = Callable[[Mapping[str, Any], Mapping[str, Any]], Valuation]

KINDS = ("input", "internal", "output")
TYPES = ("real", "vector", "boolean", "timer", "integer")


@dataclass(frozen=True)
class VariableDecl:
    name: str
    kind: str
    type: str
    size: int | None = None
    # Monitor outputs are reported but never wired into another automaton.
    monitor: bool = False

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise AutomatonError(f"variable {self.name}: unknown kind {self.kind!r}")
        if self.type not in TYPES:
            raise AutomatonError(f"variable {self.name}: unknown type {self.type!r}")
        if self.type == "vector" and (self.size is None or self.size < 0):
            raise AutomatonError(f"vector variable {self.name} needs a size")
        if self.monitor and self.kind != "output":
            raise AutomatonError(f"only outputs can be monitor-only ({self.name})")

    def check(self, value: Any) -> None:
        t = self.type
        ok: bool
        if t == "boolean":
            ok = isinstance(value, bool)
        elif t == "integer":
            ok = isinstance(value, int) and not isinstance(value, bool)
        elif t in ("real", "timer"):
            ok = isinstance(value, (int, float)) and not isinstance(value, bool)
            if ok and t == "timer":
                ok = value >= 0
        else:
            ok = (
                isinstance(value, tuple)
                and len(value) == self.size
                and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
            )
        if not ok:
            raise ValuationTypeError(f"{self.name}: {value!r} is not a valid {t}")


@dataclass(frozen=True)
class Transition:
    name: str
    source: Mode
    guard: Expr
    reset: str
    target: Mode


@dataclass(frozen=True)
class HioaSignature:
    name: str
    modes: tuple[Mode, ...]
    variables: tuple[VariableDecl, ...]
    transitions: tuple[Transition, ...]
    initial: tuple[tuple[Mode, Mapping[str, Any]], ...]
    updates: Mapping[Mode, str]
    functions: Mapping[str, StateFn]
    outputs: StateFn
    flows: Mapping[Mode, Mapping[str, float]] = field(default_factory=dict)
    stutter_completion: bool = True
    # Names computed internally from the automaton's own state (wired
    # outputs of composed components) rather than supplied as inputs.
    derived: tuple[str, ...] = ()
    derive: StateFn | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        validate(self)

    # variable partitions -------------------------------------------------

    def _names(self, *kinds: str) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables if v.kind in kinds)

    @property
    def inputs(self) -> tuple[str, ...]:
        return self._names("input")

    @property
    def state_vars(self) -> tuple[str, ...]:
        return self._names("internal", "output")

    @property
    def output_vars(self) -> tuple[str, ...]:
        return self._names("output")

    @property
    def wired_outputs(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables if v.kind == "output" and not v.monitor)

    @property
    def monitor_outputs(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables if v.kind == "output" and v.monitor)

    def decl(self, name: str) -> VariableDecl:
        for v in self.variables:
            if v.name == name:
                return v
        raise AutomatonError(f"{self.name}: undeclared variable {name!r}")

    def outgoing(self, mode: Mode) -> tuple[Transition, ...]:
        if mode not in self.modes:
            raise UnknownMode(f"{self.name}: unknown mode {mode!r}")
        return tuple(t for t in self.transitions if t.source == mode)


def validate(sig: HioaSignature) -> None:
    """Re-check the structural invariants of a signature."""
    if len(set(sig.modes)) != len(sig.modes):
        raise AutomatonError(f"{sig.name}: duplicate mode")
    names = [v.name for v in sig.variables]
    if len(set(names)) != len(names):
        dup = sorted({n for n in names if names.count(n) > 1})
        raise AutomatonError(f"{sig.name}: duplicate variable names {dup}")
    known = set(names) | set(sig.derived)
    for t in sig.transitions:
        for m in (t.source, t.target):
            if m not in sig.modes:
                raise UnknownMode(f"{sig.name}: transition {t.name} uses unknown mode {m!r}")
        if t.reset not in sig.functions:
            raise UndefinedUpdate(f"{sig.name}: transition {t.name} has undefined reset {t.reset!r}")
        unknown = t.guard.variables() - known
        if unknown:
            raise AutomatonError(
                f"{sig.name}: guard of {t.name} references undeclared {sorted(unknown)}"
            )
    for mode, fn in sig.updates.items():
        if mode not in sig.modes:
            raise UnknownMode(f"{sig.name}: update for unknown mode {mode!r}")
        if fn not in sig.functions:
            raise UndefinedUpdate(f"{sig.name}: mode {mode!r} has undefined update {fn!r}")
    if not sig.initial:
        raise AutomatonError(f"{sig.name}: empty initial set")
    state = set(sig.state_vars)
    for mode, val in sig.initial:
        if mode not in sig.modes:
            raise UnknownMode(f"{sig.name}: initial mode {mode!r} undeclared")
        if set(val) != state:
            raise AutomatonError(f"{sig.name}: initial valuation must cover exactly the state variables")
        check_valuation(sig, val, sig.state_vars)
    # Outputs are state variables by construction (kind "output" is a state kind).


def check_valuation(sig: HioaSignature, val: Mapping[str, Any], names: Iterable[str]) -> None:
    for name in names:
        if name not in val:
            raise ValuationTypeError(f"{sig.name}: missing value for {name!r}")
        sig.decl(name).check(val[name])


def mode_invariant(sig: HioaSignature, mode: Mode) -> Expr:
    """Predicate that must hold to stay in ``mode``.

    Built as the conjunction of the negated outgoing guards, so it is false
    as soon as any single guard holds. A mode with no outgoing transitions
    has invariant ``true``.
    """
    guards = [t.guard for t in sig.outgoing(mode)]
    if not guards:
        return TRUE
    if len(guards) == 1:
        return Not(guards[0])
    return And(tuple(Not(g) for g in guards))


@dataclass(frozen=True)
class Compatibility:
    ok: bool
    failures: tuple[str, ...]

    def __bool__(self) -> bool:
        return self.ok


def check_compatibility(a: HioaSignature, b: HioaSignature) -> Compatibility:
    """Pairwise compatibility of two automata for composition.

    State sets must be disjoint, wired output sets must be disjoint, and each
    side's wired outputs must all be inputs of the other. Every violated
    clause is reported.
    """
    failures = []
    shared_state = sorted(set(a.state_vars) & set(b.state_vars))
    if shared_state:
        failures.append(f"X1∩X2: shared state variables {shared_state}")
    shared_out = sorted(set(a.wired_outputs) & set(b.wired_outputs))
    if shared_out:
        failures.append(f"Y1∩Y2: shared outputs {shared_out}")
    missing_b = sorted(set(a.wired_outputs) - set(b.inputs))
    if missing_b:
        failures.append(f"Y1⊆U2: outputs of {a.name} not inputs of {b.name}: {missing_b}")
    missing_a = sorted(set(b.wired_outputs) - set(a.inputs))
    if missing_a:
        failures.append(f"Y2⊆U1: outputs of {b.name} not inputs of {a.name}: {missing_a}")
    return Compatibility(not failures, tuple(failures))


def full_inputs(sig: HioaSignature, state: Mapping[str, Any], inputs: Mapping[str, Any]) -> Valuation:
    """Inputs extended with any internally derived (wired) values."""
    env = dict(inputs)
    if sig.derive is not None:
        env.update(sig.derive(state, inputs))
    return env


class StepResult(NamedTuple):
    mode: Mode
    state: Valuation
    outputs: Valuation
    fired: Transition | None


def step(
    sig: HioaSignature, mode: Mode, state: Mapping[str, Any], inputs: Mapping[str, Any]
) -> StepResult:
    """Advance one sample period.

    The first outgoing transition (declaration order) whose guard holds
    fires and applies its reset; otherwise the mode's update function runs.
    Outputs are read from the resulting state.
    """
    check_valuation(sig, state, sig.state_vars)
    check_valuation(sig, inputs, sig.inputs)
    env_inputs = full_inputs(sig, state, inputs)
    env = {**state, **env_inputs}
    fired = None
    for t in sig.outgoing(mode):
        if t.guard.evaluate(env):
            fired = t
            break
    if fired is not None:
        new_state = sig.functions[fired.reset](state, env_inputs)
        new_mode = fired.target
    else:
        fn = sig.updates.get(mode)
        if fn is None:
            raise UndefinedUpdate(f"{sig.name}: no update function for mode {mode!r}")
        new_state = sig.functions[fn](state, env_inputs)
        new_mode = mode
    new_state = dict(new_state)
    check_valuation(sig, new_state, sig.state_vars)
    outputs = sig.outputs(new_state, env_inputs)
    return StepResult(new_mode, new_state, dict(outputs), fired)


@dataclass(frozen=True)
class E1Report:
    ok: bool
    gaps: tuple[tuple[Mode, str], ...]


def check_input_transition_enabled(
    sig: HioaSignature, events: Iterable[str] | None = None
) -> E1Report:
    """Every mode must react to every input event.

    An event (named after the input variable it changes) is handled in a
    mode when some outgoing guard reads that variable. Gaps are reported as
    found; with stutter completion each gap is closed by an implicit
    identity self-loop, so the verdict passes.
    """
    alphabet = tuple(sig.inputs if events is None else events)
    gaps = []
    for mode in sig.modes:
        read = set()
        for t in sig.outgoing(mode):
            read |= t.guard.variables()
        for e in alphabet:
            if e not in read:
                gaps.append((mode, e))
    return E1Report(ok=sig.stutter_completion or not gaps, gaps=tuple(gaps))


def _restrict(val: Mapping[str, Any], names: Iterable[str]) -> Valuation:
    return {n: val[n] for n in names if n in val}


def compose(a: HioaSignature, b: HioaSignature, name: str | None = None) -> HioaSignature:
    """Parallel composition ``a || b``.

    Product modes are pairs. Each side's wired outputs feed the matching
    inputs of the other and leave the external input set. Transitions
    interleave: in a product mode the first enabled transition of either
    side fires while the other side holds its state; when none fires both
    sides apply their mode updates.
    """
    compat = check_compatibility(a, b)
    if not compat:
        raise Incompatible(f"cannot compose {a.name} and {b.name}", list(compat.failures))

    wired_to_a = set(b.wired_outputs) & set(a.inputs)
    wired_to_b = set(a.wired_outputs) & set(b.inputs)
    variables = []
    seen_inputs = set()
    for v in a.variables + b.variables:
        if v.kind == "input":
            if v.name in wired_to_a | wired_to_b or v.name in seen_inputs:
                continue
            seen_inputs.add(v.name)
        variables.append(v)
    derived = tuple(sorted(wired_to_a | wired_to_b)) + tuple(
        n for n in a.derived + b.derived if n not in wired_to_a | wired_to_b
    )

    a_state, b_state = a.state_vars, b.state_vars

    def side_inputs(sig, state, env):
        return _restrict(env, set(sig.inputs) | set(sig.derived))

    def derive(state, inputs):
        # Outputs may not read wired inputs, so component outputs are
        # computed from own state and external inputs only.
        sa = _restrict(state, a_state)
        sb = _restrict(state, b_state)
        ia = full_inputs(a, sa, _restrict(inputs, a.inputs))
        ib = full_inputs(b, sb, _restrict(inputs, b.inputs))
        out = {}
        ya = a.outputs(sa, ia)
        yb = b.outputs(sb, ib)
        for n in wired_to_b:
            out[n] = ya[n]
        for n in wired_to_a:
            out[n] = yb[n]
        out.update({k: v for k, v in ia.items() if k in a.derived})
        out.update({k: v for k, v in ib.items() if k in b.derived})
        return out

    def lift(sig, fn_name, own_state):
        fn = sig.functions[fn_name]

        def lifted(state, env):
            new = dict(state)
            new.update(fn(_restrict(state, own_state), side_inputs(sig, state, env)))
            return new

        return lifted

    functions: dict[str, StateFn] = {}
    for fn_name in a.functions:
        functions[f"{a.name}:{fn_name}"] = lift(a, fn_name, a_state)
    for fn_name in b.functions:
        functions[f"{b.name}:{fn_name}"] = lift(b, fn_name, b_state)

    modes = tuple((la, lb) for la in a.modes for lb in b.modes)
    transitions = []
    updates = {}
    flows = {}
    for la, lb in modes:
        for t in a.outgoing(la):
            transitions.append(
                Transition(f"{a.name}.{t.name}", (la, lb), t.guard, f"{a.name}:{t.reset}", (t.target, lb))
            )
        for t in b.outgoing(lb):
            transitions.append(
                Transition(f"{b.name}.{t.name}", (la, lb), t.guard, f"{b.name}:{t.reset}", (la, t.target))
            )
        fa, fb = a.updates.get(la), b.updates.get(lb)
        if fa is not None and fb is not None:
            key = f"update:{la}|{lb}"
            functions[key] = _both(a, fa, b, fb)
            updates[(la, lb)] = key
        flows[(la, lb)] = {**a.flows.get(la, {}), **b.flows.get(lb, {})}

    def outputs(state, env):
        sa = _restrict(state, a_state)
        sb = _restrict(state, b_state)
        return {
            **a.outputs(sa, side_inputs(a, state, env)),
            **b.outputs(sb, side_inputs(b, state, env)),
        }

    initial = tuple(
        ((la, lb), {**va, **vb}) for la, va in a.initial for lb, vb in b.initial
    )
    return HioaSignature(
        name=name or f"{a.name}||{b.name}",
        modes=modes,
        variables=tuple(variables),
        transitions=tuple(transitions),
        initial=initial,
        updates=updates,
        functions=functions,
        outputs=outputs,
        flows=flows,
        stutter_completion=a.stutter_completion and b.stutter_completion,
        derived=derived,
        derive=derive,
    )


def _both(a: HioaSignature, fa: str, b: HioaSignature, fb: str) -> StateFn:
    fn_a, fn_b = a.functions[fa], b.functions[fb]
    a_state, b_state = a.state_vars, b.state_vars
    a_in = set(a.inputs) | set(a.derived)
    b_in = set(b.inputs) | set(b.derived)

    def run(state, env):
        # Both sides read the pre-step state; their variable sets are disjoint.
        new = dict(state)
        new.update(fn_a(_restrict(state, a_state), _restrict(env, a_in)))
        new.update(fn_b(_restrict(state, b_state), _restrict(env, b_in)))
        return new

    return run
