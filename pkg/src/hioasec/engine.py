"""Synchronous execution of composed defender automata.

Every tick all modules read the same snapshot of each other's wired
outputs, so the result does not depend on the order modules are stepped
in. Traces have a fixed length; equilibrium detection runs afterwards.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from typing import Any

from .defender import DynamicsParams, fail_var, risk_var
from .errors import Incompatible, NonDeterministic, ScheduleError
from .game import GameSpec, SolverConfig
from .hioa import HioaSignature, check_compatibility, step

EVENT_KINDS = ("set_attack_risk", "set_fail")
OUTPUT_PREFIX = "out."


@dataclass(frozen=True)
class Event:
    time: float
    module: str
    kind: str
    value: Any

    def __post_init__(self) -> None:
        if self.kind not in EVENT_KINDS:
            raise ScheduleError(f"unknown event kind {self.kind!r}")
        if not (isinstance(self.time, (int, float)) and self.time >= 0 and math.isfinite(self.time)):
            raise ScheduleError(f"event time must be a finite number >= 0, got {self.time!r}")
        if self.kind == "set_fail" and not isinstance(self.value, bool):
            raise ScheduleError(f"set_fail needs a boolean value, got {self.value!r}")
        if self.kind == "set_attack_risk":
            v = self.value
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not v >= 0:
                raise ScheduleError(f"set_attack_risk needs a number >= 0, got {v!r}")


def validate_schedule(events: Sequence[Event]) -> tuple[Event, ...]:
    """Events must be sorted by time, then module id; equal keys keep file order."""
    events = tuple(events)
    for a, b in zip(events, events[1:]):
        if (b.time, b.module) < (a.time, a.module):
            raise ScheduleError(
                f"schedule not sorted: ({a.time}, {a.module}) precedes ({b.time}, {b.module})"
            )
    return events


@dataclass(frozen=True)
class TraceRecord:
    step: int
    time: float
    module: str
    mode: str
    values: tuple[tuple[str, Any], ...]

    def get(self, name: str) -> Any:
        for k, v in self.values:
            if k == name:
                return v
        raise KeyError(name)

    def as_dict(self) -> dict[str, Any]:
        return dict(self.values)


@dataclass
class SimRun:
    scenario: str
    params: DynamicsParams
    steps: int
    trace: list[TraceRecord]
    modules: tuple[str, ...] = ()
    equilibrium_step: int | None = None
    fired: list[tuple[int, str, str]] = field(default_factory=list)

    def records(self, module: str) -> list[TraceRecord]:
        return [r for r in self.trace if r.module == module]


def _record_values(sig: HioaSignature, state, inputs, outputs) -> tuple[tuple[str, Any], ...]:
    vals: list[tuple[str, Any]] = []
    for name in sig.state_vars:
        vals.append((name, state[name]))
    for name in sig.inputs:
        vals.append((name, inputs[name]))
    for name in sig.output_vars:
        vals.append((OUTPUT_PREFIX + name, outputs[name]))
    return tuple(vals)


def check_modules(modules: Sequence[HioaSignature]) -> None:
    names = [m.name for m in modules]
    if len(set(names)) != len(names):
        raise Incompatible("module names must be unique")
    failures = []
    for a, b in itertools.combinations(modules, 2):
        verdict = check_compatibility(a, b)
        failures.extend(f"{a.name}/{b.name}: {f}" for f in verdict.failures)
    if failures:
        raise Incompatible("modules are not pairwise compatible", failures)


def run(
    game: GameSpec,
    modules: Sequence[HioaSignature],
    schedule: Sequence[Event],
    params: DynamicsParams,
    steps: int,
    solver: SolverConfig | None = None,
    *,
    initial_attack_risk: float = 1.0,
    scenario: str = "",
) -> SimRun:
    """Execute ``steps`` samples; record ``m`` holds the state at ``t = m*h``.

    Each tick applies events due at or before ``t``, snapshots every
    module's wired outputs, records the tick, then steps each module
    against that snapshot. ``solver`` is carried by the modules themselves
    and accepted here for symmetry with scenario files.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    modules = tuple(modules)
    check_modules(modules)
    events = validate_schedule(schedule)
    known = {m.name for m in modules}
    for ev in events:
        if ev.module not in known:
            raise ScheduleError(f"event targets unknown module {ev.module!r}")

    external: dict[str, dict[str, Any]] = {
        m.name: {risk_var(m.name): float(initial_attack_risk), fail_var(m.name): False} for m in modules
    }
    current = {}
    for m in modules:
        mode, val = m.initial[0]
        current[m.name] = (mode, dict(val))

    trace: list[TraceRecord] = []
    fired: list[tuple[int, str, str]] = []
    cursor = 0
    for k in range(steps):
        t = k * params.h
        while cursor < len(events) and events[cursor].time <= t + 1e-12:
            ev = events[cursor]
            name = risk_var(ev.module) if ev.kind == "set_attack_risk" else fail_var(ev.module)
            external[ev.module][name] = float(ev.value) if ev.kind == "set_attack_risk" else ev.value
            cursor += 1

        snapshot: dict[str, Any] = {}
        for m in modules:
            mode, state = current[m.name]
            outs = m.outputs(state, external[m.name])
            for name in m.wired_outputs:
                snapshot[name] = outs[name]

        stepped = {}
        for m in modules:
            mode, state = current[m.name]
            inputs = {}
            for name in m.inputs:
                inputs[name] = external[m.name][name] if name in external[m.name] else snapshot[name]
            outs = m.outputs(state, inputs)
            trace.append(TraceRecord(k, t, m.name, mode, _record_values(m, state, inputs, outs)))
            if k + 1 < steps:
                res = step(m, mode, state, inputs)
                if res.fired is not None:
                    fired.append((k, m.name, res.fired.name))
                stepped[m.name] = (res.mode, res.state)
        if k + 1 < steps:
            current = stepped

    return SimRun(
        scenario=scenario,
        params=params,
        steps=steps,
        trace=trace,
        modules=tuple(m.name for m in modules),
        fired=fired,
    )


def detect_equilibrium(run: SimRun, tol: float) -> int | None:
    """Earliest step from which every non-failed module's reported
    investment moves by less than ``tol`` (sup norm) per step, through the
    end of the trace."""
    if not run.trace:
        raise ValueError("empty trace")
    by_step: dict[int, dict[str, TraceRecord]] = {}
    for r in run.trace:
        by_step.setdefault(r.step, {})[r.module] = r
    last = max(by_step)

    def settled(m: int) -> bool:
        for name, rec in by_step[m].items():
            if rec.mode == "fail":
                continue
            key = OUTPUT_PREFIX + "x_" + name
            now, before = rec.get(key), by_step[m - 1][name].get(key)
            if max((abs(a - b) for a, b in zip(now, before)), default=0.0) >= tol:
                return False
        return True

    candidate = None
    for m in range(last, 0, -1):
        if settled(m):
            candidate = m
        else:
            break
    return candidate


def replay_check(
    game: GameSpec,
    modules,
    schedule: Sequence[Event],
    params: DynamicsParams,
    steps: int,
    solver: SolverConfig | None = None,
    **kwargs,
) -> bool:
    """Run twice and require byte-identical CSV traces.

    ``modules`` may be a zero-argument factory; each run then gets freshly
    built automata with empty response caches.
    """
    from .trace_io import dumps_trace

    validate_schedule(schedule)

    def once() -> str:
        mods = modules() if callable(modules) else modules
        return dumps_trace(run(game, mods, schedule, params, steps, solver, **kwargs).trace)

    first, second = once(), once()
    if first != second:
        for i, (a, b) in enumerate(itertools.zip_longest(first.splitlines(), second.splitlines())):
            if a != b:
                raise NonDeterministic(f"traces diverge at line {i + 1}", (i + 1, a, b))
    return True
