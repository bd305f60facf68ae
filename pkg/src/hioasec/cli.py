"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 validation failure, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections.abc import Sequence
from pathlib import Path

import numpy as np

from . import errors
from .engine import detect_equilibrium, run
from .game import best_response, best_response_oracle, defender_cost
from .hioa import check_compatibility, check_input_transition_enabled
from .scenario import Scenario, build_der1, dumps, parse_scenario
from .trace_io import dumps_trace, export_trace

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt_vec(v) -> str:
    return "[" + ", ".join(repr(float(x)) for x in v) + "]"


def _run_scenario(sc: Scenario, steps: int):
    return run(
        sc.game,
        sc.modules(),
        sc.events,
        sc.params,
        steps,
        sc.solver,
        initial_attack_risk=sc.initial_attack_risk,
        scenario=sc.name,
    )


def cmd_check(args) -> int:
    sc = parse_scenario(args.scenario)
    mods = sc.modules()
    print(f"scenario {sc.name or args.scenario}: graph ok "
          f"({len(sc.graph.nodes)} nodes, {len(sc.graph.edges)} edges, acyclic)")
    for d in sc.defenders:
        print(f"defender {d.id}: {d.n_edges} edges, budget {d.budget!r}, "
              f"assets {', '.join(n for n, _ in d.assets)}")
    status = EXIT_OK
    for i, a in enumerate(mods):
        for b in mods[i + 1:]:
            verdict = check_compatibility(a, b)
            if verdict:
                print(f"compatibility {a.name}/{b.name}: ok")
            else:
                status = EXIT_INVALID
                for f in verdict.failures:
                    print(f"compatibility {a.name}/{b.name}: FAIL {f}")
    for m in mods:
        rep = check_input_transition_enabled(m)
        state = "ok" if rep.ok else "FAIL"
        print(f"E1 {m.name}: {state} ({len(rep.gaps)} gaps closed by stutter completion)"
              if rep.ok else f"E1 {m.name}: {state} gaps {list(rep.gaps)}")
        if not rep.ok:
            status = EXIT_INVALID
    return status


def cmd_simulate(args) -> int:
    sc = parse_scenario(args.scenario)
    steps = args.steps if args.steps is not None else sc.steps
    result = _run_scenario(sc, steps)
    if args.out:
        export_trace(result.trace, args.out)
    else:
        sys.stdout.write(dumps_trace(result.trace))
    if args.strict:
        flagged = [r for r in result.trace if r.get(f"converged_{r.module}") is False]
        if flagged:
            first = flagged[0]
            print(f"solver did not converge (module {first.module}, step {first.step})", file=sys.stderr)
            return EXIT_RUNTIME
    return EXIT_OK


def cmd_best_response(args) -> int:
    sc = parse_scenario(args.scenario)
    game = sc.game
    game.defender(args.defender)
    others = {}
    if args.opponents:
        try:
            raw = json.loads(Path(args.opponents).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise errors.ParseError(f"cannot read opponents file: {exc}") from exc
        if not isinstance(raw, dict):
            raise errors.ParseError("opponents file must map defender id to a vector")
        for j, vec in raw.items():
            d = game.defender(j)
            arr = np.asarray(vec, dtype=float)
            if arr.shape != (d.n_edges,):
                raise errors.DimensionMismatch(f"opponent {j}: expected {d.n_edges} entries")
            others[j] = arr
    if args.oracle:
        x = best_response_oracle(game, args.defender, others, args.grid_step)
        converged = True
    else:
        res = best_response(game, args.defender, others, sc.solver)
        x, converged = res.x, res.converged
    profile = dict(others)
    profile[args.defender] = x
    cost = defender_cost(game, args.defender, profile)
    d = game.defender(args.defender)
    for key, v in zip(d.edges, x):
        print(f"{key[0]}->{key[1]}\t{float(v)!r}")
    print(f"x = {_fmt_vec(x)}")
    print(f"cost = {cost!r}")
    if args.strict and not converged:
        print("solver did not converge", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_der1(args) -> int:
    text = dumps(build_der1())
    if args.out:
        try:
            Path(args.out).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise errors.HioasecError(f"cannot write {args.out}: {exc}") from exc
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_equilibrium(args) -> int:
    sc = parse_scenario(args.scenario)
    steps = args.steps if args.steps is not None else sc.steps
    result = _run_scenario(sc, steps)
    m = detect_equilibrium(result, args.tol)
    if m is None:
        print(f"no equilibrium within {steps} steps (tol {args.tol!r})")
        return EXIT_OK
    print(f"equilibrium at step {m} (t = {m * sc.params.h!r})")
    last = {r.module: r for r in result.trace if r.step == steps - 1}
    for name in result.modules:
        rec = last[name]
        print(f"  {name} [{rec.mode}] x = {_fmt_vec(rec.get('out.x_' + name))}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hioasec", description="Interdependent CPS security automata simulator.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("check", help="validate a scenario and its automata")
    c.add_argument("scenario")
    c.set_defaults(fn=cmd_check)

    s = sub.add_parser("simulate", help="run a scenario and export the trace")
    s.add_argument("scenario")
    s.add_argument("--steps", type=int)
    s.add_argument("--out")
    s.add_argument("--strict", action="store_true", help="fail if any best response did not converge")
    s.set_defaults(fn=cmd_simulate)

    b = sub.add_parser("best-response", help="compute one defender's best response")
    b.add_argument("scenario")
    b.add_argument("--defender", required=True)
    b.add_argument("--opponents", help="JSON object: defender id -> investment vector")
    b.add_argument("--oracle", action="store_true", help="exhaustive grid search instead of the solver")
    b.add_argument("--grid-step", type=float, default=0.05)
    b.add_argument("--strict", action="store_true")
    b.set_defaults(fn=cmd_best_response)

    d = sub.add_parser("der1", help="write the built-in DER.1 scenario")
    d.add_argument("--out")
    d.set_defaults(fn=cmd_der1)

    e = sub.add_parser("equilibrium", help="run a scenario and report equilibrium detection")
    e.add_argument("scenario")
    e.add_argument("--tol", type=float, default=1e-4)
    e.add_argument("--steps", type=int)
    e.set_defaults(fn=cmd_equilibrium)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "steps", None) is not None and args.steps < 1:
        print("error: --steps must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.fn(args)
    except errors.ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except errors.ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except errors.HioasecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
