"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the summary lines are
printed even when output capture is on.
"""

import json
import math
import time

import numpy as np
import pytest

from hioasec.cli import main
from hioasec.defender import DynamicsParams, make_defender_module
from hioasec.engine import Event, detect_equilibrium, replay_check, run
from hioasec.game import best_response, best_response_oracle, check_feasible, defender_cost
from hioasec.hioa import check_compatibility, compose, validate
from hioasec.scenario import Scenario, build_der1, dumps, loads, save, to_dict
from hioasec.trace_io import dumps_trace, export_trace, import_trace

from helpers import (
    fuzz_transitions,
    grid_bound,
    random_feasible,
    random_game,
    random_profile,
    random_schedule,
    rename_variable,
)

pytestmark = pytest.mark.acceptance


@pytest.fixture
def report(capsys):
    def emit(n: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\ncriterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail

    return emit


def test_criterion_01_oracle_equivalence(report):
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst, failures, n_games = 0.0, [], 0
    while n_games < 24:
        game = random_game(rng, max_nodes=6, max_edges=4, max_budget=2.0)
        for d in game.defenders:
            others = random_profile(rng, game, skip=d.id)
            res = best_response(game, d.id, others)
            x_grid = best_response_oracle(game, d.id, others, 0.05)
            c_grid = defender_cost(game, d.id, {**others, d.id: x_grid})
            c_solver = defender_cost(game, d.id, {**others, d.id: res.x})
            allowed = max(1e-3, 0.01 * c_grid) + grid_bound(game, d.id, others, 0.05)
            gap = abs(c_solver - c_grid)
            worst = max(worst, gap / allowed if allowed else 0.0)
            if gap > allowed:
                failures.append((n_games, d.id, c_solver, c_grid))
        n_games += 1
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 60
    report(1, ok, f"{n_games} games, worst gap/allowance {worst:.3g}, {elapsed:.1f} s, failures {failures}")


def test_criterion_02_analytic_best_responses(report, single_edge_game, two_path_game):
    single = best_response(single_edge_game, "1", {}).x
    split = best_response(two_path_game, "1", {}).x
    ok = abs(single[0] - 1.0) <= 1e-6 and np.all(np.abs(split - 1.0) <= 1e-3)
    report(2, ok, f"single edge x = {float(single[0])!r}, symmetric split x = {split.tolist()}")


def _fuzzed_scenario(rng, steps):
    game = random_game(rng)
    ids = [d.id for d in game.defenders]
    params = DynamicsParams(tau_I=float(rng.integers(1, 4)), stability_window=int(rng.integers(1, 4)))
    events = random_schedule(rng, ids, steps, params.h, int(rng.integers(5, 20)))
    return Scenario("fuzz", game.graph, game.defenders, params, events=tuple(events), steps=steps)


def test_criterion_03_feasibility(report, der1):
    rng = np.random.default_rng(3)
    checked, violations = 0, []
    scenarios = [der1] + [_fuzzed_scenario(rng, 500) for _ in range(3)]
    scenarios[0] = Scenario(
        der1.name, der1.graph, der1.defenders, der1.params,
        events=tuple(random_schedule(rng, ["1", "2"], 500, 1.0, 40)), steps=500,
    )
    for sc in scenarios:
        res = run(sc.game, sc.modules(), sc.events, sc.params, sc.steps)
        for r in res.trace:
            d = sc.game.defender(r.module)
            for name in ("x_" + r.module, "x_prev_" + r.module, "out.x_" + r.module):
                checked += 1
                if not check_feasible(r.get(name), d):
                    violations.append((sc.name, r.step, r.module, name))
    report(3, not violations, f"{checked} vectors over {len(scenarios)} 500-step runs, {len(violations)} violations")


def test_criterion_04_convexity(report):
    rng = np.random.default_rng(4)
    violations = total = 0
    for _ in range(10):
        game = random_game(rng)
        d = game.defenders[0]
        others = random_profile(rng, game, skip=d.id)
        model = game.model(d.id)
        off = model.offsets(others)
        for _ in range(1000):
            a = random_feasible(rng, d.n_edges, d.budget)
            b = random_feasible(rng, d.n_edges, d.budget)
            lam = float(rng.uniform())
            lhs = defender_cost(game, d.id, {**others, d.id: lam * a + (1 - lam) * b})
            rhs = lam * model.cost(a, off) + (1 - lam) * model.cost(b, off)
            total += 1
            violations += lhs > rhs + 1e-9
    report(4, violations == 0, f"{total} triples on 10 instances, {violations} violations")


def test_criterion_05_update_laws(report, der1):
    game = der1.game
    params = der1.params
    rng = np.random.default_rng(5)
    modules = [
        make_defender_module(game, d.id, params, der1.solver, initial_p=tuple(rng.uniform(0, 0.9, d.n_edges)))
        for d in der1.defenders
    ]
    events = [Event(4.0, "2", "set_attack_risk", 0.5), Event(30.0, "1", "set_fail", True)]
    res = run(game, modules, events, params, 40)
    fired = {(s, m) for s, m, _ in res.fired}
    n_start = n_fail = n_normal = 0
    bad = []
    for k in ("1", "2"):
        recs = res.records(k)
        other = "2" if k == "1" else "1"
        for a, b in zip(recs, recs[1:]):
            pa, pb = a.get("p_" + k), b.get("p_" + k)
            if a.mode == b.mode == "startup":
                n_start += 1
                if pb != tuple(min(max(v + v * v, 0.0), 1.0) for v in pa):
                    bad.append(("startup", k, a.step))
            if b.mode == "fail":
                n_fail += 1
                if pb != (1.0,) * len(pb):
                    bad.append(("fail", k, a.step))
            if a.mode in ("normal", "alternate") and b.mode in ("normal", "alternate"):
                n_normal += 1
                x_star = best_response(game, k, {other: np.asarray(a.get("x_" + other))}, der1.solver).x
                want = tuple(float(v) for v in 0.5 * (np.asarray(a.get("x_prev_" + k)) + x_star))
                if b.get("x_" + k) != want:
                    bad.append(("normal", k, a.step, (a.step, k) in fired))
    ok = not bad and n_start and n_fail and n_normal
    report(5, bool(ok), f"startup {n_start}, fail {n_fail}, normal {n_normal} steps checked bit-exact, mismatches {bad}")


def test_criterion_06_mode_graph(report, der1):
    rng = np.random.default_rng(6)
    steps = fired = 0
    violations = []
    games = [der1.game] + [random_game(rng) for _ in range(4)]
    while fired < 10_000:
        for game in games:
            for d in game.defenders:
                f, v = fuzz_transitions(game, d.id, 1000, rng)
                steps += 1000
                fired += f
                violations.extend(v)
    report(6, not violations, f"{steps} fuzzed steps, {fired} transitions fired, {len(violations)} violations")


def test_criterion_07_composition(report, der1):
    m1, m2 = der1.modules()
    base = check_compatibility(m1, m2)
    clash = check_compatibility(m1, rename_variable(m2, "tau_2", "tau_1"))
    unwired = check_compatibility(m1, rename_variable(m2, "x_1", "x_9"))
    both = compose(m1, m2)
    validate(both)
    ok = (
        base.ok
        and not clash.ok and any(f.startswith("X1∩X2") for f in clash.failures)
        and not unwired.ok and any(f.startswith("Y1⊆U2") for f in unwired.failures)
        and len(both.modes) == 16
    )
    report(7, ok, f"DER.1 ok={base.ok}; clash -> {clash.failures[0][:5]}; "
                  f"unwired -> {unwired.failures[0][:5]}; composed modes {len(both.modes)}")


def test_criterion_08_equilibrium(report, der1):
    start = time.perf_counter()
    res = run(der1.game, der1.modules(), (), der1.params, 200)
    m = detect_equilibrium(res, 1e-4)
    final = {r.module: np.asarray(r.get("out.x_" + r.module)) for r in res.trace if r.step == 199}
    ratios = {}
    for k in ("1", "2"):
        others = {j: v for j, v in final.items() if j != k}
        oracle = best_response_oracle(der1.game, k, others, 0.05)
        c_oracle = defender_cost(der1.game, k, {**others, k: oracle})
        ratios[k] = defender_cost(der1.game, k, final) / c_oracle
    elapsed = time.perf_counter() - start
    ok = m is not None and all(r < 1.01 for r in ratios.values()) and elapsed < 120
    detail = ", ".join(f"defender {k} cost/oracle {r:.6f}" for k, r in ratios.items())
    report(8, ok, f"equilibrium at step {m}; {detail}; {elapsed:.1f} s")


def test_criterion_09_determinism(report, der1):
    rng = np.random.default_rng(9)
    replay_check(der1.game, der1.modules, der1.events, der1.params, 200)
    for _ in range(10):
        sc = _fuzzed_scenario(rng, 120)
        replay_check(sc.game, sc.modules, sc.events, sc.params, sc.steps)
    report(9, True, "DER.1 and 10 fuzzed scenarios replay byte-identically")


def test_criterion_10_round_trips(report, der1, tmp_path, capsys):
    rng = np.random.default_rng(10)
    sc = _fuzzed_scenario(rng, 30)
    scenario_ok = loads(dumps(sc)) == sc and dumps(loads(dumps(der1))) == dumps(der1)
    res = run(sc.game, sc.modules(), sc.events, sc.params, sc.steps)
    path = tmp_path / "trace.csv"
    export_trace(res.trace, path)
    trace_ok = import_trace(path) == res.trace and dumps_trace(import_trace(path)) == path.read_text()

    good = tmp_path / "der1.json"
    save(der1, good)
    bad_data = to_dict(der1)
    bad_data["edges"][0]["p0"] = 2.0
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(bad_data))
    cases = {
        "check ok": (["check", str(good)], 0),
        "check invalid": (["check", str(bad)], 2),
        "simulate ok": (["simulate", str(good), "--steps", "5", "--out", str(tmp_path / "t.csv")], 0),
        "simulate missing": (["simulate", str(tmp_path / "missing.json")], 2),
        "best-response ok": (["best-response", str(good), "--defender", "2"], 0),
        "best-response unknown": (["best-response", str(good), "--defender", "7"], 2),
        "der1 ok": (["der1", "--out", str(tmp_path / "d.json")], 0),
        "der1 unwritable": (["der1", "--out", str(tmp_path / "no" / "d.json")], 3),
        "equilibrium ok": (["equilibrium", str(good), "--steps", "50"], 0),
        "equilibrium bad steps": (["equilibrium", str(good), "--steps", "0"], 1),
    }
    wrong = {}
    for label, (argv, want) in cases.items():
        got = main(argv)
        capsys.readouterr()
        if got != want:
            wrong[label] = (want, got)
    ok = scenario_ok and trace_ok and not wrong
    report(10, ok, f"scenario round trip {scenario_ok}, trace round trip {trace_ok}, "
                   f"{len(cases) - len(wrong)}/{len(cases)} exit codes as specified {wrong or ''}")
