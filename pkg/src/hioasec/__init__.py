"""Interdependent cyber-physical security: attack-graph investment games
executed as composed hybrid input/output automata."""

from .attack_graph import (
    AttackGraph,
    Edge,
    Path,
    build_graph,
    enumerate_paths,
    max_path_probability,
    path_success_probability,
)
from .defender import DynamicsParams, InputRecord, ModuleState, make_defender_module
from .engine import Event, SimRun, TraceRecord, detect_equilibrium, replay_check, run
from .game import (
    BestResponse,
    Defender,
    GameSpec,
    SolverConfig,
    best_response,
    best_response_oracle,
    check_feasible,
    defender_cost,
    edge_probability,
)
from .hioa import (
    HioaSignature,
    Transition,
    VariableDecl,
    check_compatibility,
    check_input_transition_enabled,
    compose,
    mode_invariant,
    step,
)
from .scenario import Scenario, build_der1, parse_scenario

__version__ = "0.1.0"
