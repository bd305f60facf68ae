"""Multi-defender security investment game on an attack graph.

Each defender spreads a budget over the edges it controls. Investment ``x``
on an edge scales that edge's baseline probability by ``exp(-x)``; total
investment on a shared edge is the sum over its controllers. A defender's
cost is the loss-weighted probability of the most likely attack path to
each of its assets.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .attack_graph import AttackGraph, EdgeKey, enumerate_paths, max_path_probability
from .errors import (
    DidNotConverge,
    DimensionMismatch,
    GameError,
    GridTooLarge,
    NegativeInvestment,
    UnknownDefender,
)
from .simplex import project_capped_simplex

FEASIBILITY_SLACK = 1e-9
MAX_GRID_POINTS = 10**7
# Consecutive sub-tolerance cost changes required before stopping.
QUIET_ITERATIONS = 10

RESPONSES: dict[str, Callable[[float], float]] = {
    "exponential": lambda x: math.exp(-x),
}

JointProfile = Mapping[str, np.ndarray]


def edge_probability(p0: float, total_investment: float, kind: str = "exponential") -> float:
    """Attack success probability on an edge after ``total_investment``."""
    if total_investment < 0:
        raise NegativeInvestment(f"investment must be >= 0, got {total_investment}")
    return p0 * RESPONSES[kind](total_investment)


@dataclass(frozen=True)
class Defender:
    id: str
    assets: tuple[tuple[str, float], ...]
    edges: tuple[EdgeKey, ...]
    budget: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "assets", tuple((str(n), float(l)) for n, l in self.assets))
        object.__setattr__(self, "edges", tuple((str(a), str(b)) for a, b in self.edges))
        if not self.id:
            raise GameError("defender id must be nonempty")
        if not self.budget >= 0:
            raise GameError(f"defender {self.id}: budget must be >= 0, got {self.budget}")
        for node, loss in self.assets:
            if not loss >= 0:
                raise GameError(f"defender {self.id}: loss on {node} must be >= 0, got {loss}")
        if len(set(self.edges)) != len(self.edges):
            raise GameError(f"defender {self.id}: controlled edge listed twice")

    @property
    def n_edges(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 5000
    tolerance: float = 1e-6
    # None means budget / 10 for whichever defender is being solved.
    step0: float | None = None
    smoothing: float = 0.01

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise GameError("max_iterations must be >= 1")
        if not self.tolerance > 0:
            raise GameError("tolerance must be > 0")
        if self.step0 is not None and not self.step0 > 0:
            raise GameError("step0 must be > 0")
        if not self.smoothing >= 0:
            raise GameError("smoothing must be >= 0")


@dataclass(frozen=True)
class GameSpec:
    graph: AttackGraph
    defenders: tuple[Defender, ...]
    response_kind: str = "exponential"
    _models: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "defenders", tuple(self.defenders))
        if self.response_kind not in RESPONSES:
            raise GameError(f"unknown response function {self.response_kind!r}")
        ids = [d.id for d in self.defenders]
        if len(set(ids)) != len(ids):
            raise GameError("defender ids must be unique")
        for d in self.defenders:
            for key in d.edges:
                if not self.graph.has_edge(key):
                    raise GameError(f"defender {d.id} controls unknown edge {key[0]}->{key[1]}")
            for node, _ in d.assets:
                if node not in self.graph.nodes:
                    raise GameError(f"defender {d.id} asset {node!r} is not a graph node")
                if node == self.graph.source:
                    raise GameError(f"defender {d.id} lists the source as an asset")

    def defender(self, k: str) -> Defender:
        for d in self.defenders:
            if d.id == k:
                return d
        raise UnknownDefender(f"unknown defender {k!r}")

    def model(self, k: str) -> CostModel:
        m = self._models.get(k)
        if m is None:
            m = CostModel(self, self.defender(k))
            self._models[k] = m
        return m


def check_feasible(v: Sequence[float], d: Defender) -> bool:
    """True iff ``v`` is nonnegative and spends at most the defender's budget."""
    arr = np.asarray(v, dtype=float)
    if arr.shape != (d.n_edges,):
        raise DimensionMismatch(
            f"defender {d.id} controls {d.n_edges} edges, vector has shape {arr.shape}"
        )
    return bool(np.all(arr >= 0) and arr.sum() <= d.budget + FEASIBILITY_SLACK)


def total_investments(game: GameSpec, profile: JointProfile) -> dict[EdgeKey, float]:
    """Per-edge sum of every defender's investment."""
    totals: dict[EdgeKey, float] = {}
    for d in game.defenders:
        vec = profile.get(d.id)
        if vec is None:
            continue
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (d.n_edges,):
            raise DimensionMismatch(f"profile entry for {d.id} has shape {vec.shape}")
        if np.any(vec < 0):
            raise NegativeInvestment(f"negative investment in profile of {d.id}")
        for key, x in zip(d.edges, vec):
            totals[key] = totals.get(key, 0.0) + float(x)
    return totals


def defender_cost(game: GameSpec, k: str, profile: JointProfile) -> float:
    """Loss-weighted worst-path compromise probability summed over k's assets.

    Evaluated path by path from the graph; defenders missing from the
    profile invest nothing.
    """
    d = game.defender(k)
    totals = total_investments(game, profile)
    cost = 0.0
    for node, loss in d.assets:
        if loss == 0:
            continue
        p, _ = max_path_probability(game.graph, node, totals)
        cost += loss * p
    return cost


class CostModel:
    """Vectorized cost of one defender as a function of its own investments.

    For asset m and attack path P the log success probability is
    ``base[P] - others[P] - sum(x_k[e] for e in P)``; the cost is
    ``sum_m L_m * exp(max_P logprob[P])``.
    """

    def __init__(self, game: GameSpec, defender: Defender):
        self.game = game
        self.defender = defender
        self.n = defender.n_edges
        col = {key: i for i, key in enumerate(defender.edges)}
        edge_index = {key: i for i, key in enumerate(game.graph.edge_keys)}

        losses, bases, own_rows, all_rows, groups = [], [], [], [], []
        for node, loss in defender.assets:
            paths = enumerate_paths(game.graph, node)
            if loss == 0 or not paths:
                continue
            start = len(bases)
            for path in paths:
                bases.append(sum(math.log(e.p0) for e in path.edges))
                own = np.zeros(self.n)
                full = np.zeros(len(edge_index))
                for e in path.edges:
                    if e.key in col:
                        own[col[e.key]] = 1.0
                    full[edge_index[e.key]] = 1.0
                own_rows.append(own)
                all_rows.append(full)
            groups.append((start, len(bases)))
            losses.append(loss)

        self.losses = np.asarray(losses, dtype=float)
        self.groups = groups
        self.base = np.asarray(bases, dtype=float)
        self.own = np.asarray(own_rows, dtype=float).reshape(len(bases), self.n)
        self.full = np.asarray(all_rows, dtype=float).reshape(len(bases), len(edge_index))
        self.edge_index = edge_index
        # Group id of every path row, for reduceat-style maxima.
        self.starts = np.asarray([g[0] for g in groups], dtype=int)
        # Controlled edges that lie on at least one loss-bearing path.
        self.relevant = self.own.any(axis=0) if len(bases) else np.zeros(self.n, dtype=bool)

    def offsets(self, others: JointProfile) -> np.ndarray:
        """Per-path log probability with the defender's own investment at zero."""
        totals = np.zeros(len(self.edge_index))
        for d in self.game.defenders:
            if d.id == self.defender.id:
                continue
            vec = others.get(d.id)
            if vec is None:
                continue
            vec = np.asarray(vec, dtype=float)
            if vec.shape != (d.n_edges,):
                raise DimensionMismatch(f"profile entry for {d.id} has shape {vec.shape}")
            if np.any(vec < 0):
                raise NegativeInvestment(f"negative investment in profile of {d.id}")
            for key, x in zip(d.edges, vec):
                totals[self.edge_index[key]] += x
        return self.base - self.full @ totals

    def cost(self, x: np.ndarray, offset: np.ndarray) -> float:
        if not self.groups:
            return 0.0
        z = offset - self.own @ x
        worst = np.maximum.reduceat(z, self.starts)
        return float(self.losses @ np.exp(worst))

    def cost_batch(self, xs: np.ndarray, offset: np.ndarray) -> np.ndarray:
        if not self.groups:
            return np.zeros(len(xs))
        z = offset[None, :] - xs @ self.own.T
        worst = np.maximum.reduceat(z, self.starts, axis=1)
        return np.exp(worst) @ self.losses

    def gradient(self, x: np.ndarray, offset: np.ndarray, temperature: float) -> np.ndarray:
        """Gradient of the log-sum-exp smoothed cost; a subgradient when temperature is 0.

        The subgradient picks the first maximizing path of each asset.
        """
        g = np.zeros(self.n)
        if not self.groups:
            return g
        z = offset - self.own @ x
        for (lo, hi), loss in zip(self.groups, self.losses):
            zs = z[lo:hi]
            if temperature > 0:
                top = zs.max()
                w = np.exp((zs - top) / temperature)
                total = w.sum()
                smax = top + temperature * math.log(total)
                w /= total
                g -= loss * math.exp(smax) * (w @ self.own[lo:hi])
            else:
                j = int(np.argmax(zs))
                g -= loss * math.exp(zs[j]) * self.own[lo + j]
        return g

    def smoothed_cost(self, x: np.ndarray, offset: np.ndarray, temperature: float) -> float:
        if temperature == 0:
            return self.cost(x, offset)
        if not self.groups:
            return 0.0
        z = offset - self.own @ x
        total = 0.0
        for (lo, hi), loss in zip(self.groups, self.losses):
            zs = z[lo:hi]
            top = zs.max()
            smax = top + temperature * math.log(np.exp((zs - top) / temperature).sum())
            total += loss * math.exp(smax)
        return total

    def lipschitz(self, offset: np.ndarray) -> float:
        """Bound on |dC/dx_e| for any coordinate, over the whole feasible set."""
        if not self.groups:
            return 0.0
        worst = np.maximum.reduceat(offset, self.starts)
        return float(self.losses @ np.exp(worst))


def grid_size(n_edges: int, budget: float, grid_step: float) -> int:
    units = int(math.floor(budget / grid_step + 1e-9))
    return math.comb(units + n_edges, n_edges)


def _compositions(n: int, units: int) -> np.ndarray:
    """All nonnegative integer vectors of length n with sum <= units, lexicographic."""
    if n == 0:
        return np.zeros((1, 0), dtype=np.int64)
    # Stars and bars over n+1 slots (last slot = unspent), via combinations.
    rows = []
    for bars in combinations(range(units + n), n):
        prev = -1
        row = []
        for b in bars:
            row.append(b - prev - 1)
            prev = b
        rows.append(row)
    arr = np.asarray(rows, dtype=np.int64)
    order = np.lexsort(arr.T[::-1])
    return arr[order]


def best_response_oracle(
    game: GameSpec,
    k: str,
    others: JointProfile,
    grid_step: float,
    *,
    chunk: int = 200_000,
) -> np.ndarray:
    """Exhaustive best response over allocations in multiples of ``grid_step``.

    Every allocation with total at most the budget is scored; ties keep the
    lexicographically smallest allocation.
    """
    if not grid_step > 0:
        raise GameError("grid_step must be > 0")
    d = game.defender(k)
    size = grid_size(d.n_edges, d.budget, grid_step)
    if size > MAX_GRID_POINTS:
        raise GridTooLarge(f"{size} grid points exceeds limit {MAX_GRID_POINTS}")
    model = game.model(k)
    offset = model.offsets(others)
    units = int(math.floor(d.budget / grid_step + 1e-9))
    grid = _compositions(d.n_edges, units)

    best_cost = math.inf
    best_row = None
    for lo in range(0, len(grid), chunk):
        xs = grid[lo : lo + chunk] * grid_step
        costs = model.cost_batch(xs, offset)
        j = int(np.argmin(costs))
        if costs[j] < best_cost:
            best_cost = float(costs[j])
            best_row = xs[j]
    return np.array(best_row, dtype=float)


@dataclass(frozen=True)
class BestResponse:
    x: np.ndarray
    cost: float
    iterations: int
    converged: bool


def best_response(
    game: GameSpec,
    k: str,
    others: JointProfile,
    cfg: SolverConfig | None = None,
    *,
    strict: bool = False,
) -> BestResponse:
    """Budget-feasible investment minimizing defender k's cost.

    Projected (sub)gradient descent on ``{x >= 0, sum(x) <= B}`` starting
    from the full budget spread evenly. Steps have length
    ``step0 / sqrt(i)`` along the normalized descent direction; the path
    maximum is smoothed by log-sum-exp at ``cfg.smoothing``. The returned
    point is the best iterate under the exact cost.
    """
    cfg = cfg or SolverConfig()
    d = game.defender(k)
    model = game.model(k)
    offset = model.offsets(others)
    n = d.n_edges
    if n == 0 or d.budget == 0 or not model.relevant.any():
        x = np.zeros(n)
        return BestResponse(x, model.cost(x, offset), 0, True)

    x = np.full(n, d.budget / n)
    step0 = cfg.step0 if cfg.step0 is not None else d.budget / 10
    best_x, best_cost = x.copy(), model.cost(x, offset)
    prev = best_cost
    quiet = 0
    converged = False
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        g = model.gradient(x, offset, cfg.smoothing)
        norm = float(np.abs(g).max())
        if norm == 0.0:
            converged = True
            break
        x = project_capped_simplex(x - (step0 / math.sqrt(it)) * g / norm, d.budget)
        c = model.cost(x, offset)
        if c < best_cost:
            best_x, best_cost = x.copy(), c
        quiet = quiet + 1 if abs(c - prev) < cfg.tolerance else 0
        if quiet >= QUIET_ITERATIONS:
            converged = True
            break
        prev = c

    result = BestResponse(best_x, best_cost, it, converged)
    if strict and not converged:
        raise DidNotConverge(f"best response for {k} did not converge in {it} iterations", result)
    return result


def profile_from(game: GameSpec, vectors: Mapping[str, Iterable[float]]) -> dict[str, np.ndarray]:
    """Normalize a mapping of defender id -> iterable into numpy vectors."""
    out = {}
    for key, vec in vectors.items():
        d = game.defender(key)
        arr = np.asarray(list(vec), dtype=float)
        if arr.shape != (d.n_edges,):
            raise DimensionMismatch(f"profile entry for {key} has shape {arr.shape}")
        out[key] = arr
    return out
