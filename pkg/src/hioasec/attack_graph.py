"""Directed acyclic attack graphs and path-probability queries.

Nodes are short string labels. Every edge carries the baseline probability
that an attacker holding the tail node compromises the head node when no
security investment has been made on that edge.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

from .errors import (
    CycleDetected,
    DanglingEndpoint,
    DuplicateEdge,
    GraphError,
    InvalidProbability,
    PathLimitExceeded,
    UnknownNode,
)

EdgeKey = tuple[str, str]

DEFAULT_MAX_PATHS = 10**6


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    p0: float

    @property
    def key(self) -> EdgeKey:
        return (self.src, self.dst)


@dataclass(frozen=True)
class Path:
    edges: tuple[Edge, ...]

    @property
    def nodes(self) -> tuple[str, ...]:
        if not self.edges:
            return ()
        return (self.edges[0].src,) + tuple(e.dst for e in self.edges)

    @property
    def keys(self) -> tuple[EdgeKey, ...]:
        return tuple(e.key for e in self.edges)

    def __len__(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class AttackGraph:
    """Validated, immutable attack graph. Build with :func:`build_graph`."""

    nodes: frozenset[str]
    edges: tuple[Edge, ...]
    source: str
    topo_order: tuple[str, ...]
    max_paths: int = DEFAULT_MAX_PATHS
    _succ: dict[str, tuple[Edge, ...]] = field(repr=False, compare=False, default_factory=dict)
    _by_key: dict[EdgeKey, Edge] = field(repr=False, compare=False, default_factory=dict)
    _path_cache: dict[str, tuple[Path, ...]] = field(
        repr=False, compare=False, default_factory=dict
    )

    def edge(self, src: str, dst: str) -> Edge:
        try:
            return self._by_key[(src, dst)]
        except KeyError:
            raise GraphError(f"no edge {src}->{dst}") from None

    def has_edge(self, key: EdgeKey) -> bool:
        return key in self._by_key

    def successors(self, node: str) -> tuple[Edge, ...]:
        return self._succ.get(node, ())

    @property
    def edge_keys(self) -> tuple[EdgeKey, ...]:
        return tuple(e.key for e in self.edges)

    def count_paths(self, target: str) -> int:
        """Number of simple source->target paths, counted without enumerating."""
        if target not in self.nodes:
            raise UnknownNode(f"unknown node {target!r}")
        if target == self.source:
            return 0
        counts = {n: 0 for n in self.nodes}
        counts[self.source] = 1
        for n in self.topo_order:
            c = counts[n]
            if c:
                for e in self._succ.get(n, ()):
                    counts[e.dst] += c
        return counts[target]


def _validate_label(label: object) -> str:
    if not isinstance(label, str) or not label:
        raise GraphError(f"node labels must be nonempty strings, got {label!r}")
    return label


def build_graph(
    nodes: Iterable[str],
    edges: Iterable[Edge],
    source: str,
    *,
    max_paths: int = DEFAULT_MAX_PATHS,
) -> AttackGraph:
    """Validate the inputs and return an immutable :class:`AttackGraph`.

    Raises:
        DanglingEndpoint: an edge or the source refers to an undeclared node.
        InvalidProbability: an edge baseline is outside (0, 1].
        DuplicateEdge: the same ordered node pair appears twice.
        CycleDetected: the edges contain a directed cycle.
        PathLimitExceeded: some node has more than ``max_paths`` attack paths.
    """
    node_list = [_validate_label(n) for n in nodes]
    node_set = frozenset(node_list)
    if len(node_set) != len(node_list):
        raise GraphError("duplicate node label")
    if source not in node_set:
        raise DanglingEndpoint(f"source {source!r} is not a declared node")

    edge_list = list(edges)
    by_key: dict[EdgeKey, Edge] = {}
    for e in edge_list:
        for end in (e.src, e.dst):
            if end not in node_set:
                raise DanglingEndpoint(f"edge {e.src}->{e.dst} references unknown node {end!r}")
        if e.src == e.dst:
            raise CycleDetected(f"self-loop on {e.src!r}")
        p0 = e.p0
        if isinstance(p0, bool) or not isinstance(p0, (int, float)) or math.isnan(p0):
            raise InvalidProbability(f"edge {e.src}->{e.dst} has non-numeric p0 {p0!r}")
        if not 0.0 < p0 <= 1.0:
            raise InvalidProbability(f"edge {e.src}->{e.dst} has p0={p0} outside (0, 1]")
        if e.key in by_key:
            raise DuplicateEdge(f"edge {e.src}->{e.dst} declared twice")
        by_key[e.key] = e

    succ: dict[str, list[Edge]] = {n: [] for n in node_set}
    indeg = {n: 0 for n in node_set}
    for e in edge_list:
        succ[e.src].append(e)
        indeg[e.dst] += 1
    for n in succ:
        succ[n].sort(key=lambda e: e.dst)

    # Kahn's algorithm over sorted labels keeps the order reproducible.
    ready = sorted(n for n, d in indeg.items() if d == 0)
    order: list[str] = []
    while ready:
        n = ready.pop(0)
        order.append(n)
        for e in succ[n]:
            indeg[e.dst] -= 1
            if indeg[e.dst] == 0:
                ready.append(e.dst)
                ready.sort()
    if len(order) != len(node_set):
        stuck = sorted(n for n, d in indeg.items() if d > 0)
        raise CycleDetected(f"directed cycle through nodes {stuck}")

    graph = AttackGraph(
        nodes=node_set,
        edges=tuple(edge_list),
        source=source,
        topo_order=tuple(order),
        max_paths=max_paths,
        _succ={n: tuple(es) for n, es in succ.items()},
        _by_key=by_key,
    )
    for n in order:
        count = graph.count_paths(n)
        if count > max_paths:
            raise PathLimitExceeded(
                f"node {n!r} has {count} attack paths (limit {max_paths})"
            )
    return graph


def enumerate_paths(graph: AttackGraph, target: str) -> list[Path]:
    """All simple source->target paths in lexicographic order of node labels.

    A target equal to the source has no paths (zero-length paths are not
    attack paths). Unreachable targets give an empty list.
    """
    if target not in graph.nodes:
        raise UnknownNode(f"unknown node {target!r}")
    cached = graph._path_cache.get(target)
    if cached is None:
        cached = tuple(_dfs_paths(graph, target))
        graph._path_cache[target] = cached
    return list(cached)


def _dfs_paths(graph: AttackGraph, target: str) -> list[Path]:
    if target == graph.source:
        return []
    # Prune nodes that cannot reach the target.
    reaches = {target}
    for n in reversed(graph.topo_order):
        if any(e.dst in reaches for e in graph.successors(n)):
            reaches.add(n)
    if graph.source not in reaches:
        return []

    out: list[Path] = []
    stack: list[Edge] = []

    def walk(node: str) -> None:
        for e in graph.successors(node):
            if e.dst not in reaches:
                continue
            stack.append(e)
            if e.dst == target:
                out.append(Path(tuple(stack)))
            else:
                walk(e.dst)
            stack.pop()

    walk(graph.source)
    return out


def path_success_probability(
    graph: AttackGraph,
    path: Path,
    total_investments: Mapping[EdgeKey, float] | None = None,
) -> float:
    """Product of the invested edge probabilities along ``path``.

    Edges absent from ``total_investments`` count as uninvested.
    """
    from .game import edge_probability

    inv = total_investments or {}
    prob = 1.0
    for e in path.edges:
        graph.edge(e.src, e.dst)
        prob *= edge_probability(e.p0, inv.get(e.key, 0.0))
    return prob


def max_path_probability(
    graph: AttackGraph,
    target: str,
    total_investments: Mapping[EdgeKey, float] | None = None,
) -> tuple[float, Path | None]:
    """Most probable attack path to ``target``; ``(0.0, None)`` if unreachable.

    Ties keep the earliest path in enumeration order.
    """
    best_p = 0.0
    best: Path | None = None
    for path in enumerate_paths(graph, target):
        p = path_success_probability(graph, path, total_investments)
        if best is None or p > best_p:
            best_p, best = p, path
    return best_p, best
