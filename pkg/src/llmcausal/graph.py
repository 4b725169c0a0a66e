"""Directed graphs over named variables.

A :class:`CausalGraph` stores variable names in declaration order and edges as
``(from_index, to_index)`` pairs. Names are the public identity; indices are an
internal convenience shared with the baselines and the metrics.
"""
from __future__ import annotations

import heapq
import json
import operator
from collections import deque
from collections.abc import Iterable, Sequence
from pathlib import Path


class GraphError(ValueError):
    pass


class CycleError(GraphError):
    pass


class CausalGraph:
    """Directed graph over uniquely named variables.

    Edges added with :meth:`insert_edge_checked` keep the graph acyclic;
    :meth:`add_edge` does not check (pairwise prompting may produce cycles).
    """

    def __init__(self, variables: Sequence[str], edges: Iterable[tuple[int, int]] = ()):
        variables = tuple(variables)
        for name in variables:
            if not isinstance(name, str) or not name:
                raise GraphError(f"variable names must be non-empty strings, got {name!r}")
        if len(set(variables)) != len(variables):
            raise GraphError(f"duplicate variable names in {list(variables)}")
        self._variables = variables
        self._index = {name: i for i, name in enumerate(variables)}
        self._edges: set[tuple[int, int]] = set()
        for u, v in edges:
            self.add_edge(u, v)

    @classmethod
    def from_names(cls, variables: Sequence[str], edges: Iterable[tuple[str, str]] = ()) -> CausalGraph:
        g = cls(variables)
        for a, b in edges:
            g.add_edge(g.index(a), g.index(b))
        return g

    @property
    def variables(self) -> tuple[str, ...]:
        return self._variables

    @property
    def edges(self) -> frozenset[tuple[int, int]]:
        return frozenset(self._edges)

    @property
    def n(self) -> int:
        return len(self._variables)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise GraphError(f"unknown variable {name!r}") from None

    def named_edges(self) -> list[tuple[str, str]]:
        """Edges as name pairs, sorted by (from, to) index."""
        return [(self._variables[u], self._variables[v]) for u, v in sorted(self._edges)]

    def has_edge(self, u: int, v: int) -> bool:
        return (u, v) in self._edges

    def _check(self, i: int) -> int:
        try:
            i = operator.index(i)
        except TypeError:
            raise IndexError(f"variable index must be an integer, got {i!r}") from None
        if not 0 <= i < len(self._variables):
            raise IndexError(f"variable index {i} out of range for {len(self._variables)} variables")
        return i

    def add_edge(self, u: int, v: int) -> None:
        u, v = self._check(u), self._check(v)
        if u == v:
            raise GraphError(f"self-loop on {self._variables[u]!r}")
        self._edges.add((u, v))

    def remove_edge(self, u: int, v: int) -> None:
        self._edges.discard((u, v))

    def insert_edge_checked(self, u: int, v: int) -> bool:
        """Add ``u -> v`` unless it would close a cycle. Returns whether it was added."""
        if would_create_cycle(self, u, v):
            return False
        self._edges.add((int(u), int(v)))
        return True

    def children(self, u: int) -> list[int]:
        return sorted(v for a, v in self._edges if a == u)

    def parents(self, v: int) -> list[int]:
        return sorted(a for a, b in self._edges if b == v)

    def copy(self) -> CausalGraph:
        return CausalGraph(self._variables, self._edges)

    def is_acyclic(self) -> bool:
        try:
            topological_order(self)
        except CycleError:
            return False
        return True

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CausalGraph):
            return NotImplemented
        return set(self._variables) == set(other._variables) and set(
            self.named_edges()
        ) == set(other.named_edges())

    def __repr__(self) -> str:
        edges = ", ".join(f"{a}->{b}" for a, b in self.named_edges())
        return f"CausalGraph({list(self._variables)}, {{{edges}}})"

    # serialization

    def to_dict(self) -> dict:
        return {"variables": list(self._variables), "edges": [list(e) for e in self.named_edges()]}

    @classmethod
    def from_dict(cls, d: dict) -> CausalGraph:
        try:
            return cls.from_names(d["variables"], [tuple(e) for e in d["edges"]])
        except (KeyError, TypeError) as exc:
            raise GraphError(f"malformed graph JSON: {exc}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_edge_list(self) -> str:
        lines = ["# variables: " + ", ".join(self._variables)]
        lines += [f"{a} -> {b}" for a, b in self.named_edges()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_edge_list(cls, text: str) -> CausalGraph:
        """Parse ``from -> to`` lines. A ``# variables: a, b`` line fixes the
        variable set and order; otherwise variables appear in first-use order."""
        declared: list[str] | None = None
        pairs: list[tuple[str, str]] = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.lower().startswith("variables:"):
                    declared = [s.strip() for s in body.split(":", 1)[1].split(",") if s.strip()]
                continue
            parts = line.split("->")
            if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
                raise GraphError(f"line {lineno}: expected 'from -> to', got {raw!r}")
            pairs.append((parts[0].strip(), parts[1].strip()))
        if declared is None:
            declared = []
            for a, b in pairs:
                for name in (a, b):
                    if name not in declared:
                        declared.append(name)
        return cls.from_names(declared, pairs)


def load_graph(path: str | Path) -> CausalGraph:
    """Read a graph from JSON (``.json``) or the edge-list text format."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json" or text.lstrip().startswith("{"):
        try:
            return CausalGraph.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise GraphError(f"{path}: invalid JSON: {exc}") from None
    return CausalGraph.from_edge_list(text)


def save_graph(graph: CausalGraph, path: str | Path) -> None:
    path = Path(path)
    path.write_text(graph.to_json() if path.suffix == ".json" else graph.to_edge_list())


def _reachable(n: int, edges: Iterable[tuple[int, int]], start: int, goal: int) -> bool:
    adj: list[list[int]] = [[] for _ in range(n)]
    for a, b in edges:
        adj[a].append(b)
    seen = {start}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        if u == goal:
            return True
        for w in adj[u]:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return False


def would_create_cycle(graph: CausalGraph, u: int, v: int) -> bool:
    """True iff adding ``u -> v`` closes a directed cycle (a self-loop counts)."""
    u, v = graph._check(u), graph._check(v)
    if u == v:
        return True
    return _reachable(graph.n, graph.edges, v, u)


def topological_order(graph: CausalGraph) -> list[int]:
    """Kahn's algorithm; among ready nodes the lowest declaration index goes first."""
    indeg = [0] * graph.n
    out: list[list[int]] = [[] for _ in range(graph.n)]
    for a, b in graph.edges:
        indeg[b] += 1
        out[a].append(b)
    ready = [i for i in range(graph.n) if indeg[i] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        u = heapq.heappop(ready)
        order.append(u)
        for w in out[u]:
            indeg[w] -= 1
            if indeg[w] == 0:
                heapq.heappush(ready, w)
    if len(order) != graph.n:
        stuck = [graph.variables[i] for i in range(graph.n) if indeg[i] > 0]
        raise CycleError(f"graph has a directed cycle through {stuck}")
    return order


def roots(graph: CausalGraph) -> set[str]:
    """Variables with in-degree zero."""
    targets = {b for _, b in graph.edges}
    return {name for i, name in enumerate(graph.variables) if i not in targets}
