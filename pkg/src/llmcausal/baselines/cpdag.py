"""Partially directed graphs: CPDAG type, Meek closure, DAG <-> CPDAG conversions.

Algorithms work on an ``n x n`` 0/1 matrix ``m``: ``m[i, j] = 1`` and
``m[j, i] = 0`` is ``i -> j``; both set is the undirected edge ``i - j``.
"""
from __future__ import annotations

import itertools
import json
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np

from ..graph import CausalGraph


@dataclass(frozen=True)
class Cpdag:
    variables: tuple[str, ...]
    directed: frozenset[tuple[int, int]]
    # stored as (low, high) index pairs
    undirected: frozenset[tuple[int, int]]

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "directed", frozenset((int(a), int(b)) for a, b in self.directed))
        object.__setattr__(self, "undirected",
                           frozenset((min(a, b), max(a, b)) for a, b in map(tuple, self.undirected)))
        if any((min(a, b), max(a, b)) in self.undirected for a, b in self.directed):
            raise ValueError("a pair cannot be both directed and undirected")

    @classmethod
    def from_matrix(cls, variables: Sequence[str], m: np.ndarray) -> Cpdag:
        n = len(variables)
        directed, undirected = set(), set()
        for i in range(n):
            for j in range(n):
                if m[i, j] and not m[j, i]:
                    directed.add((i, j))
                elif m[i, j] and m[j, i] and i < j:
                    undirected.add((i, j))
        return cls(tuple(variables), frozenset(directed), frozenset(undirected))

    def to_matrix(self) -> np.ndarray:
        m = np.zeros((len(self.variables), len(self.variables)), dtype=np.int8)
        for a, b in self.directed:
            m[a, b] = 1
        for a, b in self.undirected:
            m[a, b] = m[b, a] = 1
        return m

    def skeleton(self) -> set[frozenset[int]]:
        return {frozenset(e) for e in self.directed} | {frozenset(e) for e in self.undirected}

    def to_dict(self) -> dict:
        v = self.variables
        return {
            "variables": list(v),
            "directed": [[v[a], v[b]] for a, b in sorted(self.directed)],
            "undirected": [[v[a], v[b]] for a, b in sorted(self.undirected)],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> Cpdag:
        idx = {name: i for i, name in enumerate(d["variables"])}
        return cls(tuple(d["variables"]),
                   frozenset((idx[a], idx[b]) for a, b in d["directed"]),
                   frozenset((idx[a], idx[b]) for a, b in d["undirected"]))


def cpdag_eval_matrix(cpdag: Cpdag) -> CausalGraph:
    """Directed edges as-is; each undirected pair becomes both directions.

    The result is a scoring artifact and may contain 2-cycles.
    """
    g = CausalGraph(cpdag.variables)
    for a, b in cpdag.directed:
        g.add_edge(a, b)
    for a, b in cpdag.undirected:
        g.add_edge(a, b)
        g.add_edge(b, a)
    return g


def _adjacent(m: np.ndarray, a: int, b: int) -> bool:
    return bool(m[a, b] or m[b, a])


def _undirected(m: np.ndarray, a: int, b: int) -> bool:
    return bool(m[a, b] and m[b, a])


def _directed(m: np.ndarray, a: int, b: int) -> bool:
    return bool(m[a, b] and not m[b, a])


def meek_closure(m: np.ndarray) -> np.ndarray:
    """Apply Meek rules R1-R4 until nothing changes. Returns a new matrix."""
    m = m.copy()
    n = m.shape[0]
    changed = True
    while changed:
        changed = False
        for a, b in itertools.permutations(range(n), 2):
            if not _undirected(m, a, b):
                continue
            others = [c for c in range(n) if c not in (a, b)]
            orient = (
                # R1: c -> a - b, c and b non-adjacent
                any(_directed(m, c, a) and not _adjacent(m, c, b) for c in others)
                # R2: a -> c -> b
                or any(_directed(m, a, c) and _directed(m, c, b) for c in others)
                # R3: a - c -> b, a - d -> b, c and d non-adjacent
                or any(
                    _undirected(m, a, c) and _directed(m, c, b)
                    and _undirected(m, a, d) and _directed(m, d, b)
                    and not _adjacent(m, c, d)
                    for c, d in itertools.combinations(others, 2)
                )
                # R4: a - d, a adjacent to c, c -> d -> b, c and b non-adjacent
                or any(
                    _undirected(m, a, d) and _adjacent(m, a, c)
                    and _directed(m, c, d) and _directed(m, d, b)
                    and not _adjacent(m, c, b)
                    for c, d in itertools.permutations(others, 2)
                )
            )
            if orient:
                m[b, a] = 0
                changed = True
    return m


def dag_to_cpdag(n: int, edges: Iterable[tuple[int, int]]) -> np.ndarray:
    """CPDAG matrix of a DAG: keep v-structures directed, then Meek closure."""
    edges = list(edges)
    m = np.zeros((n, n), dtype=np.int8)
    for a, b in edges:
        m[a, b] = m[b, a] = 1
    parents = [[a for a, b in edges if b == v] for v in range(n)]
    for v in range(n):
        for a, c in itertools.combinations(parents[v], 2):
            if not (m[a, c] or m[c, a]):
                m[v, a] = 0
                m[v, c] = 0
    return meek_closure(m)


def pdag_to_dag(m: np.ndarray) -> np.ndarray:
    """Consistent DAG extension of a PDAG (Dor and Tarsi). Raises if none exists."""
    m = m.copy()
    out = np.zeros_like(m)
    for i, j in zip(*np.nonzero(m)):
        if not m[j, i]:
            out[i, j] = 1
    alive = set(range(m.shape[0]))
    while alive:
        for x in sorted(alive):
            sink = not any(_directed(m, x, y) for y in alive)
            nbrs = [y for y in alive if y != x and _undirected(m, x, y)]
            adj = [y for y in alive if y != x and _adjacent(m, x, y)]
            if sink and all(_adjacent(m, y, z) for y in nbrs for z in adj if z != y):
                for y in nbrs:
                    out[y, x] = 1
                alive.discard(x)
                m[x, :] = 0
                m[:, x] = 0
                break
        else:
            raise ValueError("PDAG admits no consistent DAG extension")
    return out


def cpdag_of_dag(graph: CausalGraph) -> Cpdag:
    return Cpdag.from_matrix(graph.variables, dag_to_cpdag(graph.n, graph.edges))
