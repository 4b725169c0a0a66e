"""Greedy equivalence search over CPDAGs with a decomposable discrete score."""
from __future__ import annotations

import itertools
import logging
import math
from functools import lru_cache
from typing import Literal

import numpy as np
from scipy.special import gammaln

from ..bayesnet import DataTable
from .cpdag import Cpdag, dag_to_cpdag, pdag_to_dag

log = logging.getLogger(__name__)

Score = Literal["bic", "bdeu"]
BDEU_ESS = 10.0
TOL = 1e-9


class LocalScore:
    """Cached local score of a node given a parent set."""

    def __init__(self, table: DataTable, kind: Score = "bic", ess: float = BDEU_ESS):
        if table.n_rows < 2:
            raise ValueError("GES needs at least two rows")
        if kind not in ("bic", "bdeu"):
            raise ValueError(f"unknown score {kind!r}")
        self.values = table.values
        self.arities = table.arities
        self.n = table.n_rows
        self.kind = kind
        self.ess = ess
        self._cached = lru_cache(maxsize=None)(self._compute)

    def __call__(self, node: int, parents) -> float:
        return self._cached(node, tuple(sorted(parents)))

    def counts(self, node: int, parents: tuple[int, ...]) -> np.ndarray:
        r = self.arities[node]
        q = math.prod(self.arities[p] for p in parents)
        cfg = np.zeros(self.n, dtype=np.int64)
        for p in parents:
            cfg = cfg * self.arities[p] + self.values[:, p]
        return np.bincount(cfg * r + self.values[:, node], minlength=q * r).reshape(q, r)

    def _compute(self, node: int, parents: tuple[int, ...]) -> float:
        nijk = self.counts(node, parents).astype(float)
        q, r = nijk.shape
        nij = nijk.sum(axis=1)
        if self.kind == "bic":
            mask = nijk > 0
            ll = float((nijk[mask] * np.log(nijk[mask] / np.repeat(nij, r).reshape(q, r)[mask])).sum())
            return ll - 0.5 * math.log(self.n) * (r - 1) * q
        a_j = self.ess / q
        a_jk = self.ess / (q * r)
        return float((gammaln(a_j) - gammaln(a_j + nij)).sum()
                     + (gammaln(a_jk + nijk) - gammaln(a_jk)).sum())

    def dag_score(self, n: int, edges) -> float:
        parents = [[a for a, b in edges if b == v] for v in range(n)]
        return sum(self(v, parents[v]) for v in range(n))


def _subsets(items):
    items = sorted(items)
    return itertools.chain.from_iterable(itertools.combinations(items, k) for k in range(len(items) + 1))


def _is_clique(m: np.ndarray, nodes) -> bool:
    return all(m[a, b] or m[b, a] for a, b in itertools.combinations(nodes, 2))


def _semi_directed_blocked(m: np.ndarray, start: int, goal: int, blocked: set[int]) -> bool:
    """True iff every semi-directed path start ~> goal passes through ``blocked``."""
    seen, stack = {start}, [start]
    while stack:
        u = stack.pop()
        for w in np.flatnonzero(m[u]):
            w = int(w)
            if w == goal:
                return False
            if w not in seen and w not in blocked:
                seen.add(w)
                stack.append(w)
    return True


def _complete(m: np.ndarray) -> np.ndarray:
    dag = pdag_to_dag(m)
    rows, cols = np.nonzero(dag)
    return dag_to_cpdag(m.shape[0], zip(rows.tolist(), cols.tolist()))


def _neighbors(m, y):
    return {int(t) for t in np.flatnonzero(m[y] & m[:, y])}


def _parents(m, y):
    return {int(t) for t in np.flatnonzero(m[:, y] & (1 - m[y]))}


def _best_insert(m: np.ndarray, score: LocalScore):
    n = m.shape[0]
    best = (TOL, None)
    for x, y in itertools.permutations(range(n), 2):
        if m[x, y] or m[y, x]:
            continue
        nbrs_y = _neighbors(m, y)
        na = {t for t in nbrs_y if m[t, x] or m[x, t]}
        t0 = nbrs_y - na
        pa = _parents(m, y)
        for t in _subsets(t0):
            cond = na | set(t)
            if not _is_clique(m, cond) or not _semi_directed_blocked(m, y, x, cond):
                continue
            delta = score(y, pa | cond | {x}) - score(y, pa | cond)
            if delta > best[0] + TOL:
                best = (delta, (x, y, t))
    return best


def _best_delete(m: np.ndarray, score: LocalScore):
    n = m.shape[0]
    best = (TOL, None)
    for x, y in itertools.permutations(range(n), 2):
        # x -> y or x - y
        if not m[x, y]:
            continue
        nbrs_y = _neighbors(m, y)
        na = {t for t in nbrs_y if m[t, x] or m[x, t]}
        pa = _parents(m, y)
        for h in _subsets(na):
            keep = na - set(h)
            if not _is_clique(m, keep):
                continue
            delta = score(y, (keep | pa) - {x}) - score(y, keep | pa | {x})
            if delta > best[0] + TOL:
                best = (delta, (x, y, h))
    return best


def _apply_insert(m, x, y, t):
    m = m.copy()
    m[x, y] = 1
    for z in t:
        m[y, z] = 0
    return _complete(m)


def _apply_delete(m, x, y, h):
    m = m.copy()
    m[x, y] = m[y, x] = 0
    for z in h:
        m[y, z] = 1
        m[z, y] = 0
        if m[x, z] and m[z, x]:
            m[z, x] = 0
    return _complete(m)


def run_ges(table: DataTable, score: Score = "bic", max_steps: int = 1000) -> Cpdag:
    """Forward phase of best Inserts, then backward phase of best Deletes.

    Each step takes the operator with the largest score gain; ties keep the
    first operator found, i.e. the lowest (source, target) pair.
    """
    local = score if isinstance(score, LocalScore) else LocalScore(table, score)
    n = len(table.columns)
    m = np.zeros((n, n), dtype=np.int8)
    for phase, finder, apply in (("forward", _best_insert, _apply_insert),
                                 ("backward", _best_delete, _apply_delete)):
        for _ in range(max_steps):
            delta, op = finder(m, local)
            if op is None:
                break
            log.debug("GES %s %s gain %.4f", phase, op, delta)
            m = apply(m, *op)
    return Cpdag.from_matrix(table.columns, m)
