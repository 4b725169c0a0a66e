"""Conditional-independence tests: stratified chi-square and exact d-separation."""
from __future__ import annotations

import logging
from collections.abc import Callable, Iterable
from dataclasses import dataclass

import numpy as np
from scipy import stats

from ..bayesnet import BayesNet, DataTable

log = logging.getLogger(__name__)

MIN_STRATUM_ROWS = 5


@dataclass(frozen=True)
class CiResult:
    statistic: float
    p_value: float
    independent: bool
    dof: int = 0


CiTest = Callable[[int, int, tuple[int, ...], float], "CiResult | bool"]


def ci_chisq(table: DataTable, i: int, j: int, cond: Iterable[int], alpha: float) -> CiResult:
    """Pearson chi-square test of ``i`` vs ``j`` pooled over the strata of ``cond``.

    Per stratum, empty rows/columns of the contingency table are dropped
    before counting degrees of freedom. Strata with fewer than five rows are
    skipped; if none remain the pair is declared independent with p = 1.
    """
    cond = tuple(cond)
    if table.n_rows == 0:
        raise ValueError("cannot test on an empty table")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if i == j or i in cond or j in cond:
        raise ValueError("i, j and the conditioning set must be disjoint")
    v = table.values
    ri, rj = table.arities[i], table.arities[j]
    if cond:
        key = np.zeros(table.n_rows, dtype=np.int64)
        for c in cond:
            key = key * table.arities[c] + v[:, c]
        _, strata = np.unique(key, return_inverse=True)
        n_strata = int(strata.max()) + 1
    else:
        strata = np.zeros(table.n_rows, dtype=np.int64)
        n_strata = 1
    counts = np.zeros((n_strata, ri, rj))
    np.add.at(counts, (strata, v[:, i], v[:, j]), 1)

    stat, dof, used = 0.0, 0, 0
    for tab in counts:
        total = tab.sum()
        if total < MIN_STRATUM_ROWS:
            continue
        used += 1
        rows, cols = tab.sum(axis=1), tab.sum(axis=0)
        tab = tab[rows > 0][:, cols > 0]
        rows, cols = rows[rows > 0], cols[cols > 0]
        expected = np.outer(rows, cols) / total
        stat += float(((tab - expected) ** 2 / expected).sum())
        dof += (len(rows) - 1) * (len(cols) - 1)
    if used == 0:
        log.info("ci_chisq(%d, %d | %s): no stratum with >= %d rows; assuming independence",
                 i, j, cond, MIN_STRATUM_ROWS)
        return CiResult(0.0, 1.0, True, 0)
    p = float(stats.chi2.sf(stat, dof)) if dof > 0 else 1.0
    return CiResult(stat, p, p > alpha, dof)


def chisq_citest(table: DataTable) -> CiTest:
    def test(i, j, cond, alpha):
        return ci_chisq(table, i, j, cond, alpha)
    return test


def dsep_oracle(net: BayesNet, i: int, j: int, cond: Iterable[int]) -> bool:
    """True iff ``i`` and ``j`` are d-separated by ``cond`` in the network's DAG.

    Bayes-ball reachability: walk (node, direction) states from ``i``; a
    conditioned node passes the ball only from a child back up to its
    parents, and a collider passes it only if it or a descendant is conditioned.
    """
    cond = set(cond)
    for x in (i, j, *cond):
        if not 0 <= x < net.n:
            raise IndexError(f"variable index {x} out of range")
    if i == j or i in cond or j in cond:
        raise ValueError("i, j and the conditioning set must be disjoint")
    parents = [list(p) for p in net.parents]
    children: list[list[int]] = [[] for _ in range(net.n)]
    for c, ps in enumerate(parents):
        for p in ps:
            children[p].append(c)

    # cond and its ancestors: colliders here are open
    open_colliders, stack = set(), list(cond)
    while stack:
        x = stack.pop()
        if x not in open_colliders:
            open_colliders.add(x)
            stack.extend(parents[x])

    visited, reached = set(), set()
    stack = [(i, "up")]
    while stack:
        node, direction = stack.pop()
        if (node, direction) in visited:
            continue
        visited.add((node, direction))
        if node not in cond:
            reached.add(node)
        if direction == "up" and node not in cond:
            stack.extend((p, "up") for p in parents[node])
            stack.extend((c, "down") for c in children[node])
        elif direction == "down":
            if node not in cond:
                stack.extend((c, "down") for c in children[node])
            if node in open_colliders:
                stack.extend((p, "up") for p in parents[node])
    return j not in reached


def dsep_citest(net: BayesNet) -> CiTest:
    def test(i, j, cond, alpha):
        return dsep_oracle(net, i, j, cond)
    return test
