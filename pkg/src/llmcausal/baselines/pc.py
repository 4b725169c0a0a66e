"""Stable PC: order-independent skeleton search, v-structures, Meek closure."""
from __future__ import annotations

import itertools
import logging
from collections.abc import Sequence

import numpy as np

from .citests import CiTest
from .cpdag import Cpdag, meek_closure

log = logging.getLogger(__name__)


def _independent(outcome) -> bool:
    return bool(outcome.independent) if hasattr(outcome, "independent") else bool(outcome)


def pc_skeleton(citest: CiTest, n: int, alpha: float,
                max_cond: int | None = None) -> tuple[list[set[int]], dict[frozenset[int], tuple[int, ...]]]:
    """Adjacency sets and separating sets.

    Within a level every test conditions on the neighbourhoods as they were at
    the start of the level, and removals are applied only once the level ends.
    """
    adj = [set(range(n)) - {i} for i in range(n)]
    sepsets: dict[frozenset[int], tuple[int, ...]] = {}
    level = 0
    while any(len(a) - 1 >= level for a in adj) and (max_cond is None or level <= max_cond):
        frozen = [set(a) for a in adj]
        removed: dict[frozenset[int], tuple[int, ...]] = {}
        for i in range(n):
            for j in sorted(frozen[i]):
                pair = frozenset((i, j))
                if pair in removed:
                    continue
                for cond in itertools.combinations(sorted(frozen[i] - {j}), level):
                    if _independent(citest(i, j, cond, alpha)):
                        removed[pair] = cond
                        break
        for pair, cond in removed.items():
            a, b = tuple(pair)
            adj[a].discard(b)
            adj[b].discard(a)
            sepsets[pair] = cond
        level += 1
    return adj, sepsets


def orient_v_structures(adj: Sequence[set[int]], sepsets: dict[frozenset[int], tuple[int, ...]]) -> np.ndarray:
    n = len(adj)
    m = np.zeros((n, n), dtype=np.int8)
    for a in range(n):
        for b in adj[a]:
            m[a, b] = 1
    for mid in range(n):
        for a, c in itertools.combinations(sorted(adj[mid]), 2):
            if c in adj[a] or mid in sepsets.get(frozenset((a, c)), ()):
                continue
            # first orientation wins; a later conflicting v-structure is skipped
            if m[a, mid] and m[c, mid]:
                m[mid, a] = 0
                m[mid, c] = 0
            else:
                log.info("skipping conflicting v-structure %d -> %d <- %d", a, mid, c)
    return m


def run_pc(citest: CiTest, variables: Sequence[str], alpha: float = 0.05,
           max_cond: int | None = None) -> Cpdag:
    """PC over ``variables`` using ``citest(i, j, cond, alpha)``.

    ``citest`` may return a bool (True = independent) or an object with an
    ``independent`` attribute such as :class:`CiResult`.
    """
    n = len(variables)
    adj, sepsets = pc_skeleton(citest, n, alpha, max_cond)
    m = meek_closure(orient_v_structures(adj, sepsets))
    return Cpdag.from_matrix(variables, m)
