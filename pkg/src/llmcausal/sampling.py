"""Row subsampling strategies for prompt-sized data, and Pearson correlations."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .bayesnet import DataTable

Strategy = Literal["random", "systematic", "cluster", "kmeans-adaptive"]
STRATEGIES: tuple[str, ...] = ("random", "systematic", "cluster", "kmeans-adaptive")

KMEANS_MAX_ITER = 50


@dataclass(frozen=True)
class SampleSpec:
    strategy: Strategy = "random"
    k: int = 100
    seed: int = 0
    # systematic only: fixed start row instead of a seeded one
    offset: int | None = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; choose from {STRATEGIES}")
        if self.k < 1:
            raise ValueError("k must be at least 1")


def kmeans(points: np.ndarray, n_clusters: int, rng: np.random.Generator,
           max_iter: int = KMEANS_MAX_ITER) -> tuple[np.ndarray, np.ndarray]:
    """Lloyd's algorithm. Returns (centroids, labels).

    Initial centroids are random picks among the distinct rows, topped up
    with random repeated rows when there are fewer distinct rows than
    clusters. Empty clusters keep their previous centroid.
    """
    points = np.asarray(points, dtype=float)
    _, first = np.unique(points, axis=0, return_index=True)
    first = np.sort(first)
    if len(first) >= n_clusters:
        init = rng.choice(first, size=n_clusters, replace=False)
    else:
        rest = np.setdiff1d(np.arange(len(points)), first)
        extra = rng.choice(rest, size=n_clusters - len(first), replace=False)
        init = np.concatenate([rng.permutation(first), extra])
    centroids = points[init].copy()
    labels = np.full(len(points), -1)
    for _ in range(max_iter):
        d = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new = d.argmin(axis=1)
        if np.array_equal(new, labels):
            break
        labels = new
        for c in range(n_clusters):
            members = points[labels == c]
            if len(members):
                centroids[c] = members.mean(axis=0)
    return centroids, labels


def _largest_remainder(sizes: np.ndarray, k: int) -> np.ndarray:
    total = sizes.sum()
    exact = k * sizes / total
    alloc = np.floor(exact).astype(int)
    order = np.argsort(-(exact - alloc), kind="stable")
    for c in order[: k - alloc.sum()]:
        alloc[c] += 1
    return alloc


def sample_rows(table: DataTable, spec: SampleSpec) -> DataTable:
    """Pick ``spec.k`` rows of ``table`` with the given strategy.

    Selected rows keep their original relative order. All strategies are
    deterministic given ``spec.seed``.
    """
    n, k = table.n_rows, spec.k
    if k > n:
        raise ValueError(f"cannot sample k={k} rows from a table of {n}")
    rng = np.random.default_rng(spec.seed)

    if spec.strategy == "random":
        idx = rng.choice(n, size=k, replace=False)
    elif spec.strategy == "systematic":
        stride = n // k
        start = spec.offset if spec.offset is not None else int(rng.integers(n))
        idx = (start + stride * np.arange(k)) % n
    elif spec.strategy == "cluster":
        n_clusters = min(max(1, round(math.sqrt(k))), n)
        _, labels = kmeans(table.values, n_clusters, rng)
        sizes = np.bincount(labels, minlength=n_clusters)
        alloc = _largest_remainder(sizes, k)
        picks = [rng.choice(np.flatnonzero(labels == c), size=a, replace=False)
                 for c, a in enumerate(alloc) if a]
        idx = np.concatenate(picks)
    else:
        centroids, _ = kmeans(table.values, k, rng)
        pts = table.values.astype(float)
        d = ((pts[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        taken = np.zeros(n, dtype=bool)
        chosen = []
        for c in range(k):
            dc = np.where(taken, np.inf, d[:, c])
            r = int(np.argmin(dc))  # argmin returns the lowest index among ties
            taken[r] = True
            chosen.append(r)
        idx = np.array(chosen)

    idx = np.sort(idx)
    prov = dict(table.provenance or {})
    prov.update({"sample_strategy": spec.strategy, "sample_k": k, "sample_seed": spec.seed})
    return table.take(idx, prov)


UNDEFINED = None


@dataclass(frozen=True)
class CorrelationMatrix:
    """Pearson correlations with an explicit "undefined" mask for constant columns.

    ``values`` holds 0.0 where the correlation is undefined so the array is
    NaN-free; use :meth:`get` to see the sentinel.
    """

    columns: tuple[str, ...]
    values: np.ndarray
    defined: np.ndarray

    def get(self, a: str, b: str) -> float | None:
        i, j = self.columns.index(a), self.columns.index(b)
        return float(self.values[i, j]) if self.defined[i, j] else UNDEFINED


def pearson_matrix(table: DataTable) -> CorrelationMatrix:
    """Correlation of every column pair, treating state indices as numbers."""
    if table.n_rows < 2:
        raise ValueError("need at least 2 rows for correlations")
    x = table.values.astype(float)
    centered = x - x.mean(axis=0)
    ss = (centered**2).sum(axis=0)
    const = ss == 0
    denom = np.sqrt(np.outer(ss, ss))
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = np.where(denom > 0, centered.T @ centered / np.where(denom > 0, denom, 1.0), 0.0)
    corr = np.clip(corr, -1.0, 1.0)
    defined = ~(const[:, None] | const[None, :])
    np.fill_diagonal(defined, True)
    np.fill_diagonal(corr, 1.0)
    return CorrelationMatrix(table.columns, corr, defined)
