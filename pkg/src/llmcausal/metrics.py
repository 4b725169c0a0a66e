"""Edge-level scoring of a predicted graph against ground truth.

Every ordered pair is a classification target, so a reversed edge counts once
as a false positive and once as a false negative. NHD is normalized by N**2;
the baseline NHD is that of a prediction with the same edge count and no
overlap with the truth, which makes ``ratio == 1 - f1`` hold exactly.
"""
from __future__ import annotations

import json
from collections.abc import Sequence
from dataclasses import asdict, dataclass, fields

from .graph import CausalGraph, GraphError


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int


@dataclass(frozen=True)
class MetricsReport:
    precision: float
    recall: float
    f1: float
    nhd: float
    baseline_nhd: float
    ratio: float

    def to_dict(self) -> dict[str, float]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> MetricsReport:
        return cls(**{f.name: float(d[f.name]) for f in fields(cls)})


def _edge_sets(pred: CausalGraph, truth: CausalGraph) -> tuple[set, set, int]:
    if set(pred.variables) != set(truth.variables):
        raise GraphError(
            f"variable sets differ: {sorted(set(pred.variables) ^ set(truth.variables))}"
        )
    return set(pred.named_edges()), set(truth.named_edges()), len(truth.variables)


def confusion_counts(pred: CausalGraph, truth: CausalGraph) -> ConfusionCounts:
    p, t, _ = _edge_sets(pred, truth)
    return ConfusionCounts(tp=len(p & t), fp=len(p - t), fn=len(t - p))


def _div(a: float, b: float) -> float:
    return a / b if b else 0.0


def score(pred: CausalGraph, truth: CausalGraph) -> MetricsReport:
    p, t, n = _edge_sets(pred, truth)
    tp, fp, fn = len(p & t), len(p - t), len(t - p)
    if not p and not t:
        # empty vs empty is perfect agreement
        return MetricsReport(1.0, 1.0, 1.0, 0.0, 0.0, 0.0)
    cells = n * n
    nhd = (fp + fn) / cells
    baseline = (len(p) + len(t)) / cells
    return MetricsReport(
        precision=_div(tp, tp + fp),
        recall=_div(tp, tp + fn),
        f1=_div(2 * tp, 2 * tp + fp + fn),
        nhd=nhd,
        baseline_nhd=baseline,
        ratio=_div(fp + fn, len(p) + len(t)),
    )


def aggregate(reports: Sequence[MetricsReport]) -> MetricsReport:
    """Field-wise mean of several reports (e.g. one per sampling temperature)."""
    reports = list(reports)
    if not reports:
        raise ValueError("cannot aggregate an empty sequence of reports")
    return MetricsReport(
        **{f.name: sum(getattr(r, f.name) for r in reports) / len(reports) for f in fields(MetricsReport)}
    )
