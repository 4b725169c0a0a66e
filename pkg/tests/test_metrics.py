import json
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from llmcausal.graph import CausalGraph, GraphError
from llmcausal.metrics import MetricsReport, aggregate, confusion_counts, score


def graph(names, edges):
    return CausalGraph.from_names(list(names), edges)


def oracle(pred_edges, truth_edges, n):
    """Metrics from dense adjacency matrices, written independently of the library."""
    P = np.zeros((n, n), dtype=int)
    T = np.zeros((n, n), dtype=int)
    for a, b in pred_edges:
        P[a, b] = 1
    for a, b in truth_edges:
        T[a, b] = 1
    tp = int((P & T).sum())
    fp = int((P & (1 - T)).sum())
    fn = int(((1 - P) & T).sum())
    nhd = np.abs(P - T).sum() / n ** 2
    base = (P.sum() + T.sum()) / n ** 2
    return tp, fp, fn, nhd, base


edge_sets = st.integers(2, 10).flatmap(lambda n: st.tuples(
    st.just(n),
    st.sets(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)).filter(lambda e: e[0] != e[1])),
    st.sets(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)).filter(lambda e: e[0] != e[1]))))


def test_confusion_examples():
    truth = graph("AB", [("A", "B")])

    def counts(pred):
        c = confusion_counts(pred, truth)
        return c.tp, c.fp, c.fn
    assert counts(graph("AB", [("A", "B")])) == (1, 0, 0)
    assert counts(graph("AB", [("B", "A")])) == (0, 1, 1)
    assert counts(graph("AB", [])) == (0, 0, 1)


def test_score_examples():
    names = [f"v{i}" for i in range(6)]
    truth = graph(names, [("v0", "v1"), ("v1", "v2"), ("v2", "v3"), ("v3", "v4")])
    pred = graph(names, [("v0", "v1"), ("v1", "v2"), ("v2", "v3"), ("v3", "v4"),
                         ("v4", "v5"), ("v0", "v5"), ("v1", "v5"), ("v2", "v5")])
    pred.remove_edge(3, 4)
    pred.remove_edge(2, 3)
    truth.add_edge(0, 2)
    truth.add_edge(0, 3)
    c = confusion_counts(pred, truth)
    assert (c.tp, c.fp, c.fn) == (2, 4, 4)
    pred.add_edge(3, 5)
    pred.add_edge(0, 4)
    truth.add_edge(0, 4)
    truth.add_edge(1, 3)
    c = confusion_counts(pred, truth)
    assert (c.tp, c.fp, c.fn) == (3, 5, 5)

    # tp = fp = fn = 4
    n = [f"v{i}" for i in range(12)]
    t_edges = [("v0", "v1"), ("v0", "v2"), ("v0", "v3"), ("v0", "v4"),
               ("v1", "v2"), ("v1", "v3"), ("v1", "v4"), ("v2", "v3")]
    p_edges = t_edges[:4] + [("v5", "v6"), ("v5", "v7"), ("v5", "v8"), ("v5", "v9")]
    m = score(graph(n, p_edges), graph(n, t_edges))
    assert m.f1 == pytest.approx(0.5) and m.ratio == pytest.approx(0.5)
    assert m.precision == pytest.approx(0.5) and m.recall == pytest.approx(0.5)
    assert m.nhd == pytest.approx(8 / 144) and m.baseline_nhd == pytest.approx(16 / 144)


def test_identity_case(asia):
    from llmcausal.bayesnet import truth_graph
    t = truth_graph(asia)
    m = score(t.copy(), t)
    assert (m.f1, m.nhd, m.ratio, m.precision, m.recall) == (1.0, 0.0, 0.0, 1.0, 1.0)


def test_zero_division_policy():
    empty = graph("AB", [])
    m = score(empty, empty)
    assert (m.f1, m.ratio, m.nhd, m.baseline_nhd) == (1.0, 0.0, 0.0, 0.0)
    m = score(empty, graph("AB", [("A", "B")]))
    assert (m.precision, m.recall, m.f1, m.ratio) == (0.0, 0.0, 0.0, 1.0)
    m = score(graph("AB", [("A", "B")]), empty)
    assert (m.precision, m.recall, m.f1, m.ratio) == (0.0, 0.0, 0.0, 1.0)


def test_variable_mismatch():
    with pytest.raises(GraphError):
        score(graph("AB", []), graph("AC", []))
    # order does not matter
    m = score(graph("BA", [("A", "B")]), graph("AB", [("A", "B")]))
    assert m.f1 == 1.0


def test_ratio_identity_1000_pairs():
    rng = random.Random(1234)
    checked = 0
    while checked < 1000:
        n = rng.randint(2, 10)
        pairs = [(a, b) for a in range(n) for b in range(n) if a != b]
        density = rng.random()
        p = {e for e in pairs if rng.random() < density}
        t = {e for e in pairs if rng.random() < density}
        if not p and not t:
            continue
        names = [f"x{i}" for i in range(n)]
        m = score(CausalGraph(names, p), CausalGraph(names, t))
        assert abs(m.ratio - (1 - m.f1)) <= 1e-12
        assert abs(m.ratio - m.nhd / m.baseline_nhd) <= 1e-12
        checked += 1


@settings(max_examples=400, deadline=None)
@given(edge_sets)
def test_score_matches_matrix_oracle(case):
    n, p, t = case
    names = [f"x{i}" for i in range(n)]
    pred, truth = CausalGraph(names, p), CausalGraph(names, t)
    tp, fp, fn, nhd, base = oracle(p, t, n)
    c = confusion_counts(pred, truth)
    assert (c.tp, c.fp, c.fn) == (tp, fp, fn)
    assert c.tp + c.fn == len(t) and c.tp + c.fp == len(p)
    m = score(pred, truth)
    assert m.nhd == pytest.approx(nhd, abs=1e-15)
    assert m.baseline_nhd == pytest.approx(base, abs=1e-15)
    for field in ("precision", "recall", "f1", "nhd", "ratio"):
        assert 0.0 <= getattr(m, field) <= 1.0
    # only two graphs free of 2-cycles are guaranteed to fit in N^2 cells
    assert 0.0 <= m.baseline_nhd <= 2.0
    if not any((b, a) in p for a, b in p) and not any((b, a) in t for a, b in t):
        assert m.baseline_nhd <= 1.0
    if p or t:
        assert abs(m.ratio - (1 - m.f1)) <= 1e-12
    # symmetry of the distance
    assert score(truth, pred).nhd == m.nhd


@settings(max_examples=200, deadline=None)
@given(edge_sets, st.data())
def test_monotonicity(case, data):
    n, p, t = case
    names = [f"x{i}" for i in range(n)]
    truth = CausalGraph(names, t)
    base = score(CausalGraph(names, p), truth).f1
    missing = sorted(t - p)
    if missing:
        e = data.draw(st.sampled_from(missing))
        assert score(CausalGraph(names, p | {e}), truth).f1 >= base
    wrong = sorted({(a, b) for a in range(n) for b in range(n) if a != b} - t - p)
    if wrong:
        e = data.draw(st.sampled_from(wrong))
        assert score(CausalGraph(names, p | {e}), truth).f1 <= base


def test_monotonicity_brute_force_three_nodes():
    names = ["a", "b", "c"]
    pairs = [(x, y) for x in range(3) for y in range(3) if x != y]
    subsets = [{e for k, e in enumerate(pairs) if m >> k & 1} for m in range(64)]
    for t in subsets:
        truth = CausalGraph(names, t)
        for p in subsets:
            f = score(CausalGraph(names, p), truth).f1
            for e in set(pairs) - p:
                g = score(CausalGraph(names, p | {e}), truth).f1
                assert (g >= f) if e in t else (g <= f)


def test_aggregate_examples():
    def r(f1):
        return MetricsReport(f1, f1, f1, 0.1, 0.2, 1 - f1)
    assert aggregate([r(0.4), r(0.6)]).f1 == pytest.approx(0.5)
    assert aggregate([r(0.3)]) == r(0.3)
    assert aggregate([r(1), r(1), r(1), r(0)]).f1 == pytest.approx(0.75)
    with pytest.raises(ValueError):
        aggregate([])


def test_report_json_fields():
    m = MetricsReport(0.5, 0.25, 1 / 3, 0.1, 0.2, 0.5)
    d = json.loads(m.to_json())
    assert list(d) == ["precision", "recall", "f1", "nhd", "baseline_nhd", "ratio"]
    assert MetricsReport.from_dict(d) == m
