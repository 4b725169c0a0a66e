from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import table_from_columns
from llmcausal.bayesnet import DataTable, ancestral_sample
from llmcausal.sampling import STRATEGIES, UNDEFINED, SampleSpec, kmeans, pearson_matrix, sample_rows


def two_pass_corr(x, y):
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    if sxx == 0 or syy == 0:
        return None
    return sxy / (sxx * syy) ** 0.5


def indexed_table(n):
    return DataTable(("i",), np.arange(n).reshape(-1, 1), (n,))


def test_systematic_stride():
    t = indexed_table(10)
    out = sample_rows(t, SampleSpec("systematic", 5, 0, offset=0))
    assert out.values[:, 0].tolist() == [0, 2, 4, 6, 8]
    out = sample_rows(t, SampleSpec("systematic", 3, 0, offset=8))
    assert sorted(out.values[:, 0].tolist()) == [1, 4, 8]  # 8, 11 -> 1, 14 -> 4


def test_systematic_seeded_start_is_stride_pattern():
    t = indexed_table(100)
    rows = sample_rows(t, SampleSpec("systematic", 10, 42)).values[:, 0]
    residues = {r % 10 for r in rows}
    assert len(residues) == 1 and len(set(rows)) == 10


def test_random_full_copy():
    t = table_from_columns(a=[0, 1, 1, 0, 1], b=[1, 1, 0, 0, 0])
    out = sample_rows(t, SampleSpec("random", 5, 3))
    assert Counter(out.rows()) == Counter(t.rows())


def test_kmeans_adaptive_duplicate_blocks():
    block_a = [(0, 0, 0, 0)] * 6
    block_b = [(1, 1, 1, 1)] * 4
    t = DataTable(tuple("wxyz"), np.array(block_a + block_b), (2, 2, 2, 2))
    for seed in range(10):
        out = sample_rows(t, SampleSpec("kmeans-adaptive", 2, seed))
        assert sorted(out.rows()) == [(0, 0, 0, 0), (1, 1, 1, 1)]
        # brute force: representative of each block is its lowest index
        assert out.values.tolist() == [[0, 0, 0, 0], [1, 1, 1, 1]]


def test_kmeans_separates_obvious_clusters():
    pts = np.array([[0, 0]] * 5 + [[10, 10]] * 5, dtype=float)
    _, labels = kmeans(pts, 2, np.random.default_rng(0))
    assert len(set(labels[:5])) == 1 and len(set(labels[5:])) == 1 and labels[0] != labels[5]


def test_errors():
    t = indexed_table(5)
    with pytest.raises(ValueError):
        sample_rows(t, SampleSpec("random", 6, 0))
    with pytest.raises(ValueError):
        SampleSpec("random", 0, 0)
    with pytest.raises(ValueError):
        SampleSpec("stratified", 3, 0)
    with pytest.raises(ValueError):
        pearson_matrix(table_from_columns(a=[1]))


@settings(max_examples=60, deadline=None)
@given(arrays(np.int64, st.tuples(st.integers(1, 40), st.integers(1, 4)), elements=st.integers(0, 2)),
       st.sampled_from(STRATEGIES), st.integers(0, 2**31), st.data())
def test_sample_is_submultiset_and_deterministic(values, strategy, seed, data):
    t = DataTable(tuple(f"c{j}" for j in range(values.shape[1])), values, (3,) * values.shape[1])
    k = data.draw(st.integers(1, t.n_rows))
    spec = SampleSpec(strategy, k, seed)
    out = sample_rows(t, spec)
    assert out.n_rows == k and out.columns == t.columns
    assert not Counter(out.rows()) - Counter(t.rows())
    assert sample_rows(t, spec).rows() == out.rows()


def test_sample_rows_provenance(asia):
    d = ancestral_sample(asia, 300, 2)
    out = sample_rows(d, SampleSpec("cluster", 100, 5))
    assert out.n_rows == 100
    assert out.provenance["network"] == "asia"
    assert out.provenance["sample_strategy"] == "cluster" and out.provenance["sample_k"] == 100


def test_pearson_examples():
    x = [0, 1, 1, 0, 1, 0, 0, 1]
    c = pearson_matrix(table_from_columns(x=x, y=x, z=[1 - v for v in x], k=[1] * 8))
    assert c.get("x", "y") == pytest.approx(1.0)
    assert c.get("x", "z") == pytest.approx(-1.0)
    assert c.get("x", "k") is UNDEFINED and c.get("k", "z") is UNDEFINED
    assert c.get("k", "k") == 1.0
    assert not np.isnan(c.values).any()


@settings(max_examples=100, deadline=None)
@given(arrays(np.int64, st.tuples(st.integers(2, 30), st.integers(1, 5)), elements=st.integers(0, 3)))
def test_pearson_matches_two_pass(values):
    t = DataTable(tuple(f"c{j}" for j in range(values.shape[1])), values, (4,) * values.shape[1])
    c = pearson_matrix(t)
    assert np.allclose(c.values, c.values.T)
    assert np.all(np.abs(c.values) <= 1.0)
    for i, a in enumerate(t.columns):
        assert c.get(a, a) == 1.0
        for b in t.columns[i + 1:]:
            ref = two_pass_corr(values[:, t.col(a)].tolist(), values[:, t.col(b)].tolist())
            got = c.get(a, b)
            if ref is None:
                assert got is UNDEFINED
            else:
                assert got == pytest.approx(ref, abs=1e-12)
