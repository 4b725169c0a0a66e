import sys

import numpy as np
import pytest

from llmcausal.bayesnet import BayesNet, DataTable, load_benchmark

TWO_VAR_BIF = """\
network fixture {
}
variable A {
  type discrete [ 2 ] { yes, no };
}
variable B {
  type discrete [ 2 ] { yes, no };
  property "position = (10, 20)";
}
probability ( A ) {
  table 0.3, 0.7;
}
probability ( B | A ) {
  (yes) 0.9, 0.1;
  (no) 0.2, 0.8;
}
"""


@pytest.fixture(scope="session")
def asia():
    return load_benchmark("asia")


@pytest.fixture(scope="session")
def benchmarks():
    return {name: load_benchmark(name) for name in ("asia", "cancer", "survey")}


def binary_net(names, parents, cpts, name="fixture"):
    """Small all-binary BayesNet from parent-name lists and row-major CPT rows."""
    idx = {n: i for i, n in enumerate(names)}
    return BayesNet(
        names=tuple(names),
        states=tuple(("0", "1") for _ in names),
        parents=tuple(tuple(idx[p] for p in parents.get(n, ())) for n in names),
        cpts=tuple(np.asarray(cpts[n], dtype=float) for n in names),
        name=name,
    )


def collider_net():
    return binary_net(["X", "Y", "Z"], {"Z": ["X", "Y"]},
                      {"X": [[0.5, 0.5]], "Y": [[0.5, 0.5]],
                       "Z": [[0.9, 0.1], [0.3, 0.7], [0.4, 0.6], [0.1, 0.9]]})


def chain_net():
    return binary_net(["X", "Z", "Y"], {"Z": ["X"], "Y": ["Z"]},
                      {"X": [[0.5, 0.5]], "Z": [[0.85, 0.15], [0.2, 0.8]], "Y": [[0.9, 0.1], [0.25, 0.75]]})


def xor_collider_table(n=5000, seed=0, flip=0.05):
    rng = np.random.default_rng(seed)
    x = rng.integers(0, 2, n)
    y = rng.integers(0, 2, n)
    z = (x ^ y) ^ (rng.random(n) < flip)
    return DataTable(("X", "Y", "Z"), np.column_stack([x, y, z]), (2, 2, 2))


def table_from_columns(**cols):
    names = tuple(cols)
    values = np.column_stack([np.asarray(cols[c]) for c in names])
    return DataTable(names, values, tuple(int(values[:, j].max()) + 1 for j in range(len(names))))


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for key in sorted(results, key=lambda k: (int("".join(c for c in k if c.isdigit())), k)):
            terminalreporter.write_line(results[key])
