"""Discrete Bayesian networks: BIF parsing, ground-truth graphs, ancestral sampling.

Only the subset of BIF used by the BNLearn discrete networks is supported:
``network``/``variable``/``probability`` blocks with ``table`` or
per-parent-configuration rows. ``property`` statements are skipped.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import re
from collections.abc import Sequence
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .graph import CausalGraph, CycleError, topological_order

BENCHMARKS = ("asia", "cancer", "survey")


class BifError(ValueError):
    pass


class BifSyntaxError(BifError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class BifSemanticError(BifError):
    pass


@dataclass(frozen=True, eq=False)
class BayesNet:
    """Variables with state labels, parent index lists and CPT arrays.

    ``cpts[i]`` has shape ``(prod(parent arities), arity_i)``; rows are parent
    configurations in row-major order with the first listed parent slowest.
    """

    names: tuple[str, ...]
    states: tuple[tuple[str, ...], ...]
    parents: tuple[tuple[int, ...], ...]
    cpts: tuple[np.ndarray, ...]
    name: str = "unknown"

    def __post_init__(self):
        n = len(self.names)
        if not (len(self.states) == len(self.parents) == len(self.cpts) == n):
            raise BifSemanticError("names, states, parents and cpts must have equal length")
        for i in range(n):
            rows = int(np.prod([self.arity(p) for p in self.parents[i]], dtype=int))
            cpt = self.cpts[i]
            if cpt.shape != (rows, self.arity(i)):
                raise BifSemanticError(
                    f"CPT of {self.names[i]!r} has shape {cpt.shape}, expected {(rows, self.arity(i))}"
                )
            bad = np.abs(cpt.sum(axis=1) - 1.0) > 1e-9
            if bad.any() or (cpt < 0).any():
                raise BifSemanticError(f"CPT rows of {self.names[i]!r} are not distributions")
        try:
            topological_order(self.graph())
        except CycleError as exc:
            raise BifSemanticError(f"parent relation is cyclic: {exc}") from None

    @property
    def n(self) -> int:
        return len(self.names)

    def arity(self, i: int) -> int:
        return len(self.states[i])

    @property
    def arities(self) -> tuple[int, ...]:
        return tuple(len(s) for s in self.states)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def graph(self) -> CausalGraph:
        return CausalGraph(self.names, [(p, i) for i in range(self.n) for p in self.parents[i]])

    def equivalent(self, other: BayesNet, tol: float = 1e-9) -> bool:
        return (
            self.names == other.names
            and self.states == other.states
            and self.parents == other.parents
            and all(np.allclose(a, b, atol=tol, rtol=0) for a, b in zip(self.cpts, other.cpts))
        )


def truth_graph(net: BayesNet) -> CausalGraph:
    """Parent -> child edge for every parent relation of ``net``."""
    return net.graph()


@dataclass(frozen=True, eq=False)
class DataTable:
    """Discrete observations: one column per variable, integer state indices."""

    columns: tuple[str, ...]
    values: np.ndarray
    arities: tuple[int, ...]
    state_labels: tuple[tuple[str, ...], ...] | None = None
    provenance: dict | None = field(default=None)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.int64)
        if values.ndim != 2 or values.shape[1] != len(self.columns):
            raise ValueError(f"values must be (rows, {len(self.columns)}), got {values.shape}")
        if len(self.arities) != len(self.columns):
            raise ValueError("one arity per column required")
        if values.size and ((values < 0).any() or (values >= np.array(self.arities)).any()):
            raise ValueError("state index out of range for its column arity")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "arities", tuple(int(a) for a in self.arities))

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    def col(self, name: str) -> int:
        try:
            return self.columns.index(name)
        except ValueError:
            raise KeyError(f"unknown column {name!r}; have {list(self.columns)}") from None

    def take(self, rows: Sequence[int] | np.ndarray, provenance: dict | None = None) -> DataTable:
        return DataTable(self.columns, self.values[np.asarray(rows, dtype=np.int64)], self.arities,
                         self.state_labels, provenance if provenance is not None else self.provenance)

    def rows(self) -> list[tuple[int, ...]]:
        return [tuple(int(x) for x in r) for r in self.values]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        w.writerows(self.values.tolist())
        return buf.getvalue()

    def save(self, path: str | Path) -> None:
        """Write CSV plus a ``<path>.json`` sidecar with arities, labels and provenance."""
        path = Path(path)
        path.write_text(self.to_csv())
        meta = {
            "columns": list(self.columns),
            "arities": list(self.arities),
            "state_labels": [list(s) for s in self.state_labels] if self.state_labels else None,
            "provenance": self.provenance,
        }
        Path(str(path) + ".json").write_text(json.dumps(meta, indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path, arities: Sequence[int] | None = None) -> DataTable:
        path = Path(path)
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            values = np.array([[int(x) for x in row] for row in reader if row], dtype=np.int64)
        values = values.reshape(-1, len(header))
        sidecar = Path(str(path) + ".json")
        labels = provenance = None
        if sidecar.exists():
            meta = json.loads(sidecar.read_text())
            arities = arities or meta.get("arities")
            if meta.get("state_labels"):
                labels = tuple(tuple(s) for s in meta["state_labels"])
            provenance = meta.get("provenance")
        if arities is None:
            arities = [int(values[:, j].max()) + 1 if len(values) else 1 for j in range(len(header))]
        return cls(tuple(header), values, tuple(arities), labels, provenance)


# BIF parsing

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*|/\*.*?\*/)
  | (?P<string>"[^"]*")
  | (?P<punct>[{}()\[\];,|])
  | (?P<word>[^\s{}()\[\];,|"]+)
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise BifSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        chunk = m.group()
        if kind in ("punct", "word", "string"):
            toks.append(_Tok(kind, chunk, line, pos - line_start + 1))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = pos + chunk.rfind("\n") + 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        tok = self.toks[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def fail(self, msg: str, tok: _Tok | None = None):
        tok = tok or self.peek()
        found = "end of file" if tok.kind == "eof" else repr(tok.text)
        raise BifSyntaxError(f"{msg}, found {found}", tok.line, tok.col)

    def expect(self, text: str) -> _Tok:
        tok = self.peek()
        if tok.text != text or tok.kind == "eof":
            self.fail(f"expected {text!r}")
        return self.next()

    def word(self, what: str) -> _Tok:
        tok = self.peek()
        if tok.kind != "word":
            self.fail(f"expected {what}")
        return self.next()

    def number(self) -> float:
        tok = self.word("a number")
        try:
            return float(tok.text)
        except ValueError:
            self.fail("expected a number", tok)

    def skip_property(self):
        self.next()  # 'property'
        while self.peek().text != ";":
            if self.peek().kind == "eof":
                self.fail("unterminated property")
            self.next()
        self.next()

    def block_body(self, handle):
        self.expect("{")
        while self.peek().text != "}":
            tok = self.peek()
            if tok.kind == "eof":
                self.fail("expected '}'")
            if tok.text == "property":
                self.skip_property()
            else:
                handle(tok)
        self.expect("}")

    def word_list(self, close: str) -> list[str]:
        items = [self.word("a name").text]
        while self.peek().text == ",":
            self.next()
            items.append(self.word("a name").text)
        self.expect(close)
        return items

    def numbers(self) -> list[float]:
        vals = [self.number()]
        while self.peek().text == ",":
            self.next()
            vals.append(self.number())
        self.expect(";")
        return vals


def parse_bif(text: str) -> BayesNet:
    """Parse BIF text into a validated :class:`BayesNet` (variable order = declaration order)."""
    p = _Parser(text)
    net_name = "unknown"
    variables: dict[str, tuple[str, ...]] = {}
    var_tok: dict[str, _Tok] = {}
    prob_blocks: list[tuple[_Tok, str, list[str], list]] = []

    while p.peek().kind != "eof":
        tok = p.word("'network', 'variable' or 'probability'")
        if tok.text == "network":
            if p.peek().kind == "word":
                net_name = p.next().text
            p.block_body(lambda t: p.fail("unexpected content in network block"))
        elif tok.text == "variable":
            name_tok = p.word("a variable name")
            states: list[str] = []

            def var_item(t):
                if t.text != "type":
                    p.fail("expected 'type' or 'property'")
                p.next()
                if p.word("'discrete'").text != "discrete":
                    p.fail("only discrete variables are supported", p.toks[p.i - 1])
                p.expect("[")
                count_tok = p.word("state count")
                p.expect("]")
                p.expect("{")
                states.extend(p.word_list("}"))
                p.expect(";")
                if not count_tok.text.isdigit() or int(count_tok.text) != len(states):
                    raise BifSemanticError(
                        f"line {count_tok.line}: variable {name_tok.text!r} declares "
                        f"{count_tok.text} states but lists {len(states)}"
                    )

            p.block_body(var_item)
            if name_tok.text in variables:
                raise BifSemanticError(f"line {name_tok.line}: variable {name_tok.text!r} declared twice")
            if not states:
                raise BifSemanticError(f"line {name_tok.line}: variable {name_tok.text!r} has no type")
            variables[name_tok.text] = tuple(states)
            var_tok[name_tok.text] = name_tok
        elif tok.text == "probability":
            p.expect("(")
            child = p.word("a variable name").text
            parents: list[str] = []
            if p.peek().text == "|":
                p.next()
                parents = p.word_list(")")
            else:
                p.expect(")")
            entries: list = []

            def prob_item(t):
                if t.text == "table":
                    p.next()
                    entries.append(("table", t, p.numbers()))
                elif t.text == "default":
                    p.next()
                    entries.append(("default", t, p.numbers()))
                elif t.text == "(":
                    p.next()
                    cfg = p.word_list(")")
                    entries.append(("row", t, cfg, p.numbers()))
                else:
                    p.fail("expected 'table', 'default' or a parent configuration")

            p.block_body(prob_item)
            prob_blocks.append((tok, child, parents, entries))
        else:
            p.fail("expected 'network', 'variable' or 'probability'", tok)

    names = tuple(variables)
    index = {n: i for i, n in enumerate(names)}
    cpts: list[np.ndarray | None] = [None] * len(names)
    parent_idx: list[tuple[int, ...]] = [()] * len(names)
    for tok, child, parents, entries in prob_blocks:
        where = f"line {tok.line}"
        for v in [child, *parents]:
            if v not in index:
                raise BifSemanticError(f"{where}: undeclared variable {v!r} in probability block")
        ci = index[child]
        if cpts[ci] is not None:
            raise BifSemanticError(f"{where}: second probability block for {child!r}")
        arity = len(variables[child])
        p_states = [variables[v] for v in parents]
        n_rows = int(np.prod([len(s) for s in p_states], dtype=int))
        table = np.full((n_rows, arity), np.nan)
        for entry in entries:
            kind, etok = entry[0], entry[1]
            if kind == "table":
                vals = entry[2]
                if len(vals) != n_rows * arity:
                    raise BifSemanticError(
                        f"line {etok.line}: table for {child!r} has {len(vals)} values, expected {n_rows * arity}"
                    )
                # child state varies slowest, parent configurations fastest
                table = np.array(vals, dtype=float).reshape(arity, n_rows).T.copy()
            elif kind == "default":
                vals = entry[2]
                if len(vals) != arity:
                    raise BifSemanticError(f"line {etok.line}: default row for {child!r} has wrong width")
                missing = np.isnan(table[:, 0])
                table[missing] = vals
            else:
                cfg, vals = entry[2], entry[3]
                if len(cfg) != len(parents):
                    raise BifSemanticError(
                        f"line {etok.line}: configuration {cfg} does not match parents {parents}"
                    )
                row = 0
                for label, states in zip(cfg, p_states):
                    if label not in states:
                        raise BifSemanticError(f"line {etok.line}: unknown state {label!r}")
                    row = row * len(states) + states.index(label)
                if len(vals) != arity:
                    raise BifSemanticError(
                        f"line {etok.line}: row for {child!r} has {len(vals)} values, expected {arity}"
                    )
                if not np.isnan(table[row, 0]):
                    raise BifSemanticError(f"line {etok.line}: duplicate row {cfg} for {child!r}")
                table[row] = vals
        if np.isnan(table).any():
            got = int((~np.isnan(table[:, 0])).sum())
            raise BifSemanticError(f"{where}: CPT of {child!r} has {got} rows, expected {n_rows}")
        sums = table.sum(axis=1)
        if (np.abs(sums - 1.0) > 1e-6).any() or (table < 0).any():
            bad = int(np.argmax(np.abs(sums - 1.0)))
            raise BifSemanticError(f"{where}: CPT row {bad} of {child!r} sums to {sums[bad]:.6g}, not 1")
        cpts[ci] = table / sums[:, None]
        parent_idx[ci] = tuple(index[v] for v in parents)
    for i, c in enumerate(cpts):
        if c is None:
            raise BifSemanticError(f"variable {names[i]!r} has no probability block")
    return BayesNet(names, tuple(variables.values()), tuple(parent_idx), tuple(cpts), net_name)


def to_bif(net: BayesNet) -> str:
    out = [f"network {net.name} {{", "}"]
    for name, states in zip(net.names, net.states):
        out += [f"variable {name} {{", f"  type discrete [ {len(states)} ] {{ {', '.join(states)} }};", "}"]
    for i, name in enumerate(net.names):
        pa = net.parents[i]
        cpt = net.cpts[i]
        if not pa:
            out += [f"probability ( {name} ) {{", "  table " + ", ".join(repr(float(x)) for x in cpt[0]) + ";", "}"]
            continue
        out.append(f"probability ( {name} | {', '.join(net.names[p] for p in pa)} ) {{")
        for row, cfg in enumerate(itertools.product(*(net.states[p] for p in pa))):
            out.append(f"  ({', '.join(cfg)}) " + ", ".join(repr(float(x)) for x in cpt[row]) + ";")
        out.append("}")
    return "\n".join(out) + "\n"


def load_benchmark(name: str) -> BayesNet:
    """Load an embedded benchmark (asia, cancer, survey) or a BIF file path."""
    key = str(name).lower()
    if key in BENCHMARKS:
        text = resources.files("llmcausal").joinpath(f"data/{key}.bif").read_text()
        net = parse_bif(text)
        return BayesNet(net.names, net.states, net.parents, net.cpts, key)
    path = Path(name)
    if path.is_file():
        net = parse_bif(path.read_text())
        return BayesNet(net.names, net.states, net.parents, net.cpts, path.stem)
    raise ValueError(f"unknown network {name!r}; available: {', '.join(BENCHMARKS)} or a path to a .bif file")


def _config_index(values: np.ndarray, parents: Sequence[int], arities: Sequence[int]) -> np.ndarray:
    idx = np.zeros(values.shape[0], dtype=np.int64)
    for p in parents:
        idx = idx * arities[p] + values[:, p]
    return idx


def ancestral_sample(net: BayesNet, n: int, seed: int) -> DataTable:
    """Draw ``n`` joint samples, each variable conditioned on its sampled parents."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    values = np.zeros((n, net.n), dtype=np.int64)
    arities = net.arities
    for i in topological_order(net.graph()):
        cfg = _config_index(values, net.parents[i], arities)
        cum = np.cumsum(net.cpts[i], axis=1)[cfg]
        u = rng.random(n)
        values[:, i] = np.minimum((u[:, None] >= cum).sum(axis=1), arities[i] - 1)
    return DataTable(net.names, values, arities, net.states,
                     {"network": net.name, "seed": int(seed), "n": int(n)})


def exact_marginals(net: BayesNet) -> list[np.ndarray]:
    """Marginal distribution of every variable by enumerating the full joint."""
    marg = [np.zeros(a) for a in net.arities]
    for assignment in itertools.product(*(range(a) for a in net.arities)):
        p = 1.0
        for i in range(net.n):
            row = 0
            for q in net.parents[i]:
                row = row * net.arity(q) + assignment[q]
            p *= net.cpts[i][row, assignment[i]]
            if p == 0.0:
                break
        if p:
            for i, s in enumerate(assignment):
                marg[i][s] += p
    return marg
