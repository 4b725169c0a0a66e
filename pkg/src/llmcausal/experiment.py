"""Experiment grids: configuration, execution, persistence and method-by-dataset reports.

Run directory layout::

    <out>/config.json
    <out>/truth.json
    <out>/runs/<run_id>/result.json      metrics, counts, provenance (no timings)
    <out>/runs/<run_id>/graph.json       predicted graph (scored form)
    <out>/runs/<run_id>/cpdag.json       PC/GES only
    <out>/runs/<run_id>/transcript.jsonl LLM runs only
    <out>/runs/<run_id>/requests.jsonl   LLM runs only; gateway log with timestamps
    <out>/runs/<run_id>/timing.json
    <out>/report.txt, report.csv, report.png
"""
from __future__ import annotations

import csv
import io
import json
import logging
import time
from collections import defaultdict
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .baselines import chisq_citest, cpdag_eval_matrix, run_ges, run_pc
from .bayesnet import BENCHMARKS, BayesNet, DataTable, ancestral_sample, load_benchmark, truth_graph
from .discovery import DiscoveryError, DiscoveryOptions, DiscoveryResult, discover_bfs, discover_pairwise
from .gateway import DEFAULT_MODEL, DecodingParams, GatewayError, HttpTransport, LLMGateway, OracleTransport
from .graph import CausalGraph, load_graph
from .metrics import MetricsReport, aggregate, confusion_counts, score
from .prompting import Transcript, context_for
from .sampling import STRATEGIES, SampleSpec

log = logging.getLogger(__name__)

STAT_METHODS = ("pc", "ges")
LLM_METHODS = tuple(f"{s}{suffix}" for s in ("pairwise", "bfs")
                    for suffix in ("", "+pearson", "+observations"))
ALL_METHODS = STAT_METHODS + LLM_METHODS

LABELS = {
    "pc": "PC",
    "ges": "GES",
    "pairwise": "Pairwise Prompting",
    "pairwise+pearson": "Pairwise + Pearson corr.",
    "pairwise+observations": "Pairwise + Observational Data",
    "bfs": "BFS Prompting",
    "bfs+pearson": "BFS + Pearson corr.",
    "bfs+observations": "BFS + Observational Data",
}
MISSING = "—"


class ConfigError(ValueError):
    pass


def split_method(method: str) -> tuple[str, str]:
    """``"bfs+observations"`` -> ``("bfs", "observations")``; ``"pc"`` -> ``("pc", "none")``."""
    if method not in ALL_METHODS:
        raise ConfigError(f"unknown method {method!r}; choose from {', '.join(ALL_METHODS)}")
    strategy, _, mode = method.partition("+")
    return strategy, mode or "none"


@dataclass
class ExperimentConfig:
    dataset: str = "asia"
    methods: list[str] = field(default_factory=lambda: list(ALL_METHODS))
    llm_sample_k: int = 100
    sample_strategy: str = "random"
    # rows of observational data drawn per seed; LLM samples and PC/GES subsets come from it
    data_rows: int = 1000
    stat_sample_sizes: list[int] = field(default_factory=lambda: [100, 500, 1000])
    temperatures: list[float] = field(default_factory=lambda: [0.0, 0.5, 0.7, 1.0])
    seeds: list[int] = field(default_factory=lambda: [0])
    model: str = DEFAULT_MODEL
    base_url: str | None = None
    max_tokens: int = 512
    retries: int = 3
    max_parse_retries: int = 2
    live: bool = False
    mock_oracle: dict = field(default_factory=lambda: {"noise_rate": 0.0, "seed": 0})
    alpha: float = 0.05
    ges_score: str = "bic"
    descriptions: bool = True
    workers: int = 1

    def validate(self) -> None:
        if not self.methods:
            raise ConfigError("at least one method is required")
        for m in self.methods:
            split_method(m)
        if any(t < 0 for t in self.temperatures):
            raise ConfigError("temperatures must be non-negative")
        if not self.temperatures and any(m in LLM_METHODS for m in self.methods):
            raise ConfigError("LLM methods need at least one temperature")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.sample_strategy not in STRATEGIES:
            raise ConfigError(f"unknown sample strategy {self.sample_strategy!r}")
        if self.llm_sample_k < 1 or any(n < 1 for n in self.stat_sample_sizes):
            raise ConfigError("sample sizes must be positive")
        if self.ges_score not in ("bic", "bdeu"):
            raise ConfigError(f"unknown GES score {self.ges_score!r}")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        noise = (self.mock_oracle or {}).get("noise_rate", 0.0)
        if not 0 <= noise <= 1:
            raise ConfigError("mock_oracle.noise_rate must lie in [0, 1]")
        if self.dataset.lower() not in BENCHMARKS and not Path(self.dataset).is_file():
            raise ConfigError(f"dataset {self.dataset!r} is neither a benchmark ({', '.join(BENCHMARKS)}) "
                              "nor an existing BIF file")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path: str | Path) -> ExperimentConfig:
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None

    def with_overrides(self, **overrides) -> ExperimentConfig:
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})


@dataclass
class RunResult:
    run_id: str
    method: str
    variant: str
    dataset: str
    seed: int
    temperature: float | None
    sample_size: int
    graph: CausalGraph | None
    metrics: MetricsReport | None
    transcript_path: str | None = None
    wall_clock: float = 0.0
    n_queries: int = 0
    parse_failures: int = 0
    rejected_edges: list[tuple[str, str]] = field(default_factory=list)
    cyclic: bool = False
    error: str | None = None

    def to_dict(self) -> dict:
        """Deterministic fields only (wall-clock lives in timing.json)."""
        return {
            "run_id": self.run_id, "method": self.method, "variant": self.variant,
            "dataset": self.dataset, "seed": self.seed, "temperature": self.temperature,
            "sample_size": self.sample_size,
            "metrics": self.metrics.to_dict() if self.metrics else None,
            "graph": self.graph.to_dict() if self.graph else None,
            "transcript_path": self.transcript_path, "n_queries": self.n_queries,
            "parse_failures": self.parse_failures,
            "rejected_edges": [list(e) for e in self.rejected_edges],
            "cyclic": self.cyclic, "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict, wall_clock: float = 0.0) -> RunResult:
        return cls(
            run_id=d["run_id"], method=d["method"], variant=d["variant"], dataset=d["dataset"],
            seed=d["seed"], temperature=d["temperature"], sample_size=d["sample_size"],
            graph=CausalGraph.from_dict(d["graph"]) if d.get("graph") else None,
            metrics=MetricsReport.from_dict(d["metrics"]) if d.get("metrics") else None,
            transcript_path=d.get("transcript_path"), wall_clock=wall_clock,
            n_queries=d.get("n_queries", 0), parse_failures=d.get("parse_failures", 0),
            rejected_edges=[tuple(e) for e in d.get("rejected_edges", [])],
            cyclic=d.get("cyclic", False), error=d.get("error"),
        )


def write_transcripts(transcripts: Sequence[Transcript], path: Path) -> None:
    with path.open("w") as fh:
        for c, tr in enumerate(transcripts):
            for t, turn in enumerate(tr.turns):
                fh.write(json.dumps({"conversation": c, "turn": t, "role": turn.role, "text": turn.text},
                                    ensure_ascii=False) + "\n")


def _dataset_name(config: ExperimentConfig, net: BayesNet) -> str:
    return net.name if config.dataset.lower() in BENCHMARKS else Path(config.dataset).stem


@dataclass(frozen=True)
class _Cell:
    method: str
    seed: int
    temperature: float | None
    sample_size: int

    @property
    def run_id(self) -> str:
        tail = f"t{self.temperature:g}" if self.temperature is not None else f"n{self.sample_size}"
        return f"{self.method}__seed{self.seed}__{tail}"


def _make_gateway(config: ExperimentConfig, truth: CausalGraph, seed: int, log_path: Path | None) -> LLMGateway:
    if config.live:
        transport = HttpTransport(base_url=config.base_url)
    else:
        oracle = config.mock_oracle or {}
        transport = OracleTransport(truth, float(oracle.get("noise_rate", 0.0)),
                                    int(oracle.get("seed", 0)) * 1_000_003 + seed)
    return LLMGateway(transport, log_path=log_path)


def _run_cell(cell: _Cell, config: ExperimentConfig, net: BayesNet, truth: CausalGraph,
              data: DataTable, dataset: str, out: Path | None) -> RunResult:
    strategy, mode = split_method(cell.method)
    run_dir = out / "runs" / cell.run_id if out else None
    if run_dir:
        run_dir.mkdir(parents=True, exist_ok=True)
        for stale in ("requests.jsonl", "transcript.jsonl"):
            (run_dir / stale).unlink(missing_ok=True)
    result = RunResult(cell.run_id, cell.method, mode, dataset, cell.seed, cell.temperature,
                       cell.sample_size, None, None)
    start = time.perf_counter()
    if strategy in STAT_METHODS:
        subset = data if cell.sample_size == data.n_rows else data.take(range(cell.sample_size))
        if strategy == "pc":
            cpdag = run_pc(chisq_citest(subset), net.names, config.alpha)
        else:
            cpdag = run_ges(subset, config.ges_score)
        result.graph = cpdag_eval_matrix(cpdag)
        if run_dir:
            (run_dir / "cpdag.json").write_text(cpdag.to_json())
    else:
        opts = DiscoveryOptions(
            data_mode=mode,
            sample_spec=SampleSpec(config.sample_strategy, config.llm_sample_k, cell.seed),
            decoding=DecodingParams(config.model, cell.temperature, config.max_tokens, config.retries),
            max_parse_retries=config.max_parse_retries,
        )
        gateway = _make_gateway(config, truth, cell.seed, run_dir / "requests.jsonl" if run_dir else None)
        ctx = context_for(dataset, descriptions=config.descriptions)
        discover = discover_pairwise if strategy == "pairwise" else discover_bfs
        try:
            found: DiscoveryResult = discover(net.names, data, gateway, opts, ctx)
        except DiscoveryError as exc:
            log.error("run %s failed: %s", cell.run_id, exc)
            found, result.error = exc.partial, str(exc)
        except GatewayError as exc:
            log.error("run %s failed: %s", cell.run_id, exc)
            found, result.error = None, str(exc)
        if found is not None:
            result.n_queries = found.n_queries
            result.parse_failures = found.parse_failures
            result.rejected_edges = list(found.rejected_edges)
            if run_dir:
                write_transcripts(found.transcripts, run_dir / "transcript.jsonl")
                result.transcript_path = str(Path("runs") / cell.run_id / "transcript.jsonl")
            if result.error is None:
                result.graph = found.graph
                result.cyclic = found.cyclic
    result.wall_clock = time.perf_counter() - start
    if result.graph is not None:
        result.metrics = score(result.graph, truth)
    if run_dir:
        if result.graph is not None:
            (run_dir / "graph.json").write_text(result.graph.to_json())
        (run_dir / "result.json").write_text(json.dumps(result.to_dict(), indent=2) + "\n")
        (run_dir / "timing.json").write_text(json.dumps({"wall_clock": result.wall_clock}) + "\n")
    return result


def run_experiment(config: ExperimentConfig, out_dir: str | Path | None = None,
                   stat_aggregate: str = "mean") -> list[RunResult]:
    """Run every (method, seed, temperature | sample size) cell of the grid.

    LLM methods get one run per temperature on a shared ``llm_sample_k``-row
    sample; PC and GES get one run per sample size. Failed LLM runs are
    recorded with ``error`` set and do not stop sibling runs.
    """
    config.validate()
    net = load_benchmark(config.dataset)
    truth = truth_graph(net)
    dataset = _dataset_name(config, net)
    out = Path(out_dir) if out_dir else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(json.dumps(config.to_dict(), indent=2) + "\n")
        (out / "truth.json").write_text(truth.to_json())

    rows = max([config.data_rows, config.llm_sample_k, *config.stat_sample_sizes])
    data = {seed: ancestral_sample(net, rows, seed) for seed in config.seeds}
    cells = []
    for method in config.methods:
        for seed in config.seeds:
            if method in STAT_METHODS:
                cells += [_Cell(method, seed, None, n) for n in config.stat_sample_sizes]
            else:
                cells += [_Cell(method, seed, float(t), config.llm_sample_k) for t in config.temperatures]

    def run(cell):
        return _run_cell(cell, config, net, truth, data[cell.seed], dataset, out)

    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            results = list(pool.map(run, cells))
    else:
        results = [run(c) for c in cells]
    if out:
        write_report(results, out, stat_aggregate)
    return results


def load_results(run_dir: str | Path) -> list[RunResult]:
    run_dir = Path(run_dir)
    results = []
    for path in sorted((run_dir / "runs").glob("*/result.json")):
        timing = path.with_name("timing.json")
        wall = json.loads(timing.read_text())["wall_clock"] if timing.exists() else 0.0
        results.append(RunResult.from_dict(json.loads(path.read_text()), wall))
    return results


def evaluate_files(pred_path: str | Path, truth_path: str | Path) -> MetricsReport:
    """Score a predicted graph file against a ground-truth graph file."""
    return score(load_graph(pred_path), load_graph(truth_path))


def evaluate_counts(pred_path: str | Path, truth_path: str | Path):
    return confusion_counts(load_graph(pred_path), load_graph(truth_path))


# reporting

def summarize(results: Sequence[RunResult], stat_aggregate: str = "mean") -> dict[tuple[str, str], MetricsReport]:
    """Averaged metrics per (method, dataset).

    LLM methods average over every run (temperatures and seeds). PC/GES average
    over sample sizes and seeds with ``"mean"``; with ``"best"`` they report the
    sample size whose seed-averaged F1 is highest.
    """
    if stat_aggregate not in ("mean", "best"):
        raise ValueError("stat_aggregate must be 'mean' or 'best'")
    groups: dict[tuple[str, str], list[RunResult]] = defaultdict(list)
    for r in results:
        if r.metrics is not None:
            groups[(r.method, r.dataset)].append(r)
    summary = {}
    for key, runs in groups.items():
        if key[0] in STAT_METHODS and stat_aggregate == "best":
            by_size: dict[int, list[MetricsReport]] = defaultdict(list)
            for r in runs:
                by_size[r.sample_size].append(r.metrics)
            per_size = [aggregate(v) for _, v in sorted(by_size.items())]
            summary[key] = max(per_size, key=lambda m: m.f1)
        else:
            summary[key] = aggregate([r.metrics for r in runs])
    return summary


def _ordered(keys) -> tuple[list[str], list[str]]:
    methods = {m for m, _ in keys}
    datasets = {d for _, d in keys}
    order = [m for m in ALL_METHODS if m in methods] + sorted(methods - set(ALL_METHODS))
    bench = [d for d in BENCHMARKS if d in datasets] + sorted(datasets - set(BENCHMARKS))
    return order, bench


def _header_note(results: Sequence[RunResult], stat_aggregate: str) -> str:
    sizes = sorted({r.sample_size for r in results if r.method in STAT_METHODS})
    how = "mean over" if stat_aggregate == "mean" else "best of"
    note = f"# statistical baselines: {how} sample sizes {sizes}" if sizes else "# no statistical baselines"
    temps = sorted({r.temperature for r in results if r.temperature is not None})
    if temps:
        note += f"; LLM methods: mean over temperatures {temps}"
    return note


def report_table(results: Sequence[RunResult], stat_aggregate: str = "mean", fmt: str = "text") -> str:
    """One row per method, F1 / NHD / Ratio column triple per dataset."""
    if not results:
        raise ValueError("no results to report")
    summary = summarize(results, stat_aggregate)
    methods, datasets = _ordered({(r.method, r.dataset) for r in results})

    def cells(method):
        out = []
        for d in datasets:
            m = summary.get((method, d))
            out += [f"{m.f1:.2f}", f"{m.nhd:.2f}", f"{m.ratio:.2f}"] if m else [MISSING] * 3
        return out

    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method"] + [f"{d}_{k}" for d in datasets for k in ("f1", "nhd", "ratio")])
        for method in methods:
            w.writerow([LABELS.get(method, method)] + ["" if c == MISSING else c for c in cells(method)])
        return buf.getvalue()
    if fmt != "text":
        raise ValueError(f"unknown format {fmt!r}")

    label_w = max(len("Method"), *(len(LABELS.get(m, m)) for m in methods))
    group_w = 20
    lines = [_header_note(results, stat_aggregate)]
    lines.append(" " * label_w + " | " + " | ".join(d.upper().center(group_w) for d in datasets))
    sub = " ".join(f"{h:>6}" for h in ("F1↑", "NHD↓", "Ratio↓"))
    lines.append("Method".ljust(label_w) + " | " + " | ".join(sub.rjust(group_w) for _ in datasets))
    lines.append("-" * len(lines[-1]))
    for method in methods:
        vals = cells(method)
        groups = [" ".join(f"{v:>6}" for v in vals[3 * k: 3 * k + 3]).rjust(group_w) for k in range(len(datasets))]
        lines.append(LABELS.get(method, method).ljust(label_w) + " | " + " | ".join(groups))
    failed = [r.run_id for r in results if r.error]
    if failed:
        lines.append(f"# {len(failed)} failed run(s) excluded: {', '.join(failed)}")
    return "\n".join(lines) + "\n"


def diagnostics(summary: dict[tuple[str, str], MetricsReport]) -> list[str]:
    """Expected method orderings, checked on this run; informational only."""
    pairs = [("bfs+observations", "bfs"), ("pairwise+observations", "pairwise"),
             ("bfs+observations", "pairwise+observations"), ("bfs+observations", "pc"),
             ("bfs+observations", "ges")]
    out = []
    datasets = sorted({d for _, d in summary})
    for d in datasets:
        for better, worse in pairs:
            a, b = summary.get((better, d)), summary.get((worse, d))
            if a and b:
                verdict = "holds" if a.f1 >= b.f1 else "does not hold"
                out.append(f"{d}: F1 {LABELS[better]} {a.f1:.2f} >= {LABELS[worse]} {b.f1:.2f} {verdict}")
    return out


def write_report(results: Sequence[RunResult], out: str | Path, stat_aggregate: str = "mean",
                 figure: bool = True) -> dict[str, Path]:
    out = Path(out)
    paths = {"text": out / "report.txt", "csv": out / "report.csv"}
    text = report_table(results, stat_aggregate, "text")
    notes = diagnostics(summarize(results, stat_aggregate))
    if notes:
        text += "\n" + "\n".join(f"# diagnostic: {n}" for n in notes) + "\n"
    paths["text"].write_text(text)
    paths["csv"].write_text(report_table(results, stat_aggregate, "csv"))
    for n in notes:
        log.info("diagnostic: %s", n)
    if figure:
        from .plotting import plot_summary

        paths["figure"] = out / "report.png"
        plot_summary(summarize(results, stat_aggregate), paths["figure"])
    return paths
