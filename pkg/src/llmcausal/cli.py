"""Command-line entry point: ``llmcausal {generate,discover,experiment,evaluate,report}``.

Without ``--live`` every LLM call goes to the deterministic mock oracle, so
nothing leaves the machine.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .baselines import chisq_citest, cpdag_eval_matrix, run_ges, run_pc
from .bayesnet import BifError, DataTable, ancestral_sample, load_benchmark, truth_graph
from .discovery import DiscoveryError, DiscoveryOptions, discover_bfs, discover_pairwise
from .experiment import (ALL_METHODS, ConfigError, ExperimentConfig, RunResult,
                         _make_gateway, evaluate_counts, evaluate_files, load_results,
                         run_experiment, split_method, write_report, write_transcripts)
from .gateway import DEFAULT_MODEL, DecodingParams, GatewayError
from .graph import GraphError, save_graph
from .metrics import score
from .prompting import context_for
from .sampling import STRATEGIES, SampleSpec

log = logging.getLogger("llmcausal")


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _strs(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _add_llm_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("LLM")
    g.add_argument("--live", action="store_true", default=None,
                   help="call a real OpenAI-compatible endpoint (LLMCAUSAL_BASE_URL / LLMCAUSAL_API_KEY)")
    g.add_argument("--model", help=f"model id (default {DEFAULT_MODEL})")
    g.add_argument("--base-url", help="endpoint base URL for --live")
    g.add_argument("--max-tokens", type=int)
    g.add_argument("--retries", type=int, help="extra attempts after a transport failure")
    g.add_argument("--max-parse-retries", type=int)
    g.add_argument("--noise-rate", type=float, help="mock oracle: probability of a wrong answer")
    g.add_argument("--oracle-seed", type=int, help="mock oracle seed")
    g.add_argument("--no-descriptions", action="store_true", help="omit variable descriptions from prompts")
    g.add_argument("--workers", type=int, help="concurrent runs / queries")


def _config_from_args(args, base: ExperimentConfig) -> ExperimentConfig:
    mock = dict(base.mock_oracle or {"noise_rate": 0.0, "seed": 0})
    if args.noise_rate is not None:
        mock["noise_rate"] = args.noise_rate
    if args.oracle_seed is not None:
        mock["seed"] = args.oracle_seed
    overrides = dict(
        dataset=getattr(args, "dataset", None),
        model=args.model, base_url=args.base_url, max_tokens=args.max_tokens, retries=args.retries,
        max_parse_retries=args.max_parse_retries, live=args.live, workers=args.workers,
        mock_oracle=mock, descriptions=False if args.no_descriptions else None,
    )
    for name in ("methods", "temperatures", "seeds", "stat_sample_sizes", "llm_sample_k",
                 "sample_strategy", "data_rows", "alpha", "ges_score"):
        overrides[name] = getattr(args, name, None)
    return base.with_overrides(**overrides)


def cmd_generate(args) -> int:
    net = load_benchmark(args.dataset)
    table = ancestral_sample(net, args.rows, args.seed)
    if args.output:
        table.save(args.output)
        print(f"wrote {table.n_rows} rows x {len(table.columns)} columns to {args.output}")
    else:
        sys.stdout.write(table.to_csv())
    return 0


def cmd_discover(args) -> int:
    net = load_benchmark(args.dataset)
    truth = truth_graph(net)
    config = _config_from_args(args, ExperimentConfig(dataset=args.dataset))
    config.validate()
    strategy, mode = split_method(args.method)
    data = DataTable.load(args.data) if args.data else ancestral_sample(net, config.data_rows, args.seed)
    out = Path(args.out) if args.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    if strategy == "pc":
        graph = cpdag_eval_matrix(run_pc(chisq_citest(data), net.names, config.alpha))
        found = None
    elif strategy == "ges":
        graph = cpdag_eval_matrix(run_ges(data, config.ges_score))
        found = None
    else:
        opts = DiscoveryOptions(
            data_mode=mode, sample_spec=SampleSpec(config.sample_strategy, config.llm_sample_k, args.seed),
            decoding=DecodingParams(config.model, args.temperature, config.max_tokens, config.retries),
            max_parse_retries=config.max_parse_retries, workers=config.workers,
        )
        gateway = _make_gateway(config, truth, args.seed, out / "requests.jsonl" if out else None)
        discover = discover_pairwise if strategy == "pairwise" else discover_bfs
        found = discover(net.names, data, gateway, opts, context_for(net.name, config.descriptions))
        graph = found.graph
    if out:
        save_graph(graph, out / "graph.json")
        if found is not None:
            write_transcripts(found.transcripts, out / "transcript.jsonl")
    print(graph.to_edge_list(), end="")
    m = score(graph, truth)
    print(f"# vs truth: F1 {m.f1:.3f}  NHD {m.nhd:.4f}  Ratio {m.ratio:.3f}")
    if found is not None:
        print(f"# queries {found.n_queries}  parse failures {found.parse_failures}  "
              f"rejected edges {len(found.rejected_edges)}")
    return 0


def cmd_experiment(args) -> int:
    base = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    config = _config_from_args(args, base)
    results: list[RunResult] = run_experiment(config, args.out, args.stat_aggregate)
    failed = [r for r in results if r.error]
    print((Path(args.out) / "report.txt").read_text(), end="")
    print(f"# {len(results)} runs, {len(failed)} failed; results in {args.out}")
    return 1 if failed else 0


def cmd_evaluate(args) -> int:
    m = evaluate_files(args.pred, args.truth)
    c = evaluate_counts(args.pred, args.truth)
    if args.json:
        print(json.dumps({**m.to_dict(), "tp": c.tp, "fp": c.fp, "fn": c.fn}, indent=2))
    else:
        print(f"tp={c.tp} fp={c.fp} fn={c.fn}")
        print(f"precision={m.precision:.4f} recall={m.recall:.4f} f1={m.f1:.4f} "
              f"nhd={m.nhd:.4f} baseline_nhd={m.baseline_nhd:.4f} ratio={m.ratio:.4f}")
    return 0


def cmd_report(args) -> int:
    results = [r for d in args.run_dirs for r in load_results(d)]
    if not results:
        raise ConfigError(f"no runs found under {', '.join(args.run_dirs)}")
    out = Path(args.out or args.run_dirs[0])
    out.mkdir(parents=True, exist_ok=True)
    paths = write_report(results, out, args.stat_aggregate, figure=not args.no_figure)
    print(paths["text"].read_text(), end="")
    print("# wrote " + ", ".join(str(p) for p in paths.values()))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="llmcausal", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample observational data from a benchmark network")
    p.add_argument("--dataset", default="asia", help="benchmark name or BIF path")
    p.add_argument("-n", "--rows", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", help="CSV path (a .json sidecar is written next to it)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("discover", help="run one discovery method once")
    p.add_argument("--dataset", default="asia", help="benchmark name or BIF path")
    p.add_argument("--method", default="bfs", choices=ALL_METHODS)
    p.add_argument("--data", help="CSV of observations; sampled from the network if omitted")
    p.add_argument("--data-rows", dest="data_rows", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--temperature", type=float, default=0.0)
    p.add_argument("--k", dest="llm_sample_k", type=int, help="rows shown to the LLM")
    p.add_argument("--sample-strategy", choices=STRATEGIES)
    p.add_argument("--alpha", type=float)
    p.add_argument("--ges-score", choices=("bic", "bdeu"))
    p.add_argument("--out", help="directory for graph.json and transcripts")
    _add_llm_flags(p)
    p.set_defaults(func=cmd_discover)

    p = sub.add_parser("experiment", help="run a configured grid and write a report")
    p.add_argument("--config", help="JSON ExperimentConfig; flags below override it")
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--dataset")
    p.add_argument("--methods", type=_strs, help=f"comma list from {','.join(ALL_METHODS)}")
    p.add_argument("--temperatures", type=_floats)
    p.add_argument("--seeds", type=_ints)
    p.add_argument("--stat-sample-sizes", dest="stat_sample_sizes", type=_ints)
    p.add_argument("--k", dest="llm_sample_k", type=int)
    p.add_argument("--sample-strategy", choices=STRATEGIES)
    p.add_argument("--data-rows", dest="data_rows", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--ges-score", choices=("bic", "bdeu"))
    p.add_argument("--stat-aggregate", choices=("mean", "best"), default="mean")
    _add_llm_flags(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("evaluate", help="score a predicted graph file against a truth graph file")
    p.add_argument("pred")
    p.add_argument("truth")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="aggregate run directories into report.txt/csv/png")
    p.add_argument("run_dirs", nargs="+")
    p.add_argument("--out", help="output directory (default: first run directory)")
    p.add_argument("--stat-aggregate", choices=("mean", "best"), default="mean")
    p.add_argument("--no-figure", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, BifError, GraphError, DiscoveryError, GatewayError,
            FileNotFoundError, ValueError) as exc:
        print(f"llmcausal: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
