"""LLM-driven graph construction: pairwise prompting and BFS prompting."""
from __future__ import annotations

import logging
from collections import deque
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Literal

from .bayesnet import DataTable
from .gateway import (
    AnswerParseError,
    ContextOverflowError,
    DecodingParams,
    GatewayError,
    LLMGateway,
    PairwiseChoice,
    parse_pairwise_choice,
    parse_variable_list,
)
from .graph import CausalGraph
from .prompting import (
    PromptContext,
    Transcript,
    render_bfs_expand,
    render_bfs_init,
    render_correlation_block,
    render_observation_block,
    render_pairwise,
)
from .sampling import SampleSpec, pearson_matrix, sample_rows

log = logging.getLogger(__name__)

DataMode = Literal["none", "observations", "pearson"]
DATA_MODES: tuple[str, ...] = ("none", "observations", "pearson")


@dataclass(frozen=True)
class DiscoveryOptions:
    data_mode: DataMode = "none"
    sample_spec: SampleSpec = field(default_factory=SampleSpec)
    decoding: DecodingParams = field(default_factory=DecodingParams)
    max_parse_retries: int = 2
    # BFS transcripts grow with every turn; refuse rather than truncate
    max_context_chars: int | None = 400_000
    label_states: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.data_mode not in DATA_MODES:
            raise ValueError(f"unknown data mode {self.data_mode!r}; choose from {DATA_MODES}")


@dataclass
class DiscoveryResult:
    graph: CausalGraph
    method: str
    n_queries: int = 0
    transcripts: list[Transcript] = field(default_factory=list)
    parse_failures: int = 0
    defaulted_answers: int = 0
    rejected_edges: list[tuple[str, str]] = field(default_factory=list)
    sample: DataTable | None = None

    @property
    def cyclic(self) -> bool:
        return not self.graph.is_acyclic()


class DiscoveryError(GatewayError):
    """A run aborted by the gateway; ``partial`` holds what was collected so far."""

    def __init__(self, message: str, partial: DiscoveryResult):
        super().__init__(message)
        self.partial = partial


def draw_sample(data: DataTable | None, opts: DiscoveryOptions) -> DataTable | None:
    """The single prompt-sized sample shared by every query of one run."""
    if opts.data_mode == "none":
        return None
    if data is None:
        raise ValueError(f"data_mode={opts.data_mode!r} needs observational data")
    if opts.sample_spec.k > data.n_rows:
        raise ValueError(f"sample size k={opts.sample_spec.k} exceeds the {data.n_rows} available rows")
    return sample_rows(data, opts.sample_spec)


class _Asker:
    def __init__(self, gateway: LLMGateway, opts: DiscoveryOptions, result: DiscoveryResult):
        self.gateway = gateway
        self.opts = opts
        self.result = result

    def ask(self, transcript: Transcript, parse):
        """Query, re-asking on unparseable answers. Returns (reply, parsed or None)."""
        reply = ""
        for attempt in range(self.opts.max_parse_retries + 1):
            self.result.n_queries += 1
            reply = self.gateway.complete(transcript, self.opts.decoding)
            try:
                return reply, parse(reply)
            except AnswerParseError as exc:
                self.result.parse_failures += 1
                log.warning("unparseable answer (attempt %d): %s", attempt + 1, exc)
        self.result.defaulted_answers += 1
        return reply, None


def _answer_order(reply: str, names: set[str]) -> list[str]:
    """``names`` in the order they appear in the reply's last bracketed list."""
    tokens = [t.strip().strip("'\"`*").strip().lower()
              for t in reply[reply.rfind("["):].strip("[] \n").split(",")]
    return sorted(names, key=lambda n: tokens.index(n.lower()) if n.lower() in tokens else len(tokens))


def _check_variables(variables: Sequence[str], data: DataTable | None) -> None:
    if len(variables) < 2:
        raise ValueError("causal discovery needs at least two variables")
    if len(set(variables)) != len(variables):
        raise ValueError(f"duplicate variable names in {list(variables)}")
    if data is not None:
        missing = [v for v in variables if v not in data.columns]
        if missing:
            raise ValueError(f"variables {missing} are not columns of the data")


def discover_pairwise(variables: Sequence[str], data: DataTable | None, gateway: LLMGateway,
                      opts: DiscoveryOptions, ctx: PromptContext | None = None) -> DiscoveryResult:
    """One three-option query per unordered pair, earlier-declared variable first.

    Edges are added without a cycle check, so the result may be cyclic.
    """
    variables = list(variables)
    _check_variables(variables, data)
    ctx = ctx or PromptContext()
    sample = draw_sample(data, opts)
    corr = pearson_matrix(sample) if opts.data_mode == "pearson" else None
    graph = CausalGraph(variables)
    result = DiscoveryResult(graph, "pairwise", sample=sample)
    pairs = [(i, j) for i in range(len(variables)) for j in range(i + 1, len(variables))]

    def query(pair):
        i, j = pair
        a, b = variables[i], variables[j]
        q_ctx = ctx
        if opts.data_mode == "observations":
            q_ctx = replace(ctx, data_block=render_observation_block(
                sample, [a, b], sample.n_rows, labels=opts.label_states))
        elif opts.data_mode == "pearson":
            q_ctx = replace(ctx, correlation_block=render_correlation_block(corr, [(a, b)]))
        transcript = Transcript.of_user(render_pairwise(a, b, q_ctx))
        sub = DiscoveryResult(graph, "pairwise")
        try:
            reply, choice = _Asker(gateway, opts, sub).ask(
                transcript, lambda text: parse_pairwise_choice(text, a, b))
        except GatewayError as exc:
            return pair, exc, sub, transcript, None
        return pair, None, sub, transcript.append("assistant", reply), choice

    if opts.workers > 1:
        with ThreadPoolExecutor(opts.workers) as pool:
            outcomes = list(pool.map(query, pairs))
    else:
        outcomes = []
        for pair in pairs:
            outcomes.append(query(pair))
            if outcomes[-1][1] is not None:
                break

    for (i, j), error, sub, transcript, choice in outcomes:
        result.n_queries += sub.n_queries
        result.parse_failures += sub.parse_failures
        result.defaulted_answers += sub.defaulted_answers
        result.transcripts.append(transcript)
        if error is not None:
            raise DiscoveryError(f"pairwise query ({variables[i]}, {variables[j]}) failed: {error}",
                                 result) from error
        if choice is PairwiseChoice.FORWARD:
            graph.add_edge(i, j)
        elif choice is PairwiseChoice.REVERSE:
            graph.add_edge(j, i)
    return result


def discover_bfs(variables: Sequence[str], data: DataTable | None, gateway: LLMGateway,
                 opts: DiscoveryOptions, ctx: PromptContext | None = None) -> DiscoveryResult:
    """Roots first, then one expansion query per node in BFS order.

    Proposed edges that would close a cycle are dropped and recorded in
    ``rejected_edges``. Variables the traversal never reaches are expanded
    afterwards, lowest declaration index first.
    """
    variables = list(variables)
    _check_variables(variables, data)
    ctx = ctx or PromptContext()
    sample = draw_sample(data, opts)
    corr = pearson_matrix(sample) if opts.data_mode == "pearson" else None
    graph = CausalGraph(variables)
    result = DiscoveryResult(graph, "bfs", sample=sample)
    asker = _Asker(gateway, opts, result)
    order = {v: i for i, v in enumerate(variables)}

    def send(transcript: Transcript):
        if opts.max_context_chars is not None:
            size = sum(len(t.text) for t in transcript.turns)
            if size > opts.max_context_chars:
                result.transcripts = [transcript]
                raise DiscoveryError(
                    f"BFS transcript reached {size} characters (limit {opts.max_context_chars})",
                    result) from ContextOverflowError(size)
        try:
            reply, parsed = asker.ask(transcript, lambda text: parse_variable_list(text, variables))
        except GatewayError as exc:
            result.transcripts = [transcript]
            raise DiscoveryError(f"BFS query failed: {exc}", result) from exc
        return transcript.append("assistant", reply), _answer_order(reply, parsed or set())

    init_ctx = replace(ctx, data_block=None, correlation_block=None)
    transcript, found = send(Transcript.of_user(render_bfs_init(variables, init_ctx)))
    roots = found
    if not roots:
        log.warning("no roots identified; starting from %r", variables[0])
    queue = deque(roots or [variables[0]])
    seen = set(queue)
    expanded: set[str] = set()
    first = True

    while True:
        if not queue:
            rest = [v for v in variables if v not in expanded]
            if not rest:
                break
            log.info("BFS queue exhausted; expanding unreached %r", rest[0])
            queue.append(rest[0])
            seen.add(rest[0])
        u = queue.popleft()
        expanded.add(u)
        candidates = [v for v in variables if v != u]
        q_ctx = init_ctx
        if opts.data_mode == "observations":
            q_ctx = replace(ctx, data_block=render_observation_block(
                sample, [u, *candidates], sample.n_rows, labels=opts.label_states))
        elif opts.data_mode == "pearson":
            q_ctx = replace(ctx, correlation_block=render_correlation_block(corr, [(u, v) for v in candidates]))
        transcript = render_bfs_expand(u, candidates, transcript, q_ctx, roots=roots if first else None)
        first = False
        transcript, children = send(transcript)
        ui = order[u]
        for v in children:
            if v == u:
                continue
            if not graph.has_edge(ui, order[v]) and not graph.insert_edge_checked(ui, order[v]):
                log.info("rejected %s -> %s: would create a cycle", u, v)
                result.rejected_edges.append((u, v))
                continue
            if v not in seen:
                seen.add(v)
                queue.append(v)
    result.transcripts = [transcript]
    return result
