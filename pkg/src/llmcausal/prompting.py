"""Prompt text for pairwise and BFS causal queries.

Rendering is pure: the same inputs always give byte-identical text, which the
golden files under ``tests/golden`` pin down.
"""
from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

from .bayesnet import DataTable
from .sampling import CorrelationMatrix

ROLES = ("system", "user", "assistant")

LIST_ANSWER_INSTRUCTION = (
    "Provide the final answer as a comma-separated list of variable names in square brackets."
)


@dataclass(frozen=True)
class DatasetProfile:
    expert: str
    research_area: str
    descriptions: Mapping[str, str] = field(default_factory=dict)


PROFILES: dict[str, DatasetProfile] = {
    "asia": DatasetProfile(
        expert="lung disease expert",
        research_area="lung disease research",
        descriptions={
            "asia": "the patient recently visited Asia",
            "tub": "the patient has tuberculosis",
            "smoke": "the patient smokes",
            "lung": "the patient has lung cancer",
            "bronc": "the patient has bronchitis",
            "either": "the patient has tuberculosis or lung cancer",
            "xray": "the chest X-ray is abnormal",
            "dysp": "the patient has dyspnoea (shortness of breath)",
        },
    ),
    "cancer": DatasetProfile(
        expert="oncology expert",
        research_area="cancer research",
        descriptions={
            "Pollution": "exposure to air pollution (low or high)",
            "Smoker": "the patient smokes",
            "Cancer": "the patient has lung cancer",
            "Xray": "the chest X-ray result (positive or negative)",
            "Dyspnoea": "the patient has dyspnoea (shortness of breath)",
        },
    ),
    "survey": DatasetProfile(
        expert="transportation survey expert",
        research_area="public transport usage research",
        descriptions={
            "A": "age of the respondent (young, adult, old)",
            "S": "sex of the respondent (male, female)",
            "E": "education level (high school, university)",
            "O": "occupation (employee, self-employed)",
            "R": "size of the city of residence (small, big)",
            "T": "preferred means of transport (car, train, other)",
        },
    ),
}

DEFAULT_PROFILE = DatasetProfile(expert="domain expert", research_area="this domain")


class PromptError(ValueError):
    pass


@dataclass(frozen=True)
class PromptContext:
    domain_expert_role: str = DEFAULT_PROFILE.expert
    research_area: str = DEFAULT_PROFILE.research_area
    variable_descriptions: Mapping[str, str] | None = None
    known_edges: frozenset[tuple[str, str]] = frozenset()
    data_block: str | None = None
    correlation_block: str | None = None

    def __post_init__(self):
        if self.data_block is not None and self.correlation_block is not None:
            raise PromptError("a prompt carries either observations or correlations, not both")
        object.__setattr__(self, "known_edges", frozenset(tuple(e) for e in self.known_edges))


def context_for(dataset: str, descriptions: bool = True,
                known_edges: Sequence[tuple[str, str]] = ()) -> PromptContext:
    profile = PROFILES.get(str(dataset).lower(), DEFAULT_PROFILE)
    return PromptContext(
        domain_expert_role=profile.expert,
        research_area=profile.research_area,
        variable_descriptions=dict(profile.descriptions) if descriptions and profile.descriptions else None,
        known_edges=frozenset(known_edges),
    )


@dataclass(frozen=True)
class Turn:
    role: str
    text: str


@dataclass(frozen=True)
class Transcript:
    """Chat history: an optional leading system turn, then alternating user/assistant."""

    turns: tuple[Turn, ...] = ()

    def append(self, role: str, text: str) -> Transcript:
        if role not in ROLES:
            raise PromptError(f"unknown role {role!r}")
        body = [t.role for t in self.turns if t.role != "system"]
        if role == "system":
            if self.turns:
                raise PromptError("a system turn may only open the transcript")
        else:
            expected = "assistant" if body and body[-1] == "user" else "user"
            if role != expected:
                raise PromptError(f"expected a {expected} turn next, got {role}")
        return Transcript(self.turns + (Turn(role, text),))

    def __len__(self) -> int:
        return len(self.turns)

    @property
    def last(self) -> Turn:
        return self.turns[-1]

    def to_messages(self) -> list[dict[str, str]]:
        return [{"role": t.role, "content": t.text} for t in self.turns]

    @classmethod
    def from_messages(cls, messages: Sequence[Mapping[str, str]]) -> Transcript:
        tr = cls()
        for m in messages:
            tr = tr.append(m["role"], m["content"])
        return tr

    @classmethod
    def of_user(cls, text: str) -> Transcript:
        return cls().append("user", text)


def _article(noun: str) -> str:
    return "an" if noun[:1].lower() in "aeiou" else "a"


def render_observation_block(table: DataTable, columns: Sequence[str], max_rows: int,
                             labels: bool = False) -> str:
    """Header of column names, then one line of space-separated states per row."""
    if not columns:
        raise PromptError("at least one column is required")
    idx = [table.col(c) for c in columns]
    lines = [" ".join(columns)]
    body = table.values[: max(0, max_rows), idx]
    if labels:
        if table.state_labels is None:
            raise PromptError("table has no state labels")
        lines += [" ".join(table.state_labels[j][s] for j, s in zip(idx, row)) for row in body]
    else:
        lines += [" ".join(str(int(s)) for s in row) for row in body]
    return "\n".join(lines)


def _fmt_corr(value: float | None) -> str:
    if value is None:
        return "undefined"
    text = f"{value:.2f}"
    return "0.00" if text == "-0.00" else text


def render_correlation_block(corr: CorrelationMatrix, pairs: Sequence[tuple[str, str]]) -> str:
    return "\n".join(f"corr({a}, {b}) = {_fmt_corr(corr.get(a, b))}" for a, b in pairs)


def _descriptions(ctx: PromptContext, names: Sequence[str]) -> str | None:
    if not ctx.variable_descriptions:
        return None
    lines = [f"- {n}: {ctx.variable_descriptions[n]}" for n in names if n in ctx.variable_descriptions]
    return "Variable descriptions:\n" + "\n".join(lines) if lines else None


def _known(ctx: PromptContext) -> str | None:
    if not ctx.known_edges:
        return None
    return "Known causal relationships:\n" + "\n".join(f"- {a} causes {b}" for a, b in sorted(ctx.known_edges))


def render_pairwise(v_i: str, v_j: str, ctx: PromptContext) -> str:
    """Three-option question about the pair; option A is always "v_i causes v_j"."""
    if v_i == v_j:
        raise PromptError("a pairwise prompt needs two distinct variables")
    parts = [
        f"You are a helpful assistant to {_article(ctx.domain_expert_role)} {ctx.domain_expert_role}. "
        f"Choose the correct statement regarding the causal relationship between {v_i} and {v_j}."
    ]
    parts += filter(None, [_descriptions(ctx, [v_i, v_j]), _known(ctx)])
    if ctx.data_block is not None:
        parts.append("As an additional information, here is a sample of observational data "
                     f"between the pair:\n{ctx.data_block}")
    if ctx.correlation_block is not None:
        parts.append("As an additional information, here is the Pearson correlation between the pair, "
                     f"computed from observational data:\n{ctx.correlation_block}")
    parts.append(
        "Options:\n"
        f"A. {v_i} causes {v_j}.\n"
        f"B. {v_j} causes {v_i}.\n"
        f"C. There is no causal relationship between {v_i} and {v_j}.\n"
        "Answer:"
    )
    return "\n\n".join(parts)


def render_bfs_init(variables: Sequence[str], ctx: PromptContext) -> str:
    if len(variables) < 2:
        raise PromptError("BFS prompting needs at least two variables")
    if len(set(variables)) != len(variables):
        raise PromptError(f"duplicate variable names in {list(variables)}")
    parts = [
        f"You are a helpful assistant to experts in {ctx.research_area}. Our goal is to construct "
        f"a causal graph between the following variables: {{{', '.join(variables)}}}."
    ]
    parts += filter(None, [_descriptions(ctx, variables), _known(ctx)])
    parts.append("You will start with identifying the variable(s) that are unaffected by any other "
                 f"variables. {LIST_ANSWER_INSTRUCTION}")
    return "\n\n".join(parts)


def render_bfs_expand(current: str, candidates: Sequence[str], transcript: Transcript,
                      ctx: PromptContext, roots: Sequence[str] | None = None) -> Transcript:
    """Append a user turn asking which candidates are caused by ``current``.

    ``roots`` restates the initialization answer; the first expansion passes it.
    """
    if not candidates:
        raise PromptError(f"no candidate variables to ask about for {current!r}")
    if current in candidates:
        raise PromptError(f"{current!r} cannot be its own candidate")
    ask = f"Select variables that are caused by {current}. Candidates: [{', '.join(candidates)}]."
    if roots:
        ask = f"Given {', '.join(roots)} is(are) not affected by any other variables. " + ask
    parts = [ask]
    if ctx.data_block is not None:
        parts.append(f"Additionally, a sample of observational data for {current} and other variables "
                     f"are as follows:\n{ctx.data_block}")
    if ctx.correlation_block is not None:
        parts.append(f"Additionally, the Pearson correlations between {current} and other variables, "
                     f"computed from observational data, are as follows:\n{ctx.correlation_block}")
    parts.append(f"{LIST_ANSWER_INSTRUCTION} Answer [] if none of them.")
    return transcript.append("user", "\n\n".join(parts))
