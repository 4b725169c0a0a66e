"""Chat-completion access: HTTP, scripted, replay and ground-truth oracle transports.

Every request is written to the JSONL run log before it is sent, and every
reply or failure after. :class:`ReplayTransport` rebuilds answers from such a
log so recorded runs can be re-scored without network access.
"""
from __future__ import annotations

import enum
import hashlib
import itertools
import json
import logging
import os
import random
import re
import threading
import time
from collections import defaultdict, deque
from collections.abc import Callable, Iterable, Sequence
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Protocol

import httpx

from .graph import CausalGraph
from .prompting import Transcript

log = logging.getLogger(__name__)

DEFAULT_MODEL = "gpt-4-0125-preview"
BASE_URL_ENV = ("LLMCAUSAL_BASE_URL", "OPENAI_BASE_URL")
API_KEY_ENV = ("LLMCAUSAL_API_KEY", "OPENAI_API_KEY")


class GatewayError(RuntimeError):
    pass


class TransportError(GatewayError):
    def __init__(self, message: str, attempts: int = 1):
        super().__init__(message)
        self.attempts = attempts


class RateLimitError(TransportError):
    def __init__(self, message: str, retry_after: float | None = None):
        super().__init__(message)
        self.retry_after = retry_after


class AuthenticationError(GatewayError):
    pass


class ContextOverflowError(GatewayError):
    pass


class UnrecognizedPromptError(GatewayError):
    pass


class AnswerParseError(ValueError):
    pass


@dataclass(frozen=True)
class DecodingParams:
    model_id: str = DEFAULT_MODEL
    temperature: float = 0.0
    max_tokens: int = 512
    # extra attempts after the first one
    retries: int = 3

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        if self.retries < 0:
            raise ValueError("retries must be non-negative")


class PairwiseChoice(enum.Enum):
    FORWARD = "forward"
    REVERSE = "reverse"
    NO_RELATION = "none"


@dataclass(frozen=True)
class Completion:
    text: str
    usage: dict | None = None


class Transport(Protocol):
    def send(self, messages: list[dict[str, str]], params: DecodingParams) -> str | Completion: ...


def _env(names: Sequence[str]) -> str | None:
    for name in names:
        if os.environ.get(name):
            return os.environ[name]
    return None


class HttpTransport:
    """OpenAI-compatible ``/chat/completions`` endpoint."""

    def __init__(self, base_url: str | None = None, api_key: str | None = None,
                 timeout: float = 120.0, client: httpx.Client | None = None):
        self.base_url = (base_url or _env(BASE_URL_ENV) or "https://api.openai.com/v1").rstrip("/")
        self.api_key = api_key or _env(API_KEY_ENV)
        self.client = client or httpx.Client(timeout=timeout)

    def send(self, messages, params):
        if not self.api_key:
            raise AuthenticationError(f"no API key; set one of {', '.join(API_KEY_ENV)}")
        payload = {
            "model": params.model_id,
            "messages": messages,
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        }
        try:
            resp = self.client.post(f"{self.base_url}/chat/completions", json=payload,
                                    headers={"Authorization": f"Bearer {self.api_key}"})
        except httpx.HTTPError as exc:
            raise TransportError(f"{type(exc).__name__}: {exc}") from exc
        if resp.status_code in (401, 403):
            raise AuthenticationError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        if resp.status_code == 429:
            after = resp.headers.get("retry-after")
            raise RateLimitError(f"HTTP 429: {resp.text[:200]}",
                                 float(after) if after and after.replace(".", "", 1).isdigit() else None)
        if resp.status_code == 400 and "context_length" in resp.text:
            raise ContextOverflowError(resp.text[:300])
        if resp.status_code >= 500:
            raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        if resp.status_code >= 400:
            raise GatewayError(f"HTTP {resp.status_code}: {resp.text[:300]}")
        try:
            body = resp.json()
            text = body["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed completion response: {exc}") from exc
        return Completion(text or "", body.get("usage"))


class ScriptedTransport:
    """Serves canned replies (or raises canned exceptions) in order."""

    def __init__(self, replies: Iterable[str | Exception]):
        self._replies = deque(replies)
        self.calls: list[list[dict[str, str]]] = []
        self._lock = threading.Lock()

    def send(self, messages, params):
        with self._lock:
            self.calls.append(messages)
            if not self._replies:
                raise GatewayError("scripted transport ran out of replies")
            reply = self._replies.popleft()
        if isinstance(reply, Exception):
            raise reply
        return reply


class CallableTransport:
    """Adapts ``fn(transcript, params) -> str``; handy for instrumented mocks."""

    def __init__(self, fn: Callable[[Transcript, DecodingParams], str]):
        self.fn = fn
        self.calls = 0

    def send(self, messages, params):
        self.calls += 1
        return self.fn(Transcript.from_messages(messages), params)


def _request_key(messages: list[dict[str, str]]) -> str:
    return json.dumps(messages, sort_keys=True, ensure_ascii=False)


class ReplayTransport:
    """Re-serves answers recorded in a gateway run log, matched by message content."""

    def __init__(self, records: Iterable[dict]):
        requests: dict[int, str] = {}
        self._answers: dict[str, deque[str]] = defaultdict(deque)
        for rec in records:
            if rec["event"] == "request":
                requests[rec["request_id"]] = _request_key(rec["messages"])
            elif rec["event"] == "response":
                self._answers[requests[rec["request_id"]]].append(rec["text"])

    @classmethod
    def from_log(cls, path: str | Path) -> ReplayTransport:
        with open(path) as fh:
            return cls(json.loads(line) for line in fh if line.strip())

    def send(self, messages, params):
        queue = self._answers.get(_request_key(messages))
        if not queue:
            raise GatewayError("no recorded answer for this request")
        return queue.popleft()


class OracleTransport:
    """Answers from a ground-truth graph via :func:`oracle_complete`.

    The temperature is folded into the seed so repeated runs at different
    temperatures draw different noise.
    """

    def __init__(self, truth: CausalGraph, noise_rate: float = 0.0, seed: int = 0):
        if not 0.0 <= noise_rate <= 1.0:
            raise ValueError("noise_rate must lie in [0, 1]")
        self.truth = truth
        self.noise_rate = noise_rate
        self.seed = seed

    def send(self, messages, params):
        seed = _stable_int(f"{self.seed}|{params.temperature!r}")
        return oracle_complete(Transcript.from_messages(messages), self.truth, self.noise_rate, seed)


class LLMGateway:
    """Retries, backoff, concurrency cap and JSONL logging around a transport."""

    def __init__(self, transport: Transport, log_path: str | Path | None = None,
                 sleep: Callable[[float], None] = time.sleep, backoff_base: float = 1.0,
                 backoff_max: float = 60.0, max_in_flight: int = 4):
        self.transport = transport
        self.log_path = Path(log_path) if log_path else None
        self.records: list[dict] = []
        self.sleep = sleep
        self.backoff_base = backoff_base
        self.backoff_max = backoff_max
        self._ids = itertools.count(1)
        self._lock = threading.Lock()
        self._slots = threading.BoundedSemaphore(max_in_flight)

    def _log(self, record: dict) -> None:
        record = {"ts": time.time(), **record}
        with self._lock:
            self.records.append(record)
            if self.log_path:
                with self.log_path.open("a") as fh:
                    fh.write(json.dumps(record, ensure_ascii=False) + "\n")

    def complete(self, transcript: Transcript, params: DecodingParams) -> str:
        if not len(transcript) or transcript.last.role != "user":
            raise GatewayError("transcript must end with a user turn")
        messages = transcript.to_messages()
        with self._lock:
            request_id = next(self._ids)
        attempts = params.retries + 1
        delay = self.backoff_base
        last_error: Exception | None = None
        for attempt in range(1, attempts + 1):
            self._log({"event": "request", "request_id": request_id, "attempt": attempt,
                       **{k: v for k, v in asdict(params).items() if k != "retries"},
                       "messages": messages})
            try:
                with self._slots:
                    reply = self.transport.send(messages, params)
            except (AuthenticationError, ContextOverflowError) as exc:
                self._log({"event": "error", "request_id": request_id, "attempt": attempt,
                           "kind": type(exc).__name__, "error": str(exc)})
                raise
            except TransportError as exc:
                last_error = exc
                self._log({"event": "error", "request_id": request_id, "attempt": attempt,
                           "kind": type(exc).__name__, "error": str(exc)})
                if attempt < attempts:
                    wait = delay
                    if isinstance(exc, RateLimitError) and exc.retry_after is not None:
                        wait = max(wait, exc.retry_after)
                    log.warning("request %d attempt %d failed (%s); retrying in %.1fs",
                                request_id, attempt, exc, wait)
                    self.sleep(min(wait, self.backoff_max))
                    delay *= 2
                continue
            completion = reply if isinstance(reply, Completion) else Completion(str(reply))
            self._log({"event": "response", "request_id": request_id, "attempt": attempt,
                       "text": completion.text, "usage": completion.usage})
            return completion.text
        raise TransportError(f"request {request_id} failed after {attempts} attempts: {last_error}",
                             attempts=attempts)


# deterministic ground-truth oracle

_PAIRWISE = re.compile(r"^A\. (.+) causes (.+)\.$", re.MULTILINE)
_INIT = re.compile(r"following variables: \{(.*)\}\.")
_EXPAND = re.compile(r"Select variables that are caused by (.+?)\. Candidates: \[(.*?)\]\.")


def _stable_int(text: str) -> int:
    return int(hashlib.sha256(text.encode()).hexdigest()[:16], 16)


def _split_names(s: str) -> list[str]:
    return [x.strip() for x in s.split(",") if x.strip()]


def _random_other_subset(rng: random.Random, items: Sequence[str], avoid: set[str]) -> list[str]:
    while True:
        pick = [x for x in items if rng.random() < 0.5]
        if set(pick) != avoid:
            return pick


def _descendant_count(truth: CausalGraph, i: int) -> int:
    seen, stack = set(), [i]
    while stack:
        for c in truth.children(stack.pop()):
            if c not in seen:
                seen.add(c)
                stack.append(c)
    return len(seen)


def _lookup(truth: CausalGraph, name: str) -> int:
    if name not in truth.variables:
        raise UnrecognizedPromptError(f"prompt mentions {name!r}, which the truth graph lacks")
    return truth.index(name)


def oracle_complete(transcript: Transcript, truth: CausalGraph, noise_rate: float, seed: int) -> str:
    """Answer the final user turn as a perfect expert would, up to injected noise.

    With probability ``noise_rate`` (drawn from a generator seeded by ``seed``
    and the prompt text) the answer is replaced by a uniformly random wrong one.
    Roots are listed most-descendants first.
    """
    if not len(transcript) or transcript.last.role != "user":
        raise UnrecognizedPromptError("the transcript does not end with a user turn")
    text = transcript.last.text
    rng = random.Random(_stable_int(f"{seed}\x00{text}"))
    noisy = rng.random() < noise_rate

    if m := _EXPAND.search(text):
        current = _lookup(truth, m.group(1))
        candidates = _split_names(m.group(2))
        idx = [_lookup(truth, c) for c in candidates]
        answer = [c for c, i in zip(candidates, idx) if truth.has_edge(current, i)]
        if noisy:
            answer = _random_other_subset(rng, candidates, set(answer))
        return "[" + ", ".join(answer) + "]"

    if "unaffected by any other variables" in text and (m := _INIT.search(text)):
        names = _split_names(m.group(1))
        idx = [_lookup(truth, n) for n in names]
        has_parent = {b for _, b in truth.edges}
        found = [i for i in idx if i not in has_parent]
        found.sort(key=lambda i: (-_descendant_count(truth, i), idx.index(i)))
        answer = [truth.variables[i] for i in found]
        if noisy:
            answer = _random_other_subset(rng, names, set(answer))
        return "[" + ", ".join(answer) + "]"

    if "Choose the correct statement" in text and (m := _PAIRWISE.search(text)):
        a, b = _lookup(truth, m.group(1)), _lookup(truth, m.group(2))
        correct = "A" if truth.has_edge(a, b) else "B" if truth.has_edge(b, a) else "C"
        if noisy:
            return rng.choice([x for x in "ABC" if x != correct])
        return correct

    raise UnrecognizedPromptError("final user turn is not a pairwise, BFS-init or BFS-expand prompt")


# answer parsing

_LEADING_LETTER = re.compile(r"^\W*(?:(?:option|answer)\s*[:=]?\s*)?\(?([abc])\s*(?:[.):\]]|$)", re.IGNORECASE)
_KEYWORD_LETTER = re.compile(r"\b(?:option|answer)\s*(?:is\s*)?[:=]?\s*\(?([abc])\b", re.IGNORECASE)

_LETTERS = {"a": PairwiseChoice.FORWARD, "b": PairwiseChoice.REVERSE, "c": PairwiseChoice.NO_RELATION}


def parse_pairwise_choice(text: str, v_i: str, v_j: str) -> PairwiseChoice:
    """Map a free-text answer onto the three options.

    An option letter wins when it leads the answer or follows "Option"/"Answer";
    otherwise the option sentences are searched for. Bare capitals elsewhere
    are ignored because variables may be named A, B or C.
    """
    stripped = text.strip()
    for pattern in (_LEADING_LETTER, _KEYWORD_LETTER):
        if m := pattern.search(stripped):
            return _LETTERS[m.group(1).lower()]
    low = " ".join(stripped.lower().split())
    if f"{v_i} causes {v_j}".lower() in low:
        return PairwiseChoice.FORWARD
    if f"{v_j} causes {v_i}".lower() in low:
        return PairwiseChoice.REVERSE
    if "no causal relationship" in low:
        return PairwiseChoice.NO_RELATION
    raise AnswerParseError(f"cannot read a pairwise choice from {text[:80]!r}")


_BRACKETS = re.compile(r"\[([^\[\]]*)\]")


def parse_variable_list(text: str, vocabulary: Iterable[str]) -> set[str]:
    """Names in the last bracketed list of ``text``, matched case-insensitively.

    Tokens outside ``vocabulary`` are dropped with a warning.
    """
    lists = _BRACKETS.findall(text)
    if not lists:
        raise AnswerParseError(f"no bracketed list in {text[:80]!r}")
    lookup = {v.lower(): v for v in vocabulary}
    found: set[str] = set()
    for token in lists[-1].split(","):
        token = token.strip().strip("'\"`*").strip()
        if not token:
            continue
        if token.lower() in lookup:
            found.add(lookup[token.lower()])
        else:
            log.warning("dropping unknown variable %r from list answer", token)
    return found
