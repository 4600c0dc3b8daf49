"""Follow/avoid vote prompts over frontier islands and the oracles that answer them.

Oracles implement ``answer(prompt, options) -> island id | None``; ``None`` is an
abstention (an unparseable LLM reply) and adds no vote.
"""

from __future__ import annotations

import json
import logging
import os
import re
import string
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import httpx
import numpy as np

from .config import LLMConfig
from .islands import FrontierIsland
from .valuemaps import ContractViolation
from .vocab import cooccurrence_table

log = logging.getLogger(__name__)

LABELS = string.ascii_uppercase
NOTHING_SEEN = "(nothing seen)"


class OracleTransportError(RuntimeError):
    """The vote oracle could not be reached within its retry budget."""


@dataclass(frozen=True)
class PromptText:
    kind: str  # "follow" | "avoid"
    goal: str
    clusters: tuple[tuple[str, tuple[str, ...]], ...]  # (label, names)
    island_ids: tuple[int, ...]

    @property
    def text(self) -> str:
        goal = self.goal.replace("_", " ")
        if self.kind == "follow":
            head = f"Which cluster should a robot follow to find a {goal}?"
        else:
            head = f"A robot is looking for a {goal}. Which cluster should it avoid?"
        lines = [head]
        for label, names in self.clusters:
            desc = ", ".join(n.replace("_", " ") for n in names) if names else NOTHING_SEEN
            lines.append(f"{label}) {desc}")
        lines.append("Answer with the letter of one cluster.")
        return "\n".join(lines)

    def island_for(self, label: str) -> int:
        return self.island_ids[LABELS.index(label)]


def build_prompt(kind: str, goal: str, islands: Sequence[FrontierIsland]) -> PromptText:
    """Label islands A, B, C, ... in id order.  Only the first 26 islands are offered."""
    if kind not in ("follow", "avoid"):
        raise ContractViolation(f"prompt kind must be follow or avoid, got {kind!r}")
    if not islands:
        raise ContractViolation("cannot prompt over zero islands")
    ordered = sorted(islands, key=lambda i: i.id)[:len(LABELS)]
    clusters = tuple((LABELS[k], tuple(isl.names)) for k, isl in enumerate(ordered))
    return PromptText(kind, goal, clusters, tuple(isl.id for isl in ordered))


class VoteOracle(Protocol):
    def answer(self, prompt: PromptText, options: Sequence[int]) -> int | None: ...


@dataclass
class VoteTally:
    n_plus: dict[int, int]
    n_minus: dict[int, int]
    k: int
    abstentions: int = 0

    @property
    def h(self) -> dict[int, int]:
        return {i: self.n_plus[i] - self.n_minus[i] for i in self.n_plus}


def tally_votes(oracle: VoteOracle, goal: str, islands: Sequence[FrontierIsland], k: int = 5,
                concurrent: bool = False) -> VoteTally:
    """Issue ``k`` follow and ``k`` avoid queries and count which island each selects."""
    if k < 1:
        raise ContractViolation("k must be >= 1")
    follow = build_prompt("follow", goal, islands)
    avoid = build_prompt("avoid", goal, islands)
    options = list(follow.island_ids)
    jobs = [follow] * k + [avoid] * k
    if concurrent:
        with ThreadPoolExecutor(max_workers=min(len(jobs), 8)) as pool:
            answers = list(pool.map(lambda p: oracle.answer(p, options), jobs))
    else:
        answers = [oracle.answer(p, options) for p in jobs]
    n_plus = {isl.id: 0 for isl in islands}
    n_minus = {isl.id: 0 for isl in islands}
    abstain = 0
    for prompt, ans in zip(jobs, answers):
        if ans is None:
            abstain += 1
            continue
        if ans not in options:
            raise ContractViolation(f"oracle answered {ans}, not among {options}")
        (n_plus if prompt.kind == "follow" else n_minus)[ans] += 1
    return VoteTally(n_plus, n_minus, k, abstain)


# ---------------------------------------------------------------- offline oracles

@dataclass
class CooccurrenceOracle:
    """Follow picks the cluster whose best name co-occurs most with the goal; avoid picks
    the least.  Unknown categories weigh 0, ties go to the earliest label."""

    table: dict[str, dict[str, float]]

    def score(self, goal: str, names: Sequence[str]) -> float:
        row = self.table.get(goal, {})
        return max((row.get(n, 0.0) for n in names), default=0.0)

    def answer(self, prompt: PromptText, options: Sequence[int]) -> int:
        scores = [self.score(prompt.goal, names) for _, names in prompt.clusters]
        pick = int(np.argmax(scores)) if prompt.kind == "follow" else int(np.argmin(scores))
        return prompt.island_ids[pick]


def cooccurrence_stub(table: dict[str, dict[str, float]] | None = None) -> CooccurrenceOracle:
    return CooccurrenceOracle(cooccurrence_table() if table is None else table)


@dataclass
class RandomOracle:
    """Uniform choice from a seeded stream; reproducible for a fixed call sequence."""

    seed: int = 0
    rng: np.random.Generator = field(init=False)

    def __post_init__(self):
        self.rng = np.random.default_rng(self.seed)

    def answer(self, prompt: PromptText, options: Sequence[int]) -> int:
        return options[int(self.rng.integers(len(options)))]


@dataclass
class ConstantOracle:
    follow: int
    avoid: int

    def answer(self, prompt: PromptText, options: Sequence[int]) -> int:
        return self.follow if prompt.kind == "follow" else self.avoid


# ---------------------------------------------------------------- live LLM

_LETTER = re.compile(r"\b([A-Z])\b")


def parse_choice(reply: str, prompt: PromptText) -> int | None:
    """First standalone capital letter that names one of the prompt's clusters."""
    valid = {label for label, _ in prompt.clusters}
    for m in _LETTER.finditer(reply):
        if m.group(1) in valid:
            return prompt.island_for(m.group(1))
    return None


@dataclass
class LLMOracle:
    """Chat-completion client; the credential comes from ``config.api_key_env``."""

    config: LLMConfig
    transcript: Path | None = None
    client: httpx.Client | None = None
    abstentions: int = 0

    def __post_init__(self):
        if self.client is None:
            self.client = httpx.Client(timeout=self.config.timeout_s)

    def _headers(self) -> dict[str, str]:
        key = os.environ.get(self.config.api_key_env)
        headers = {"Content-Type": "application/json"}
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def complete(self, text: str) -> str:
        body = {"model": self.config.model, "temperature": self.config.temperature,
                "messages": [{"role": "user", "content": text}]}
        last: Exception | None = None
        for attempt in range(self.config.retries + 1):
            try:
                resp = self.client.post(self.config.endpoint, json=body, headers=self._headers())
                if resp.status_code in (401, 403):
                    raise OracleTransportError(f"auth rejected ({resp.status_code})")
                resp.raise_for_status()
                content = resp.json()["choices"][0]["message"]["content"]
                self._log(body, content)
                return content
            except OracleTransportError:
                raise
            except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
                last = exc
                time.sleep(min(0.1 * 2 ** attempt, 2.0))
        raise OracleTransportError(f"LLM endpoint failed after {self.config.retries + 1} tries: {last}")

    def _log(self, request: dict, reply: str) -> None:
        if self.transcript is not None:
            with open(self.transcript, "a") as fh:
                fh.write(json.dumps({"request": request, "reply": reply}) + "\n")

    def answer(self, prompt: PromptText, options: Sequence[int]) -> int | None:
        for _ in range(2):
            choice = parse_choice(self.complete(prompt.text), prompt)
            if choice is not None:
                return choice
        log.warning("no cluster letter in LLM reply twice; counting an abstention")
        self.abstentions += 1
        return None


def llm_client(config: LLMConfig, transcript: str | Path | None = None) -> LLMOracle:
    return LLMOracle(config, Path(transcript) if transcript else None)
