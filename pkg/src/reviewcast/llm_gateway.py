"""Prompt rendering, LLM endpoint access, and structured-reply parsing.

The three prompt families carry versioned wording; parsers only depend on the
reply contracts (one idea paragraph, the canonical capability sentence, a
two-field judge dictionary), so templates can evolve without code changes.
"""

from __future__ import annotations

import ast
import hashlib
import json
import logging
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

log = logging.getLogger(__name__)

SKILL_NAMES = (
    "mathematical derivation",
    "theoretical analysis/proving",
    "model/architecture design",
    "data collection",
    "experimental design",
    "paper presentation",
)
LEVELS = ("low", "medium", "high", "very high")
LEVEL_SCORES = {"low": 1, "medium": 2, "high": 3, "very high": 4}

_PLACEHOLDER = re.compile(r"\{([a-z][a-z0-9_]*)\}")
_BANNED_OUTCOME_PATTERNS = (
    re.compile(r"\boutperforms?\b", re.IGNORECASE),
    re.compile(r"\bachiev\w*\s+\d+(?:\.\d+)?\s*%", re.IGNORECASE),
    re.compile(r"\bstate-of-the-art results\b", re.IGNORECASE),
)


class GatewayError(Exception):
    pass


class TransportError(GatewayError):
    pass


class PromptError(GatewayError):
    pass


class ReplyParseError(GatewayError):
    pass


class JudgeRangeError(ReplyParseError):
    pass


class UnusableRecordError(GatewayError):
    """Judge reply stayed unparseable after the single re-ask; exclude the record."""


@dataclass(frozen=True)
class PromptTemplate:
    family: str  # one of idea | capability | judge
    template_text: str
    version: str


def placeholders_in(template_text: str) -> set[str]:
    return set(_PLACEHOLDER.findall(template_text))


def render_prompt(template: PromptTemplate, bindings: dict[str, str]) -> str:
    """Pure textual substitution of ``{name}`` placeholders."""

    def sub(match: re.Match) -> str:
        name = match.group(1)
        if name not in bindings:
            raise PromptError(f"unbound placeholder: {name}")
        return bindings[name]

    return _PLACEHOLDER.sub(sub, template.template_text)


IDEA_TEMPLATE = PromptTemplate(
    family="idea",
    version="v1",
    template_text="""\
You write pre-registration style summaries of machine learning manuscripts.

Read the manuscript below and write ONE paragraph that states:
1. the research problem being addressed,
2. the method used to attack it,
3. what is new about the method.

Rules:
- Never mention experimental outcomes, result numbers, benchmark scores, or
  comparisons against baselines; the summary must read as if the work had not
  been run yet.
- Summarize in your own words; do not copy sentences.
- Output the paragraph only, with no heading or commentary.

Manuscript:
{manuscript}
""",
)

CAPABILITY_TEMPLATE = PromptTemplate(
    family="capability",
    version="v1",
    template_text="""\
You assess the demonstrated capability of a paper's author group.

Using the manuscript and the author roster below, rate the group's proficiency
in each of these six skills: mathematical derivation, theoretical
analysis/proving, model/architecture design, data collection, experimental
design, and paper presentation. Use exactly one of: low, medium, high,
very high.

Then list 5-10 areas of core expertise the group demonstrably owns, each with a
level from the same scale, and estimate the computing used (GPU type, count and
duration), a rough total cost in USD, and the effort in PhD-equivalent months.

Reply with exactly this sentence pattern and nothing else:
The authors' capability is <level> in mathematical derivation, <level> in
theoretical analysis/proving, <level> in model/architecture design, <level> in
data collection, <level> in experimental design, and <level> in paper
presentation. Core expertise includes <area> (<level>), <area> (<level>), and
<area> (<level>). Computational work utilized <compute>. Estimated costs:
a) <cost USD>; b) <PhD-equivalent months>.

Author roster:
{author_text}

Manuscript:
{manuscript}
""",
)

JUDGE_TEMPLATE = PromptTemplate(
    family="judge",
    version="v1",
    template_text="""\
You are an experienced area chair estimating how a submission will fare in
review at a top machine learning venue.

The submission is described by four blocks:
- author_cap: a text profile of the author group's skills, expertise,
  computing and budget
- idea: a short description of the research idea
- authors: the author roster with positions and affiliations
- venue: the target venue

Weigh how well the group's skills and resources match what the idea needs,
whether the team structure is sound (senior supervision, plausible division of
labor), and how strong and timely the idea itself is for that venue. Be
conservative: top venues accept a minority of submissions.

Reply with only a dictionary of this exact form and nothing else:
{"acc_chance": <float between 0 and 1>, "rating_ave": <float between 0 and 10>}

Submission:
author_cap: {author_cap}
idea: {idea}
authors: {authors}
venue: {venue}
""",
)

JUDGE_REASK_SUFFIX = "\n\nOutput only the dictionary."


def normalize_level(raw: str) -> str:
    """Map case/punctuation variants ('Very High', 'very_high') onto the 4-point scale."""
    level = raw.strip().lower().replace("_", " ").replace("-", " ")
    level = re.sub(r"\s+", " ", level)
    if level not in LEVEL_SCORES:
        raise ReplyParseError(f"unknown proficiency level: {raw!r}")
    return level


def level_score(level: str) -> int:
    return LEVEL_SCORES[normalize_level(level)]


@dataclass(frozen=True)
class CapabilityProfile:
    skill_levels: dict[str, str]  # all six SKILL_NAMES, canonical levels
    expertise: tuple[tuple[str, str], ...]  # 5..10 (area, level) pairs
    compute_note: str
    cost_usd_note: str
    time_note: str
    rendered_text: str = ""

    def __post_init__(self):
        missing = [s for s in SKILL_NAMES if s not in self.skill_levels]
        if missing:
            raise ReplyParseError(f"missing skill: {missing[0]}")
        extra = set(self.skill_levels) - set(SKILL_NAMES)
        if extra:
            raise ReplyParseError(f"unknown skill: {sorted(extra)[0]}")
        object.__setattr__(
            self,
            "skill_levels",
            {s: normalize_level(self.skill_levels[s]) for s in SKILL_NAMES},
        )
        if not 5 <= len(self.expertise) <= 10:
            raise ReplyParseError(f"expertise count {len(self.expertise)} outside 5..10")
        object.__setattr__(
            self,
            "expertise",
            tuple((area.strip(), normalize_level(level)) for area, level in self.expertise),
        )
        if not self.rendered_text:
            object.__setattr__(self, "rendered_text", render_capability_text(self))

    @property
    def skill_scores(self) -> dict[str, int]:
        return {s: LEVEL_SCORES[l] for s, l in self.skill_levels.items()}


def render_capability_text(profile: CapabilityProfile) -> str:
    """Canonical one-paragraph rendering; :func:`parse_capability_text` inverts it."""
    skills = ", ".join(
        f"{profile.skill_levels[s]} in {s}" for s in SKILL_NAMES[:-1]
    )
    skills += f", and {profile.skill_levels[SKILL_NAMES[-1]]} in {SKILL_NAMES[-1]}"
    areas = [f"{area} ({level})" for area, level in profile.expertise]
    expertise = ", ".join(areas[:-1]) + f", and {areas[-1]}"
    return (
        f"The authors' capability is {skills}. "
        f"Core expertise includes {expertise}. "
        f"Computational work utilized {profile.compute_note}. "
        f"Estimated costs: a) {profile.cost_usd_note}; b) {profile.time_note}."
    )


_LEVEL_ALT = r"(very[\s_-]?high|high|medium|low)"
_EXPERTISE_ITEM = re.compile(r"([^,()]+?)\s*\(" + _LEVEL_ALT + r"\)", re.IGNORECASE)


def parse_capability_text(text: str) -> CapabilityProfile:
    """Parse the canonical capability sentence back into a profile."""
    cleaned = re.sub(r"\s+", " ", text.strip())
    skill_levels: dict[str, str] = {}
    for skill in SKILL_NAMES:
        m = re.search(_LEVEL_ALT + r"\s+in\s+" + re.escape(skill), cleaned, re.IGNORECASE)
        if not m:
            raise ReplyParseError(f"missing skill: {skill}")
        skill_levels[skill] = normalize_level(m.group(1))
    m = re.search(
        r"Core expertise includes\s+(.*?)\.\s*Computational work utilized\s+(.*?)\.\s*"
        r"Estimated costs:\s*a\)\s*(.*?);\s*b\)\s*(.*?)\.?\s*$",
        cleaned,
        re.IGNORECASE,
    )
    if not m:
        raise ReplyParseError("capability reply missing expertise/compute/cost structure")
    expertise_blob, compute_note, cost_note, time_note = m.groups()
    expertise = tuple(
        (re.sub(r"^and\s+", "", area.strip()), normalize_level(level))
        for area, level in _EXPERTISE_ITEM.findall(expertise_blob)
    )
    if not 5 <= len(expertise) <= 10:
        raise ReplyParseError(f"expertise count {len(expertise)} outside 5..10")
    return CapabilityProfile(
        skill_levels=skill_levels,
        expertise=expertise,
        compute_note=compute_note.strip(),
        cost_usd_note=cost_note.strip(),
        time_note=time_note.strip(),
    )


@dataclass(frozen=True)
class JudgeOutput:
    acc_chance: float
    rating_ave: float

    def __post_init__(self):
        for name, value, lo, hi in (
            ("acc_chance", self.acc_chance, 0.0, 1.0),
            ("rating_ave", self.rating_ave, 0.0, 10.0),
        ):
            if not isinstance(value, (int, float)) or value != value:
                raise JudgeRangeError(f"{name} is not a finite number: {value!r}")
            if not lo <= float(value) <= hi:
                raise JudgeRangeError(f"{name} {value} outside [{lo}, {hi}]")


def first_balanced_block(text: str) -> str:
    """First brace-balanced ``{...}`` block, salvaged from surrounding prose."""
    start = text.find("{")
    if start < 0:
        raise ReplyParseError("no dictionary found in reply")
    depth = 0
    for i in range(start, len(text)):
        if text[i] == "{":
            depth += 1
        elif text[i] == "}":
            depth -= 1
            if depth == 0:
                return text[start : i + 1]
    raise ReplyParseError("unbalanced braces in reply")


def parse_judge_reply(reply: str) -> JudgeOutput:
    block = first_balanced_block(reply)
    try:
        payload = json.loads(block)
    except json.JSONDecodeError:
        try:
            payload = ast.literal_eval(block)
        except (ValueError, SyntaxError) as exc:
            raise ReplyParseError(f"judge reply is not a dictionary: {exc}") from exc
    if not isinstance(payload, dict):
        raise ReplyParseError("judge reply is not a dictionary")
    try:
        acc = float(payload["acc_chance"])
        rating = float(payload["rating_ave"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ReplyParseError(f"judge reply missing numeric fields: {exc}") from exc
    return JudgeOutput(acc_chance=acc, rating_ave=rating)


@dataclass
class GatewayConfig:
    base_url: str = ""
    api_key: str = ""
    model: str = ""
    temperature: float = 0.0  # deterministic parses by default
    max_retries: int = 3  # outbound-call budget per logical request
    retry_backoff_s: float = 0.1
    max_concurrency: int = 4
    requests_per_second: float | None = None
    cache_dir: str | None = None
    timeout_s: float = 120.0

    @classmethod
    def from_env(cls, **overrides) -> "GatewayConfig":
        cfg = cls(
            base_url=os.environ.get("LLM_BASE_URL", ""),
            api_key=os.environ.get("LLM_API_KEY", ""),
            model=os.environ.get("LLM_MODEL", ""),
            max_concurrency=int(os.environ.get("LLM_MAX_CONCURRENCY", "4")),
        )
        return replace(cfg, **overrides)


class ResponseCache:
    """On-disk request/response cache keyed by (family, version, prompt hash)."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def _path(self, family: str, version: str, prompt: str) -> Path:
        digest = hashlib.sha256(prompt.encode("utf-8")).hexdigest()
        return self.root / family / version / f"{digest}.json"

    def get(self, family: str, version: str, prompt: str) -> str | None:
        path = self._path(family, version, prompt)
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))["reply"]

    def put(self, family: str, version: str, prompt: str, reply: str) -> None:
        path = self._path(family, version, prompt)
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = {"family": family, "version": version, "reply": reply}
        path.write_text(json.dumps(payload, ensure_ascii=False), encoding="utf-8")


class RateLimiter:
    """Minimum-interval limiter; the one piece of shared mutable gateway state."""

    def __init__(self, requests_per_second: float | None):
        self.interval = 1.0 / requests_per_second if requests_per_second else 0.0
        self._lock = threading.Lock()
        self._next_allowed = 0.0

    def wait(self) -> None:
        if self.interval <= 0:
            return
        with self._lock:
            now = time.monotonic()
            delay = self._next_allowed - now
            self._next_allowed = max(now, self._next_allowed) + self.interval
        if delay > 0:
            time.sleep(delay)


class HttpTransport:
    """OpenAI-compatible chat-completions transport."""

    def __init__(self, config: GatewayConfig):
        if not config.base_url:
            raise GatewayError("LLM_BASE_URL is not configured")
        self.config = config

    def __call__(self, prompt: str) -> str:
        import httpx

        url = self.config.base_url.rstrip("/") + "/chat/completions"
        headers = {"Content-Type": "application/json"}
        if self.config.api_key:
            headers["Authorization"] = f"Bearer {self.config.api_key}"
        body = {
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
        }
        try:
            resp = httpx.post(url, json=body, headers=headers, timeout=self.config.timeout_s)
            resp.raise_for_status()
            return resp.json()["choices"][0]["message"]["content"]
        except httpx.HTTPError as exc:
            raise TransportError(str(exc)) from exc
        except (KeyError, IndexError, ValueError) as exc:
            raise TransportError(f"malformed endpoint response: {exc}") from exc


class LlmClient:
    """Cached, rate-limited, bounded-concurrency access to one LLM endpoint."""

    def __init__(
        self,
        config: GatewayConfig | None = None,
        transport: Callable[[str], str] | None = None,
        cache: ResponseCache | None = None,
    ):
        self.config = config or GatewayConfig.from_env()
        self.transport = transport if transport is not None else HttpTransport(self.config)
        if cache is None and self.config.cache_dir:
            cache = ResponseCache(self.config.cache_dir)
        self.cache = cache
        self._limiter = RateLimiter(self.config.requests_per_second)
        self._slots = threading.Semaphore(max(1, self.config.max_concurrency))

    def complete(self, family: str, version: str, prompt: str) -> str:
        if self.cache is not None:
            hit = self.cache.get(family, version, prompt)
            if hit is not None:
                return hit
        last_error: Exception | None = None
        for attempt in range(self.config.max_retries):
            self._limiter.wait()
            with self._slots:
                try:
                    reply = self.transport(prompt)
                except TransportError as exc:
                    last_error = exc
                    log.warning("transport failure (attempt %d): %s", attempt + 1, exc)
                    if self.config.retry_backoff_s:
                        time.sleep(self.config.retry_backoff_s * (2.0**attempt))
                    continue
            if self.cache is not None:
                self.cache.put(family, version, prompt, reply)
            return reply
        raise TransportError(
            f"{family} request failed after {self.config.max_retries} attempts: {last_error}"
        )

    def map_concurrent(self, fn: Callable, items: Sequence) -> list:
        width = max(1, self.config.max_concurrency)
        with ThreadPoolExecutor(max_workers=width) as pool:
            return list(pool.map(fn, items))


@dataclass(frozen=True)
class IdeaExtraction:
    text: str
    flagged: bool
    flag_reasons: tuple[str, ...] = ()


def scan_outcome_phrases(text: str) -> tuple[str, ...]:
    hits = []
    for pattern in _BANNED_OUTCOME_PATTERNS:
        m = pattern.search(text)
        if m:
            hits.append(m.group(0))
    return tuple(hits)


def extract_idea(
    manuscript_text: str, client: LlmClient, template: PromptTemplate = IDEA_TEMPLATE
) -> IdeaExtraction:
    """One-paragraph problem/method/innovation summary, outcome-free.

    A banned-phrase scan flags replies that smuggle in results; flags are
    advisory (review queue), never silently accepted or silently dropped.
    """
    if not manuscript_text.strip():
        raise ValueError("manuscript text is empty")
    prompt = render_prompt(template, {"manuscript": manuscript_text})
    reply = client.complete(template.family, template.version, prompt).strip()
    hits = scan_outcome_phrases(reply)
    if hits:
        log.warning("idea extraction flagged for review: %s", ", ".join(hits))
    return IdeaExtraction(text=reply, flagged=bool(hits), flag_reasons=hits)


def extract_capability(
    manuscript_text: str,
    author_text: str,
    client: LlmClient,
    template: PromptTemplate = CAPABILITY_TEMPLATE,
) -> CapabilityProfile:
    if not manuscript_text.strip() or not author_text.strip():
        raise ValueError("manuscript text and author text must be non-empty")
    prompt = render_prompt(
        template, {"manuscript": manuscript_text, "author_text": author_text}
    )
    reply = client.complete(template.family, template.version, prompt)
    return parse_capability_text(reply)


def judge_paper(record, client: LlmClient, template: PromptTemplate = JUDGE_TEMPLATE) -> JudgeOutput:
    """Zero-shot acceptance-chance / expected-rating estimate for one record.

    An unparseable reply earns exactly one structured re-ask; a second failure
    marks the record unusable (caller excludes it, with a log entry).
    """
    from .corpus import render_author_text

    missing = [
        name
        for name, value in (
            ("idea_text", record.idea_text),
            ("capability_text", record.capability_text),
            ("authors", record.authors),
            ("venue", record.venue),
        )
        if not value
    ]
    if missing:
        raise ValueError(f"record {record.record_id} missing {', '.join(missing)}")
    prompt = render_prompt(
        template,
        {
            "author_cap": record.capability_text,
            "idea": record.idea_text,
            "authors": render_author_text(record),
            "venue": record.venue,
        },
    )
    reply = client.complete(template.family, template.version, prompt)
    try:
        return parse_judge_reply(reply)
    except JudgeRangeError:
        raise
    except ReplyParseError:
        reask = prompt + JUDGE_REASK_SUFFIX
        reply = client.complete(template.family, template.version, reask)
        try:
            return parse_judge_reply(reply)
        except JudgeRangeError:
            raise
        except ReplyParseError as exc:
            log.error("record %s excluded: judge reply unusable (%s)", record.record_id, exc)
            raise UnusableRecordError(record.record_id) from exc


def judge_corpus(records: Iterable, client: LlmClient) -> tuple[dict[str, JudgeOutput], list[str]]:
    """Judge many records concurrently; returns (outputs by id, unusable ids)."""
    records = list(records)

    def one(record):
        try:
            return record.record_id, judge_paper(record, client)
        except UnusableRecordError:
            return record.record_id, None

    outputs: dict[str, JudgeOutput] = {}
    unusable: list[str] = []
    for record_id, output in client.map_concurrent(one, records):
        if output is None:
            unusable.append(record_id)
        else:
            outputs[record_id] = output
    return outputs, unusable
