"""Synthetic planted-signal corpus for desk-scale directional checks.

The label construction:

* every first author has a fixed seniority level s in 1..4, visible only
  through the position word in the roster;
* every record draws a topic t; the topic carries an affinity bonus
  A(t) = t mod 3 and a quality score q(t) = floor(t / 3) mod 4, both readable
  from idea-text tokens;
* the demonstrated capability level is L = clip(1 + (s + A(t)) // 2, 1, 4)
  and is rendered into the canonical capability sentence (level words carry
  the signal);
* every record i carries a unique problem tag token in its idea text, which
  contributes u(i) = (7 * i) mod 5 to the label;
* avg_rating = base + per_level * L + per_quality * q(t) + per_residual * u(i),
  a deterministic function of capability and idea token features only.

An author-only model can recover s but neither A(t) nor q(t), so it carries
irreducible error; the three-way model sees everything learnable; the
capability predictor can reconstruct L from author + idea text alone. The
unique-tag component is deterministic in the idea tokens yet cannot
generalize to unseen tags, so it floors every model's test error the way
reviewer disagreement floors the real task.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import AuthorRecord, PaperRecord
from .llm_gateway import LEVELS, CapabilityProfile, SKILL_NAMES

TOPIC_NAMES = (
    "sparse attention routing",
    "graph rewiring",
    "diffusion guidance",
    "protein folding priors",
    "retrieval grounding",
    "causal discovery",
    "quantized training",
    "continual adaptation",
    "reward shaping",
    "tabular transfer",
    "speech alignment",
    "program synthesis",
)
QUALITY_WORDS = ("incremental", "moderate", "substantial", "groundbreaking")
METHOD_WORDS = ("contrastive", "variational", "spectral")
POSITION_BY_SENIORITY = {
    1: "ms student",
    2: "phd student",
    3: "postdoc",
    4: "professor",
}
AFFILIATIONS = (
    "northern institute of technology",
    "riverside university",
    "atlas research lab",
    "meridian college",
    "harbor computing group",
    "summit ai institute",
    "lakeside university",
)
COUNTRIES = ("us", "cn", "de", "gb", "kr", "ca", "")
VENUES = ("ICLR2025", "NeurIPS2024", "ICLR2024", "NeurIPS2023")


@dataclass(frozen=True)
class PlantedSpec:
    n_records: int = 2000
    n_topics: int = 12
    seed: int = 42
    rating_base: float = 0.8
    rating_per_level: float = 1.1
    rating_per_quality: float = 0.9
    rating_per_residual: float = 0.5
    accept_threshold: float = 6.5


def topic_affinity(topic: int) -> int:
    return topic % 3


def topic_quality(topic: int) -> int:
    return (topic // 3) % 4


def capability_level(seniority: int, topic: int) -> int:
    return int(np.clip(1 + (seniority + topic_affinity(topic)) // 2, 1, 4))


def record_residual(index: int) -> int:
    return (7 * index) % 5


def planted_rating(
    level: int, quality: int, residual: int = 0, spec: PlantedSpec = PlantedSpec()
) -> float:
    return (
        spec.rating_base
        + spec.rating_per_level * level
        + spec.rating_per_quality * quality
        + spec.rating_per_residual * residual
    )


def _capability_text(level: int, topic: int) -> str:
    level_word = LEVELS[level - 1]
    # Secondary skills sit one notch below the headline level.
    minor_word = LEVELS[max(level - 2, 0)]
    skill_levels = {
        name: (level_word if i % 2 == 0 else minor_word) for i, name in enumerate(SKILL_NAMES)
    }
    topic_name = TOPIC_NAMES[topic % len(TOPIC_NAMES)]
    expertise = tuple(
        (area, level_word)
        for area in (
            topic_name,
            f"{topic_name} benchmarks",
            "ablation design",
            "reproducible pipelines",
            "technical writing",
        )
    )
    profile = CapabilityProfile(
        skill_levels=skill_levels,
        expertise=expertise,
        compute_note=f"~{4 * level} accelerator cards for {level} weeks",
        cost_usd_note=f"${5 * level}K USD",
        time_note=f"~{3 * level} PhD-equivalent months",
    )
    return profile.rendered_text


def _idea_text(topic: int, method: int, record_index: int) -> str:
    topic_name = TOPIC_NAMES[topic % len(TOPIC_NAMES)]
    quality_word = QUALITY_WORDS[topic_quality(topic)]
    return (
        f"we investigate {topic_name} through a {METHOD_WORDS[method]} formulation; "
        f"the expected contribution is {quality_word} and targets open problem tag{record_index:05d}"
    )


def generate_planted_corpus(spec: PlantedSpec = PlantedSpec()) -> list[PaperRecord]:
    """Deterministic synthetic corpus; every first author appears exactly twice."""
    if spec.n_records % 2 != 0:
        raise ValueError("n_records must be even so each first author appears twice")
    rng = np.random.default_rng(spec.seed)
    n_authors = spec.n_records // 2
    seniorities = rng.integers(1, 5, size=n_authors)
    # Two records per first author, in shuffled global order.
    author_slots = rng.permutation(np.repeat(np.arange(n_authors), 2))
    records = []
    for i, author_idx in enumerate(author_slots):
        seniority = int(seniorities[author_idx])
        topic = int(rng.integers(0, spec.n_topics))
        method = int(rng.integers(0, len(METHOD_WORDS)))
        level = capability_level(seniority, topic)
        quality = topic_quality(topic)
        rating = planted_rating(level, quality, record_residual(i), spec)
        first = AuthorRecord(
            display_name=f"researcher {author_idx:05d}",
            position=POSITION_BY_SENIORITY[seniority],
            affiliation=AFFILIATIONS[author_idx % len(AFFILIATIONS)],
            country=COUNTRIES[author_idx % len(COUNTRIES)],
            order_index=0,
        )
        coauthors = tuple(
            AuthorRecord(
                display_name=f"collab {int(rng.integers(0, 400)):04d}",
                position=POSITION_BY_SENIORITY[int(rng.integers(1, 5))],
                affiliation=AFFILIATIONS[int(rng.integers(0, len(AFFILIATIONS)))],
                country=COUNTRIES[int(rng.integers(0, len(COUNTRIES)))],
                order_index=k + 1,
            )
            for k in range(int(rng.integers(1, 4)))
        )
        topic_name = TOPIC_NAMES[topic % len(TOPIC_NAMES)]
        records.append(
            PaperRecord(
                record_id=f"p{i:05d}",
                title=f"advances in {topic_name}",
                abstract=f"this submission studies {topic_name} under practical constraints",
                authors=(first,) + coauthors,
                venue=VENUES[i % len(VENUES)],
                idea_text=_idea_text(topic, method, i),
                capability_text=_capability_text(level, topic),
                avg_rating=rating,
                accepted=rating >= spec.accept_threshold,
            )
        )
    return records
