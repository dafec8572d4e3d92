"""Bi-level capability-representation prediction.

Level 1 reads the author roster as one sequence of per-author spans, each
opened by a classification token and tagged with that author's segment id.
Level 2 consumes the per-author classification vectors concatenated with the
idea token embeddings (taken from level 2's own embedding table) and projects
its first output position onto the frozen capability-encoder space.

Training minimizes
    L = -cos(c_hat, c) + lam1 * max(cos(c_hat, a), 0) + lam2 * (y_hat - y_c)^2
against targets from frozen pretrained capability/author encoders; the second
term pushes the prediction away from the plain author representation so the
two stay decorrelated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import torch
from torch import nn

from .corpus import preferential_author_subset
from .encoder import EncoderConfig, PooledTextEncoder, PooledVector

DEFAULT_LAMBDA_SIMILARITY = 0.2
DEFAULT_LAMBDA_HEAD = 1.0


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class BiLevelConfig:
    level1: EncoderConfig
    level2: EncoderConfig
    target_dim: int
    max_authors: int = 16

    def __post_init__(self):
        # Level-1 CLS vectors enter level 2 directly, so widths must agree.
        if self.level2.hidden_size != self.level1.hidden_size:
            raise ConfigError(
                f"level-2 embedding width {self.level2.hidden_size} != "
                f"level-1 hidden size {self.level1.hidden_size}"
            )
        if self.max_authors < 1:
            raise ConfigError("max_authors must be positive")


@dataclass
class CapabilityTarget:
    c: PooledVector  # frozen pretrained capability encoder, top vector
    a: PooledVector  # frozen pretrained author-only encoder, top vector
    shared_head: nn.Linear  # frozen d -> 1 prediction head of the capability model

    def __post_init__(self):
        d = self.c.values.shape[-1]
        if self.a.values.shape[-1] != d:
            raise ConfigError("capability and author targets have different dimensions")
        if self.shared_head.in_features != d or self.shared_head.out_features != 1:
            raise ConfigError(f"shared_head must map {d} -> 1")


class AuthorSequenceBuilder:
    """Packs author fragments into one level-1 sequence under a token budget.

    Classification tokens are never dropped; when the budget is tight, trailing
    authors lose fragment tokens first. Rosters above max_authors keep the
    first and last authors plus the earliest middle authors.
    """

    def __init__(self, config: EncoderConfig, max_authors: int):
        self.config = config
        self.max_authors = max_authors
        from .encoder import HashingTokenizer

        self.tokenizer = HashingTokenizer(config.vocab_id)

    def build(self, fragments: Sequence[str]) -> tuple[list[int], list[int], list[int]]:
        """Returns (token_ids, segment_ids, cls_positions) for one roster."""
        if not fragments:
            raise ValueError("author fragments must be non-empty")
        fragments = preferential_author_subset(list(fragments), self.max_authors)
        n = len(fragments)
        if n > self.config.max_tokens:
            raise ConfigError(
                f"{n} classification tokens cannot fit max_tokens {self.config.max_tokens}"
            )
        ids: list[int] = []
        segments: list[int] = []
        cls_positions: list[int] = []
        remaining = self.config.max_tokens
        for k, fragment in enumerate(fragments):
            reserve_for_rest = n - k - 1  # CLS slots still owed to later authors
            word_ids = [self.tokenizer.word_id(t) for t in self.tokenizer.tokenize(fragment)]
            word_ids = word_ids[: max(0, remaining - 1 - reserve_for_rest)]
            cls_positions.append(len(ids))
            ids.append(self.tokenizer.CLS_ID)
            ids.extend(word_ids)
            segments.extend([k] * (1 + len(word_ids)))
            remaining -= 1 + len(word_ids)
        return ids, segments, cls_positions


class CapabilityPredictor(nn.Module):
    """Two-stage encoder mapping (author fragments, idea text) to c_hat."""

    def __init__(self, config: BiLevelConfig):
        super().__init__()
        self.config = config
        self.level1 = PooledTextEncoder(config.level1, n_segments=config.max_authors)
        self.level2 = PooledTextEncoder(config.level2)
        self.projection = nn.Linear(config.level2.hidden_size, config.target_dim)
        self.sequence_builder = AuthorSequenceBuilder(config.level1, config.max_authors)

    def author_vectors(self, rosters: Sequence[Sequence[str]]) -> list[torch.Tensor]:
        """Per-author level-1 classification vectors, one (n_k, d) tensor per roster."""
        built = [self.sequence_builder.build(fragments) for fragments in rosters]
        width = max(len(ids) for ids, _, _ in built)
        device = next(self.parameters()).device
        pad_id = self.level1.tokenizer.PAD_ID
        ids = torch.full((len(built), width), pad_id, dtype=torch.long, device=device)
        segments = torch.zeros((len(built), width), dtype=torch.long, device=device)
        pad = torch.ones((len(built), width), dtype=torch.bool, device=device)
        for b, (seq, seg, _) in enumerate(built):
            ids[b, : len(seq)] = torch.tensor(seq, dtype=torch.long, device=device)
            segments[b, : len(seq)] = torch.tensor(seg, dtype=torch.long, device=device)
            pad[b, : len(seq)] = False
        hidden = self.level1(ids, pad, segments)
        return [
            hidden[b, torch.tensor(cls_pos, dtype=torch.long, device=device), :]
            for b, (_, _, cls_pos) in enumerate(built)
        ]

    def forward(self, rosters: Sequence[Sequence[str]], idea_texts: Sequence[str]) -> torch.Tensor:
        if len(rosters) != len(idea_texts):
            raise ValueError("rosters and idea texts must align")
        for text in idea_texts:
            if not text:
                raise ValueError("idea text must be non-empty")
        author_vecs = self.author_vectors(rosters)
        device = next(self.parameters()).device
        tokenizer = self.level2.tokenizer
        rows: list[torch.Tensor] = []
        for vecs, idea in zip(author_vecs, idea_texts):
            idea_budget = self.config.level2.max_tokens - vecs.shape[0]
            if idea_budget < 1:
                raise ConfigError("level-2 budget leaves no room for idea tokens")
            idea_ids = [tokenizer.word_id(t) for t in tokenizer.tokenize(idea)][:idea_budget]
            idea_embeds = self.level2.token_embedding(
                torch.tensor(idea_ids, dtype=torch.long, device=device)
            )
            rows.append(torch.cat([vecs, idea_embeds], dim=0))
        width = max(r.shape[0] for r in rows)
        d = self.config.level2.hidden_size
        x = torch.zeros((len(rows), width, d), dtype=rows[0].dtype, device=device)
        pad = torch.ones((len(rows), width), dtype=torch.bool, device=device)
        for b, r in enumerate(rows):
            x[b, : r.shape[0], :] = r
            pad[b, : r.shape[0]] = False
        hidden = self.level2.forward_embedded(x, pad)
        return self.projection(hidden[:, 0, :])


def level1_author_encode(
    author_fragments: Sequence[str], model: CapabilityPredictor
) -> list[PooledVector]:
    """Per-author capability vectors from the level-1 encoder, in roster order."""
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            (vecs,) = model.author_vectors([list(author_fragments)])
    finally:
        model.train(was_training)
    return [PooledVector(values=v, source_field="author") for v in vecs]


def predict_capability(
    author_fragments: Sequence[str], idea_text: str, model: CapabilityPredictor
) -> PooledVector:
    """Deterministic eval-mode capability prediction for one record."""
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            out = model([list(author_fragments)], [idea_text])[0]
    finally:
        model.train(was_training)
    if not torch.isfinite(out).all():
        raise RuntimeError("capability predictor produced non-finite values")
    return PooledVector(values=out, source_field="capability")


def _cosine(u: torch.Tensor, v: torch.Tensor) -> torch.Tensor:
    nu = u.norm(dim=-1)
    nv = v.norm(dim=-1)
    if (nu == 0).any() or (nv == 0).any():
        raise ValueError("cosine similarity undefined for zero-norm vectors")
    return (u * v).sum(dim=-1) / (nu * nv)


def capability_loss(
    c_hat: torch.Tensor | PooledVector,
    target: CapabilityTarget,
    lam1: float = DEFAULT_LAMBDA_SIMILARITY,
    lam2: float = DEFAULT_LAMBDA_HEAD,
) -> torch.Tensor:
    """Multi-objective loss for one predicted capability vector."""
    if isinstance(c_hat, PooledVector):
        c_hat = c_hat.values
    c = target.c.values.to(c_hat.dtype)
    a = target.a.values.to(c_hat.dtype)
    head = target.shared_head
    y_hat = nn.functional.linear(
        c_hat, head.weight.to(c_hat.dtype), head.bias.to(c_hat.dtype) if head.bias is not None else None
    ).squeeze(-1)
    y_c = nn.functional.linear(
        c, head.weight.to(c_hat.dtype), head.bias.to(c_hat.dtype) if head.bias is not None else None
    ).squeeze(-1)
    term_fit = -_cosine(c_hat, c)
    term_decorrelate = lam1 * torch.clamp(_cosine(c_hat, a), min=0.0)
    term_head = lam2 * (y_hat - y_c) ** 2
    return term_fit + term_decorrelate + term_head


def batch_capability_loss(
    c_hat: torch.Tensor,
    c: torch.Tensor,
    a: torch.Tensor,
    y_c: torch.Tensor,
    shared_head: nn.Linear,
    lam1: float = DEFAULT_LAMBDA_SIMILARITY,
    lam2: float = DEFAULT_LAMBDA_HEAD,
) -> torch.Tensor:
    """Mean Eq.-style loss over a batch of precomputed targets."""
    y_hat = shared_head(c_hat).squeeze(-1)
    term_fit = -_cosine(c_hat, c)
    term_decorrelate = lam1 * torch.clamp(_cosine(c_hat, a), min=0.0)
    term_head = lam2 * (y_hat - y_c) ** 2
    return (term_fit + term_decorrelate + term_head).mean()


@dataclass
class TargetCache:
    """Precomputed (record_id -> c, a, y_c) targets, persisted to disk."""

    c: dict[str, torch.Tensor] = field(default_factory=dict)
    a: dict[str, torch.Tensor] = field(default_factory=dict)
    y_c: dict[str, float] = field(default_factory=dict)

    def put(self, record_id: str, c: torch.Tensor, a: torch.Tensor, y_c: float) -> None:
        self.c[record_id] = c.detach().cpu()
        self.a[record_id] = a.detach().cpu()
        self.y_c[record_id] = float(y_c)

    def batch(self, record_ids: Sequence[str]) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        c = torch.stack([self.c[r] for r in record_ids])
        a = torch.stack([self.a[r] for r in record_ids])
        y = torch.tensor([self.y_c[r] for r in record_ids], dtype=c.dtype)
        return c, a, y

    def save(self, path: str | Path) -> None:
        torch.save({"c": self.c, "a": self.a, "y_c": self.y_c}, path)

    @classmethod
    def load(cls, path: str | Path) -> "TargetCache":
        payload = torch.load(path, weights_only=True)
        return cls(c=payload["c"], a=payload["a"], y_c=payload["y_c"])


def compute_targets(
    record_ids: Sequence[str],
    capability_texts: Sequence[str],
    author_texts: Sequence[str],
    capability_encoder: PooledTextEncoder,
    author_encoder: PooledTextEncoder,
    shared_head: nn.Linear,
    batch_size: int = 32,
) -> TargetCache:
    """Run the frozen encoders once over the corpus and cache (c, a, y_c)."""
    cache = TargetCache()
    capability_encoder.eval()
    author_encoder.eval()
    with torch.no_grad():
        for start in range(0, len(record_ids), batch_size):
            ids = record_ids[start : start + batch_size]
            c = capability_encoder.encode_texts(capability_texts[start : start + batch_size])
            a = author_encoder.encode_texts(author_texts[start : start + batch_size])
            y = shared_head(c).squeeze(-1)
            for i, rid in enumerate(ids):
                cache.put(rid, c[i], a[i], float(y[i]))
    return cache


def initialize_from_pretrained(
    predictor: CapabilityPredictor,
    author_encoder: PooledTextEncoder,
    capability_encoder: PooledTextEncoder,
) -> None:
    """Warm-start level 1 from the author encoder and level 2 from the capability encoder.

    Segment embeddings and the projection have no pretrained counterpart and
    keep their fresh initialization.
    """
    missing, unexpected = predictor.level1.load_state_dict(
        author_encoder.state_dict(), strict=False
    )
    if unexpected:
        raise ConfigError(f"author encoder weights do not fit level 1: {unexpected}")
    if any(not k.startswith("segment_embedding") for k in missing):
        raise ConfigError(f"level-1 warm start left gaps: {missing}")
    predictor.level2.load_state_dict(capability_encoder.state_dict(), strict=True)
