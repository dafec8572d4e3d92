"""Text encoding: input composition, hashing tokenizer, pooled transformer encoder.

The pooled vector is the top-layer hidden state at the leading classification
token. Tokenization uses a keyed hashing vocabulary, so no tokenizer asset
files are needed and ids are stable across runs and platforms.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from typing import Sequence

import torch
from torch import nn

from .corpus import PaperRecord, render_author_text

COMPOSE_FIELDS = ("title", "abstract", "author", "capability", "idea")
SEP_TEXT = "[SEP]"

_TOKEN = re.compile(r"\[sep\]|[a-z0-9]+|[^\sa-z0-9]")


class ComposeError(ValueError):
    pass


class EncodeError(RuntimeError):
    pass


@dataclass(frozen=True)
class EncoderConfig:
    hidden_size: int = 32
    max_tokens: int = 512  # truncation keeps the prefix
    vocab_id: str = "hash-4k"
    layer_count: int = 2
    head_count: int = 4
    dropout: float = 0.1

    def __post_init__(self):
        if self.hidden_size % self.head_count != 0:
            raise ValueError(
                f"hidden_size {self.hidden_size} not divisible by head_count {self.head_count}"
            )
        if self.max_tokens < 2:
            raise ValueError("max_tokens must leave room for the classification token")

    @property
    def vocab_size(self) -> int:
        m = re.fullmatch(r"hash-(\d+)k", self.vocab_id)
        if not m:
            raise ValueError(f"unknown vocab_id {self.vocab_id!r}; expected 'hash-<N>k'")
        return int(m.group(1)) * 1024


@dataclass
class PooledVector:
    values: torch.Tensor  # shape (d,), finite
    source_field: str  # author | capability | idea | title | abstract | composite


class HashingTokenizer:
    """Lowercased word/punctuation pieces hashed into a fixed-size id space.

    Ids 0/1/2 are reserved for [CLS]/[SEP]/padding; words map to
    3 + blake2b(word) mod (vocab_size - 3), which is deterministic everywhere.
    """

    CLS_ID = 0
    SEP_ID = 1
    PAD_ID = 2
    _RESERVED = 3

    def __init__(self, vocab_id: str = "hash-4k"):
        self.vocab_id = vocab_id
        m = re.fullmatch(r"hash-(\d+)k", vocab_id)
        if not m:
            raise ValueError(f"unknown vocab_id {vocab_id!r}")
        self.vocab_size = int(m.group(1)) * 1024

    def tokenize(self, text: str) -> list[str]:
        return _TOKEN.findall(text.lower())

    def word_id(self, token: str) -> int:
        if token == "[sep]":
            return self.SEP_ID
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        return self._RESERVED + int.from_bytes(digest, "big") % (self.vocab_size - self._RESERVED)

    def encode(self, text: str, max_tokens: int) -> list[int]:
        """[CLS] + hashed token ids, truncated to the leading max_tokens ids."""
        ids = [self.CLS_ID] + [self.word_id(t) for t in self.tokenize(text)]
        return ids[:max_tokens]

    def truncate_text(self, text: str, max_tokens: int) -> str:
        """Prefix of ``text`` whose encoding equals the truncated encoding of ``text``."""
        return " ".join(self.tokenize(text)[: max_tokens - 1])


def batch_encode(
    texts: Sequence[str], tokenizer: HashingTokenizer, max_tokens: int
) -> tuple[torch.Tensor, torch.Tensor]:
    """Pad a batch of texts; returns (ids (B,T), pad_mask (B,T) with True at padding)."""
    encoded = [tokenizer.encode(t, max_tokens) for t in texts]
    width = max(len(e) for e in encoded)
    ids = torch.full((len(encoded), width), tokenizer.PAD_ID, dtype=torch.long)
    pad = torch.ones((len(encoded), width), dtype=torch.bool)
    for i, e in enumerate(encoded):
        ids[i, : len(e)] = torch.tensor(e, dtype=torch.long)
        pad[i, : len(e)] = False
    return ids, pad


class PooledTextEncoder(nn.Module):
    """Bidirectional transformer encoder pooled at the classification token."""

    def __init__(self, config: EncoderConfig, n_segments: int = 1):
        super().__init__()
        self.config = config
        self.tokenizer = HashingTokenizer(config.vocab_id)
        d = config.hidden_size
        self.token_embedding = nn.Embedding(config.vocab_size, d)
        self.position_embedding = nn.Embedding(config.max_tokens, d)
        self.segment_embedding = nn.Embedding(n_segments, d) if n_segments > 1 else None
        self.input_norm = nn.LayerNorm(d)
        self.input_dropout = nn.Dropout(config.dropout)
        layer = nn.TransformerEncoderLayer(
            d_model=d,
            nhead=config.head_count,
            dim_feedforward=4 * d,
            dropout=config.dropout,
            activation="gelu",
            batch_first=True,
        )
        self.layers = nn.TransformerEncoder(
            layer, num_layers=config.layer_count, enable_nested_tensor=False
        )

    def embed(self, token_ids: torch.Tensor, segment_ids: torch.Tensor | None = None) -> torch.Tensor:
        positions = torch.arange(token_ids.shape[1], device=token_ids.device)
        x = self.token_embedding(token_ids) + self.position_embedding(positions)[None, :, :]
        if segment_ids is not None:
            if self.segment_embedding is None:
                raise EncodeError("encoder was built without segment embeddings")
            x = x + self.segment_embedding(segment_ids)
        return self.input_dropout(self.input_norm(x))

    def forward(
        self,
        token_ids: torch.Tensor,
        pad_mask: torch.Tensor | None = None,
        segment_ids: torch.Tensor | None = None,
    ) -> torch.Tensor:
        x = self.embed(token_ids, segment_ids)
        return self.layers(x, src_key_padding_mask=pad_mask)

    def forward_embedded(
        self, x: torch.Tensor, pad_mask: torch.Tensor | None = None
    ) -> torch.Tensor:
        """Run pre-embedded (B, T, d) rows through positions, norm, and layers."""
        if x.shape[1] > self.config.max_tokens:
            raise EncodeError(
                f"sequence length {x.shape[1]} exceeds max_tokens {self.config.max_tokens}"
            )
        positions = torch.arange(x.shape[1], device=x.device)
        x = x + self.position_embedding(positions)[None, :, :]
        x = self.input_dropout(self.input_norm(x))
        return self.layers(x, src_key_padding_mask=pad_mask)

    def pooled(
        self,
        token_ids: torch.Tensor,
        pad_mask: torch.Tensor | None = None,
        segment_ids: torch.Tensor | None = None,
    ) -> torch.Tensor:
        return self.forward(token_ids, pad_mask, segment_ids)[:, 0, :]

    def encode_texts(self, texts: Sequence[str]) -> torch.Tensor:
        ids, pad = batch_encode(texts, self.tokenizer, self.config.max_tokens)
        device = next(self.parameters()).device
        return self.pooled(ids.to(device), pad.to(device))


def compose_input(
    record: PaperRecord,
    fields: Sequence[str],
    include_venue: bool,
    anonymize_authors: bool = True,
) -> str:
    """Concatenate the requested field texts with ' [SEP] ', optionally venue-prefixed."""
    parts: list[str] = []
    for name in fields:
        if name not in COMPOSE_FIELDS:
            raise ComposeError(f"unknown field: {name}")
        if name == "title":
            value = record.title
        elif name == "abstract":
            value = record.abstract
        elif name == "author":
            value = render_author_text(record, anonymize=anonymize_authors)
        elif name == "capability":
            value = record.capability_text
        else:
            value = record.idea_text
        if not value:
            raise ComposeError(f"record {record.record_id} missing field: {name}")
        parts.append(value)
    text = f" {SEP_TEXT} ".join(parts)
    if include_venue:
        text = f"venue: {record.venue} {SEP_TEXT} {text}" if parts else f"venue: {record.venue}"
    return text


def encode(
    text: str,
    config: EncoderConfig,
    weights: PooledTextEncoder,
    mode: str = "eval",
    source_field: str = "composite",
) -> PooledVector:
    """Pool one text through ``weights``; eval mode is deterministic for fixed weights."""
    if not text:
        raise ValueError("text must be non-empty")
    if weights.config != config:
        raise EncodeError("weights were built for a different encoder configuration")
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be train or eval, got {mode!r}")
    was_training = weights.training
    weights.train(mode == "train")
    try:
        if mode == "eval":
            with torch.no_grad():
                values = weights.encode_texts([text])[0]
        else:
            values = weights.encode_texts([text])[0]
    finally:
        weights.train(was_training)
    if not torch.isfinite(values).all():
        raise EncodeError("encoder produced non-finite activations")
    return PooledVector(values=values, source_field=source_field)
