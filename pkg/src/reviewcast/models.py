"""End-to-end model assemblies: single-encoder baseline, three-way fusion model,
and the three-way variant whose capability branch is the bi-level predictor.

Each model exposes backbone vs head parameter groups (for discriminative
learning rates), a `prepare` step that tokenizes examples once, and a batched
`forward` over the prepared tensors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import torch
from torch import nn

from .capability import BiLevelConfig, CapabilityPredictor
from .corpus import PaperRecord, author_fragments
from .encoder import (
    ComposeError,
    EncoderConfig,
    PooledTextEncoder,
    batch_encode,
    compose_input,
)
from .fusion import build_fusion

THREE_WAY_BRANCHES = ("author", "capability", "idea")


class ModelBuildError(ValueError):
    pass


@dataclass(frozen=True)
class ArchSpec:
    """Model description consumed by the trainer and the artifact loader."""

    kind: str  # single | three-way | cap-pred
    encoder: EncoderConfig
    fields: tuple[str, ...] = ("author", "capability", "idea")  # single-encoder input mix
    fusion_variant: str = "sa1"
    bilevel: BiLevelConfig | None = None

    def __post_init__(self):
        if self.kind not in ("single", "three-way", "cap-pred"):
            raise ModelBuildError(f"unknown arch kind {self.kind!r}")
        if self.kind == "cap-pred" and self.bilevel is None:
            object.__setattr__(
                self,
                "bilevel",
                BiLevelConfig(
                    level1=self.encoder,
                    level2=self.encoder,
                    target_dim=self.encoder.hidden_size,
                ),
            )


@dataclass
class Example:
    """One training/serving instance with branch texts already composed."""

    record_id: str
    branch_texts: dict[str, str]  # branch -> composed input text
    roster_fragments: list[str]
    raw_idea: str
    label: float | None = None


def build_example(record: PaperRecord, objective: str, fields: Sequence[str]) -> Example:
    # Venue conditioning applies to rating prediction only.
    include_venue = objective == "rating"
    branch_texts: dict[str, str] = {}
    for name in dict.fromkeys(list(fields) + list(THREE_WAY_BRANCHES)):
        try:
            branch_texts[name] = compose_input(record, [name], include_venue=include_venue)
        except ComposeError:
            continue  # absent optional fields stay missing; validated at prepare time
    if fields:
        branch_texts["composite"] = compose_input(record, list(fields), include_venue=include_venue)
    if objective == "rating":
        label = record.avg_rating
    else:
        label = None if record.accepted is None else float(record.accepted)
    return Example(
        record_id=record.record_id,
        branch_texts=branch_texts,
        roster_fragments=author_fragments(record),
        raw_idea=record.idea_text or "",
        label=label,
    )


class Batch(dict):
    """Prepared tensors/lists for a full example set, sliceable by index."""

    def select(self, idx: torch.Tensor) -> "Batch":
        out = Batch()
        for key, value in self.items():
            if isinstance(value, torch.Tensor):
                out[key] = value[idx]
            else:
                out[key] = [value[int(i)] for i in idx]
        return out

    @property
    def size(self) -> int:
        first = next(iter(self.values()))
        return len(first)


class SingleEncoderModel(nn.Module):
    """One pooled encoder over the composed field text, plus a linear head."""

    def __init__(self, config: EncoderConfig):
        super().__init__()
        self.encoder = PooledTextEncoder(config)
        self.head = nn.Linear(config.hidden_size, 1)

    def backbone_parameters(self):
        return list(self.encoder.parameters())

    def head_parameters(self):
        return list(self.head.parameters())

    def prepare(self, examples: Sequence[Example]) -> Batch:
        texts = []
        for ex in examples:
            if "composite" not in ex.branch_texts:
                raise ModelBuildError(f"example {ex.record_id} lacks the composed input text")
            texts.append(ex.branch_texts["composite"])
        ids, pad = batch_encode(texts, self.encoder.tokenizer, self.encoder.config.max_tokens)
        return Batch(ids=ids, pad=pad)

    def forward(self, batch: Batch) -> torch.Tensor:
        pooled = self.encoder.pooled(batch["ids"], batch["pad"])
        return self.head(pooled).squeeze(-1)


class ThreeWayModel(nn.Module):
    """Independent author/capability/idea encoders merged by a fusion variant."""

    def __init__(self, config: EncoderConfig, fusion_variant: str, scalar_bias: bool):
        super().__init__()
        self.encoder_author = PooledTextEncoder(config)
        self.encoder_cap = PooledTextEncoder(config)
        self.encoder_idea = PooledTextEncoder(config)
        self.fusion = build_fusion(fusion_variant, config.hidden_size, bias=scalar_bias)
        self.fusion_variant = fusion_variant

    def backbone_parameters(self):
        return (
            list(self.encoder_author.parameters())
            + list(self.encoder_cap.parameters())
            + list(self.encoder_idea.parameters())
        )

    def head_parameters(self):
        return list(self.fusion.parameters())

    def prepare(self, examples: Sequence[Example]) -> Batch:
        batch = Batch()
        for branch, encoder in (
            ("author", self.encoder_author),
            ("capability", self.encoder_cap),
            ("idea", self.encoder_idea),
        ):
            texts = []
            for ex in examples:
                if branch not in ex.branch_texts:
                    raise ModelBuildError(f"example {ex.record_id} lacks branch {branch!r}")
                texts.append(ex.branch_texts[branch])
            ids, pad = batch_encode(texts, encoder.tokenizer, encoder.config.max_tokens)
            batch[f"{branch}_ids"] = ids
            batch[f"{branch}_pad"] = pad
        return batch

    def forward(self, batch: Batch) -> torch.Tensor:
        h_author = self.encoder_author.pooled(batch["author_ids"], batch["author_pad"])
        h_cap = self.encoder_cap.pooled(batch["capability_ids"], batch["capability_pad"])
        h_idea = self.encoder_idea.pooled(batch["idea_ids"], batch["idea_pad"])
        return self.fusion(h_author, h_cap, h_idea)


class ThreeWayPredictedCapability(nn.Module):
    """Three-way model with h_cap replaced by the bi-level capability predictor."""

    def __init__(self, config: EncoderConfig, bilevel: BiLevelConfig, fusion_variant: str, scalar_bias: bool):
        super().__init__()
        if bilevel.target_dim != config.hidden_size:
            raise ModelBuildError(
                f"predictor target dim {bilevel.target_dim} != fusion dim {config.hidden_size}"
            )
        self.encoder_author = PooledTextEncoder(config)
        self.encoder_idea = PooledTextEncoder(config)
        self.capability_predictor = CapabilityPredictor(bilevel)
        self.fusion = build_fusion(fusion_variant, config.hidden_size, bias=scalar_bias)
        self.fusion_variant = fusion_variant

    def backbone_parameters(self):
        return (
            list(self.encoder_author.parameters())
            + list(self.encoder_idea.parameters())
            + list(self.capability_predictor.parameters())
        )

    def head_parameters(self):
        return list(self.fusion.parameters())

    def prepare(self, examples: Sequence[Example]) -> Batch:
        batch = Batch()
        for branch, encoder in (
            ("author", self.encoder_author),
            ("idea", self.encoder_idea),
        ):
            texts = [ex.branch_texts[branch] for ex in examples]
            ids, pad = batch_encode(texts, encoder.tokenizer, encoder.config.max_tokens)
            batch[f"{branch}_ids"] = ids
            batch[f"{branch}_pad"] = pad
        # The predictor's idea input uses the composed idea branch so venue
        # conditioning matches the frozen capability targets.
        batch["rosters"] = [ex.roster_fragments for ex in examples]
        batch["raw_ideas"] = [ex.branch_texts["idea"] for ex in examples]
        return batch

    def forward(self, batch: Batch) -> torch.Tensor:
        h_author = self.encoder_author.pooled(batch["author_ids"], batch["author_pad"])
        h_idea = self.encoder_idea.pooled(batch["idea_ids"], batch["idea_pad"])
        h_cap = self.capability_predictor(batch["rosters"], batch["raw_ideas"])
        return self.fusion(h_author, h_cap, h_idea)


def build_model(arch: ArchSpec, objective: str) -> nn.Module:
    """Fresh model for an architecture description and prediction objective."""
    scalar_bias = objective == "acceptance"
    if arch.kind == "single":
        return SingleEncoderModel(arch.encoder)
    if arch.kind == "three-way":
        return ThreeWayModel(arch.encoder, arch.fusion_variant, scalar_bias)
    if arch.kind == "cap-pred":
        return ThreeWayPredictedCapability(
            arch.encoder, arch.bilevel, arch.fusion_variant, scalar_bias
        )
    raise ModelBuildError(f"unknown arch kind {arch.kind!r}")


def audit_param_groups(model: nn.Module) -> tuple[int, int]:
    """Assert backbone/head groups are disjoint and jointly cover every parameter."""
    backbone = {id(p) for p in model.backbone_parameters()}
    heads = {id(p) for p in model.head_parameters()}
    if backbone & heads:
        raise ModelBuildError("a parameter appears in both backbone and head groups")
    every = {id(p) for p in model.parameters()}
    if backbone | heads != every:
        raise ModelBuildError("parameter groups do not cover the full model")
    return len(backbone), len(heads)
