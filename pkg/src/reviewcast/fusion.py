"""Top-level merging of the (author, capability, idea) pooled vectors.

Every variant maps a FeatureTriple to one scalar score: self-attention with or
without residual/norm/dropout, a single positional transformer layer read out
at the idea slot, per-source linear maps summed, an elementwise softmax gate,
and a plain average. Stacking order is always (author, capability, idea).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import nn

from .encoder import PooledVector

FUSION_VARIANTS = (
    "avg",
    "sa1",
    "sa2",
    "r1",
    "gated",
    "tf-1l-1h",
    "tf-1l-2h",
    "tf-1l-4h",
    "tf-1l-8h",
)


class DimensionError(ValueError):
    pass


class NumericError(RuntimeError):
    pass


@dataclass
class FeatureTriple:
    h_author: PooledVector
    h_cap: PooledVector
    h_idea: PooledVector

    def __post_init__(self):
        dims = {v.values.shape[-1] for v in (self.h_author, self.h_cap, self.h_idea)}
        if len(dims) != 1:
            raise DimensionError(f"triple has mixed dimensions: {sorted(dims)}")

    @property
    def dim(self) -> int:
        return self.h_author.values.shape[-1]

    def stacked(self) -> torch.Tensor:
        """(3, d) rows in the fixed stacking order author, capability, idea."""
        return torch.stack(
            [self.h_author.values, self.h_cap.values, self.h_idea.values], dim=0
        )


def _check_dim(module: nn.Module, x: torch.Tensor) -> None:
    if x.shape[-1] != module.d:
        raise DimensionError(f"input dimension {x.shape[-1]} != fusion dimension {module.d}")


class SelfAttentionFusion(nn.Module):
    """Single self-attention pass over the stacked triple, summed readout.

    ``residual=False`` is the bare variant (sa1); ``residual=True`` adds the
    residual connection, dropout, and layer norm (sa2).
    """

    def __init__(self, d: int, residual: bool, dropout_rate: float = 0.1, bias: bool = False):
        super().__init__()
        self.d = d
        self.residual = residual
        self.variant_key = "sa2" if residual else "sa1"
        self.w_q = nn.Linear(d, d, bias=False)
        self.w_k = nn.Linear(d, d, bias=False)
        self.w_v = nn.Linear(d, d, bias=False)
        self.readout = nn.Linear(d, 1, bias=False)
        if residual:
            self.dropout = nn.Dropout(dropout_rate)
            self.norm = nn.LayerNorm(d)
        self.out_bias = nn.Parameter(torch.zeros(1)) if bias else None

    def attention(self, x: torch.Tensor) -> torch.Tensor:
        q, k, v = self.w_q(x), self.w_k(x), self.w_v(x)
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.d)
        return torch.softmax(scores, dim=-1) @ v

    def fused_rows(self, x: torch.Tensor) -> torch.Tensor:
        """(..., 3, d) merged sequence: Z for sa1, LayerNorm(X + Dropout(Z)) for sa2."""
        z = self.attention(x)
        if self.residual:
            return self.norm(x + self.dropout(z))
        return z

    def forward(self, h_author: torch.Tensor, h_cap: torch.Tensor, h_idea: torch.Tensor) -> torch.Tensor:
        _check_dim(self, h_author)
        x = torch.stack([h_author, h_cap, h_idea], dim=-2)
        y = self.readout(self.fused_rows(x).sum(dim=-2)).squeeze(-1)
        return y if self.out_bias is None else y + self.out_bias


class TransformerLayerFusion(nn.Module):
    """One multi-head encoder layer (no positional encoding), read out at the idea slot."""

    IDEA_POSITION = 2

    def __init__(self, d: int, head_count: int, dropout_rate: float = 0.1, bias: bool = False):
        super().__init__()
        if d % head_count != 0:
            raise DimensionError(f"d {d} not divisible by head_count {head_count}")
        self.d = d
        self.head_count = head_count
        self.variant_key = f"tf-1l-{head_count}h"
        self.layer = nn.TransformerEncoderLayer(
            d_model=d,
            nhead=head_count,
            dim_feedforward=4 * d,
            dropout=dropout_rate,
            activation="gelu",
            batch_first=True,
        )
        self.readout = nn.Linear(d, 1, bias=False)
        self.out_bias = nn.Parameter(torch.zeros(1)) if bias else None

    def forward(self, h_author: torch.Tensor, h_cap: torch.Tensor, h_idea: torch.Tensor) -> torch.Tensor:
        _check_dim(self, h_author)
        squeeze = h_author.dim() == 1
        x = torch.stack([h_author, h_cap, h_idea], dim=-2)
        if squeeze:
            x = x.unsqueeze(0)
        top = self.layer(x)[:, self.IDEA_POSITION, :]
        y = self.readout(top).squeeze(-1)
        if squeeze:
            y = y.squeeze(0)
        return y if self.out_bias is None else y + self.out_bias


class LinearSumFusion(nn.Module):
    """Per-source linear projections combined by elementwise addition (r1)."""

    def __init__(self, d: int, bias: bool = False):
        super().__init__()
        self.d = d
        self.variant_key = "r1"
        self.w_a = nn.Linear(d, d, bias=False)
        self.w_i = nn.Linear(d, d, bias=False)
        self.w_c = nn.Linear(d, d, bias=False)
        self.readout = nn.Linear(d, 1, bias=False)
        self.out_bias = nn.Parameter(torch.zeros(1)) if bias else None

    def forward(self, h_author: torch.Tensor, h_cap: torch.Tensor, h_idea: torch.Tensor) -> torch.Tensor:
        _check_dim(self, h_author)
        combined = self.w_a(h_author) + self.w_i(h_idea) + self.w_c(h_cap)
        y = self.readout(combined).squeeze(-1)
        return y if self.out_bias is None else y + self.out_bias


class GatedSumFusion(nn.Module):
    """Elementwise softmax gate over projected sources, keyed on the idea projection.

    Gate logits are the elementwise products x_a*x_i, x_c*x_i, x_i*x_i; the
    softmax over the three logits per coordinate is computed with max
    subtraction, which leaves the weights mathematically unchanged. The output
    is the plain coordinate sum of the gated combination (no learned readout).
    """

    def __init__(self, d: int, bias: bool = False):
        super().__init__()
        self.d = d
        self.variant_key = "gated"
        self.w_a = nn.Linear(d, d, bias=False)
        self.w_c = nn.Linear(d, d, bias=False)
        self.w_i = nn.Linear(d, d, bias=False)
        self.out_bias = nn.Parameter(torch.zeros(1)) if bias else None

    def gate_weights(self, h_author: torch.Tensor, h_cap: torch.Tensor, h_idea: torch.Tensor):
        x_a, x_c, x_i = self.w_a(h_author), self.w_c(h_cap), self.w_i(h_idea)
        logits = torch.stack([x_a * x_i, x_c * x_i, x_i * x_i], dim=-2)
        return torch.softmax(logits, dim=-2), (x_a, x_c, x_i)

    def forward(self, h_author: torch.Tensor, h_cap: torch.Tensor, h_idea: torch.Tensor) -> torch.Tensor:
        _check_dim(self, h_author)
        p, (x_a, x_c, x_i) = self.gate_weights(h_author, h_cap, h_idea)
        combined = torch.stack([x_a, x_c, x_i], dim=-2) * p
        y = combined.sum(dim=-2).sum(dim=-1)
        return y if self.out_bias is None else y + self.out_bias


class AverageFusion(nn.Module):
    """Readout of the plain mean of the three sources."""

    def __init__(self, d: int, bias: bool = False):
        super().__init__()
        self.d = d
        self.variant_key = "avg"
        self.readout = nn.Linear(d, 1, bias=False)
        self.out_bias = nn.Parameter(torch.zeros(1)) if bias else None

    def forward(self, h_author: torch.Tensor, h_cap: torch.Tensor, h_idea: torch.Tensor) -> torch.Tensor:
        _check_dim(self, h_author)
        y = self.readout((h_author + h_cap + h_idea) / 3.0).squeeze(-1)
        return y if self.out_bias is None else y + self.out_bias


def build_fusion(
    variant: str, d: int, dropout_rate: float = 0.1, bias: bool = False
) -> nn.Module:
    """Fusion module by table row name: avg / sa1 / sa2 / r1 / gated / tf-1l-<h>h."""
    if variant == "avg":
        return AverageFusion(d, bias=bias)
    if variant == "sa1":
        return SelfAttentionFusion(d, residual=False, bias=bias)
    if variant == "sa2":
        return SelfAttentionFusion(d, residual=True, dropout_rate=dropout_rate, bias=bias)
    if variant == "r1":
        return LinearSumFusion(d, bias=bias)
    if variant == "gated":
        return GatedSumFusion(d, bias=bias)
    if variant.startswith("tf-1l-") and variant.endswith("h"):
        head_count = int(variant[len("tf-1l-") : -1])
        return TransformerLayerFusion(d, head_count, dropout_rate=dropout_rate, bias=bias)
    raise ValueError(f"unknown fusion variant {variant!r}; known: {FUSION_VARIANTS}")


def _score_triple(module: nn.Module, triple: FeatureTriple, mode: str) -> torch.Tensor:
    if triple.dim != module.d:
        raise DimensionError(f"triple dimension {triple.dim} != fusion dimension {module.d}")
    was_training = module.training
    module.train(mode == "train")
    try:
        y = module(triple.h_author.values, triple.h_cap.values, triple.h_idea.values)
    finally:
        module.train(was_training)
    if not torch.isfinite(y).all():
        raise NumericError(f"{module.variant_key} produced a non-finite score")
    return y


def fuse_sa(
    triple: FeatureTriple, params: SelfAttentionFusion, mode: str = "eval"
) -> tuple[float, torch.Tensor]:
    """Self-attention fusion; returns (score, merged 3 x d rows)."""
    y = _score_triple(params, triple, mode)
    was_training = params.training
    params.train(mode == "train")
    try:
        rows = params.fused_rows(triple.stacked())
    finally:
        params.train(was_training)
    return float(y.detach()), rows


def fuse_tf(triple: FeatureTriple, params: TransformerLayerFusion, mode: str = "eval") -> float:
    return float(_score_triple(params, triple, mode).detach())


def fuse_r1(triple: FeatureTriple, params: LinearSumFusion) -> float:
    return float(_score_triple(params, triple, mode="eval").detach())


def fuse_gated(triple: FeatureTriple, params: GatedSumFusion) -> float:
    return float(_score_triple(params, triple, mode="eval").detach())


def fuse_average(triple: FeatureTriple, params: AverageFusion) -> float:
    return float(_score_triple(params, triple, mode="eval").detach())
