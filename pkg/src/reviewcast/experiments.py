"""Desk-scale experiment pipelines over the planted-signal corpus.

These wire the corpus, encoders, fusion, capability predictor, and training
harness into the three study designs the package ships with: input-combination
baselines, fusion comparison, and capability-model replacement.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import torch

from .capability import BiLevelConfig, CapabilityPredictor, compute_targets, initialize_from_pretrained
from .corpus import PaperRecord, make_split
from .encoder import EncoderConfig
from .evaluation import add_intercept, ols_fit, pearson_corr_matrix
from .models import ArchSpec, ThreeWayPredictedCapability, build_example, build_model
from .training import (
    TrainConfig,
    TrainData,
    TrialResult,
    evaluate_model,
    set_determinism,
    train_capability_predictor,
    train_model,
)

TOY_ENCODER = EncoderConfig(hidden_size=32, max_tokens=64, vocab_id="hash-4k", layer_count=2, head_count=4)
# Toy encoders are not pretrained, so the recipe's learning rates scale up
# 100x while keeping the 5x head-to-backbone ratio.
TOY_LR_BACKBONE = 2e-3
TOY_LR_HEAD = 1e-2


def toy_train_config(objective: str = "rating", epochs: int = 8, **overrides) -> TrainConfig:
    defaults = dict(
        lr_backbone=TOY_LR_BACKBONE,
        lr_head=TOY_LR_HEAD,
        epochs=epochs,
        effective_batch=64,
        objective=objective,
    )
    defaults.update(overrides)
    return TrainConfig(**defaults)


@dataclass
class PlantedSignalReport:
    author_only: TrialResult
    three_way: TrialResult
    capability_only: TrialResult
    cap_pred: TrialResult
    predictor_fit: dict
    runtime_s: float
    extras: dict = field(default_factory=dict)

    @property
    def three_way_vs_author_ratio(self) -> float:
        return self.three_way.test_metrics["mse"] / self.author_only.test_metrics["mse"]

    @property
    def cap_pred_relative_degradation(self) -> float:
        base = self.three_way.test_metrics["mse"]
        return (self.cap_pred.test_metrics["mse"] - base) / base


def run_planted_signal_experiment(
    records: list[PaperRecord],
    seed: int = 42,
    encoder_config: EncoderConfig = TOY_ENCODER,
    epochs: int = 8,
    fusion_variant: str = "sa1",
    predictor_lr: float = 1e-3,
    with_unpretrained_variant: bool = False,
) -> PlantedSignalReport:
    """Author-only baseline vs three-way fusion vs predicted-capability replacement."""
    started = time.time()
    data = TrainData(records=records, split=make_split(records, seed=42))
    config = toy_train_config(epochs=epochs)
    d = encoder_config.hidden_size

    author_result, author_model = train_model(
        ArchSpec(kind="single", encoder=encoder_config, fields=("author",)),
        data,
        config,
        seed=seed,
        return_model=True,
    )
    three_way_result = train_model(
        ArchSpec(kind="three-way", encoder=encoder_config, fusion_variant=fusion_variant),
        data,
        config,
        seed=seed,
    )
    capability_result, capability_model = train_model(
        ArchSpec(kind="single", encoder=encoder_config, fields=("capability",)),
        data,
        config,
        seed=seed,
        return_model=True,
    )

    # Frozen targets: c from the capability model, the anchor from the author
    # model, y_c through the capability model's own prediction head.
    records_by_id = {r.record_id: r for r in records}
    examples_by_id = {
        rid: build_example(records_by_id[rid], "rating", ()) for rid in records_by_id
    }
    all_ids = list(examples_by_id)
    for module in (author_model, capability_model):
        for p in module.parameters():
            p.requires_grad_(False)
    targets = compute_targets(
        all_ids,
        [examples_by_id[r].branch_texts["capability"] for r in all_ids],
        [examples_by_id[r].branch_texts["author"] for r in all_ids],
        capability_model.encoder,
        author_model.encoder,
        capability_model.head,
    )

    bilevel = BiLevelConfig(level1=encoder_config, level2=encoder_config, target_dim=d)
    set_determinism(seed)
    predictor = CapabilityPredictor(bilevel)
    initialize_from_pretrained(predictor, author_model.encoder, capability_model.encoder)
    train_examples = [examples_by_id[rid] for rid in data.split.train]
    predictor_fit = train_capability_predictor(
        predictor,
        train_examples,
        targets,
        capability_model.head,
        epochs=epochs,
        lr=predictor_lr,
        seed=seed,
    )

    set_determinism(seed)
    cap_pred_model = ThreeWayPredictedCapability(
        encoder_config, bilevel, fusion_variant, scalar_bias=False
    )
    cap_pred_model.capability_predictor.load_state_dict(predictor.state_dict())
    cap_pred_arch = ArchSpec(
        kind="cap-pred", encoder=encoder_config, fusion_variant=fusion_variant, bilevel=bilevel
    )
    cap_pred_result = train_model(
        cap_pred_arch, data, config, seed=seed, initial_model=cap_pred_model
    )

    extras = {}
    if with_unpretrained_variant:
        set_determinism(seed + 1)
        cold_model = ThreeWayPredictedCapability(
            encoder_config, bilevel, fusion_variant, scalar_bias=False
        )
        extras["cap_pred_unpretrained"] = train_model(
            cap_pred_arch, data, config, seed=seed, initial_model=cold_model
        )

    return PlantedSignalReport(
        author_only=author_result,
        three_way=three_way_result,
        capability_only=capability_result,
        cap_pred=cap_pred_result,
        predictor_fit=predictor_fit,
        runtime_s=time.time() - started,
        extras=extras,
    )


def run_fusion_comparison(
    records: list[PaperRecord],
    variants: tuple[str, ...] = ("avg", "r1", "gated", "sa1", "sa2", "tf-1l-1h", "tf-1l-4h"),
    objective: str = "rating",
    seed: int = 42,
    encoder_config: EncoderConfig = TOY_ENCODER,
    epochs: int = 4,
) -> dict[str, dict[str, float]]:
    """Test metrics per fusion variant, rows keyed like the comparison tables."""
    data = TrainData(records=records, split=make_split(records, seed=42))
    config = toy_train_config(objective=objective, epochs=epochs)
    rows: dict[str, dict[str, float]] = {}
    for variant in variants:
        arch = ArchSpec(kind="three-way", encoder=encoder_config, fusion_variant=variant)
        result = train_model(arch, data, config, seed=seed)
        rows[variant] = result.test_metrics
    return rows


def run_output_regression(
    records: list[PaperRecord],
    seed: int = 42,
    encoder_config: EncoderConfig = TOY_ENCODER,
    epochs: int = 4,
    input_sets: dict[str, tuple[str, ...]] | None = None,
):
    """Regress test-set ratings on single-encoder model outputs and correlate them.

    Mirrors the output-significance analysis: fit one single-encoder model per
    input combination, collect test predictions, then OLS them against the
    rating with the model outputs as regressors.
    """
    input_sets = input_sets or {
        "author": ("author",),
        "capability": ("capability",),
        "idea": ("idea",),
    }
    data = TrainData(records=records, split=make_split(records, seed=42))
    config = toy_train_config(epochs=epochs)
    records_by_id = {r.record_id: r for r in records}
    test_ids = list(data.split.test)
    labels = np.array([records_by_id[r].avg_rating for r in test_ids])
    outputs: dict[str, np.ndarray] = {}
    for name, fields in input_sets.items():
        arch = ArchSpec(kind="single", encoder=encoder_config, fields=fields)
        _, model = train_model(arch, data, config, seed=seed, return_model=True)
        test_examples = [build_example(records_by_id[r], "rating", fields) for r in test_ids]
        batch = model.prepare(test_examples)
        model.eval()
        with torch.no_grad():
            preds = model(batch)
        outputs[name] = preds.numpy().astype(float)
    design = add_intercept(np.column_stack([outputs[n] for n in input_sets]))
    report = ols_fit(design, labels, names=["const"] + list(input_sets))
    corr = pearson_corr_matrix({"rating": labels, **outputs})
    return report, corr, outputs
