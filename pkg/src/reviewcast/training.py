"""Fine-tuning and fusion-training harness.

Two parameter groups (backbone at 2e-5, heads/fusion at 1e-4) under AdamW with
decoupled weight decay 0.01, linear warmup over 10% of optimizer steps then
linear decay, per-epoch validation, min-validation-loss checkpointing, and
median / mean-and-std aggregation over seeds.
"""

from __future__ import annotations

import copy
import json
import random
import statistics
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
from torch import nn

from .capability import CapabilityPredictor, TargetCache, batch_capability_loss
from .corpus import DatasetSplit, PaperRecord
from .evaluation import classification_metrics, regression_metrics
from .models import ArchSpec, Batch, Example, audit_param_groups, build_example, build_model

OBJECTIVES = ("rating", "acceptance")


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    lr_backbone: float = 2e-5
    lr_head: float = 1e-4
    weight_decay: float = 0.01
    warmup_fraction: float = 0.1
    epochs: int = 8
    effective_batch: int = 64
    micro_batch: int | None = None  # < effective_batch enables gradient accumulation
    seeds: tuple[int, ...] = (42, 0, 1, 2, 3)
    objective: str = "rating"
    deterministic: bool = True

    def __post_init__(self):
        if not 0.0 < self.warmup_fraction < 1.0:
            raise ValueError("warmup_fraction must lie strictly between 0 and 1")
        if self.lr_backbone <= 0 or self.lr_head <= 0:
            raise ValueError("learning rates must be positive")
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}")
        if self.micro_batch is not None and self.micro_batch > self.effective_batch:
            raise ValueError("micro_batch cannot exceed effective_batch")


@dataclass
class TrialResult:
    seed: int
    best_epoch: int
    val_loss: float
    test_metrics: dict[str, float]
    epoch_log: list[dict] = field(default_factory=list)
    initial_train_loss: float = float("nan")


def select_best_epoch(val_losses: Sequence[float]) -> tuple[int, float]:
    """1-based epoch with minimum validation loss; ties keep the earlier epoch."""
    if not val_losses:
        raise ValueError("no epochs to select from")
    best_epoch, best = 1, val_losses[0]
    for i, v in enumerate(val_losses[1:], start=2):
        if v < best:
            best_epoch, best = i, v
    return best_epoch, best


@dataclass
class TrainData:
    records: list[PaperRecord]
    split: DatasetSplit


def set_determinism(seed: int) -> None:
    random.seed(seed)
    np.random.seed(seed % 2**32)
    torch.manual_seed(seed)


def schedule_multiplier(step: float, total_steps: int, warmup_steps: int) -> float:
    """Linear warmup to exactly 1 at the warmup boundary, then linear decay to 0."""
    if total_steps <= 0:
        raise ValueError("total_steps must be positive")
    step = min(max(step, 0.0), float(total_steps))
    if warmup_steps > 0 and step <= warmup_steps:
        return step / warmup_steps
    if total_steps == warmup_steps:
        return 1.0
    return (total_steps - step) / (total_steps - warmup_steps)


def warmup_steps_for(total_steps: int, warmup_fraction: float) -> int:
    return int(total_steps * warmup_fraction)


def _examples_for(
    records_by_id: dict[str, PaperRecord], ids: Sequence[str], objective: str, fields: Sequence[str]
) -> list[Example]:
    examples = []
    for rid in ids:
        example = build_example(records_by_id[rid], objective, fields)
        if example.label is None:
            raise TrainingError(f"record {rid} lacks a {objective} label")
        examples.append(example)
    return examples


def _loss_sum(scores: torch.Tensor, labels: torch.Tensor, objective: str) -> torch.Tensor:
    if objective == "rating":
        return ((scores - labels) ** 2).sum()
    return nn.functional.binary_cross_entropy_with_logits(scores, labels, reduction="sum")


def evaluate_model(
    model: nn.Module, batch: Batch, labels: torch.Tensor, objective: str, micro: int = 256
) -> tuple[float, dict[str, float]]:
    """Mean loss plus objective metrics over a prepared example set."""
    model.eval()
    scores = []
    with torch.no_grad():
        for start in range(0, batch.size, micro):
            idx = torch.arange(start, min(start + micro, batch.size))
            scores.append(model(batch.select(idx)))
    preds = torch.cat(scores)
    loss = float(_loss_sum(preds, labels, objective) / labels.shape[0])
    if objective == "rating":
        metrics = regression_metrics(preds.tolist(), labels.tolist())
    else:
        probs = torch.sigmoid(preds).tolist()
        metrics = classification_metrics(probs, [bool(l) for l in labels.tolist()], 0.5)
    return loss, metrics


def train_model(
    arch: ArchSpec,
    data: TrainData,
    config: TrainConfig,
    seed: int,
    run_dir: str | Path | None = None,
    initial_model: nn.Module | None = None,
    return_model: bool = False,
):
    """One trial: train on the split's train part, checkpoint on val, score on test."""
    if config.deterministic:
        set_determinism(seed)
    records_by_id = {r.record_id: r for r in data.records}
    for part, ids in (("train", data.split.train), ("val", data.split.val), ("test", data.split.test)):
        if not ids:
            raise TrainingError(f"split part {part!r} is empty")
    train_examples = _examples_for(records_by_id, data.split.train, config.objective, arch.fields)
    val_examples = _examples_for(records_by_id, data.split.val, config.objective, arch.fields)
    test_examples = _examples_for(records_by_id, data.split.test, config.objective, arch.fields)

    model = initial_model if initial_model is not None else build_model(arch, config.objective)
    audit_param_groups(model)
    optimizer = torch.optim.AdamW(
        [
            {"params": model.backbone_parameters(), "lr": config.lr_backbone},
            {"params": model.head_parameters(), "lr": config.lr_head},
        ],
        weight_decay=config.weight_decay,
    )

    train_batch = model.prepare(train_examples)
    val_batch = model.prepare(val_examples)
    test_batch = model.prepare(test_examples)
    train_labels = torch.tensor([ex.label for ex in train_examples], dtype=torch.float32)
    val_labels = torch.tensor([ex.label for ex in val_examples], dtype=torch.float32)
    test_labels = torch.tensor([ex.label for ex in test_examples], dtype=torch.float32)

    n_train = len(train_examples)
    steps_per_epoch = (n_train + config.effective_batch - 1) // config.effective_batch
    total_steps = steps_per_epoch * config.epochs
    warmup_steps = warmup_steps_for(total_steps, config.warmup_fraction)
    micro = config.micro_batch or config.effective_batch

    run_path = Path(run_dir) if run_dir is not None else None
    if run_path is not None:
        run_path.mkdir(parents=True, exist_ok=True)
        snapshot = {"arch": _arch_snapshot(arch), "config": asdict(config), "seed": seed}
        (run_path / "config.json").write_text(json.dumps(snapshot, indent=2) + "\n")

    generator = torch.Generator().manual_seed(seed)
    initial_train_loss, _ = evaluate_model(model, train_batch, train_labels, config.objective)
    best_val = float("inf")
    best_epoch = 0
    best_state: dict | None = None
    completed_steps = 0
    epoch_log: list[dict] = []
    metrics_file = (run_path / "metrics.ndjson").open("w") if run_path is not None else None
    try:
        for epoch in range(1, config.epochs + 1):
            model.train()
            order = torch.randperm(n_train, generator=generator)
            epoch_loss_sum = 0.0
            for start in range(0, n_train, config.effective_batch):
                group = order[start : start + config.effective_batch]
                optimizer.zero_grad()
                # Micro-chunks each contribute sum-loss / group-size, so the
                # accumulated gradient equals the true mean-batch gradient.
                for m_start in range(0, len(group), micro):
                    idx = group[m_start : m_start + micro]
                    scores = model(train_batch.select(idx))
                    loss = _loss_sum(scores, train_labels[idx], config.objective) / len(group)
                    if not torch.isfinite(loss):
                        raise TrainingError(
                            f"non-finite loss at epoch {epoch}, step {completed_steps}"
                        )
                    loss.backward()
                    epoch_loss_sum += float(loss.detach()) * len(group)
                multiplier = schedule_multiplier(completed_steps + 1, total_steps, warmup_steps)
                for param_group, base_lr in zip(
                    optimizer.param_groups, (config.lr_backbone, config.lr_head)
                ):
                    param_group["lr"] = base_lr * multiplier
                optimizer.step()
                completed_steps += 1
            val_loss, val_metrics = evaluate_model(model, val_batch, val_labels, config.objective)
            entry = {
                "epoch": epoch,
                "train_loss": epoch_loss_sum / n_train,
                "val_loss": val_loss,
                **{f"val_{k}": v for k, v in val_metrics.items()},
            }
            epoch_log.append(entry)
            if metrics_file is not None:
                metrics_file.write(json.dumps(entry) + "\n")
                metrics_file.flush()
            if val_loss < best_val:  # strict: ties keep the earlier epoch
                best_val = val_loss
                best_epoch = epoch
                best_state = copy.deepcopy(model.state_dict())
    finally:
        if metrics_file is not None:
            metrics_file.close()

    model.load_state_dict(best_state)
    _, test_metrics = evaluate_model(model, test_batch, test_labels, config.objective)
    result = TrialResult(
        seed=seed,
        best_epoch=best_epoch,
        val_loss=best_val,
        test_metrics=test_metrics,
        epoch_log=epoch_log,
        initial_train_loss=initial_train_loss,
    )
    if run_path is not None:
        torch.save({"state_dict": best_state, "best_epoch": best_epoch}, run_path / "best.pt")
        summary = {
            "seed": seed,
            "best_epoch": best_epoch,
            "val_loss": best_val,
            "test_metrics": test_metrics,
        }
        (run_path / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    if return_model:
        return result, model
    return result


def _arch_snapshot(arch: ArchSpec) -> dict:
    payload = {
        "kind": arch.kind,
        "fields": list(arch.fields),
        "fusion_variant": arch.fusion_variant,
        "encoder": asdict(arch.encoder),
    }
    if arch.bilevel is not None:
        payload["bilevel"] = {
            "level1": asdict(arch.bilevel.level1),
            "level2": asdict(arch.bilevel.level2),
            "target_dim": arch.bilevel.target_dim,
            "max_authors": arch.bilevel.max_authors,
        }
    return payload


def aggregate_trials(results: Sequence[TrialResult], mode: str = "median") -> dict:
    """Per-metric median, or mean with population standard deviation."""
    if not results:
        raise ValueError("need at least one trial result")
    keys = set(results[0].test_metrics)
    for r in results[1:]:
        if set(r.test_metrics) != keys:
            raise ValueError("trials report inconsistent metric keys")
    summary: dict = {}
    for key in sorted(keys):
        values = [r.test_metrics[key] for r in results]
        if mode == "median":
            summary[key] = statistics.median(values)
        elif mode == "mean_std":
            summary[key] = {"mean": statistics.fmean(values), "std": float(np.std(values))}
        else:
            raise ValueError(f"unknown aggregation mode {mode!r}")
    return summary


def train_capability_predictor(
    predictor: CapabilityPredictor,
    examples: Sequence[Example],
    targets: TargetCache,
    shared_head: nn.Linear,
    epochs: int = 8,
    lr: float = 2e-5,
    batch_size: int = 32,
    seed: int = 42,
    val_fraction: float = 0.1,
) -> dict:
    """Fit the bi-level predictor against frozen-encoder targets (AdamW, no decay)."""
    set_determinism(seed)
    for p in shared_head.parameters():
        p.requires_grad_(False)
    n_val = max(1, int(len(examples) * val_fraction))
    train_examples = list(examples[:-n_val])
    val_examples = list(examples[-n_val:])
    optimizer = torch.optim.AdamW(predictor.parameters(), lr=lr, weight_decay=0.0)
    generator = torch.Generator().manual_seed(seed)

    def batch_loss(batch_examples: Sequence[Example]) -> torch.Tensor:
        rosters = [ex.roster_fragments for ex in batch_examples]
        ideas = [ex.branch_texts["idea"] for ex in batch_examples]
        c, a, y_c = targets.batch([ex.record_id for ex in batch_examples])
        c_hat = predictor(rosters, ideas)
        return batch_capability_loss(c_hat, c, a, y_c, shared_head)

    best_val = float("inf")
    best_state = None
    history = []
    for epoch in range(1, epochs + 1):
        predictor.train()
        order = torch.randperm(len(train_examples), generator=generator).tolist()
        for start in range(0, len(order), batch_size):
            chunk = [train_examples[i] for i in order[start : start + batch_size]]
            optimizer.zero_grad()
            loss = batch_loss(chunk)
            if not torch.isfinite(loss):
                raise TrainingError(f"non-finite predictor loss at epoch {epoch}")
            loss.backward()
            optimizer.step()
        predictor.eval()
        with torch.no_grad():
            val_loss = float(
                torch.stack(
                    [
                        batch_loss(val_examples[s : s + batch_size])
                        * len(val_examples[s : s + batch_size])
                        for s in range(0, len(val_examples), batch_size)
                    ]
                ).sum()
                / len(val_examples)
            )
        history.append({"epoch": epoch, "val_loss": val_loss})
        if val_loss < best_val:
            best_val = val_loss
            best_state = copy.deepcopy(predictor.state_dict())
    predictor.load_state_dict(best_state)
    return {"best_val_loss": best_val, "history": history}
