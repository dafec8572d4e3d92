import json

import numpy as np
import pytest
import torch
from torch import nn

from reviewcast.capability import BiLevelConfig, CapabilityPredictor, compute_targets
from reviewcast.corpus import AuthorRecord, PaperRecord, make_split
from reviewcast.encoder import EncoderConfig, PooledTextEncoder
from reviewcast.models import (
    ArchSpec,
    ModelBuildError,
    SingleEncoderModel,
    audit_param_groups,
    build_example,
    build_model,
)
from reviewcast.training import (
    TrainConfig,
    TrainData,
    TrainingError,
    TrialResult,
    aggregate_trials,
    schedule_multiplier,
    select_best_epoch,
    set_determinism,
    train_capability_predictor,
    train_model,
    warmup_steps_for,
)

TOPICS = {"graphs": 3.0, "vision": 5.0, "language": 7.0, "robotics": 9.0}
POSITIONS = ["phd student", "postdoc", "associate professor", "professor"]


def planted_records(n, with_noise_names=True):
    """Tiny corpus whose rating is a deterministic function of the idea topic."""
    records = []
    topics = list(TOPICS)
    for i in range(n):
        topic = topics[i % len(topics)]
        name = f"author {i}" if with_noise_names else "author"
        records.append(
            PaperRecord(
                record_id=f"r{i}",
                title=f"a study of {topic}",
                abstract=f"we look at {topic}",
                authors=(
                    AuthorRecord(name, POSITIONS[i % 4], f"lab {i % 7}", "us", 0),
                    AuthorRecord(f"senior {i % 5}", "professor", f"lab {i % 7}", "us", 1),
                ),
                venue="ICLR2025" if i % 2 else "NeurIPS2024",
                idea_text=f"we study {topic} using method {i % 3}",
                capability_text=f"the group shows {POSITIONS[i % 4]} level skill in {topic}",
                avg_rating=TOPICS[topic],
                accepted=TOPICS[topic] >= 6.0,
            )
        )
    return records


def tiny_arch(fields=("idea",), kind="single", fusion="sa1", dropout=0.1):
    enc = EncoderConfig(
        hidden_size=32, max_tokens=24, layer_count=1, head_count=4, dropout=dropout
    )
    return ArchSpec(kind=kind, encoder=enc, fields=fields, fusion_variant=fusion)


def tiny_config(**overrides):
    defaults = dict(
        lr_backbone=1e-3,
        lr_head=1e-2,
        epochs=4,
        effective_batch=8,
        objective="rating",
    )
    defaults.update(overrides)
    return TrainConfig(**defaults)


class TestTrainConfig:
    def test_defaults_match_recipe(self):
        cfg = TrainConfig()
        assert cfg.lr_backbone == 2e-5
        assert cfg.lr_head == 1e-4
        assert cfg.weight_decay == 0.01
        assert cfg.warmup_fraction == 0.1
        assert cfg.epochs == 8
        assert cfg.effective_batch == 64
        assert cfg.seeds == (42, 0, 1, 2, 3)

    def test_warmup_fraction_bounds(self):
        with pytest.raises(ValueError):
            TrainConfig(warmup_fraction=0.0)
        with pytest.raises(ValueError):
            TrainConfig(warmup_fraction=1.0)

    def test_positive_learning_rates(self):
        with pytest.raises(ValueError):
            TrainConfig(lr_backbone=0.0)

    def test_micro_batch_cannot_exceed_effective(self):
        with pytest.raises(ValueError):
            TrainConfig(effective_batch=8, micro_batch=16)


class TestSchedule:
    def test_warmup_step_count_example(self):
        assert warmup_steps_for(800, 0.1) == 80

    def test_boundary_is_exactly_one(self):
        assert schedule_multiplier(80, 800, 80) == 1.0

    def test_linear_on_each_piece(self):
        assert schedule_multiplier(40, 800, 80) == pytest.approx(0.5)
        assert schedule_multiplier(440, 800, 80) == pytest.approx(0.5)
        # second differences vanish within each piece
        warm = [schedule_multiplier(s, 800, 80) for s in range(0, 81)]
        decay = [schedule_multiplier(s, 800, 80) for s in range(80, 801)]
        for series in (warm, decay):
            second = np.diff(series, n=2)
            assert np.allclose(second, 0.0, atol=1e-12)

    def test_monotone_pieces(self):
        warm = [schedule_multiplier(s, 100, 10) for s in range(0, 11)]
        decay = [schedule_multiplier(s, 100, 10) for s in range(10, 101)]
        assert all(b > a for a, b in zip(warm, warm[1:]))
        assert all(b < a for a, b in zip(decay, decay[1:]))

    def test_endpoints(self):
        assert schedule_multiplier(0, 100, 10) == 0.0
        assert schedule_multiplier(100, 100, 10) == 0.0


class TestSelection:
    def test_minimum_wins(self):
        assert select_best_epoch([3.0, 1.0, 2.0]) == (2, 1.0)

    def test_tie_keeps_earlier_epoch(self):
        assert select_best_epoch([3.0, 1.0, 1.0]) == (2, 1.0)

    def test_single_epoch(self):
        assert select_best_epoch([0.5]) == (1, 0.5)


class TestAggregate:
    def test_median_example(self):
        trials = [
            TrialResult(seed=s, best_epoch=1, val_loss=0.0, test_metrics={"mse": m})
            for s, m in enumerate([1.0, 1.2, 1.1, 1.0, 1.3])
        ]
        assert aggregate_trials(trials, "median") == {"mse": 1.1}

    def test_mean_std_population(self):
        trials = [
            TrialResult(seed=s, best_epoch=1, val_loss=0.0, test_metrics={"mse": m})
            for s, m in enumerate([2.0, 4.0])
        ]
        out = aggregate_trials(trials, "mean_std")
        assert out["mse"]["mean"] == pytest.approx(3.0)
        assert out["mse"]["std"] == pytest.approx(1.0)

    def test_single_trial_std_zero(self):
        trials = [TrialResult(seed=0, best_epoch=1, val_loss=0.0, test_metrics={"mae": 2.0})]
        assert aggregate_trials(trials, "mean_std")["mae"]["std"] == 0.0

    def test_inconsistent_keys_error(self):
        trials = [
            TrialResult(seed=0, best_epoch=1, val_loss=0.0, test_metrics={"mse": 1.0}),
            TrialResult(seed=1, best_epoch=1, val_loss=0.0, test_metrics={"mae": 1.0}),
        ]
        with pytest.raises(ValueError, match="inconsistent"):
            aggregate_trials(trials, "median")


class TestParamGroups:
    @pytest.mark.parametrize("kind", ["single", "three-way", "cap-pred"])
    def test_groups_partition_model(self, kind):
        model = build_model(tiny_arch(kind=kind), objective="rating")
        n_backbone, n_heads = audit_param_groups(model)
        assert n_backbone > 0 and n_heads > 0

    def test_overlapping_groups_rejected(self):
        class Broken(SingleEncoderModel):
            def head_parameters(self):
                return list(self.parameters())

        with pytest.raises(ModelBuildError, match="both"):
            audit_param_groups(Broken(EncoderConfig(hidden_size=16, head_count=4)))


class TestGradientAccumulation:
    def test_accumulated_gradients_match_full_batch(self):
        set_determinism(0)
        model = SingleEncoderModel(EncoderConfig(hidden_size=16, max_tokens=12, layer_count=1, head_count=2))
        model.eval()  # no dropout; pure gradient comparison
        records = planted_records(8)
        examples = [build_example(r, "rating", ("idea",)) for r in records]
        batch = model.prepare(examples)
        labels = torch.tensor([ex.label for ex in examples])

        def grads_for(chunks):
            model.zero_grad()
            for idx in chunks:
                scores = model(batch.select(torch.tensor(idx)))
                loss = ((scores - labels[torch.tensor(idx)]) ** 2).sum() / 8.0
                loss.backward()
            return [p.grad.clone() for p in model.parameters() if p.grad is not None]

        full = grads_for([list(range(8))])
        accumulated = grads_for([[0, 1], [2, 3], [4, 5], [6, 7]])
        for g_full, g_acc in zip(full, accumulated):
            assert torch.allclose(g_full, g_acc, atol=1e-6)

    def test_trajectories_agree_between_micro_and_full(self):
        # Dropout off: accumulation equivalence is exact only for
        # deterministic per-example losses.
        records = planted_records(40)
        data = TrainData(records=records, split=make_split(records, seed=42))
        arch = tiny_arch(dropout=0.0)
        r_full = train_model(arch, data, tiny_config(epochs=2), seed=0)
        r_micro = train_model(arch, data, tiny_config(epochs=2, micro_batch=2), seed=0)
        for e_full, e_micro in zip(r_full.epoch_log, r_micro.epoch_log):
            assert e_full["val_loss"] == pytest.approx(e_micro["val_loss"], abs=1e-5)


@pytest.fixture(scope="module")
def data():
    records = planted_records(60)
    return TrainData(records=records, split=make_split(records, seed=42))


class TestTrainModel:

    def test_reproducible_trajectory(self, data):
        r1 = train_model(tiny_arch(), data, tiny_config(epochs=2), seed=42)
        r2 = train_model(tiny_arch(), data, tiny_config(epochs=2), seed=42)
        assert r1.epoch_log == r2.epoch_log

    def test_best_epoch_matches_selection_rule(self, data):
        result = train_model(tiny_arch(), data, tiny_config(), seed=1)
        expect_epoch, expect_loss = select_best_epoch([e["val_loss"] for e in result.epoch_log])
        assert result.best_epoch == expect_epoch
        assert result.val_loss == expect_loss

    def test_planted_signal_overfits(self):
        records = planted_records(200)
        data = TrainData(records=records, split=make_split(records, seed=42))
        result = train_model(
            tiny_arch(dropout=0.0),
            data,
            tiny_config(epochs=8, lr_backbone=2e-3, lr_head=1e-2, effective_batch=4),
            seed=42,
        )
        final_train = result.epoch_log[-1]["train_loss"]
        assert final_train < 0.05 * result.initial_train_loss

    def test_acceptance_objective_metrics(self, data):
        result = train_model(
            tiny_arch(), data, tiny_config(objective="acceptance", epochs=2), seed=0
        )
        assert {"acc", "precision", "recall", "f1"} <= set(result.test_metrics)

    def test_run_dir_layout(self, data, tmp_path):
        run_dir = tmp_path / "run"
        train_model(tiny_arch(), data, tiny_config(epochs=2), seed=0, run_dir=run_dir)
        assert (run_dir / "config.json").exists()
        assert (run_dir / "best.pt").exists()
        assert (run_dir / "summary.json").exists()
        lines = (run_dir / "metrics.ndjson").read_text().strip().splitlines()
        assert len(lines) == 2
        assert "val_loss" in json.loads(lines[0])

    def test_missing_label_rejected(self):
        records = planted_records(30)
        unlabeled = [
            PaperRecord(
                record_id=r.record_id,
                title=r.title,
                abstract=r.abstract,
                authors=r.authors,
                venue=r.venue,
                idea_text=r.idea_text,
                capability_text=r.capability_text,
            )
            for r in records
        ]
        data = TrainData(records=unlabeled, split=make_split(unlabeled, seed=42))
        with pytest.raises(TrainingError, match="label"):
            train_model(tiny_arch(), data, tiny_config(), seed=0)

    def test_three_way_trains(self, data):
        result = train_model(
            tiny_arch(kind="three-way"), data, tiny_config(epochs=2), seed=0
        )
        assert "mse" in result.test_metrics


class TestCapabilityPredictorTraining:
    def test_fit_against_frozen_targets(self):
        set_determinism(7)
        enc_cfg = EncoderConfig(hidden_size=32, max_tokens=24, layer_count=1, head_count=4)
        records = planted_records(24)
        examples = [build_example(r, "rating", ()) for r in records]
        cap_encoder = PooledTextEncoder(enc_cfg)
        author_encoder = PooledTextEncoder(enc_cfg)
        head = nn.Linear(32, 1)
        targets = compute_targets(
            [r.record_id for r in records],
            [r.capability_text for r in records],
            [ex.branch_texts["author"] for ex in examples],
            cap_encoder,
            author_encoder,
            head,
        )
        head_before = head.weight.detach().clone()
        predictor = CapabilityPredictor(
            BiLevelConfig(level1=enc_cfg, level2=enc_cfg, target_dim=32, max_authors=4)
        )
        report = train_capability_predictor(
            predictor, examples, targets, head, epochs=2, lr=1e-3, batch_size=8, seed=0
        )
        assert len(report["history"]) == 2
        assert report["best_val_loss"] <= report["history"][0]["val_loss"]
        assert torch.equal(head.weight.detach(), head_before)
