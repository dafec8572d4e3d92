#!/usr/bin/env python3
"""Capability-model replacement study on the planted corpus.

Trains the author-only baseline, the explicit three-way model, and the
three-way model with the bi-level capability predictor (warm-started from the
pretrained author/capability encoders), then prints the comparison.
"""

import argparse
import json
from pathlib import Path

from reviewcast.experiments import run_planted_signal_experiment
from reviewcast.planted import PlantedSpec, generate_planted_corpus


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n-records", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--epochs", type=int, default=8)
    parser.add_argument("--fusion", default="sa1")
    parser.add_argument("--with-unpretrained", action="store_true",
                        help="Also train the cold-start predictor variant.")
    parser.add_argument("--out", type=Path, default=Path("reports/planted_signal.json"))
    args = parser.parse_args()

    records = generate_planted_corpus(PlantedSpec(n_records=args.n_records))
    report = run_planted_signal_experiment(
        records,
        seed=args.seed,
        epochs=args.epochs,
        fusion_variant=args.fusion,
        with_unpretrained_variant=args.with_unpretrained,
    )
    rows = {
        "author-only": report.author_only.test_metrics,
        "capability-only": report.capability_only.test_metrics,
        f"three-way {args.fusion}": report.three_way.test_metrics,
        "predicted capability (warm)": report.cap_pred.test_metrics,
    }
    if "cap_pred_unpretrained" in report.extras:
        rows["predicted capability (cold)"] = report.extras["cap_pred_unpretrained"].test_metrics
    width = max(len(k) for k in rows)
    for name, metrics in rows.items():
        cells = "  ".join(f"{k}={v:.4f}" for k, v in metrics.items())
        print(f"{name.ljust(width)}  {cells}")
    print(f"three-way vs author-only mse ratio: {report.three_way_vs_author_ratio:.3f}")
    print(f"predictor replacement relative change: {report.cap_pred_relative_degradation:+.3%}")
    print(f"runtime: {report.runtime_s:.0f}s")

    args.out.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "rows": rows,
        "three_way_vs_author_ratio": report.three_way_vs_author_ratio,
        "cap_pred_relative_degradation": report.cap_pred_relative_degradation,
        "predictor_fit": report.predictor_fit,
        "runtime_s": report.runtime_s,
    }
    args.out.write_text(json.dumps(payload, indent=2) + "\n")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
