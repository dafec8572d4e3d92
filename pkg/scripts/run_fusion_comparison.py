#!/usr/bin/env python3
"""Fusion-variant comparison on the planted corpus (rating or acceptance)."""

import argparse
from pathlib import Path

from reviewcast.evaluation import write_metrics_report
from reviewcast.experiments import run_fusion_comparison
from reviewcast.planted import PlantedSpec, generate_planted_corpus


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n-records", type=int, default=1000)
    parser.add_argument("--objective", choices=["rating", "acceptance"], default="rating")
    parser.add_argument("--epochs", type=int, default=4)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument(
        "--variants",
        default="avg,r1,gated,sa1,sa2,tf-1l-1h,tf-1l-4h",
        help="Comma-separated fusion variant keys.",
    )
    parser.add_argument("--out-prefix", type=Path, default=Path("reports/fusion_comparison"))
    args = parser.parse_args()

    records = generate_planted_corpus(PlantedSpec(n_records=args.n_records))
    rows = run_fusion_comparison(
        records,
        variants=tuple(v.strip() for v in args.variants.split(",")),
        objective=args.objective,
        seed=args.seed,
        epochs=args.epochs,
    )
    args.out_prefix.parent.mkdir(parents=True, exist_ok=True)
    text_path = args.out_prefix.with_suffix(".txt")
    json_path = args.out_prefix.with_suffix(".json")
    write_metrics_report(rows, text_path, json_path)
    print(text_path.read_text())
    print(f"wrote {text_path} and {json_path}")


if __name__ == "__main__":
    main()
