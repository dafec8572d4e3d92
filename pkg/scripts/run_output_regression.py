#!/usr/bin/env python3
"""Output-significance analysis: OLS of test ratings on single-encoder model
outputs, plus their correlation heat map."""

import argparse
from pathlib import Path

from reviewcast.evaluation import plot_correlation_heatmap, write_ols_report
from reviewcast.experiments import run_output_regression
from reviewcast.planted import PlantedSpec, generate_planted_corpus


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n-records", type=int, default=1000)
    parser.add_argument("--epochs", type=int, default=4)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--out-dir", type=Path, default=Path("reports"))
    args = parser.parse_args()

    records = generate_planted_corpus(PlantedSpec(n_records=args.n_records))
    report, corr, _ = run_output_regression(records, seed=args.seed, epochs=args.epochs)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    write_ols_report(
        {"model outputs": report},
        args.out_dir / "output_ols.txt",
        args.out_dir / "output_ols.json",
    )
    plot_correlation_heatmap(corr, args.out_dir / "output_correlation.png")
    print((args.out_dir / "output_ols.txt").read_text())
    print(f"r_squared = {report.r_squared:.4f}")
    print(f"wrote reports in {args.out_dir}")


if __name__ == "__main__":
    main()
