#!/usr/bin/env python3
"""Train a small three-way model pair (explicit + predicted capability, rating +
acceptance) on the planted corpus and save it as a servable artifact."""

import argparse
from pathlib import Path

from reviewcast.corpus import make_split
from reviewcast.experiments import TOY_ENCODER, toy_train_config
from reviewcast.models import ArchSpec
from reviewcast.planted import PlantedSpec, generate_planted_corpus
from reviewcast.service import load_artifact, predict_outcome, query_from_payload, save_artifact
from reviewcast.training import TrainData, train_model


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n-records", type=int, default=1000)
    parser.add_argument("--epochs", type=int, default=4)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--fusion", default="sa1")
    parser.add_argument("--out", type=Path, default=Path("artifacts/planted-sa1"))
    args = parser.parse_args()

    records = generate_planted_corpus(PlantedSpec(n_records=args.n_records))
    data = TrainData(records=records, split=make_split(records, seed=42))
    trained = {}
    for objective in ("rating", "acceptance"):
        config = toy_train_config(objective=objective, epochs=args.epochs)
        for source, kind in (("explicit", "three-way"), ("predicted", "cap-pred")):
            arch = ArchSpec(kind=kind, encoder=TOY_ENCODER, fusion_variant=args.fusion)
            result, model = train_model(arch, data, config, seed=args.seed, return_model=True)
            trained[(objective, source)] = (arch, model)
            print(f"{objective}/{source}: best epoch {result.best_epoch}, test {result.test_metrics}")
    save_artifact(args.out, f"planted-{args.fusion}", args.fusion, TOY_ENCODER, trained)
    print(f"saved artifact -> {args.out}")

    # Round-trip smoke: load and answer one query.
    model = load_artifact(args.out)
    sample = query_from_payload(
        {
            "idea_text": records[0].idea_text,
            "venue": records[0].venue,
            "authors": [
                {
                    "name": a.display_name,
                    "position": a.position,
                    "affiliation": a.affiliation,
                    "country": a.country,
                }
                for a in records[0].authors
            ],
            "capability_text": records[0].capability_text,
        }
    )
    response = predict_outcome(sample, model)
    print(
        f"sample prediction: rating {response.rating:.2f}, "
        f"acceptance probability {response.acceptance_probability:.2f} "
        f"(true rating {records[0].avg_rating})"
    )


if __name__ == "__main__":
    main()
