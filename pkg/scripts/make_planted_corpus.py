#!/usr/bin/env python3
"""Generate the planted-signal corpus as NDJSON plus its seed-42 split manifest."""

import argparse
from pathlib import Path

from reviewcast.corpus import make_split, write_records_ndjson, write_split_manifest
from reviewcast.planted import PlantedSpec, generate_planted_corpus


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n-records", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--out-dir", type=Path, default=Path("data"))
    args = parser.parse_args()

    args.out_dir.mkdir(parents=True, exist_ok=True)
    records = generate_planted_corpus(PlantedSpec(n_records=args.n_records, seed=args.seed))
    records_path = args.out_dir / "planted.ndjson"
    split_path = args.out_dir / "planted_split.json"
    write_records_ndjson(records, records_path)
    write_split_manifest(make_split(records, seed=42), split_path)
    accept_rate = sum(r.accepted for r in records) / len(records)
    print(f"wrote {len(records)} records -> {records_path} (accept rate {accept_rate:.3f})")
    print(f"wrote split manifest -> {split_path}")


if __name__ == "__main__":
    main()
