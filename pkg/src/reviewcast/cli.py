"""Command-line entry points: ingest, extract, split, train, eval, predict,
recommend, serve."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .config import AppConfig, load_config


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None, help="YAML config file.")
@click.option("--seed", type=int, default=42, show_default=True)
@click.pass_context
def main(ctx, config_path, seed):
    """Early-stage review outcome prediction toolkit."""
    ctx.obj = {"config": load_config(config_path), "seed": seed}


def _cfg(ctx) -> AppConfig:
    return ctx.obj["config"]


@main.command()
@click.argument("input_path", type=click.Path(exists=True))
@click.option("--output", "-o", type=click.Path(), required=True)
@click.option("--keep-single-first-author", is_flag=True, help="Skip the repeat-first-author filter.")
@click.pass_context
def ingest(ctx, input_path, output, keep_single_first_author):
    """Validate newline-delimited submission documents into canonical records."""
    from .corpus import filter_first_author_repeat, ingest_records, read_documents_ndjson, write_records_ndjson

    report = ingest_records(read_documents_ndjson(input_path), venues=_cfg(ctx).venues)
    records = report.records
    if not keep_single_first_author:
        records = filter_first_author_repeat(records)
    write_records_ndjson(records, output)
    for rejection in report.rejections:
        click.echo(f"rejected {rejection.record_id}: {rejection.reason}", err=True)
    click.echo(
        f"ingested {len(report.records)} records ({len(report.rejections)} rejected), "
        f"kept {len(records)} after first-author filter -> {output}"
    )


@main.command()
@click.argument("input_path", type=click.Path(exists=True))
@click.option("--output", "-o", type=click.Path(), required=True)
@click.option("--family", type=click.Choice(["idea", "capability", "both"]), default="both")
@click.option("--manuscript-key", default="manuscript_text", show_default=True)
@click.pass_context
def extract(ctx, input_path, output, family, manuscript_key):
    """Fill missing idea/capability text via the configured LLM endpoint."""
    from .corpus import read_documents_ndjson, render_author_text
    from .llm_gateway import LlmClient, extract_capability, extract_idea

    config = _cfg(ctx).gateway
    if not config.base_url:
        raise click.ClickException("LLM_BASE_URL (or gateway.base_url in the config) is required")
    client = LlmClient(config)
    documents = list(read_documents_ndjson(input_path))
    flagged = 0
    with open(output, "w", encoding="utf-8") as fh:
        for doc in documents:
            manuscript = doc.get(manuscript_key, "")
            if manuscript:
                if family in ("idea", "both") and not doc.get("idea_text"):
                    extraction = extract_idea(manuscript, client)
                    doc["idea_text"] = extraction.text
                    if extraction.flagged:
                        flagged += 1
                        doc["idea_flags"] = list(extraction.flag_reasons)
                if family in ("capability", "both") and not doc.get("capability_text"):
                    author_line = "; ".join(
                        f"{a.get('display_name', '')} ( {a.get('position', '')}, "
                        f"{a.get('affiliation', '')}, {a.get('country', '')} )"
                        for a in doc.get("authors", [])
                    )
                    profile = extract_capability(manuscript, author_line, client)
                    doc["capability_text"] = profile.rendered_text
            fh.write(json.dumps(doc, ensure_ascii=False) + "\n")
    click.echo(f"extracted {len(documents)} documents ({flagged} flagged for review) -> {output}")


@main.command()
@click.argument("records_path", type=click.Path(exists=True))
@click.option("--output", "-o", type=click.Path(), default="split.json", show_default=True)
@click.pass_context
def split(ctx, records_path, output):
    """Write the seeded 8:1:1 split manifest for a record file."""
    from .corpus import ingest_records, make_split, read_documents_ndjson, write_split_manifest

    report = ingest_records(read_documents_ndjson(records_path), venues=_cfg(ctx).venues)
    manifest = make_split(report.records, seed=ctx.obj["seed"])
    write_split_manifest(manifest, output)
    click.echo(
        f"split {len(report.records)} records into "
        f"{len(manifest.train)}/{len(manifest.val)}/{len(manifest.test)} -> {output}"
    )


@main.command()
@click.option("--arch", type=click.Choice(["single", "three-way", "cap-pred"]), default="three-way", show_default=True)
@click.option("--fusion", default="sa1", show_default=True)
@click.option("--objective", type=click.Choice(["rating", "acceptance"]), default=None)
@click.option("--fields", default="author,capability,idea", show_default=True, help="Input mix for --arch single.")
@click.option("--records", "records_path", type=click.Path(exists=True), required=True)
@click.option("--split", "split_path", type=click.Path(exists=True), default=None, help="Existing split manifest; default reshuffles with --seed.")
@click.option("--run-dir", type=click.Path(), default="runs/latest", show_default=True)
@click.pass_context
def train(ctx, arch, fusion, objective, fields, records_path, split_path, run_dir):
    """Train one trial and write the run directory."""
    import dataclasses

    from .corpus import ingest_records, make_split, read_documents_ndjson, read_split_manifest
    from .models import ArchSpec
    from .training import TrainData, train_model

    cfg = _cfg(ctx)
    report = ingest_records(read_documents_ndjson(records_path), venues=cfg.venues)
    manifest = read_split_manifest(split_path) if split_path else make_split(report.records, seed=42)
    train_config = cfg.train
    if objective:
        train_config = dataclasses.replace(train_config, objective=objective)
    spec = ArchSpec(
        kind=arch,
        encoder=cfg.encoder,
        fields=tuple(f.strip() for f in fields.split(",") if f.strip()),
        fusion_variant=fusion,
    )
    result = train_model(
        spec, TrainData(records=report.records, split=manifest), train_config,
        seed=ctx.obj["seed"], run_dir=run_dir,
    )
    click.echo(json.dumps({
        "seed": result.seed,
        "best_epoch": result.best_epoch,
        "val_loss": result.val_loss,
        "test_metrics": result.test_metrics,
        "run_dir": str(run_dir),
    }, indent=2))


@main.group(name="eval")
def eval_group():
    """Reports and plots over stored predictions and run summaries."""


@eval_group.command("report")
@click.argument("summaries", nargs=-1, type=click.Path(exists=True), required=True)
@click.option("--output-prefix", "-o", type=click.Path(), default="eval_report", show_default=True)
@click.option("--mode", type=click.Choice(["median", "mean_std"]), default="median", show_default=True)
def eval_report(summaries, output_prefix, mode):
    """Aggregate run summary.json files into aligned-text and JSON tables."""
    from .evaluation import write_metrics_report
    from .training import TrialResult, aggregate_trials

    by_name: dict[str, list[TrialResult]] = {}
    for path in summaries:
        payload = json.loads(Path(path).read_text())
        name = payload.get("name") or Path(path).parent.name
        by_name.setdefault(name, []).append(
            TrialResult(
                seed=payload.get("seed", 0),
                best_epoch=payload.get("best_epoch", 0),
                val_loss=payload.get("val_loss", 0.0),
                test_metrics=payload["test_metrics"],
            )
        )
    rows = {}
    for name, trials in by_name.items():
        aggregated = aggregate_trials(trials, mode)
        if mode == "mean_std":
            rows[name] = {k: v["mean"] for k, v in aggregated.items()}
            rows[name].update({f"{k}_std": v["std"] for k, v in aggregated.items()})
        else:
            rows[name] = aggregated
    text_path, json_path = f"{output_prefix}.txt", f"{output_prefix}.json"
    write_metrics_report(rows, text_path, json_path)
    click.echo(Path(text_path).read_text())
    click.echo(f"wrote {text_path} and {json_path}")


@eval_group.command("plot")
@click.argument("predictions_path", type=click.Path(exists=True))
@click.option("--output-dir", "-o", type=click.Path(), default="plots", show_default=True)
@click.option("--target-mean", type=float, default=None, help="Calibrate scores to this mean.")
@click.option("--target-std", type=float, default=None, help="Calibrate scores to this std.")
def eval_plot(predictions_path, output_dir, target_mean, target_std):
    """Correlation heat map and calibration plot from a predictions JSON file.

    Expected file shape: {"series": {name: [...], ...}, "labels": [...],
    "scores": [...]} -- series power the heat map; scores+labels the
    calibration panel.
    """
    from .evaluation import calibrate_linear, pearson_corr_matrix, plot_calibration, plot_correlation_heatmap

    payload = json.loads(Path(predictions_path).read_text())
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if payload.get("series"):
        corr = pearson_corr_matrix(payload["series"])
        plot_correlation_heatmap(corr, out / "correlation.png")
        written.append("correlation.png")
    if payload.get("scores") and payload.get("labels"):
        labels = payload["labels"]
        import numpy as np

        mean = target_mean if target_mean is not None else float(np.mean(labels))
        std = target_std if target_std is not None else float(np.std(labels))
        calibrated = calibrate_linear(payload["scores"], mean, std)
        plot_calibration(payload["scores"], calibrated, labels, out / "calibration.png")
        written.append("calibration.png")
    if not written:
        raise click.ClickException("predictions file has neither 'series' nor 'scores'+'labels'")
    click.echo(f"wrote {', '.join(written)} in {out}")


@main.command()
@click.option("--artifact", type=click.Path(exists=True), required=True)
@click.option("--query", "query_path", type=click.Path(exists=True), default=None, help="JSON query file; default reads stdin.")
def predict(artifact, query_path):
    """Predict rating and acceptance probability for one query."""
    from dataclasses import asdict

    from .service import load_artifact, predict_outcome, query_from_payload

    payload = json.loads(Path(query_path).read_text() if query_path else sys.stdin.read())
    model = load_artifact(artifact)
    response = predict_outcome(query_from_payload(payload), model)
    click.echo(json.dumps(asdict(response), indent=2))


@main.command()
@click.option("--artifact", type=click.Path(exists=True), required=True)
@click.option("--request", "request_path", type=click.Path(exists=True), default=None, help="JSON request file; default reads stdin.")
@click.option("--objective", type=click.Choice(["rating", "acceptance"]), default="rating", show_default=True)
def recommend(artifact, request_path, objective):
    """Rank a candidate set of ideas or author groups for a fixed counterpart."""
    from .service import candidates_from_payload, load_artifact
    from .service import recommend as recommend_candidates
    from .service import query_from_payload

    payload = json.loads(Path(request_path).read_text() if request_path else sys.stdin.read())
    model = load_artifact(artifact)
    fixed_payload = dict(payload)
    candidates = candidates_from_payload(payload)
    if candidates.kind == "ideas":
        fixed_payload.setdefault("idea_text", candidates.items[0][1])
    else:
        fixed_payload.setdefault("authors", [])
        if not fixed_payload["authors"]:
            fixed_payload["authors"] = [
                {"name": a.display_name, "position": a.position, "affiliation": a.affiliation, "country": a.country}
                for a in candidates.items[0][1]
            ]
    ranking = recommend_candidates(
        query_from_payload(fixed_payload), candidates, model, objective
    )
    click.echo(json.dumps({"objective": objective, "ranking": [
        {"candidate_id": cid, "score": score} for cid, score in ranking
    ]}, indent=2))


@main.command()
@click.option("--artifact", "artifacts", type=click.Path(exists=True), multiple=True, required=True)
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@click.option("--static", "static_dir", type=click.Path(), default=None, help="Directory with the built what-if UI.")
@click.pass_context
def serve(ctx, artifacts, host, port, static_dir):
    """Serve the prediction and recommendation API (plus the UI when built)."""
    import uvicorn

    from .service import ModelRegistry, create_app, load_artifact

    cfg = _cfg(ctx).service
    registry = ModelRegistry()
    for path in artifacts:
        registry.register(load_artifact(path))
    app = create_app(registry, static_dir=static_dir or cfg.static_dir)
    uvicorn.run(app, host=host or cfg.host, port=port or cfg.port)


if __name__ == "__main__":
    main()
