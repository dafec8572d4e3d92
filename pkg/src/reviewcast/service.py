"""Serving and recommendation: artifact registry, predict/recommend, HTTP app.

A loaded artifact answers rating and acceptance queries; the recommender
scores a candidate set with the same underlying model and returns the
descending ranking, so its top element is the argmax over the candidates.
Rating models are venue-conditioned; acceptance models never see venue text.
"""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Protocol, Sequence

import torch

from .capability import BiLevelConfig
from .corpus import AuthorRecord, PaperRecord
from .encoder import EncoderConfig
from .models import ArchSpec, build_example, build_model

RATING_RANGE = (1.0, 10.0)


class ServiceError(Exception):
    status_code = 500


class BadQueryError(ServiceError):
    status_code = 400


class ModelUnavailableError(ServiceError):
    status_code = 503


@dataclass(frozen=True)
class PredictQuery:
    authors: tuple[AuthorRecord, ...]
    idea_text: str
    venue: str
    capability_text: str | None = None

    def __post_init__(self):
        if not self.idea_text or not self.idea_text.strip():
            raise BadQueryError("idea_text is required")
        if not self.authors:
            raise BadQueryError("author roster is required")
        if not self.venue:
            raise BadQueryError("venue is required")

    def as_record(self, capability_source: str) -> PaperRecord:
        capability = self.capability_text if capability_source == "explicit" else None
        return PaperRecord(
            record_id="query",
            title="",
            abstract="",
            authors=self.authors,
            venue=self.venue,
            idea_text=self.idea_text,
            capability_text=capability,
        )


@dataclass(frozen=True)
class RawPrediction:
    rating_raw: float
    acceptance_probability: float
    capability_source: str  # explicit | predicted


@dataclass(frozen=True)
class PredictionResponse:
    rating: float
    acceptance_probability: float
    model_id: str
    fusion_variant: str
    capability_source: str


@dataclass(frozen=True)
class CandidateSet:
    kind: str  # ideas | author_groups
    items: tuple[tuple[str, object], ...]  # (candidate_id, idea text or roster)

    def __post_init__(self):
        if self.kind not in ("ideas", "author_groups"):
            raise BadQueryError(f"unknown candidate kind {self.kind!r}")
        ids = [cid for cid, _ in self.items]
        if len(set(ids)) != len(ids):
            raise BadQueryError("candidate_id values must be unique")


class OutcomeModel(Protocol):
    model_id: str
    fusion_variant: str

    def predict(self, query: PredictQuery) -> RawPrediction: ...


class TorchArtifactModel:
    """Trained encoder/fusion stacks for both objectives behind one query API.

    Entries are keyed by (objective, capability_source); queries with explicit
    capability text use the explicit models, queries without fall back to the
    predicted-capability models when the artifact ships them.
    """

    def __init__(self, model_id: str, fusion_variant: str, entries: dict[tuple[str, str], torch.nn.Module]):
        self.model_id = model_id
        self.fusion_variant = fusion_variant
        self.entries = entries
        for module in entries.values():
            module.eval()
            for p in module.parameters():
                p.requires_grad_(False)

    def _entry(self, objective: str, capability_source: str) -> torch.nn.Module:
        try:
            return self.entries[(objective, capability_source)]
        except KeyError:
            raise BadQueryError(
                f"model {self.model_id} has no {objective} path with "
                f"{capability_source} capability"
            ) from None

    def _score(self, objective: str, query: PredictQuery, capability_source: str) -> float:
        model = self._entry(objective, capability_source)
        record = query.as_record(capability_source)
        example = build_example(record, objective, ())
        batch = model.prepare([example])
        with torch.no_grad():
            return float(model(batch)[0])

    def predict(self, query: PredictQuery) -> RawPrediction:
        source = "explicit" if query.capability_text else "predicted"
        rating_raw = self._score("rating", query, source)
        logit = self._score("acceptance", query, source)
        return RawPrediction(
            rating_raw=rating_raw,
            acceptance_probability=float(torch.sigmoid(torch.tensor(logit))),
            capability_source=source,
        )


def predict_outcome(query: PredictQuery, model: OutcomeModel | None) -> PredictionResponse:
    """Clipped-rating / probability response for one query; read-only on the model."""
    if model is None:
        raise ModelUnavailableError("no model loaded")
    raw = model.predict(query)
    rating = min(max(raw.rating_raw, RATING_RANGE[0]), RATING_RANGE[1])
    return PredictionResponse(
        rating=rating,
        acceptance_probability=min(max(raw.acceptance_probability, 0.0), 1.0),
        model_id=model.model_id,
        fusion_variant=model.fusion_variant,
        capability_source=raw.capability_source,
    )


def _candidate_query(
    fixed: PredictQuery, kind: str, payload: object
) -> PredictQuery:
    if kind == "ideas":
        return PredictQuery(
            authors=fixed.authors,
            idea_text=str(payload),
            venue=fixed.venue,
            capability_text=fixed.capability_text,
        )
    return PredictQuery(
        authors=tuple(payload),
        idea_text=fixed.idea_text,
        venue=fixed.venue,
        capability_text=None,  # roster changed; any explicit capability text is stale
    )


def recommend(
    fixed: PredictQuery,
    candidates: CandidateSet,
    model: OutcomeModel | None,
    objective: str = "rating",
    workers: int = 4,
) -> list[tuple[str, float]]:
    """Score every candidate with the model's underlying f(p, a) and rank.

    Descending score; ties break to the lexicographically smaller candidate_id,
    so the first element is the argmax over the candidate set.
    """
    if model is None:
        raise ModelUnavailableError("no model loaded")
    if objective not in ("rating", "acceptance"):
        raise BadQueryError(f"unknown objective {objective!r}")
    if not candidates.items:
        raise BadQueryError("candidate set is empty")

    def score(item: tuple[str, object]) -> tuple[str, float]:
        cid, payload = item
        raw = model.predict(_candidate_query(fixed, candidates.kind, payload))
        value = raw.rating_raw if objective == "rating" else raw.acceptance_probability
        return cid, float(value)

    if workers > 1 and len(candidates.items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scored = list(pool.map(score, candidates.items))
    else:
        scored = [score(item) for item in candidates.items]
    return sorted(scored, key=lambda pair: (-pair[1], pair[0]))


def roster_from_payload(items: Sequence[dict]) -> tuple[AuthorRecord, ...]:
    return tuple(
        AuthorRecord(
            display_name=item.get("name") or item.get("display_name", ""),
            position=item.get("position", ""),
            affiliation=item.get("affiliation", ""),
            country=item.get("country", ""),
            order_index=i,
        )
        for i, item in enumerate(items)
    )


def query_from_payload(payload: dict) -> PredictQuery:
    """Build a query from the JSON shape the HTTP predict endpoint accepts."""
    return PredictQuery(
        authors=roster_from_payload(payload.get("authors", [])),
        idea_text=payload.get("idea_text", ""),
        venue=payload.get("venue", ""),
        capability_text=payload.get("capability_text"),
    )


def candidates_from_payload(payload: dict) -> CandidateSet:
    items = payload.get("candidates", [])
    if items and "idea_text" in items[0]:
        return CandidateSet(
            kind="ideas", items=tuple((c["candidate_id"], c["idea_text"]) for c in items)
        )
    return CandidateSet(
        kind="author_groups",
        items=tuple((c["candidate_id"], roster_from_payload(c["roster"])) for c in items),
    )


class ModelRegistry:
    def __init__(self):
        self._models: dict[str, OutcomeModel] = {}
        self._default: str | None = None

    def register(self, model: OutcomeModel, default: bool = False) -> None:
        self._models[model.model_id] = model
        if default or self._default is None:
            self._default = model.model_id

    def get(self, model_id: str | None = None) -> OutcomeModel:
        key = model_id or self._default
        if key is None or key not in self._models:
            raise ModelUnavailableError(f"model {key!r} is not loaded")
        return self._models[key]

    def ids(self) -> list[str]:
        return sorted(self._models)


def save_artifact(
    path: str | Path,
    model_id: str,
    fusion_variant: str,
    encoder_config: EncoderConfig,
    trained: dict[tuple[str, str], tuple[ArchSpec, torch.nn.Module]],
) -> None:
    """Persist trained per-objective models plus a manifest to one directory."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for (objective, source), (arch, module) in trained.items():
        weights_name = f"{objective}_{source}.pt"
        torch.save(module.state_dict(), root / weights_name)
        entry = {
            "objective": objective,
            "capability_source": source,
            "kind": arch.kind,
            "fields": list(arch.fields),
            "weights": weights_name,
        }
        if arch.bilevel is not None:
            entry["bilevel"] = {
                "level1": asdict(arch.bilevel.level1),
                "level2": asdict(arch.bilevel.level2),
                "target_dim": arch.bilevel.target_dim,
                "max_authors": arch.bilevel.max_authors,
            }
        entries.append(entry)
    manifest = {
        "model_id": model_id,
        "fusion_variant": fusion_variant,
        "encoder": asdict(encoder_config),
        "entries": entries,
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def load_artifact(path: str | Path) -> TorchArtifactModel:
    root = Path(path)
    manifest = json.loads((root / "manifest.json").read_text())
    encoder_config = EncoderConfig(**manifest["encoder"])
    entries: dict[tuple[str, str], torch.nn.Module] = {}
    for entry in manifest["entries"]:
        bilevel = None
        if entry.get("bilevel"):
            raw = entry["bilevel"]
            bilevel = BiLevelConfig(
                level1=EncoderConfig(**raw["level1"]),
                level2=EncoderConfig(**raw["level2"]),
                target_dim=raw["target_dim"],
                max_authors=raw["max_authors"],
            )
        arch = ArchSpec(
            kind=entry["kind"],
            encoder=encoder_config,
            fields=tuple(entry["fields"]),
            fusion_variant=manifest["fusion_variant"],
            bilevel=bilevel,
        )
        module = build_model(arch, entry["objective"])
        state = torch.load(root / entry["weights"], weights_only=True)
        module.load_state_dict(state)
        entries[(entry["objective"], entry["capability_source"])] = module
    return TorchArtifactModel(
        model_id=manifest["model_id"],
        fusion_variant=manifest["fusion_variant"],
        entries=entries,
    )


def create_app(registry: ModelRegistry, static_dir: str | Path | None = None):
    """FastAPI application over a model registry."""
    from fastapi import FastAPI, HTTPException
    from fastapi.responses import JSONResponse
    from pydantic import BaseModel, Field

    class AuthorIn(BaseModel):
        name: str
        position: str = ""
        affiliation: str = ""
        country: str = ""

    class PredictIn(BaseModel):
        idea_text: str
        authors: list[AuthorIn] = Field(min_length=1)
        venue: str
        capability_text: str | None = None
        model_id: str | None = None

    class PredictOut(BaseModel):
        rating: float
        acceptance_probability: float
        model_id: str
        fusion_variant: str
        capability_source: str

    class AuthorCandidateIn(BaseModel):
        candidate_id: str
        roster: list[AuthorIn] = Field(min_length=1)

    class IdeaCandidateIn(BaseModel):
        candidate_id: str
        idea_text: str

    class RecommendAuthorsIn(BaseModel):
        idea_text: str
        venue: str
        candidates: list[AuthorCandidateIn] = Field(min_length=1)
        objective: str = "rating"
        model_id: str | None = None

    class RecommendIdeasIn(BaseModel):
        authors: list[AuthorIn] = Field(min_length=1)
        venue: str
        capability_text: str | None = None
        candidates: list[IdeaCandidateIn] = Field(min_length=1)
        objective: str = "rating"
        model_id: str | None = None

    class RankedItem(BaseModel):
        candidate_id: str
        score: float

    class RecommendOut(BaseModel):
        objective: str
        ranking: list[RankedItem]

    def roster(authors: list[AuthorIn]) -> tuple[AuthorRecord, ...]:
        return tuple(
            AuthorRecord(
                display_name=a.name,
                position=a.position,
                affiliation=a.affiliation,
                country=a.country,
                order_index=i,
            )
            for i, a in enumerate(authors)
        )

    app = FastAPI(title="reviewcast", version="0.1.0")

    @app.exception_handler(ServiceError)
    async def service_error_handler(_, exc: ServiceError):
        return JSONResponse(status_code=exc.status_code, content={"detail": str(exc)})

    @app.get("/v1/health")
    def health():
        return {"status": "ok", "models": registry.ids()}

    @app.get("/v1/models")
    def models():
        return {"models": registry.ids()}

    @app.post("/v1/predict", response_model=PredictOut)
    def predict(body: PredictIn):
        query = PredictQuery(
            authors=roster(body.authors),
            idea_text=body.idea_text,
            venue=body.venue,
            capability_text=body.capability_text,
        )
        response = predict_outcome(query, registry.get(body.model_id))
        return PredictOut(**asdict(response))

    @app.post("/v1/recommend/authors", response_model=RecommendOut)
    def recommend_authors(body: RecommendAuthorsIn):
        fixed = PredictQuery(
            authors=roster(body.candidates[0].roster),  # placeholder roster; replaced per candidate
            idea_text=body.idea_text,
            venue=body.venue,
        )
        candidates = CandidateSet(
            kind="author_groups",
            items=tuple((c.candidate_id, roster(c.roster)) for c in body.candidates),
        )
        ranking = recommend(fixed, candidates, registry.get(body.model_id), body.objective)
        return RecommendOut(
            objective=body.objective,
            ranking=[RankedItem(candidate_id=cid, score=score) for cid, score in ranking],
        )

    @app.post("/v1/recommend/ideas", response_model=RecommendOut)
    def recommend_ideas(body: RecommendIdeasIn):
        fixed = PredictQuery(
            authors=roster(body.authors),
            idea_text=body.candidates[0].idea_text,  # placeholder idea; replaced per candidate
            venue=body.venue,
            capability_text=body.capability_text,
        )
        candidates = CandidateSet(
            kind="ideas",
            items=tuple((c.candidate_id, c.idea_text) for c in body.candidates),
        )
        ranking = recommend(fixed, candidates, registry.get(body.model_id), body.objective)
        return RecommendOut(
            objective=body.objective,
            ranking=[RankedItem(candidate_id=cid, score=score) for cid, score in ranking],
        )

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
