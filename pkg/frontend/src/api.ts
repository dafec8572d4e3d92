import { validatePrediction, validateRecommendation } from "./schema.js";
import type {
  IdeaCandidate,
  Prediction,
  Recommendation,
  RosterEntry,
  ScenarioDraft,
  ServiceResult,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

function predictBody(draft: ScenarioDraft) {
  return {
    idea_text: draft.ideaText,
    venue: draft.venue,
    authors: draft.roster.map((a) => ({
      name: a.name,
      position: a.position,
      affiliation: a.affiliation,
      country: a.country,
    })),
    capability_text:
      draft.capabilityMode === "explicit-text" && draft.capabilityText.trim()
        ? draft.capabilityText
        : null,
  };
}

export class ServiceClient {
  constructor(
    private baseUrl: string = "",
    private fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async post<T>(
    path: string,
    body: unknown,
    validate: (payload: unknown) => { valid: true; value: T } | { valid: false; error: string },
  ): Promise<ServiceResult<T>> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}${path}`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(body),
      });
    } catch (err) {
      return { kind: "network_error", message: String(err) };
    }
    if (!response.ok) {
      let message = response.statusText;
      try {
        const detail = (await response.json()) as { detail?: unknown };
        if (detail.detail !== undefined) message = JSON.stringify(detail.detail);
      } catch {
        // keep the status text
      }
      return { kind: "http_error", status: response.status, message };
    }
    let payload: unknown;
    try {
      payload = await response.json();
    } catch (err) {
      return { kind: "invalid_payload", detail: `response is not JSON: ${String(err)}` };
    }
    const checked = validate(payload);
    if (!checked.valid) {
      return { kind: "invalid_payload", detail: checked.error };
    }
    return { kind: "ok", value: checked.value };
  }

  predict(draft: ScenarioDraft): Promise<ServiceResult<Prediction>> {
    return this.post("/v1/predict", predictBody(draft), validatePrediction);
  }

  recommendIdeas(
    draft: ScenarioDraft,
    candidates: IdeaCandidate[],
    objective: string,
  ): Promise<ServiceResult<Recommendation>> {
    const body = {
      authors: predictBody(draft).authors,
      venue: draft.venue,
      capability_text: predictBody(draft).capability_text,
      candidates,
      objective,
    };
    return this.post("/v1/recommend/ideas", body, validateRecommendation);
  }

  recommendAuthors(
    draft: ScenarioDraft,
    candidates: { candidate_id: string; roster: RosterEntry[] }[],
    objective: string,
  ): Promise<ServiceResult<Recommendation>> {
    const body = {
      idea_text: draft.ideaText,
      venue: draft.venue,
      candidates: candidates.map((c) => ({
        candidate_id: c.candidate_id,
        roster: c.roster.map((a) => ({
          name: a.name,
          position: a.position,
          affiliation: a.affiliation,
          country: a.country,
        })),
      })),
      objective,
    };
    return this.post("/v1/recommend/authors", body, validateRecommendation);
  }
}
