import type { ServiceClient } from "./api.js";
import {
  renderErrorPanel,
  renderFieldError,
  renderPredictionPanel,
  renderRecommendationTable,
} from "./render.js";
import { ScenarioState, canPredict } from "./state.js";
import type { IdeaCandidate, RosterEntry, ServiceResult } from "./types.js";

export interface ViewUpdate {
  predictionPanel?: string;
  recommendationTable?: string;
  errorPanel?: string;
  fieldError?: string;
}

function errorUpdate<T>(result: ServiceResult<T>): ViewUpdate {
  switch (result.kind) {
    case "http_error":
      if (result.status >= 500) {
        return { errorPanel: renderErrorPanel("http_error_5xx", result.message) };
      }
      return { fieldError: renderFieldError("request", result.message) };
    case "invalid_payload":
      return { errorPanel: renderErrorPanel("invalid_payload", result.detail) };
    case "network_error":
      return { errorPanel: renderErrorPanel("network_error", result.message) };
    default:
      return {};
  }
}

/** Orchestrates service calls and turns results into rendered view fragments.
 * Every number shown comes from a validated service payload. */
export class WhatIfController {
  constructor(
    private client: ServiceClient,
    readonly state: ScenarioState,
  ) {}

  async runPrediction(): Promise<ViewUpdate> {
    const gate = canPredict(this.state.draft);
    if (!gate.enabled) {
      return { fieldError: renderFieldError("draft", gate.hint) };
    }
    if (!this.state.beginPredict()) {
      return {}; // one in-flight predict per panel
    }
    try {
      const result = await this.client.predict(this.state.draft);
      if (result.kind !== "ok") {
        return errorUpdate(result);
      }
      this.state.recordRun(result.value);
      return {
        predictionPanel: renderPredictionPanel(this.state.current, this.state.delta()),
      };
    } finally {
      this.state.endPredict();
    }
  }

  runIdeaRecommendation(candidates: IdeaCandidate[], objective: string): Promise<ViewUpdate> {
    if (candidates.length === 0) {
      return Promise.resolve({
        fieldError: renderFieldError("candidates", "add at least one candidate"),
      });
    }
    return this.state.enqueueRecommendation(async () => {
      const result = await this.client.recommendIdeas(this.state.draft, candidates, objective);
      if (result.kind !== "ok") {
        return errorUpdate(result);
      }
      this.state.rememberCandidates(candidates);
      this.state.lastRanking = result.value.ranking;
      return { recommendationTable: renderRecommendationTable(result.value.ranking) };
    });
  }

  runAuthorRecommendation(
    candidates: { candidate_id: string; roster: RosterEntry[] }[],
    objective: string,
  ): Promise<ViewUpdate> {
    if (candidates.length === 0) {
      return Promise.resolve({
        fieldError: renderFieldError("candidates", "add at least one candidate"),
      });
    }
    return this.state.enqueueRecommendation(async () => {
      const result = await this.client.recommendAuthors(
        this.state.draft,
        candidates,
        objective,
      );
      if (result.kind !== "ok") {
        return errorUpdate(result);
      }
      this.state.lastRanking = result.value.ranking;
      return { recommendationTable: renderRecommendationTable(result.value.ranking) };
    });
  }

  /** Table row click: load that candidate into the editor for the next run. */
  selectCandidate(candidateId: string): boolean {
    return this.state.loadCandidate(candidateId);
  }
}
