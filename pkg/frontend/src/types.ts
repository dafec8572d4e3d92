export interface RosterEntry {
  name: string;
  position: string;
  affiliation: string;
  country: string;
}

export type CapabilityMode = "explicit-text" | "inferred";

export interface ScenarioDraft {
  ideaText: string;
  roster: RosterEntry[];
  venue: string;
  capabilityMode: CapabilityMode;
  capabilityText: string;
}

export interface Prediction {
  rating: number;
  acceptance_probability: number;
  model_id: string;
  fusion_variant: string;
  capability_source: string;
}

export interface RankedItem {
  candidate_id: string;
  score: number;
}

export interface Recommendation {
  objective: string;
  ranking: RankedItem[];
}

export interface IdeaCandidate {
  candidate_id: string;
  idea_text: string;
}

export interface RunRecord {
  at: number;
  ideaText: string;
  venue: string;
  prediction: Prediction;
}

/** Discriminated results from the service client; the UI never renders a
 * number that did not arrive in a validated payload. */
export type ServiceResult<T> =
  | { kind: "ok"; value: T }
  | { kind: "http_error"; status: number; message: string }
  | { kind: "invalid_payload"; detail: string }
  | { kind: "network_error"; message: string };
