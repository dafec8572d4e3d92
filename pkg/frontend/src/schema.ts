import type { Prediction, RankedItem, Recommendation } from "./types.js";

/// Validate a /v1/predict payload before anything reaches the panel.
export function validatePrediction(
  payload: unknown,
): { valid: true; value: Prediction } | { valid: false; error: string } {
  if (typeof payload !== "object" || payload === null || Array.isArray(payload)) {
    return { valid: false, error: "prediction payload is not an object" };
  }
  const p = payload as Record<string, unknown>;
  for (const key of ["rating", "acceptance_probability"]) {
    if (typeof p[key] !== "number" || !Number.isFinite(p[key] as number)) {
      return { valid: false, error: `field ${key} is not a finite number` };
    }
  }
  const rating = p.rating as number;
  const prob = p.acceptance_probability as number;
  if (rating < 1 || rating > 10) {
    return { valid: false, error: `rating ${rating} outside [1, 10]` };
  }
  if (prob < 0 || prob > 1) {
    return { valid: false, error: `acceptance_probability ${prob} outside [0, 1]` };
  }
  for (const key of ["model_id", "fusion_variant", "capability_source"]) {
    if (typeof p[key] !== "string") {
      return { valid: false, error: `field ${key} is not a string` };
    }
  }
  return {
    valid: true,
    value: {
      rating,
      acceptance_probability: prob,
      model_id: p.model_id as string,
      fusion_variant: p.fusion_variant as string,
      capability_source: p.capability_source as string,
    },
  };
}

/// Validate a /v1/recommend/* payload.
export function validateRecommendation(
  payload: unknown,
): { valid: true; value: Recommendation } | { valid: false; error: string } {
  if (typeof payload !== "object" || payload === null || Array.isArray(payload)) {
    return { valid: false, error: "recommendation payload is not an object" };
  }
  const p = payload as Record<string, unknown>;
  if (typeof p.objective !== "string") {
    return { valid: false, error: "objective is not a string" };
  }
  if (!Array.isArray(p.ranking)) {
    return { valid: false, error: "ranking is not an array" };
  }
  const ranking: RankedItem[] = [];
  for (const [i, raw] of (p.ranking as unknown[]).entries()) {
    if (typeof raw !== "object" || raw === null) {
      return { valid: false, error: `ranking[${i}] is not an object` };
    }
    const item = raw as Record<string, unknown>;
    if (typeof item.candidate_id !== "string") {
      return { valid: false, error: `ranking[${i}].candidate_id is not a string` };
    }
    if (typeof item.score !== "number" || !Number.isFinite(item.score)) {
      return { valid: false, error: `ranking[${i}].score is not a finite number` };
    }
    ranking.push({ candidate_id: item.candidate_id, score: item.score });
  }
  return { valid: true, value: { objective: p.objective, ranking } };
}
