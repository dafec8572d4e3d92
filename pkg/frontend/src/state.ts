import type {
  IdeaCandidate,
  Prediction,
  RankedItem,
  RunRecord,
  ScenarioDraft,
} from "./types.js";

export const HISTORY_LIMIT = 20;

export function emptyDraft(): ScenarioDraft {
  return {
    ideaText: "",
    roster: [],
    venue: "ICLR2025",
    capabilityMode: "inferred",
    capabilityText: "",
  };
}

/** Predict is enabled only for a complete draft; the hint names what's missing. */
export function canPredict(draft: ScenarioDraft): { enabled: boolean; hint: string } {
  if (draft.roster.length === 0) {
    return { enabled: false, hint: "add at least one author to the roster" };
  }
  if (draft.roster.some((a) => !a.name.trim())) {
    return { enabled: false, hint: "every roster entry needs a name" };
  }
  if (!draft.ideaText.trim()) {
    return { enabled: false, hint: "describe the research idea first" };
  }
  if (!draft.venue) {
    return { enabled: false, hint: "pick a target venue" };
  }
  return { enabled: true, hint: "" };
}

export interface Delta {
  rating: number;
  acceptance: number;
}

/** Client-side scenario state: run history (last 20), in-flight guard for the
 * single predict slot, and a queue that serializes recommendation calls. */
export class ScenarioState {
  draft: ScenarioDraft = emptyDraft();
  history: RunRecord[] = [];
  predictInFlight = false;
  lastRanking: RankedItem[] = [];
  private candidateTexts = new Map<string, string>();
  private recommendationQueue: Promise<unknown> = Promise.resolve();

  recordRun(prediction: Prediction, now: number = Date.now()): RunRecord {
    const record: RunRecord = {
      at: now,
      ideaText: this.draft.ideaText,
      venue: this.draft.venue,
      prediction,
    };
    this.history.push(record);
    if (this.history.length > HISTORY_LIMIT) {
      this.history = this.history.slice(this.history.length - HISTORY_LIMIT);
    }
    return record;
  }

  get current(): Prediction | null {
    return this.history.at(-1)?.prediction ?? null;
  }

  get previous(): Prediction | null {
    return this.history.at(-2)?.prediction ?? null;
  }

  /** Signed change of the latest run against the one before it. */
  delta(): Delta | null {
    const current = this.current;
    const previous = this.previous;
    if (current === null || previous === null) return null;
    return {
      rating: current.rating - previous.rating,
      acceptance: current.acceptance_probability - previous.acceptance_probability,
    };
  }

  /** At most one in-flight predict per scenario panel. */
  beginPredict(): boolean {
    if (this.predictInFlight) return false;
    this.predictInFlight = true;
    return true;
  }

  endPredict(): void {
    this.predictInFlight = false;
  }

  /** Recommendation calls run strictly one after another. */
  enqueueRecommendation<T>(task: () => Promise<T>): Promise<T> {
    const next = this.recommendationQueue.then(task, task);
    this.recommendationQueue = next.catch(() => undefined);
    return next;
  }

  rememberCandidates(candidates: IdeaCandidate[]): void {
    this.candidateTexts = new Map(candidates.map((c) => [c.candidate_id, c.idea_text]));
  }

  /** Row selection: load that candidate's idea into the editor for the next run. */
  loadCandidate(candidateId: string): boolean {
    const text = this.candidateTexts.get(candidateId);
    if (text === undefined) return false;
    this.draft = { ...this.draft, ideaText: text };
    return true;
  }
}

/** Descending by score; equal scores keep the service's order (stable). */
export function sortRanking(ranking: RankedItem[]): RankedItem[] {
  return ranking
    .map((item, index) => ({ item, index }))
    .sort((a, b) => b.item.score - a.item.score || a.index - b.index)
    .map((entry) => entry.item);
}
