import { ServiceClient } from "./api.js";
import { WhatIfController } from "./controller.js";
import { renderHistory, renderPredictButton, renderRosterEditor } from "./render.js";
import { ScenarioState } from "./state.js";
import type { IdeaCandidate } from "./types.js";

const VENUES = ["ICLR2025", "ICLR2024", "NeurIPS2024", "NeurIPS2023"];

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

export function mountApp(): void {
  const state = new ScenarioState();
  const controller = new WhatIfController(new ServiceClient(""), state);

  const rosterHost = el<HTMLDivElement>("roster");
  const buttonHost = el<HTMLDivElement>("predict-button");
  const panelHost = el<HTMLDivElement>("prediction-panel");
  const tableHost = el<HTMLDivElement>("recommendation");
  const historyHost = el<HTMLDivElement>("history");
  const messageHost = el<HTMLDivElement>("messages");
  const ideaInput = el<HTMLTextAreaElement>("idea-text");
  const venueSelect = el<HTMLSelectElement>("venue");
  const capabilityMode = el<HTMLSelectElement>("capability-mode");
  const capabilityText = el<HTMLTextAreaElement>("capability-text");
  const candidatesInput = el<HTMLTextAreaElement>("candidates");

  venueSelect.innerHTML = VENUES.map((v) => `<option value="${v}">${v}</option>`).join("");

  function syncDraftFromForm(): void {
    state.draft = {
      ...state.draft,
      ideaText: ideaInput.value,
      venue: venueSelect.value,
      capabilityMode: capabilityMode.value === "explicit-text" ? "explicit-text" : "inferred",
      capabilityText: capabilityText.value,
    };
  }

  function redrawControls(): void {
    buttonHost.innerHTML = renderPredictButton(state.draft, state.predictInFlight);
    rosterHost.innerHTML = renderRosterEditor(state.draft);
    historyHost.innerHTML = renderHistory(state.history);
  }

  function applyUpdate(update: {
    predictionPanel?: string;
    recommendationTable?: string;
    errorPanel?: string;
    fieldError?: string;
  }): void {
    messageHost.innerHTML = update.errorPanel ?? update.fieldError ?? "";
    if (update.predictionPanel) panelHost.innerHTML = update.predictionPanel;
    if (update.recommendationTable) tableHost.innerHTML = update.recommendationTable;
  }

  async function onPredict(): Promise<void> {
    syncDraftFromForm();
    redrawControls();
    const update = await controller.runPrediction();
    applyUpdate(update);
    redrawControls();
  }

  async function onRecommend(): Promise<void> {
    syncDraftFromForm();
    const lines = candidatesInput.value
      .split("\n")
      .map((line) => line.trim())
      .filter(Boolean);
    const candidates: IdeaCandidate[] = lines.map((line, i) => ({
      candidate_id: `idea-${String(i + 1).padStart(2, "0")}`,
      idea_text: line,
    }));
    const update = await controller.runIdeaRecommendation(candidates, "rating");
    applyUpdate(update);
  }

  document.body.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const action = target.dataset.action;
    if (action === "predict") void onPredict();
    if (action === "recommend") void onRecommend();
    if (action === "retry") void onPredict();
    if (action === "add-author") {
      syncDraftFromForm();
      state.draft.roster.push({ name: "", position: "", affiliation: "", country: "" });
      redrawControls();
    }
    if (action === "remove-author") {
      const index = Number(target.dataset.index);
      state.draft.roster.splice(index, 1);
      redrawControls();
    }
    const row = target.closest<HTMLTableRowElement>("tr.candidate-row");
    if (row?.dataset.candidateId && controller.selectCandidate(row.dataset.candidateId)) {
      ideaInput.value = state.draft.ideaText;
      redrawControls();
    }
  });

  rosterHost.addEventListener("input", (event) => {
    const input = event.target as HTMLInputElement;
    const row = input.closest<HTMLTableRowElement>("tr.roster-row");
    const field = input.dataset.field;
    if (!row || !field) return;
    const index = Number(row.dataset.index);
    const entry = state.draft.roster[index];
    if (entry) {
      (entry as unknown as Record<string, string>)[field] = input.value;
      buttonHost.innerHTML = renderPredictButton(state.draft, state.predictInFlight);
    }
  });

  for (const input of [ideaInput, venueSelect, capabilityMode, capabilityText]) {
    input.addEventListener("input", () => {
      syncDraftFromForm();
      buttonHost.innerHTML = renderPredictButton(state.draft, state.predictInFlight);
    });
  }

  redrawControls();
}

if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", mountApp);
}
