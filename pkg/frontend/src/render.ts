import { canPredict, sortRanking } from "./state.js";
import type { Delta } from "./state.js";
import type { Prediction, RankedItem, RunRecord, ScenarioDraft } from "./types.js";

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function deltaChip(value: number, digits: number, suffix = ""): string {
  if (value === 0) return `<span class="delta flat">±0${suffix}</span>`;
  const direction = value > 0 ? "up" : "down";
  const sign = value > 0 ? "+" : "−";
  return `<span class="delta ${direction}">${sign}${Math.abs(value).toFixed(digits)}${suffix}</span>`;
}

export function renderPredictionPanel(
  current: Prediction | null,
  delta: Delta | null,
): string {
  if (current === null) {
    return `<div class="panel prediction-panel empty">Run a prediction to see the expected outcome.</div>`;
  }
  const rating = current.rating.toFixed(1);
  const acceptance = (current.acceptance_probability * 100).toFixed(0) + "%";
  const badge = `<span class="badge capability-${current.capability_source}">${current.capability_source} capability</span>`;
  const deltas =
    delta === null
      ? ""
      : `<div class="deltas">vs previous run: rating ${deltaChip(delta.rating, 1)} · acceptance ${deltaChip(delta.acceptance * 100, 0, "%")}</div>`;
  return `
    <div class="panel prediction-panel">
      <div class="score"><span class="label">expected rating</span><span class="value rating">${rating}</span></div>
      <div class="score"><span class="label">acceptance chance</span><span class="value acceptance">${acceptance}</span></div>
      ${badge}
      <div class="model-line">${escapeHtml(current.model_id)} · ${escapeHtml(current.fusion_variant)}</div>
      ${deltas}
    </div>`;
}

export function renderErrorPanel(kind: string, message: string): string {
  const retryable = kind === "http_error_5xx" || kind === "network_error";
  const banner = retryable
    ? `<button class="retry" data-action="retry">retry</button>`
    : "";
  return `
    <div class="panel error-panel ${escapeHtml(kind)}">
      <strong>request failed</strong>
      <div class="error-message">${escapeHtml(message)}</div>
      ${banner}
    </div>`;
}

export function renderFieldError(field: string, message: string): string {
  return `<span class="field-error" data-field="${escapeHtml(field)}">${escapeHtml(message)}</span>`;
}

export function renderRecommendationTable(ranking: RankedItem[]): string {
  if (ranking.length === 0) {
    return `<div class="panel recommendation-panel empty">No candidates ranked yet.</div>`;
  }
  const rows = sortRanking(ranking)
    .map(
      (item, i) => `
      <tr class="candidate-row" data-candidate-id="${escapeHtml(item.candidate_id)}">
        <td class="rank">${i + 1}</td>
        <td class="candidate">${escapeHtml(item.candidate_id)}</td>
        <td class="score">${item.score.toFixed(4)}</td>
      </tr>`,
    )
    .join("");
  return `
    <table class="recommendation-table">
      <thead><tr><th>#</th><th>candidate</th><th>score</th></tr></thead>
      <tbody>${rows}</tbody>
    </table>`;
}

export function renderPredictButton(draft: ScenarioDraft, inFlight: boolean): string {
  const gate = canPredict(draft);
  const disabled = !gate.enabled || inFlight;
  const hint = gate.enabled ? "" : `<span class="hint">${escapeHtml(gate.hint)}</span>`;
  const label = inFlight ? "running…" : "Run prediction";
  return `<button class="run-predict" data-action="predict"${disabled ? " disabled" : ""}>${label}</button>${hint}`;
}

export function renderRosterEditor(draft: ScenarioDraft): string {
  const rows = draft.roster
    .map(
      (a, i) => `
      <tr class="roster-row" data-index="${i}">
        <td><input data-field="name" value="${escapeHtml(a.name)}" placeholder="name"></td>
        <td><input data-field="position" value="${escapeHtml(a.position)}" placeholder="position"></td>
        <td><input data-field="affiliation" value="${escapeHtml(a.affiliation)}" placeholder="affiliation"></td>
        <td><input data-field="country" value="${escapeHtml(a.country)}" placeholder="cc"></td>
        <td><button data-action="remove-author" data-index="${i}">✕</button></td>
      </tr>`,
    )
    .join("");
  return `
    <table class="roster-editor">
      <tbody>${rows}</tbody>
    </table>
    <button data-action="add-author">add author</button>`;
}

export function renderHistory(history: RunRecord[]): string {
  if (history.length === 0) return `<div class="history empty"></div>`;
  const items = history
    .slice()
    .reverse()
    .map(
      (run) => `
      <li class="history-item">
        <span class="rating">${run.prediction.rating.toFixed(1)}</span>
        <span class="acceptance">${(run.prediction.acceptance_probability * 100).toFixed(0)}%</span>
        <span class="idea">${escapeHtml(run.ideaText.slice(0, 60))}</span>
      </li>`,
    )
    .join("");
  return `<ol class="history">${items}</ol>`;
}
