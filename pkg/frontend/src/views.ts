// DOM rendering. Values arrive preformatted from the API and are shown
// verbatim; the only computation here is number formatting for display.

import type { RankMove } from "./logic.js";
import type { DeltaBreakdown, ModelSummary, QueueRow } from "./types.js";

const MOVE_MARK: Record<RankMove, string> = {
  up: "▲",
  down: "▼",
  same: "",
  new: "•",
};

function fmt(value: number): string {
  return Number.isInteger(value) ? String(value) : value.toFixed(3);
}

export interface QueueHandlers {
  onPriorityInput(instanceId: string, value: string): void;
  onSelect(instanceId: string): void;
}

export function renderQueue(
  tbody: HTMLElement,
  rows: QueueRow[],
  entries: Record<string, string>,
  moves: Record<string, RankMove>,
  problems: Set<string>,
  handlers: QueueHandlers,
): void {
  const doc = tbody.ownerDocument;
  tbody.textContent = "";
  if (rows.length === 0) {
    const tr = doc.createElement("tr");
    tr.className = "empty-row";
    const td = doc.createElement("td");
    td.colSpan = 8;
    td.textContent = "no open events — the queue is clear";
    tr.appendChild(td);
    tbody.appendChild(tr);
    return;
  }
  rows.forEach((row, index) => {
    const tr = doc.createElement("tr");
    tr.dataset.instance = row.instance_id;
    if (problems.has(row.instance_id)) tr.classList.add("invalid");
    const move = moves[row.instance_id] ?? "same";
    if (move === "up" || move === "down") tr.classList.add(`moved-${move}`);

    const rank = doc.createElement("td");
    rank.className = "rank";
    rank.textContent = `${index + 1} ${MOVE_MARK[move]}`.trim();
    tr.appendChild(rank);

    const id = doc.createElement("td");
    const link = doc.createElement("a");
    link.href = "#";
    link.className = "instance-link";
    link.textContent = row.instance_id;
    link.addEventListener("click", (ev) => {
      ev.preventDefault();
      handlers.onSelect(row.instance_id);
    });
    id.appendChild(link);
    if (row.flagged) {
      const badge = doc.createElement("span");
      badge.className = "badge mismatch";
      badge.textContent = "mismatch";
      id.appendChild(badge);
    }
    tr.appendChild(id);

    const type = doc.createElement("td");
    type.textContent = row.type_id;
    tr.appendChild(type);

    const factors = doc.createElement("td");
    factors.className = "factors";
    factors.textContent = row.factors.map(fmt).join(", ");
    tr.appendChild(factors);

    for (const value of [row.linear_term, row.delta, row.f_value]) {
      const td = doc.createElement("td");
      td.className = "num";
      td.textContent = fmt(value);
      tr.appendChild(td);
    }

    const entry = doc.createElement("td");
    const input = doc.createElement("input");
    input.type = "number";
    input.min = "1";
    input.step = "1";
    input.className = "priority-input";
    input.value = entries[row.instance_id] ?? "";
    input.setAttribute("aria-label", `priority for ${row.instance_id}`);
    input.addEventListener("input", () =>
      handlers.onPriorityInput(row.instance_id, input.value),
    );
    entry.appendChild(input);
    tr.appendChild(entry);

    tbody.appendChild(tr);
  });
}

export function renderPreview(
  container: HTMLElement,
  discordant: Array<[string, string]>,
): void {
  container.textContent = "";
  if (discordant.length === 0) return;
  const doc = container.ownerDocument;
  const note = doc.createElement("div");
  note.className = "preview-warning";
  const pairs = discordant.map(([a, b]) => `${a}↔${b}`).join(", ");
  note.textContent =
    `your order disagrees with the engine on: ${pairs} ` +
    "(submitting will record these as mismatches)";
  container.appendChild(note);
}

export function renderBanner(
  container: HTMLElement,
  message: string | null,
  onRetry: (() => void) | null,
): void {
  container.textContent = "";
  if (!message) {
    container.classList.remove("visible");
    return;
  }
  const doc = container.ownerDocument;
  container.classList.add("visible");
  const span = doc.createElement("span");
  span.textContent = message;
  container.appendChild(span);
  if (onRetry) {
    const btn = doc.createElement("button");
    btn.textContent = "retry";
    btn.className = "retry-btn";
    btn.addEventListener("click", onRetry);
    container.appendChild(btn);
  }
}

export function renderDiagnostics(
  panel: HTMLElement,
  instanceId: string,
  flagged: boolean,
  breakdown: DeltaBreakdown,
  model: ModelSummary,
): void {
  const doc = panel.ownerDocument;
  panel.textContent = "";

  const title = doc.createElement("h3");
  title.textContent = `correction breakdown — ${instanceId}`;
  if (flagged) {
    const badge = doc.createElement("span");
    badge.className = "badge mismatch";
    badge.textContent = "mismatch";
    title.appendChild(badge);
  }
  panel.appendChild(title);

  const summary = doc.createElement("dl");
  summary.className = "delta-summary";
  const items: Array<[string, string]> = [
    ["Δ", String(breakdown.delta)],
    ["mass average (M)", fmt(breakdown.m_value)],
    ["shared-history share (N)", fmt(breakdown.n_value)],
    ["mismatch ticks", String(breakdown.meta_count)],
    ["partners (Ω)", breakdown.omega.join(", ") || "none"],
  ];
  for (const [label, value] of items) {
    const dt = doc.createElement("dt");
    dt.textContent = label;
    const dd = doc.createElement("dd");
    dd.textContent = value;
    summary.append(dt, dd);
  }
  panel.appendChild(summary);

  const ticks = Object.keys(breakdown.lambda_by_tick).sort(
    (a, b) => Number(a) - Number(b),
  );
  if (ticks.length > 0) {
    const table = doc.createElement("table");
    table.className = "lambda-table";
    const head = doc.createElement("tr");
    for (const label of ["tick", "λ", "mismatched partners"]) {
      const th = doc.createElement("th");
      th.textContent = label;
      head.appendChild(th);
    }
    table.appendChild(head);
    for (const tick of ticks) {
      const tr = doc.createElement("tr");
      const cells = [
        tick,
        fmt(breakdown.lambda_by_tick[tick]),
        (breakdown.theta_by_tick[tick] ?? []).join(", ") || "—",
      ];
      for (const text of cells) {
        const td = doc.createElement("td");
        td.textContent = text;
        tr.appendChild(td);
      }
      table.appendChild(tr);
    }
    panel.appendChild(table);
  }

  const modelTitle = doc.createElement("h3");
  modelTitle.textContent = `model — ${model.type_id}`;
  panel.appendChild(modelTitle);
  const modelTable = doc.createElement("table");
  modelTable.className = "coeff-table";
  const header = doc.createElement("tr");
  for (const label of ["factor", "coefficient"]) {
    const th = doc.createElement("th");
    th.textContent = label;
    header.appendChild(th);
  }
  modelTable.appendChild(header);
  model.factor_schema.forEach((name, i) => {
    const tr = doc.createElement("tr");
    const nameTd = doc.createElement("td");
    nameTd.textContent = name;
    const coeffTd = doc.createElement("td");
    coeffTd.className = "num";
    coeffTd.textContent = fmt(model.coefficients[i]);
    tr.append(nameTd, coeffTd);
    modelTable.appendChild(tr);
  });
  panel.appendChild(modelTable);
  const note = doc.createElement("p");
  note.className = "model-note";
  note.textContent = model.cold
    ? "cold start: coefficients are the initial all-ones vector"
    : `${model.samples_absorbed} samples absorbed, ${model.n_components} components`;
  panel.appendChild(note);
}
