// Pure dashboard logic: input validation, the advisory mismatch preview,
// rank-change detection, and assembling the tick body. No DOM, no fetch.

import type { QueueRow, TickBody } from "./types.js";

export interface ValidationResult {
  ok: boolean;
  missing: string[]; // rows with no priority entered
  invalid: string[]; // rows whose entry is not a positive integer
}

/** Every queued event needs a positive integer priority before submission. */
export function validatePriorities(
  rows: QueueRow[],
  entries: Record<string, string>,
): ValidationResult {
  const missing: string[] = [];
  const invalid: string[] = [];
  for (const row of rows) {
    const raw = (entries[row.instance_id] ?? "").trim();
    if (raw === "") {
      missing.push(row.instance_id);
      continue;
    }
    const value = Number(raw);
    if (!Number.isInteger(value) || value < 1) {
      invalid.push(row.instance_id);
    }
  }
  return { ok: missing.length === 0 && invalid.length === 0, missing, invalid };
}

export function parsedPriorities(
  rows: QueueRow[],
  entries: Record<string, string>,
): Record<string, number> {
  const out: Record<string, number> = {};
  for (const row of rows) {
    out[row.instance_id] = Number((entries[row.instance_id] ?? "").trim());
  }
  return out;
}

/**
 * Advisory preview of directionality disagreements between the entered
 * priorities and the engine values currently on screen: a pair is discordant
 * unless both differences share a strict sign (ties count as discordant).
 * The engine's stored predictions remain authoritative for actual flagging.
 */
export function mismatchPreview(
  rows: QueueRow[],
  priorities: Record<string, number>,
): Array<[string, string]> {
  const pairs: Array<[string, string]> = [];
  for (let i = 0; i < rows.length; i++) {
    for (let j = i + 1; j < rows.length; j++) {
      const a = rows[i];
      const b = rows[j];
      const pa = priorities[a.instance_id];
      const pb = priorities[b.instance_id];
      if (pa === undefined || pb === undefined) continue;
      if ((pa - pb) * (a.f_value - b.f_value) > 0) continue;
      pairs.push([a.instance_id, b.instance_id]);
    }
  }
  return pairs;
}

/** The submitted tick echoes the displayed queue; nothing else is invented. */
export function buildTickBody(
  rows: QueueRow[],
  priorities: Record<string, number>,
): TickBody {
  return {
    events: rows.map((row) => ({
      instance_id: row.instance_id,
      type_id: row.type_id,
      first_reported: row.first_reported,
      factors: row.factors,
    })),
    sa_priorities: priorities,
    resolved: [],
  };
}

export type RankMove = "up" | "down" | "same" | "new";

/** Where each id of `after` sat in `before`, for post-submit highlighting. */
export function rankChanges(
  before: string[],
  after: string[],
): Record<string, RankMove> {
  const out: Record<string, RankMove> = {};
  after.forEach((id, position) => {
    const previous = before.indexOf(id);
    if (previous === -1) out[id] = "new";
    else if (previous > position) out[id] = "up";
    else if (previous < position) out[id] = "down";
    else out[id] = "same";
  });
  return out;
}
