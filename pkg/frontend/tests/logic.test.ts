import { describe, expect, it } from "vitest";

import {
  buildTickBody,
  mismatchPreview,
  parsedPriorities,
  rankChanges,
  validatePriorities,
} from "../src/logic.js";
import type { QueueRow } from "../src/types.js";

function row(id: string, f: number, delta = 0): QueueRow {
  return {
    instance_id: id,
    type_id: "prox",
    first_reported: 0,
    factors: [1.0, f / 10],
    f_value: f,
    linear_term: f - delta,
    delta,
    flagged: false,
  };
}

const ROWS = [row("v1", 4.0), row("v2", 2.4), row("v4", 1.9), row("v3", 1.6)];

describe("validatePriorities", () => {
  it("accepts a complete set of positive integers", () => {
    const result = validatePriorities(ROWS, { v1: "4", v2: "2", v4: "3", v3: "1" });
    expect(result.ok).toBe(true);
    expect(result.missing).toEqual([]);
    expect(result.invalid).toEqual([]);
  });

  it("reports every missing row", () => {
    const result = validatePriorities(ROWS, { v1: "4", v4: " " });
    expect(result.ok).toBe(false);
    expect(result.missing).toEqual(["v2", "v4", "v3"]);
  });

  it("rejects zero, negatives, and non-integers", () => {
    const result = validatePriorities(ROWS, { v1: "0", v2: "-3", v4: "2.5", v3: "abc" });
    expect(result.ok).toBe(false);
    expect(result.invalid).toEqual(["v1", "v2", "v4", "v3"]);
  });
});

describe("mismatchPreview", () => {
  it("is empty when the entered order matches the engine order", () => {
    const priorities = { v1: 4, v2: 3, v4: 2, v3: 1 };
    expect(mismatchPreview(ROWS, priorities)).toEqual([]);
  });

  it("lists exactly the discordant pairs for the override scenario", () => {
    // swapping v2 and v4 relative to the engine ordering
    const priorities = { v1: 4, v2: 2, v4: 3, v3: 1 };
    expect(mismatchPreview(ROWS, priorities)).toEqual([["v2", "v4"]]);
  });

  it("treats ties as discordant", () => {
    const priorities = { v1: 4, v2: 2, v4: 2, v3: 1 };
    expect(mismatchPreview(ROWS, priorities)).toEqual([["v2", "v4"]]);
  });

  it("skips pairs with a missing entry", () => {
    const priorities = { v1: 1, v2: 2 } as Record<string, number>;
    // v1 vs v2 inverted; pairs involving v4/v3 are not evaluable
    expect(mismatchPreview(ROWS, priorities)).toEqual([["v1", "v2"]]);
  });
});

describe("buildTickBody", () => {
  it("echoes the displayed queue and the parsed priorities", () => {
    const entries = { v1: "4", v2: "2", v4: "3", v3: "1" };
    const body = buildTickBody(ROWS, parsedPriorities(ROWS, entries));
    expect(body.events.map((e) => e.instance_id)).toEqual(["v1", "v2", "v4", "v3"]);
    expect(body.events[0]).toEqual({
      instance_id: "v1",
      type_id: "prox",
      first_reported: 0,
      factors: [1.0, 0.4],
    });
    expect(body.sa_priorities).toEqual({ v1: 4, v2: 2, v4: 3, v3: 1 });
    expect(body.resolved).toEqual([]);
  });
});

describe("rankChanges", () => {
  it("marks climbs, drops, holds, and arrivals", () => {
    const before = ["v1", "v2", "v4", "v3"];
    const after = ["v1", "v4", "v2", "v5"];
    expect(rankChanges(before, after)).toEqual({
      v1: "same",
      v4: "up",
      v2: "down",
      v5: "new",
    });
  });
});
