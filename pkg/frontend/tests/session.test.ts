import { describe, expect, it } from "vitest";

import { DEFAULT_SESSION, sessionFromQuery, sessionToQuery } from "../src/session.js";
import type { ViewerSession } from "../src/session.js";

describe("session URL round-trip", () => {
  it("restores every field", () => {
    const session: ViewerSession = {
      modelId: "desk_encoder",
      layer: "stage3",
      method: "fft_dec",
      stitchId: "mini_stage2",
      seed: 42,
      sampleIndex: 7,
      steps: 128,
      variationSeeds: 16,
      reportId: "abc123",
      pinned: ["stage2:gan:0", "stage3:plain:4"],
    };
    const restored = sessionFromQuery(sessionToQuery(session));
    expect(restored).toEqual(session);
  });

  it("defaults collapse to an empty query", () => {
    expect(sessionToQuery({ ...DEFAULT_SESSION })).toBe("");
    expect(sessionFromQuery("")).toEqual(DEFAULT_SESSION);
  });

  it("round-trips repeatedly to a fixed point", () => {
    const q1 = sessionToQuery({ ...DEFAULT_SESSION, seed: 3, layer: "stage4" });
    const q2 = sessionToQuery(sessionFromQuery(q1));
    expect(q2).toBe(q1);
  });

  it("rejects junk numbers and unknown methods", () => {
    const restored = sessionFromQuery("seed=banana&method=teleport&sample=2");
    expect(restored.seed).toBe(DEFAULT_SESSION.seed);
    expect(restored.method).toBe("gan");
    expect(restored.sampleIndex).toBe(2);
  });

  it("keeps pinned keys with separators intact", () => {
    const session = { ...DEFAULT_SESSION, pinned: ["a:b:1", "c:d:2"] };
    expect(sessionFromQuery(sessionToQuery(session)).pinned).toEqual(["a:b:1", "c:d:2"]);
  });
});
