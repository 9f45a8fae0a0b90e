import { describe, expect, it } from "vitest";

import { SseParser, isTerminal } from "../src/sse.js";

describe("SSE parser", () => {
  it("parses a complete event", () => {
    const parser = new SseParser();
    const events = parser.feed('event: progress\ndata: {"step": 3, "loss": 0.5}\n\n');
    expect(events).toEqual([{ event: "progress", data: { step: 3, loss: 0.5 } }]);
  });

  it("handles chunk boundaries mid-line", () => {
    const parser = new SseParser();
    const a = parser.feed("event: prog");
    const b = parser.feed('ress\ndata: {"st');
    const c = parser.feed('ep": 1, "loss": 2.25}\n');
    const d = parser.feed("\n");
    expect([...a, ...b, ...c, ...d]).toEqual([
      { event: "progress", data: { step: 1, loss: 2.25 } },
    ]);
  });

  it("parses multiple events in one chunk", () => {
    const parser = new SseParser();
    const chunk =
      'event: progress\ndata: {"step": 1}\n\n' +
      'event: done\ndata: {"wall_time_ms": 9.5}\n\n';
    const events = parser.feed(chunk);
    expect(events.map((e) => e.event)).toEqual(["progress", "done"]);
    expect(events[1].data).toEqual({ wall_time_ms: 9.5 });
  });

  it("ignores comments and resets the event name between events", () => {
    const parser = new SseParser();
    const events = parser.feed(': keepalive\ndata: {"x": 1}\n\n');
    expect(events).toEqual([{ event: "message", data: { x: 1 } }]);
  });

  it("flags the three terminal event names", () => {
    expect(isTerminal({ event: "done", data: {} })).toBe(true);
    expect(isTerminal({ event: "cancelled", data: {} })).toBe(true);
    expect(isTerminal({ event: "error", data: {} })).toBe(true);
    expect(isTerminal({ event: "progress", data: {} })).toBe(false);
  });
});
