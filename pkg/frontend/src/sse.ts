import type { JobEvent } from "./types.js";

/** Incremental server-sent-events parser; feed() accepts arbitrary chunk
 * boundaries and returns the events completed by that chunk. */
export class SseParser {
  private buffer = "";
  private eventName = "message";
  private dataLines: string[] = [];

  feed(chunk: string): JobEvent[] {
    this.buffer += chunk;
    const events: JobEvent[] = [];
    let idx: number;
    while ((idx = this.buffer.indexOf("\n")) >= 0) {
      const line = this.buffer.slice(0, idx).replace(/\r$/, "");
      this.buffer = this.buffer.slice(idx + 1);
      if (line === "") {
        if (this.dataLines.length > 0) {
          const raw = this.dataLines.join("\n");
          let data: Record<string, unknown>;
          try {
            data = JSON.parse(raw) as Record<string, unknown>;
          } catch {
            data = { raw };
          }
          events.push({ event: this.eventName, data });
        }
        this.eventName = "message";
        this.dataLines = [];
      } else if (line.startsWith("event: ")) {
        this.eventName = line.slice("event: ".length);
      } else if (line.startsWith("data: ")) {
        this.dataLines.push(line.slice("data: ".length));
      } else if (line.startsWith(":")) {
        // comment line, ignored
      }
    }
    return events;
  }
}

export const TERMINAL_EVENTS = new Set(["done", "cancelled", "error"]);

export function isTerminal(event: JobEvent): boolean {
  return TERMINAL_EVENTS.has(event.event);
}
