import { SseParser, isTerminal } from "./sse.js";
import type {
  ImageRef,
  InvertRequest,
  InvertResponse,
  JobEvent,
  LayerEntry,
  Method,
  ModelInfo,
  ReportSummary,
  StitchInfo,
} from "./types.js";

export interface InvertSelection {
  sampleIndex: number;
  uploadB64?: string;
  modelId?: string;
  layer: string;
  method: Method;
  stitchId?: string;
  seed: number;
  steps?: number;
}

/** Thin-client rule: this module only moves bytes; every number shown in the
 * UI originates from a service response. */
export function buildImageRef(sel: { sampleIndex: number; uploadB64?: string }): ImageRef {
  if (sel.uploadB64) return { image_b64: sel.uploadB64 };
  return { sample: { dataset: "textures", index: sel.sampleIndex, seed: 0, res: 128 } };
}

export function buildInvertRequest(sel: InvertSelection): InvertRequest {
  const req: InvertRequest = {
    image: buildImageRef(sel),
    layer: sel.layer,
    method: sel.method,
    seed: sel.seed,
  };
  if (sel.modelId) req.model_id = sel.modelId;
  if (sel.method === "gan") req.stitch_id = sel.stitchId;
  if (sel.method !== "gan" && sel.steps !== undefined) req.steps = sel.steps;
  return req;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function checked<T>(resp: Response): Promise<T> {
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      const body = (await resp.json()) as { detail?: string };
      if (body.detail) detail = body.detail;
    } catch {
      /* keep statusText */
    }
    throw new ApiError(resp.status, detail);
  }
  return (await resp.json()) as T;
}

export class ApiClient {
  constructor(
    public baseUrl: string = "",
    private fetchFn: typeof fetch = fetch.bind(globalThis),
  ) {}

  private get(path: string, signal?: AbortSignal) {
    return this.fetchFn(`${this.baseUrl}${path}`, { signal });
  }

  private post(path: string, body: unknown, signal?: AbortSignal) {
    return this.fetchFn(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
      signal,
    });
  }

  listModels(): Promise<ModelInfo[]> {
    return this.get("/api/models").then((r) => checked<ModelInfo[]>(r));
  }

  listLayers(modelId: string): Promise<LayerEntry[]> {
    return this.get(`/api/models/${encodeURIComponent(modelId)}/layers`).then((r) =>
      checked<LayerEntry[]>(r),
    );
  }

  listStitches(): Promise<StitchInfo[]> {
    return this.get("/api/stitches").then((r) => checked<StitchInfo[]>(r));
  }

  listReports(): Promise<ReportSummary[]> {
    return this.get("/api/reports").then((r) => checked<ReportSummary[]>(r));
  }

  getReport(runId: string): Promise<Record<string, unknown>> {
    return this.get(`/api/reports/${encodeURIComponent(runId)}`).then((r) =>
      checked<Record<string, unknown>>(r),
    );
  }

  invert(req: InvertRequest, signal?: AbortSignal): Promise<InvertResponse> {
    return this.post("/api/invert", req, signal).then((r) => checked<InvertResponse>(r));
  }

  startJob(req: InvertRequest, signal?: AbortSignal): Promise<{ job_id: string }> {
    return this.post("/api/invert", req, signal).then((r) => checked<{ job_id: string }>(r));
  }

  cancelJob(jobId: string): Promise<unknown> {
    return this.post(`/api/jobs/${encodeURIComponent(jobId)}/cancel`, {}).then((r) =>
      checked<unknown>(r),
    );
  }

  variations(image: ImageRef, stitchId: string, seeds: number[], signal?: AbortSignal) {
    return this.post("/api/variations", { image, stitch_id: stitchId, seeds }, signal).then(
      (r) => checked<{ images: string[]; wall_time_ms: number }>(r),
    );
  }

  /** Stream job events until a terminal event or abort; resolves with every
   * event seen. onEvent fires per event as it arrives. */
  async streamJob(
    jobId: string,
    onEvent: (e: JobEvent) => void,
    signal?: AbortSignal,
  ): Promise<JobEvent[]> {
    const resp = await this.get(`/api/jobs/${encodeURIComponent(jobId)}/events`, signal);
    if (!resp.ok || resp.body === null) {
      throw new ApiError(resp.status, `event stream unavailable for job ${jobId}`);
    }
    const reader = resp.body.getReader();
    const decoder = new TextDecoder();
    const parser = new SseParser();
    const seen: JobEvent[] = [];
    for (;;) {
      const { value, done } = await reader.read();
      if (done) break;
      for (const event of parser.feed(decoder.decode(value, { stream: true }))) {
        seen.push(event);
        onEvent(event);
        if (isTerminal(event)) {
          await reader.cancel().catch(() => undefined);
          return seen;
        }
      }
    }
    return seen;
  }
}

export function pngUrl(b64: string): string {
  return `data:image/png;base64,${b64}`;
}
