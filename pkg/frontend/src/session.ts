import type { Method } from "./types.js";

/** Everything a shareable viewer URL needs to rebuild the UI state. */
export interface ViewerSession {
  modelId: string;
  layer: string;
  method: Method;
  stitchId: string;
  seed: number;
  sampleIndex: number;
  steps: number;
  variationSeeds: number;
  reportId: string;
  pinned: string[]; // "layer:method:seed" keys of pinned comparisons
}

export const DEFAULT_SESSION: ViewerSession = {
  modelId: "",
  layer: "stage2",
  method: "gan",
  stitchId: "",
  seed: 0,
  sampleIndex: 0,
  steps: 512,
  variationSeeds: 8,
  reportId: "",
  pinned: [],
};

const METHODS: Method[] = ["gan", "fft_dec", "plain"];

export function sessionToQuery(s: ViewerSession): string {
  const params = new URLSearchParams();
  const put = (key: string, value: string | number, fallback: string | number) => {
    if (value !== fallback) params.set(key, String(value));
  };
  put("model", s.modelId, DEFAULT_SESSION.modelId);
  put("layer", s.layer, DEFAULT_SESSION.layer);
  put("method", s.method, DEFAULT_SESSION.method);
  put("stitch", s.stitchId, DEFAULT_SESSION.stitchId);
  put("seed", s.seed, DEFAULT_SESSION.seed);
  put("sample", s.sampleIndex, DEFAULT_SESSION.sampleIndex);
  put("steps", s.steps, DEFAULT_SESSION.steps);
  put("vseeds", s.variationSeeds, DEFAULT_SESSION.variationSeeds);
  put("report", s.reportId, DEFAULT_SESSION.reportId);
  if (s.pinned.length > 0) params.set("pinned", s.pinned.join("~"));
  return params.toString();
}

export function sessionFromQuery(query: string): ViewerSession {
  const params = new URLSearchParams(query);
  const num = (key: string, fallback: number) => {
    const raw = params.get(key);
    const value = raw === null ? NaN : Number(raw);
    return Number.isFinite(value) ? value : fallback;
  };
  const method = params.get("method") ?? DEFAULT_SESSION.method;
  return {
    modelId: params.get("model") ?? DEFAULT_SESSION.modelId,
    layer: params.get("layer") ?? DEFAULT_SESSION.layer,
    method: (METHODS as string[]).includes(method) ? (method as Method) : "gan",
    stitchId: params.get("stitch") ?? DEFAULT_SESSION.stitchId,
    seed: num("seed", DEFAULT_SESSION.seed),
    sampleIndex: num("sample", DEFAULT_SESSION.sampleIndex),
    steps: num("steps", DEFAULT_SESSION.steps),
    variationSeeds: num("vseeds", DEFAULT_SESSION.variationSeeds),
    reportId: params.get("report") ?? DEFAULT_SESSION.reportId,
    pinned: (params.get("pinned") ?? "").split("~").filter((p) => p.length > 0),
  };
}
