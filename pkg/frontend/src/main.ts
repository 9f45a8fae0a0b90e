import { ApiClient, buildImageRef, buildInvertRequest, pngUrl } from "./api.js";
import { downsampleTrace, lossCurvePath, sweepChartModel } from "./charts.js";
import { badge, clear, el, metricChips, svgEl } from "./dom.js";
import { layerStripTiles, pinKey, togglePin, variationGridTiles } from "./grid.js";
import { DEFAULT_SESSION, sessionFromQuery, sessionToQuery, ViewerSession } from "./session.js";
import type { JobEvent, ProgressData, StitchInfo, SweepRow } from "./types.js";

const api = new ApiClient("");
let session: ViewerSession = sessionFromQuery(location.search.replace(/^\?/, ""));
let stitches: StitchInfo[] = [];
let encoderLayers: string[] = [];
let uploadB64: string | undefined;
let inversionAbort: AbortController | null = null;
let activeJobId: string | null = null;

function syncUrl(): void {
  history.replaceState(null, "", `?${sessionToQuery(session)}`);
}

function $(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

function select(id: string): HTMLSelectElement {
  return $(id) as HTMLSelectElement;
}

function numberInput(id: string): HTMLInputElement {
  return $(id) as HTMLInputElement;
}

function fillSelect(node: HTMLSelectElement, options: string[], value: string): void {
  clear(node);
  for (const opt of options) {
    node.append(el("option", { value: opt }, [opt]));
  }
  if (options.includes(value)) node.value = value;
}

function stitchesForLayer(layer: string): StitchInfo[] {
  return stitches.filter((s) => s.source.layer_name === layer);
}

function originalUrl(): string {
  if (uploadB64) return pngUrl(uploadB64);
  return `/api/samples/${session.sampleIndex}?res=128`;
}

async function boot(): Promise<void> {
  const models = await api.listModels();
  const encoders = models.filter((m) => m.kind === "encoder");
  const interpret =
    session.modelId ||
    encoders.find((m) => m.roles.includes("interpret"))?.model_id ||
    encoders[0]?.model_id ||
    "";
  session.modelId = interpret;
  const layers = await api.listLayers(interpret);
  encoderLayers = layers.map((l) => l.layer_name);
  stitches = await api.listStitches();

  fillSelect(select("sel-model"), encoders.map((m) => m.model_id), interpret);
  fillSelect(select("sel-layer"), encoderLayers, session.layer);
  session.layer = select("sel-layer").value;
  fillSelect(select("sel-method"), ["gan", "fft_dec", "plain"], session.method);
  refreshStitchSelect();
  numberInput("inp-seed").value = String(session.seed);
  numberInput("inp-sample").value = String(session.sampleIndex);
  numberInput("inp-steps").value = String(session.steps);
  numberInput("inp-vseeds").value = String(session.variationSeeds);
  await refreshReports();
  renderOriginal();
  syncUrl();
}

function refreshStitchSelect(): void {
  const options = stitchesForLayer(session.layer).map((s) => s.stitch_id);
  const current = options.includes(session.stitchId) ? session.stitchId : options[0] ?? "";
  session.stitchId = current;
  fillSelect(select("sel-stitch"), options, current);
}

function renderOriginal(): void {
  const img = $("original-img") as HTMLImageElement;
  img.src = originalUrl();
}

function setStatus(text: string, spinning = false): void {
  const node = $("run-status");
  node.textContent = text;
  node.className = spinning ? "status busy" : "status";
}

function renderResult(imageB64: string, wallMs: number | null,
                      metrics: Record<string, number> | null | undefined): void {
  const host = $("result-panel");
  clear(host);
  const img = el("img", { class: "tile-img", src: pngUrl(imageB64) });
  host.append(img);
  const meta = el("div", { class: "meta" });
  if (wallMs !== null) {
    meta.append(badge(`${wallMs.toFixed(1)} ms`, wallMs < 1000 ? "fast" : "slow"));
  }
  meta.append(metricChips(metrics));
  const pin = el("button", { class: "pin" }, ["pin"]);
  pin.addEventListener("click", () => {
    session.pinned = togglePin(session.pinned, pinKey(session.layer, session.method, session.seed));
    addPinnedTile(imageB64, `${session.layer} ${session.method} seed ${session.seed}`);
    syncUrl();
  });
  meta.append(pin);
  host.append(meta);
}

function addPinnedTile(imageB64: string, label: string): void {
  const host = $("pinned-row");
  const tile = el("figure", { class: "tile" }, [
    el("img", { class: "tile-img", src: pngUrl(imageB64) }),
    el("figcaption", {}, [label]),
  ]);
  tile.addEventListener("click", () => tile.remove());
  host.append(tile);
}

function renderLossCurve(points: { step: number; loss: number }[]): void {
  const host = $("loss-curve");
  clear(host);
  if (points.length === 0) return;
  const svg = svgEl("svg", { viewBox: "0 0 360 220", class: "chart" });
  svg.append(svgEl("path", { d: lossCurvePath(points), class: "loss-path" }));
  const last = points[points.length - 1];
  svg.append(svgEl("title", {}));
  host.append(svg);
  host.append(el("div", { class: "meta" }, [`step ${last.step}: loss ${last.loss.toFixed(4)}`]));
}

async function runInversion(): Promise<void> {
  inversionAbort?.abort();
  if (activeJobId) {
    api.cancelJob(activeJobId).catch(() => undefined);
    activeJobId = null;
  }
  inversionAbort = new AbortController();
  const signal = inversionAbort.signal;
  const req = buildInvertRequest({
    sampleIndex: session.sampleIndex,
    uploadB64,
    modelId: session.modelId,
    layer: session.layer,
    method: session.method,
    stitchId: session.stitchId || undefined,
    seed: session.seed,
    steps: session.steps,
  });
  clear($("loss-curve"));
  try {
    if (session.method === "gan") {
      setStatus("running single forward pass…", true);
      const resp = await api.invert(req, signal);
      renderResult(resp.image_png_b64, resp.wall_time_ms, resp.metrics);
      setStatus("done");
    } else {
      setStatus("optimizing…", true);
      const { job_id } = await api.startJob(req, signal);
      activeJobId = job_id;
      const trace: number[] = [];
      await api.streamJob(
        job_id,
        (event: JobEvent) => {
          if (event.event === "progress") {
            const data = event.data as unknown as ProgressData;
            trace[data.step] = data.loss;
            renderLossCurve(downsampleTrace(trace.filter((v) => v !== undefined), 128));
            if (data.image_png_b64) {
              renderResult(data.image_png_b64, null, null);
            }
            setStatus(`step ${data.step}, loss ${data.loss.toFixed(4)}`, true);
          } else if (event.event === "done") {
            const data = event.data as {
              image_png_b64: string;
              wall_time_ms: number;
              metrics?: Record<string, number> | null;
              loss_trace?: number[];
            };
            renderResult(data.image_png_b64, data.wall_time_ms, data.metrics);
            if (data.loss_trace) renderLossCurve(downsampleTrace(data.loss_trace, 128));
            setStatus("done");
          } else if (event.event === "cancelled") {
            setStatus("cancelled");
          } else if (event.event === "error") {
            setStatus(`error: ${String(event.data.message)}`);
          }
        },
        signal,
      );
      activeJobId = null;
    }
  } catch (err) {
    if (!signal.aborted) {
      setStatus(`error: ${err instanceof Error ? err.message : String(err)}`);
      const retry = el("button", {}, ["retry"]);
      retry.addEventListener("click", () => void runInversion());
      $("run-status").append(" ", retry);
    }
  }
}

async function runLayerStrip(): Promise<void> {
  const host = $("layer-strip");
  clear(host);
  const srcByStage: Record<string, string> = {};
  // the whole strip shares one noise seed so columns are comparable
  for (const layer of encoderLayers) {
    const stitch = stitchesForLayer(layer)[0];
    if (!stitch) continue;
    try {
      const resp = await api.invert(
        buildInvertRequest({
          sampleIndex: session.sampleIndex,
          uploadB64,
          modelId: session.modelId,
          layer,
          method: "gan",
          stitchId: stitch.stitch_id,
          seed: session.seed,
        }),
      );
      srcByStage[layer] = pngUrl(resp.image_png_b64);
    } catch {
      srcByStage[layer] = "";
    }
  }
  const stages = encoderLayers.filter((l) => srcByStage[l]);
  for (const tile of layerStripTiles(stages, session.seed, srcByStage)) {
    const fig = el("figure", { class: "tile" }, [
      el("img", { class: "tile-img", src: tile.src }),
      el("figcaption", {}, [tile.label]),
    ]);
    fig.addEventListener("click", () => {
      const [, stage] = tile.key.split(":");
      addPinnedTile(tile.src.replace(/^data:image\/png;base64,/, ""), tile.label);
      session.pinned = togglePin(session.pinned, pinKey(stage, "gan", session.seed));
      syncUrl();
    });
    host.append(fig);
  }
  if (stages.length === 0) {
    host.append(el("p", { class: "hint" }, ["no stitches registered for any layer yet"]));
  }
}

async function runVariations(): Promise<void> {
  if (!session.stitchId) {
    setStatus("variations need a stitch selection");
    return;
  }
  const n = session.variationSeeds;
  const seeds = Array.from({ length: n }, (_, i) => i);
  const host = $("variation-grid");
  clear(host);
  host.append(el("p", { class: "hint" }, [`requesting ${n} variations…`]));
  const resp = await api.variations(
    buildImageRef({ sampleIndex: session.sampleIndex, uploadB64 }),
    session.stitchId,
    seeds,
  );
  clear(host);
  const tiles = variationGridTiles(
    originalUrl(),
    resp.images.map((b64, i) => ({ seed: seeds[i], src: pngUrl(b64) })),
  );
  for (const tile of tiles) {
    host.append(
      el("figure", { class: `tile ${tile.kind}` }, [
        el("img", { class: "tile-img", src: tile.src }),
        el("figcaption", {}, [tile.label]),
      ]),
    );
  }
}

async function refreshReports(): Promise<void> {
  const reports = await api.listReports();
  fillSelect(select("sel-report"), reports.map((r) => r.run_id), session.reportId);
  if (!session.reportId && reports.length > 0) session.reportId = reports[0].run_id;
}

async function renderSweepChart(): Promise<void> {
  const host = $("sweep-chart");
  clear(host);
  if (!session.reportId) return;
  const doc = await api.getReport(session.reportId);
  const rows = (doc.rows ?? []) as SweepRow[];
  if (rows.length === 0) {
    host.append(el("p", { class: "hint" }, ["selected report has no sweep rows"]));
    return;
  }
  const byMetric: Record<string, { delta: number; relative: number }[]> = {};
  for (const row of rows) {
    (byMetric[row.metric] ??= []).push({ delta: row.delta, relative: row.relative });
  }
  const model = sweepChartModel(byMetric);
  const svg = svgEl("svg", { viewBox: "0 0 360 220", class: "chart" });
  for (const tick of model.xTicks) {
    const label = svgEl("text", { x: String(tick.x), y: "214", class: "tick" });
    label.textContent = tick.label;
    svg.append(label);
  }
  const classes = ["series-a", "series-b", "series-c"];
  model.series.forEach((s, i) => {
    svg.append(svgEl("path", { d: s.path, class: `series ${classes[i % classes.length]}` }));
  });
  // normalization anchor: relative value is defined as 1.0 at delta 0
  svg.append(svgEl("circle", {
    cx: String(model.baseline.x), cy: String(model.baseline.y), r: "5", class: "baseline",
  }));
  host.append(svg);
  const legend = el("div", { class: "meta" });
  model.series.forEach((s, i) => {
    legend.append(el("span", { class: `chip ${classes[i % classes.length]}` }, [s.metric]));
  });
  legend.append(el("span", { class: "chip" }, ["o = delta 0, relative 1.0"]));
  host.append(legend);
}

function renderHeatmapFile(files: FileList | null): void {
  const host = $("heatmap-view");
  clear(host);
  if (!files) return;
  for (const file of Array.from(files)) {
    if (file.name.endsWith(".png")) {
      const img = el("img", { class: "tile-img big", alt: file.name });
      img.src = URL.createObjectURL(file);
      host.append(el("figure", { class: "tile" }, [img, el("figcaption", {}, [file.name])]));
    } else if (file.name.endsWith(".json")) {
      void file.text().then((text) => {
        const pre = el("pre", { class: "json" });
        pre.textContent = text;
        host.append(pre);
      });
    }
  }
}

function wire(): void {
  select("sel-model").addEventListener("change", (e) => {
    session.modelId = (e.target as HTMLSelectElement).value;
    syncUrl();
  });
  select("sel-layer").addEventListener("change", (e) => {
    session.layer = (e.target as HTMLSelectElement).value;
    refreshStitchSelect();
    syncUrl();
    void runInversion();
  });
  select("sel-method").addEventListener("change", (e) => {
    session.method = (e.target as HTMLSelectElement).value as ViewerSession["method"];
    syncUrl();
    void runInversion();
  });
  select("sel-stitch").addEventListener("change", (e) => {
    session.stitchId = (e.target as HTMLSelectElement).value;
    syncUrl();
  });
  numberInput("inp-seed").addEventListener("change", (e) => {
    session.seed = Number((e.target as HTMLInputElement).value) || 0;
    syncUrl();
    void runInversion();
  });
  numberInput("inp-sample").addEventListener("change", (e) => {
    session.sampleIndex = Number((e.target as HTMLInputElement).value) || 0;
    uploadB64 = undefined;
    renderOriginal();
    syncUrl();
  });
  numberInput("inp-steps").addEventListener("change", (e) => {
    session.steps = Number((e.target as HTMLInputElement).value) || DEFAULT_SESSION.steps;
    syncUrl();
  });
  numberInput("inp-vseeds").addEventListener("change", (e) => {
    session.variationSeeds = Number((e.target as HTMLInputElement).value) || 8;
    syncUrl();
  });
  ($("inp-upload") as HTMLInputElement).addEventListener("change", (e) => {
    const file = (e.target as HTMLInputElement).files?.[0];
    if (!file) return;
    void file.arrayBuffer().then((buf) => {
      const bytes = new Uint8Array(buf);
      let binary = "";
      bytes.forEach((b) => (binary += String.fromCharCode(b)));
      uploadB64 = btoa(binary);
      renderOriginal();
    });
  });
  $("btn-run").addEventListener("click", () => void runInversion());
  $("btn-cancel").addEventListener("click", () => {
    if (activeJobId) void api.cancelJob(activeJobId);
  });
  $("btn-strip").addEventListener("click", () => void runLayerStrip());
  $("btn-variations").addEventListener("click", () => void runVariations());
  $("btn-chart").addEventListener("click", () => void renderSweepChart());
  select("sel-report").addEventListener("change", (e) => {
    session.reportId = (e.target as HTMLSelectElement).value;
    syncUrl();
    void renderSweepChart();
  });
  ($("inp-heatmap") as HTMLInputElement).addEventListener("change", (e) => {
    renderHeatmapFile((e.target as HTMLInputElement).files);
  });
}

wire();
void boot();
