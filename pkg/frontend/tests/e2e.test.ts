/**
 * Live-service checks. Skipped unless STITCHVIZ_E2E_BASE points at a running
 * service, e.g.:
 *
 *   stitchviz serve --registry tests/.fixture_cache/<key>/registry.json \
 *       --stitch-dir tests/.fixture_cache/<key>/stitches --addr 127.0.0.1:8787
 *   STITCHVIZ_E2E_BASE=http://127.0.0.1:8787 npm test
 *
 * STITCHVIZ_E2E_STITCH overrides the stitch id (default mini_stage2).
 */
import { describe, expect, it } from "vitest";

import { ApiClient, buildImageRef, buildInvertRequest } from "../src/api.js";
import { variationGridTiles } from "../src/grid.js";
import type { JobEvent } from "../src/types.js";

const base = process.env.STITCHVIZ_E2E_BASE;
const stitchId = process.env.STITCHVIZ_E2E_STITCH ?? "mini_stage2";

describe.skipIf(!base)("live service", () => {
  const api = new ApiClient(base ?? "");

  it("lists models and four encoder stages", async () => {
    const models = await api.listModels();
    const interpret = models.find((m) => m.roles.includes("interpret"));
    expect(interpret).toBeDefined();
    const layers = await api.listLayers(interpret!.model_id);
    expect(layers.map((l) => l.layer_name)).toEqual(["stage1", "stage2", "stage3", "stage4"]);
  }, 30000);

  it("renders a gan inversion with wall time and metrics", async () => {
    const resp = await api.invert(
      buildInvertRequest({
        sampleIndex: 0,
        layer: "stage2",
        method: "gan",
        stitchId,
        seed: 3,
      }),
    );
    expect(resp.image_png_b64.length).toBeGreaterThan(100);
    expect(resp.wall_time_ms).toBeGreaterThan(0);
  }, 60000);

  it("streams gd progress to a terminal done event", async () => {
    const { job_id } = await api.startJob(
      buildInvertRequest({
        sampleIndex: 1,
        layer: "stage2",
        method: "plain",
        seed: 0,
        steps: 16,
      }),
    );
    const events: JobEvent[] = [];
    await api.streamJob(job_id, (e) => events.push(e));
    const progress = events.filter((e) => e.event === "progress");
    expect(progress.length).toBeGreaterThanOrEqual(1);
    const done = events[events.length - 1];
    expect(done.event).toBe("done");
    expect((done.data.loss_trace as number[]).length).toBe(16);
  }, 120000);

  it("variation grid shows n+1 tiles with the original top-left", async () => {
    const seeds = [0, 1, 2];
    const resp = await api.variations(buildImageRef({ sampleIndex: 0 }), stitchId, seeds);
    expect(resp.images.length).toBe(3);
    const tiles = variationGridTiles(
      `${base}/api/samples/0`,
      resp.images.map((b64, i) => ({ seed: seeds[i], src: b64 })),
    );
    expect(tiles.length).toBe(4);
    expect(tiles[0].kind).toBe("original");
  }, 60000);
});
