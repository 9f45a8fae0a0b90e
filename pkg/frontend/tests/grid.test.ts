import { describe, expect, it } from "vitest";

import { layerStripTiles, pinKey, togglePin, variationGridTiles } from "../src/grid.js";

describe("variation grid", () => {
  it("renders n+1 tiles with the original top-left", () => {
    const images = Array.from({ length: 31 }, (_, i) => ({ seed: i, src: `img${i}` }));
    const tiles = variationGridTiles("orig.png", images);
    expect(tiles.length).toBe(32);
    expect(tiles[0].kind).toBe("original");
    expect(tiles[0].src).toBe("orig.png");
    expect(tiles[1].label).toBe("seed 0");
    expect(tiles[31].label).toBe("seed 30");
  });

  it("keys are stable per seed", () => {
    const tiles = variationGridTiles("o", [{ seed: 7, src: "a" }]);
    expect(tiles[1].key).toBe("seed:7");
  });
});

describe("layer strip", () => {
  it("produces one tile per stage sharing the seed", () => {
    const tiles = layerStripTiles(["stage1", "stage2", "stage3", "stage4"], 5, {
      stage1: "a",
      stage2: "b",
      stage3: "c",
      stage4: "d",
    });
    expect(tiles.length).toBe(4);
    for (const tile of tiles) {
      expect(tile.label).toContain("seed 5");
    }
    expect(tiles.map((t) => t.src)).toEqual(["a", "b", "c", "d"]);
  });
});

describe("pins", () => {
  it("toggle adds then removes", () => {
    const key = pinKey("stage2", "gan", 3);
    expect(key).toBe("stage2:gan:3");
    const once = togglePin([], key);
    expect(once).toEqual([key]);
    expect(togglePin(once, key)).toEqual([]);
  });
});
