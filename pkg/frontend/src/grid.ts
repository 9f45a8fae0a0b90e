/** Pure view models for the image grids; the DOM layer only renders these. */

export interface Tile {
  kind: "original" | "variation" | "stage" | "reconstruction";
  src: string;
  label: string;
  key: string;
}

/** Variation grid: original top-left, one tile per seed after it. */
export function variationGridTiles(
  originalSrc: string,
  images: { seed: number; src: string }[],
): Tile[] {
  const tiles: Tile[] = [
    { kind: "original", src: originalSrc, label: "original", key: "original" },
  ];
  for (const img of images) {
    tiles.push({
      kind: "variation",
      src: img.src,
      label: `seed ${img.seed}`,
      key: `seed:${img.seed}`,
    });
  }
  return tiles;
}

/** Layer strip: one reconstruction per encoder stage, all sharing one seed. */
export function layerStripTiles(
  stages: string[],
  seed: number,
  srcByStage: Record<string, string>,
): Tile[] {
  return stages.map((stage) => ({
    kind: "stage",
    src: srcByStage[stage] ?? "",
    label: `${stage} (seed ${seed})`,
    key: `stage:${stage}:${seed}`,
  }));
}

export function pinKey(layer: string, method: string, seed: number): string {
  return `${layer}:${method}:${seed}`;
}

export function togglePin(pinned: string[], key: string): string[] {
  return pinned.includes(key) ? pinned.filter((p) => p !== key) : [...pinned, key];
}
