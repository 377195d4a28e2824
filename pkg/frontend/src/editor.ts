// Region editing geometry: hit-testing and drag-rectangle normalization.

import { WorkingRegion } from "./state.js";
import { Box, boxArea, boxContains } from "./types.js";

// Smallest region under the cursor wins so nested boxes stay reachable.
export function hitTest(regions: WorkingRegion[], x: number, y: number): number | null {
  let best: number | null = null;
  let bestArea = Infinity;
  regions.forEach((r, i) => {
    if (boxContains(r.box, x, y) && boxArea(r.box) < bestArea) {
      bestArea = boxArea(r.box);
      best = i;
    }
  });
  return best;
}

export function dragToBox(
  x0: number,
  y0: number,
  x1: number,
  y1: number,
  width: number,
  height: number,
): Box {
  const clamp = (v: number, hi: number) => Math.min(Math.max(v, 0), hi);
  return [
    clamp(Math.min(x0, x1), width),
    clamp(Math.min(y0, y1), height),
    clamp(Math.max(x0, x1), width),
    clamp(Math.max(y0, y1), height),
  ];
}
