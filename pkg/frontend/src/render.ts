// Frame rendering as pure draw-command generation. The browser painter
// (main.ts) executes commands on a canvas; tests assert on the commands
// directly, which keeps the whole pipeline headless-testable.

import { ViewState } from "./state.js";
import { BACKGROUND, Box, FramePayload, boxArea, boxContains } from "./types.js";

export type DrawCommand =
  | { kind: "image"; pngBase64: string; width: number; height: number }
  | { kind: "box"; box: Box; color: string; dashed: boolean; emphasis: boolean }
  | { kind: "label"; text: string; x: number; y: number; color: string }
  | { kind: "fixation"; x: number; y: number; color: string };

const CLASS_COLORS = [
  "#d6604d", "#4393c3", "#5aae61", "#e6ab02", "#9970ab", "#d882b1",
  "#66c2a5", "#b38867",
];

export function classColor(label: string, classLabels: string[]): string {
  const ordered = [...new Set(classLabels)].sort();
  const idx = ordered.indexOf(label);
  return CLASS_COLORS[(idx >= 0 ? idx : ordered.length) % CLASS_COLORS.length]!;
}

// The box the fixation point lands in (smallest area, background excluded);
// must agree with the service's fixation_aoi.
export function fixatedIndex(payload: FramePayload): number | null {
  if (!payload.fixation) return null;
  const { x, y } = payload.fixation;
  let best: number | null = null;
  let bestArea = Infinity;
  payload.predictions.forEach((p, i) => {
    if (p.label === BACKGROUND) return;
    if (boxContains(p.box, x, y) && boxArea(p.box) < bestArea) {
      bestArea = boxArea(p.box);
      best = i;
    }
  });
  return best;
}

export function renderFrame(payload: FramePayload, view: ViewState): DrawCommand[] {
  const commands: DrawCommand[] = [
    {
      kind: "image",
      pngBase64: payload.image_png_base64,
      width: payload.width,
      height: payload.height,
    },
  ];
  const highlight = fixatedIndex(payload);

  if (view.overlays.predictions) {
    const source = view.working.length > 0 ? view.working : payload.predictions;
    source.forEach((item, i) => {
      const color = classColor(item.label, payload.class_labels);
      commands.push({
        kind: "box",
        box: item.box,
        color,
        dashed: item.label === BACKGROUND,
        emphasis: i === view.selected || i === highlight,
      });
      const pred = payload.predictions[i];
      const score = pred && "score" in pred ? ` ${(pred.score * 100).toFixed(0)}%` : "";
      commands.push({
        kind: "label",
        text: `${item.label}${score}`,
        x: item.box[0],
        y: Math.max(item.box[1] - 4, 10),
        color,
      });
    });
  }

  if (view.overlays.groundTruth && payload.ground_truth_available && payload.ground_truth) {
    for (const gt of payload.ground_truth) {
      commands.push({
        kind: "box",
        box: gt.box,
        color: "#f5f5f5",
        dashed: true,
        emphasis: false,
      });
    }
  }

  if (view.overlays.fixation && payload.fixation) {
    commands.push({
      kind: "fixation",
      x: payload.fixation.x,
      y: payload.fixation.y,
      color: "#ff2020",
    });
  }
  return commands;
}
