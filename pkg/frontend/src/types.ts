// Wire types for the session service, plus strict payload validation.
// A payload that fails validation must never be partially rendered, so the
// parser either returns a fully-typed object or throws PayloadError naming
// the offending fields.

export type Box = [number, number, number, number]; // x0, y0, x1, y1

export type Prediction = {
  box: Box;
  label: string;
  score: number;
  probs: number[];
};

export type Region = {
  box: Box;
  label: string;
  instance: number;
};

export type FramePayload = {
  frame_index: number;
  time_s: number;
  width: number;
  height: number;
  phase: "seed" | "annotating" | "training" | "streaming" | "done";
  current_frame_index: number;
  round: number;
  feedback_budget_left: number;
  class_labels: string[];
  image_png_base64: string;
  detection_count: number;
  predictions: Prediction[];
  proposals: (Region & { source: string })[];
  fixation: { x: number; y: number } | null;
  fixation_aoi: string | null;
  ground_truth_available: boolean;
  ground_truth?: Region[];
};

export type SessionState = {
  session_id: string;
  phase: string;
  frame_index: number;
  total_frames: number;
  round: number;
  update_time: number;
  feedback_budget_left: number;
  window: [number, number];
  user_actions: number;
  rounds_reported: number;
};

export type RoundMetrics = {
  round: number;
  frames_annotated: number;
  pct_data: number;
  train_time_s: number;
  user_actions: number;
  map_50: number;
  map_75: number;
  map_coco: number;
  balanced_accuracy: number;
  fixation_accuracy: number | null;
};

export type MetricsReport = {
  rounds: RoundMetrics[];
  finished: boolean;
};

export class PayloadError extends Error {
  readonly fields: string[];

  constructor(message: string, fields: string[]) {
    super(message);
    this.fields = fields;
  }
}

function isBox(v: unknown): v is Box {
  return Array.isArray(v) && v.length === 4 && v.every((n) => typeof n === "number" && isFinite(n));
}

function checkFields(obj: Record<string, unknown>, spec: Record<string, (v: unknown) => boolean>): string[] {
  const bad: string[] = [];
  for (const [field, check] of Object.entries(spec)) {
    if (!check(obj[field])) bad.push(field);
  }
  return bad;
}

const isNumber = (v: unknown) => typeof v === "number" && isFinite(v);
const isString = (v: unknown) => typeof v === "string";

export function parseFramePayload(raw: unknown): FramePayload {
  if (typeof raw !== "object" || raw === null) {
    throw new PayloadError("frame payload is not an object", ["<root>"]);
  }
  const obj = raw as Record<string, unknown>;
  const bad = checkFields(obj, {
    frame_index: isNumber,
    width: isNumber,
    height: isNumber,
    phase: (v) => isString(v) && ["seed", "annotating", "training", "streaming", "done"].includes(v as string),
    current_frame_index: isNumber,
    round: isNumber,
    feedback_budget_left: isNumber,
    class_labels: (v) => Array.isArray(v) && v.every(isString),
    image_png_base64: isString,
    detection_count: isNumber,
    predictions: Array.isArray,
    proposals: Array.isArray,
    ground_truth_available: (v) => typeof v === "boolean",
  });
  const preds = Array.isArray(obj.predictions) ? (obj.predictions as unknown[]) : [];
  preds.forEach((p, i) => {
    const rec = p as Record<string, unknown>;
    if (!isBox(rec?.box) || !isString(rec?.label) || !isNumber(rec?.score)) {
      bad.push(`predictions[${i}]`);
    }
  });
  const fixation = obj.fixation as Record<string, unknown> | null | undefined;
  if (fixation !== null && fixation !== undefined) {
    if (!isNumber(fixation.x) || !isNumber(fixation.y)) bad.push("fixation");
  }
  if (bad.length > 0) {
    throw new PayloadError(`frame payload is malformed: ${bad.join(", ")}`, bad);
  }
  return obj as unknown as FramePayload;
}

export function parseMetricsJsonl(text: string): MetricsReport {
  const rounds: RoundMetrics[] = [];
  let finished = false;
  for (const line of text.split("\n")) {
    if (!line.trim()) continue;
    let rec: Record<string, unknown>;
    try {
      rec = JSON.parse(line);
    } catch {
      throw new PayloadError("metrics report line is not JSON", ["<line>"]);
    }
    if (rec.kind === "round") {
      const whole = rec.metrics_whole as Record<string, unknown>;
      rounds.push({
        round: rec.round as number,
        frames_annotated: rec.frames_annotated as number,
        pct_data: rec.pct_data as number,
        train_time_s: rec.train_time_s as number,
        user_actions: rec.user_actions as number,
        map_50: whole.map_50 as number,
        map_75: whole.map_75 as number,
        map_coco: whole.map_coco as number,
        balanced_accuracy: whole.balanced_accuracy as number,
        fixation_accuracy: (whole.fixation_accuracy ?? null) as number | null,
      });
    } else if (rec.kind === "summary") {
      finished = true;
    }
  }
  return { rounds, finished };
}

export function boxArea(box: Box): number {
  return Math.max(0, box[2] - box[0]) * Math.max(0, box[3] - box[1]);
}

export function boxContains(box: Box, x: number, y: number): boolean {
  return x >= box[0] && x <= box[2] && y >= box[1] && y <= box[3];
}

export const BACKGROUND = "background";

// Client-side mirror of the service's fixation mapping: smallest
// non-background box containing the point. Used to cross-check the
// service's fixation_aoi field.
export function fixationToAoi(x: number, y: number, items: { box: Box; label: string }[]): string {
  let best: string = BACKGROUND;
  let bestArea = Infinity;
  for (const item of items) {
    if (item.label === BACKGROUND) continue;
    if (boxContains(item.box, x, y) && boxArea(item.box) < bestArea) {
      bestArea = boxArea(item.box);
      best = item.label;
    }
  }
  return best;
}
