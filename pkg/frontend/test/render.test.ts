import { describe, expect, it } from "vitest";

import { fixatedIndex, renderFrame } from "../src/render.js";
import { initialViewState, loadFrame, toggleOverlay } from "../src/state.js";
import { parseFramePayload } from "../src/types.js";
import { validPayload } from "./types.test.js";

function setup(mutate?: (raw: Record<string, unknown>) => void) {
  const raw = validPayload();
  mutate?.(raw);
  const payload = parseFramePayload(raw);
  const view = loadFrame(initialViewState("s1"), payload);
  return { payload, view };
}

describe("renderFrame", () => {
  it("draws the bitmap, one labeled box per prediction, and the fixation", () => {
    const { payload, view } = setup();
    const commands = renderFrame(payload, view);
    expect(commands[0]!.kind).toBe("image");
    expect(commands.filter((c) => c.kind === "box")).toHaveLength(2);
    expect(commands.filter((c) => c.kind === "label")).toHaveLength(2);
    expect(commands.filter((c) => c.kind === "fixation")).toHaveLength(1);
  });

  it("renders an empty frame with no overlays", () => {
    const { payload, view } = setup((raw) => {
      raw.predictions = [];
      raw.detection_count = 0;
      raw.fixation = null;
      raw.fixation_aoi = null;
    });
    const commands = renderFrame(payload, view);
    expect(commands).toHaveLength(1);
    expect(commands[0]!.kind).toBe("image");
  });

  it("highlights the fixated box consistently with the service", () => {
    const { payload, view } = setup();
    const idx = fixatedIndex(payload);
    expect(idx).toBe(0); // fixation (20, 20) sits in the book box
    expect(payload.fixation_aoi).toBe("book");
    const boxes = renderFrame(payload, view).filter((c) => c.kind === "box");
    expect((boxes[0] as { emphasis: boolean }).emphasis).toBe(true);
    expect((boxes[1] as { emphasis: boolean }).emphasis).toBe(false);
  });

  it("ground-truth overlay appears only when toggled on", () => {
    const { payload, view } = setup();
    const before = renderFrame(payload, view).filter((c) => c.kind === "box");
    const after = renderFrame(payload, toggleOverlay(view, "groundTruth"))
      .filter((c) => c.kind === "box");
    expect(after.length).toBe(before.length + 1);
  });

  it("fixation overlay can be hidden", () => {
    const { payload, view } = setup();
    const hidden = renderFrame(payload, toggleOverlay(view, "fixation"));
    expect(hidden.some((c) => c.kind === "fixation")).toBe(false);
  });

  it("label text carries the prediction confidence", () => {
    const { payload, view } = setup();
    const labels = renderFrame(payload, view).filter((c) => c.kind === "label");
    expect((labels[0] as { text: string }).text).toBe("book 90%");
  });
});
