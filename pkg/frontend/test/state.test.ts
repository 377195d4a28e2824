import { describe, expect, it } from "vitest";

import {
  canSubmit,
  deleteSelected,
  drawRegion,
  hasEdits,
  initialViewState,
  loadFrame,
  moveSelected,
  payloadRejected,
  regionsForSubmit,
  relabelSelected,
  selectRegion,
  toggleOverlay,
} from "../src/state.js";
import { parseFramePayload } from "../src/types.js";
import { validPayload } from "./types.test.js";

function freshState() {
  const payload = parseFramePayload(validPayload());
  return { payload, view: loadFrame(initialViewState("s1"), payload) };
}

describe("view state transitions", () => {
  it("loads working regions from predictions when no proposals", () => {
    const { view } = freshState();
    expect(view.working).toHaveLength(2);
    expect(view.working.every((r) => !r.edited)).toBe(true);
  });

  it("prefers propagated proposals when annotating", () => {
    const raw = validPayload();
    raw.phase = "annotating";
    raw.proposals = [{ box: [5, 5, 25, 25], label: "book", instance: 3, source: "propagated" }];
    const view = loadFrame(initialViewState("s1"), parseFramePayload(raw));
    expect(view.working).toHaveLength(1);
    expect(view.working[0]!.instance).toBe(3);
  });

  it("relabel marks the region edited and enables submit", () => {
    let { view, payload } = freshState();
    expect(canSubmit(view, payload.phase)).toBe(false); // no edits yet
    view = selectRegion(view, 0);
    view = relabelSelected(view, "device-right");
    expect(view.working[0]!.label).toBe("device-right");
    expect(hasEdits(view)).toBe(true);
    expect(canSubmit(view, payload.phase)).toBe(true);
  });

  it("relabel to the same label is not an edit", () => {
    let { view } = freshState();
    view = selectRegion(view, 0);
    view = relabelSelected(view, view.working[0]!.label);
    expect(hasEdits(view)).toBe(false);
  });

  it("move clamps to frame bounds", () => {
    let { view } = freshState();
    view = selectRegion(view, 0);
    view = moveSelected(view, -1000, -1000, 320, 240);
    expect(view.working[0]!.box[0]).toBe(0);
    expect(view.working[0]!.box[1]).toBe(0);
  });

  it("draw allocates a fresh instance id", () => {
    let { view } = freshState();
    view = drawRegion(view, [200, 200, 240, 230], "book");
    expect(view.working).toHaveLength(3);
    expect(view.working[2]!.instance).toBe(2);
    expect(view.selected).toBe(2);
  });

  it("degenerate drag is ignored", () => {
    let { view } = freshState();
    view = drawRegion(view, [200, 200, 201, 200.5], "book");
    expect(view.working).toHaveLength(2);
  });

  it("delete relabels to background", () => {
    let { view } = freshState();
    view = selectRegion(view, 1);
    view = deleteSelected(view);
    expect(view.working[1]!.label).toBe("background");
    expect(view.selected).toBeNull();
  });

  it("seed phase allows submitting unedited regions", () => {
    const raw = validPayload();
    raw.phase = "seed";
    const view = loadFrame(initialViewState("s1"), parseFramePayload(raw));
    expect(canSubmit(view, "seed")).toBe(true);
  });

  it("submit disabled while training or done", () => {
    let { view } = freshState();
    view = selectRegion(view, 0);
    view = relabelSelected(view, "device-right");
    expect(canSubmit(view, "training")).toBe(false);
    expect(canSubmit(view, "done")).toBe(false);
  });

  it("rejection preserves edits and records field errors", () => {
    let { view } = freshState();
    view = selectRegion(view, 0);
    view = relabelSelected(view, "device-right");
    view = payloadRejected(view, "bad box", ["regions[0].box"]);
    expect(view.errorBanner).toBe("bad box");
    expect(view.fieldErrors).toEqual(["regions[0].box"]);
    expect(view.working[0]!.label).toBe("device-right");
  });

  it("regionsForSubmit strips edit markers", () => {
    let { view } = freshState();
    view = selectRegion(view, 0);
    view = relabelSelected(view, "device-right");
    const regions = regionsForSubmit(view);
    expect(regions[0]).toEqual({ box: [10, 10, 50, 50], label: "device-right", instance: 0 });
  });

  it("overlay toggles flip independently", () => {
    let { view } = freshState();
    view = toggleOverlay(view, "groundTruth");
    expect(view.overlays.groundTruth).toBe(true);
    expect(view.overlays.predictions).toBe(true);
  });
});
