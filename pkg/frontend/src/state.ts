// View state and its pure transition functions. The UI is a projection of
// service responses plus local edits; reloading reconstructs the same view
// from the service, so nothing here is persisted.

import { BACKGROUND, Box, FramePayload, Region } from "./types.js";

export type EditMode = "relabel" | "move" | "draw";

export type WorkingRegion = Region & { edited: boolean };

export type OverlayToggles = {
  predictions: boolean;
  groundTruth: boolean;
  fixation: boolean;
};

export type ViewState = {
  sessionId: string;
  frameIndex: number;
  overlays: OverlayToggles;
  editMode: EditMode;
  selected: number | null;
  working: WorkingRegion[];
  roundsSeen: number;
  errorBanner: string | null;
  fieldErrors: string[];
  submitting: boolean;
};

export function initialViewState(sessionId: string): ViewState {
  return {
    sessionId,
    frameIndex: 0,
    overlays: { predictions: true, groundTruth: false, fixation: true },
    editMode: "relabel",
    selected: null,
    working: [],
    roundsSeen: 0,
    errorBanner: null,
    fieldErrors: [],
    submitting: false,
  };
}

// The editable regions for a frame: propagated proposals while annotating,
// otherwise the model's predictions (instances allocated locally).
export function workingRegionsFrom(payload: FramePayload): WorkingRegion[] {
  if (payload.proposals.length > 0) {
    return payload.proposals.map((p) => ({
      box: [...p.box] as Box,
      label: p.label,
      instance: p.instance,
      edited: false,
    }));
  }
  return payload.predictions.map((p, i) => ({
    box: [...p.box] as Box,
    label: p.label,
    instance: i,
    edited: false,
  }));
}

export function loadFrame(state: ViewState, payload: FramePayload): ViewState {
  return {
    ...state,
    frameIndex: payload.frame_index,
    working: workingRegionsFrom(payload),
    selected: null,
    errorBanner: null,
    fieldErrors: [],
  };
}

export function toggleOverlay(state: ViewState, key: keyof OverlayToggles): ViewState {
  return { ...state, overlays: { ...state.overlays, [key]: !state.overlays[key] } };
}

export function setEditMode(state: ViewState, mode: EditMode): ViewState {
  return { ...state, editMode: mode };
}

export function selectRegion(state: ViewState, index: number | null): ViewState {
  if (index !== null && (index < 0 || index >= state.working.length)) return state;
  return { ...state, selected: index };
}

export function relabelSelected(state: ViewState, label: string): ViewState {
  if (state.selected === null) return state;
  const working = state.working.map((r, i) =>
    i === state.selected && r.label !== label ? { ...r, label, edited: true } : r,
  );
  return { ...state, working };
}

export function moveSelected(state: ViewState, dx: number, dy: number, width: number, height: number): ViewState {
  if (state.selected === null) return state;
  const working = state.working.map((r, i) => {
    if (i !== state.selected) return r;
    const [x0, y0, x1, y1] = r.box;
    const boxW = x1 - x0;
    const boxH = y1 - y0;
    const nx0 = Math.min(Math.max(x0 + dx, 0), width - boxW);
    const ny0 = Math.min(Math.max(y0 + dy, 0), height - boxH);
    return { ...r, box: [nx0, ny0, nx0 + boxW, ny0 + boxH] as Box, edited: true };
  });
  return { ...state, working };
}

export function nextInstanceId(working: WorkingRegion[]): number {
  return working.reduce((m, r) => Math.max(m, r.instance), -1) + 1;
}

export function drawRegion(state: ViewState, box: Box, label: string): ViewState {
  if (box[2] - box[0] < 2 || box[3] - box[1] < 2) return state; // degenerate drag
  const region: WorkingRegion = {
    box,
    label,
    instance: nextInstanceId(state.working),
    edited: true,
  };
  return { ...state, working: [...state.working, region], selected: state.working.length };
}

export function deleteSelected(state: ViewState): ViewState {
  if (state.selected === null) return state;
  const working = state.working.map((r, i) =>
    i === state.selected ? { ...r, label: BACKGROUND, edited: true } : r,
  );
  return { ...state, working, selected: null };
}

export function hasEdits(state: ViewState): boolean {
  return state.working.some((r) => r.edited);
}

// Submission is a no-op guard: disabled while clean, while already
// submitting, and while the session retrains.
export function canSubmit(state: ViewState, phase: string): boolean {
  if (state.submitting) return false;
  if (phase === "training" || phase === "done") return false;
  if (phase === "seed") return state.working.length > 0;
  return hasEdits(state);
}

export function regionsForSubmit(state: ViewState): Region[] {
  return state.working.map(({ box, label, instance }) => ({ box, label, instance }));
}

export function payloadRejected(state: ViewState, message: string, fields: string[]): ViewState {
  // edits preserved; errors shown inline
  return { ...state, errorBanner: message, fieldErrors: fields, submitting: false };
}

export function roundsRefreshed(state: ViewState, rounds: number): ViewState {
  return { ...state, roundsSeen: rounds };
}
