// Scripted end-to-end walkthrough used by the headless smoke test and for
// demoing: create a session, render the first frame, relabel one box,
// submit it as the seed annotation, accept the rest of the window, and
// watch the round counter move when retraining lands.

import { SessionClient } from "./api.js";
import { DrawCommand, renderFrame } from "./render.js";
import {
  ViewState,
  canSubmit,
  initialViewState,
  loadFrame,
  regionsForSubmit,
  relabelSelected,
  roundsRefreshed,
  selectRegion,
} from "./state.js";
import { MetricsReport, fixationToAoi } from "./types.js";

export type WalkthroughResult = {
  sessionId: string;
  frameZeroCommands: DrawCommand[];
  overlayBoxCount: number;
  fixationMarked: boolean;
  fixationAoiAgrees: boolean;
  relabeled: { instance: number; from: string; to: string };
  submitAccepted: boolean;
  roundsBefore: number;
  roundsAfter: number;
  metrics: MetricsReport;
  finalPhase: string;
};

export async function runWalkthrough(
  client: SessionClient,
  datasetPath: string,
  hil: Record<string, unknown>,
  modelSeed = 3,
): Promise<WalkthroughResult> {
  const sessionId = await client.createSession({
    dataset_path: datasetPath,
    hil,
    model_seed: modelSeed,
    expose_gt: true,
  });
  let view: ViewState = initialViewState(sessionId);

  const roundsBefore = (await client.getMetrics(sessionId)).rounds.length;

  // render frame 0 with overlays
  const payload = await client.getFrame(sessionId, 0);
  view = loadFrame(view, payload);
  const commands = renderFrame(payload, view);
  const overlayBoxCount = commands.filter((c) => c.kind === "box").length;
  const fixationMarked = commands.some((c) => c.kind === "fixation");
  const fixationAoiAgrees =
    payload.fixation === null ||
    fixationToAoi(payload.fixation.x, payload.fixation.y, payload.predictions) ===
      payload.fixation_aoi;

  // relabel one box: pick the first region and give it the next class label
  view = selectRegion(view, 0);
  const first = view.working[0];
  if (!first) throw new Error("frame 0 has no regions to edit");
  const from = first.label;
  const to = payload.class_labels.find((c) => c !== from) ?? from;
  view = relabelSelected(view, to);
  if (!canSubmit(view, payload.phase)) throw new Error("submit should be enabled after an edit");

  // submit the correction (this is the window's seed annotation)
  let result = await client.submitFeedback(sessionId, 0, regionsForSubmit(view));
  const submitAccepted = result.accepted === true;

  // accept the remaining frames of the annotation window
  while (!result.retrain_scheduled) {
    await client.waitReady(sessionId);
    result = await client.advance(sessionId);
  }

  // poll until retraining finishes and the metrics panel refreshes
  const state = await client.waitReady(sessionId);
  const metrics = await client.getMetrics(sessionId);
  view = roundsRefreshed(view, metrics.rounds.length);

  return {
    sessionId,
    frameZeroCommands: commands,
    overlayBoxCount,
    fixationMarked,
    fixationAoiAgrees,
    relabeled: { instance: first.instance, from, to },
    submitAccepted,
    roundsBefore,
    roundsAfter: view.roundsSeen,
    metrics,
    finalPhase: state.phase,
  };
}
