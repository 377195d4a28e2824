// Browser wiring: canvas painting, toolbar, keyboard, and metrics polling.
// All logic lives in the pure modules; this file only touches the DOM.

import { ApiError, SessionClient } from "./api.js";
import { dragToBox, hitTest } from "./editor.js";
import { DrawCommand, renderFrame } from "./render.js";
import {
  EditMode,
  ViewState,
  canSubmit,
  deleteSelected,
  drawRegion,
  initialViewState,
  loadFrame,
  moveSelected,
  payloadRejected,
  regionsForSubmit,
  relabelSelected,
  roundsRefreshed,
  selectRegion,
  setEditMode,
  toggleOverlay,
} from "./state.js";
import { FramePayload, PayloadError } from "./types.js";

const $ = (id: string) => document.getElementById(id)!;

class Console {
  private client: SessionClient;
  private view: ViewState = initialViewState("");
  private payload: FramePayload | null = null;
  private canvas: HTMLCanvasElement;
  private ctx: CanvasRenderingContext2D;
  private dragStart: { x: number; y: number } | null = null;
  private pollTimer: number | null = null;

  constructor() {
    this.client = new SessionClient(location.origin);
    this.canvas = $("frame-canvas") as HTMLCanvasElement;
    this.ctx = this.canvas.getContext("2d")!;
    this.bindControls();
  }

  private bindControls(): void {
    $("btn-create").addEventListener("click", () => this.createSession());
    $("btn-accept").addEventListener("click", () => this.accept());
    $("btn-submit").addEventListener("click", () => this.submit());
    $("btn-prev").addEventListener("click", () => this.showFrame(this.view.frameIndex - 1));
    $("btn-next").addEventListener("click", () => this.showFrame(this.view.frameIndex + 1));
    for (const key of ["predictions", "groundTruth", "fixation"] as const) {
      $(`toggle-${key}`).addEventListener("change", () => {
        this.view = toggleOverlay(this.view, key);
        this.paint();
      });
    }
    ($("edit-mode") as HTMLSelectElement).addEventListener("change", (e) => {
      this.view = setEditMode(this.view, (e.target as HTMLSelectElement).value as EditMode);
    });
    ($("relabel-select") as HTMLSelectElement).addEventListener("change", (e) => {
      this.view = relabelSelected(this.view, (e.target as HTMLSelectElement).value);
      this.paint();
      this.refreshControls();
    });
    $("btn-delete").addEventListener("click", () => {
      this.view = deleteSelected(this.view);
      this.paint();
      this.refreshControls();
    });
    this.canvas.addEventListener("mousedown", (e) => this.onMouseDown(e));
    this.canvas.addEventListener("mouseup", (e) => this.onMouseUp(e));
  }

  private canvasPoint(e: MouseEvent): { x: number; y: number } {
    const rect = this.canvas.getBoundingClientRect();
    return {
      x: ((e.clientX - rect.left) / rect.width) * this.canvas.width,
      y: ((e.clientY - rect.top) / rect.height) * this.canvas.height,
    };
  }

  private onMouseDown(e: MouseEvent): void {
    this.dragStart = this.canvasPoint(e);
  }

  private onMouseUp(e: MouseEvent): void {
    const start = this.dragStart;
    this.dragStart = null;
    if (!start || !this.payload) return;
    const end = this.canvasPoint(e);
    const dx = end.x - start.x;
    const dy = end.y - start.y;
    const isClick = Math.hypot(dx, dy) < 3;
    if (isClick) {
      this.view = selectRegion(this.view, hitTest(this.view.working, end.x, end.y));
    } else if (this.view.editMode === "draw") {
      const box = dragToBox(start.x, start.y, end.x, end.y, this.payload.width, this.payload.height);
      const label = ($("relabel-select") as HTMLSelectElement).value || this.payload.class_labels[0]!;
      this.view = drawRegion(this.view, box, label);
    } else if (this.view.editMode === "move" && this.view.selected !== null) {
      this.view = moveSelected(this.view, dx, dy, this.payload.width, this.payload.height);
    }
    this.paint();
    this.refreshControls();
  }

  private async createSession(): Promise<void> {
    const dataset = ($("dataset-path") as HTMLInputElement).value || "scene.jsonl";
    try {
      const sessionId = await this.client.createSession({ dataset_path: dataset, expose_gt: true });
      this.view = initialViewState(sessionId);
      $("session-label").textContent = sessionId;
      this.startPolling();
      await this.showCurrent();
    } catch (err) {
      this.banner(err instanceof ApiError ? err.message : String(err));
    }
  }

  private async showCurrent(): Promise<void> {
    const state = await this.client.getState(this.view.sessionId);
    await this.showFrame(state.frame_index);
  }

  private async showFrame(index: number): Promise<void> {
    if (!this.view.sessionId || index < 0) return;
    try {
      this.payload = await this.client.getFrame(this.view.sessionId, index);
      this.view = loadFrame(this.view, this.payload);
      this.paint();
      this.refreshControls();
    } catch (err) {
      if (err instanceof PayloadError) {
        // schema mismatch: show the banner, leave the canvas untouched
        this.view = payloadRejected(this.view, err.message, err.fields);
        this.refreshControls();
      } else {
        this.banner(String(err));
      }
    }
  }

  private async accept(): Promise<void> {
    try {
      const result = await this.client.advance(this.view.sessionId);
      await this.showFrame(result.frame_index);
    } catch (err) {
      this.banner(err instanceof ApiError ? err.message : String(err));
    }
  }

  private async submit(): Promise<void> {
    if (!this.payload || !canSubmit(this.view, this.payload.phase)) return;
    this.view = { ...this.view, submitting: true };
    this.refreshControls();
    try {
      const result = await this.client.submitFeedback(
        this.view.sessionId,
        this.payload.frame_index,
        regionsForSubmit(this.view),
      );
      this.view = { ...this.view, submitting: false };
      if (result.accepted === false) {
        this.banner(`feedback refused: ${result.reason ?? "unknown"}`);
      } else {
        await this.showFrame(result.frame_index);
      }
    } catch (err) {
      if (err instanceof ApiError) {
        this.view = payloadRejected(this.view, err.message, []);
        this.refreshControls();
      }
    }
  }

  private startPolling(): void {
    if (this.pollTimer !== null) window.clearInterval(this.pollTimer);
    this.pollTimer = window.setInterval(async () => {
      try {
        const metrics = await this.client.getMetrics(this.view.sessionId);
        if (metrics.rounds.length !== this.view.roundsSeen) {
          this.view = roundsRefreshed(this.view, metrics.rounds.length);
          this.renderMetrics(metrics.rounds);
          await this.showCurrent();
        }
        const state = await this.client.getState(this.view.sessionId);
        $("phase-label").textContent =
          `${state.phase} | frame ${state.frame_index}/${state.total_frames}` +
          ` | round ${state.rounds_reported} | budget ${state.feedback_budget_left}`;
      } catch {
        /* transient polling errors are fine */
      }
    }, 700);
  }

  private renderMetrics(rounds: { round: number; map_50: number; fixation_accuracy: number | null; pct_data: number }[]): void {
    $("round-counter").textContent = String(rounds.length);
    $("metrics-body").innerHTML = rounds
      .map(
        (r) =>
          `<tr><td>${r.round}</td><td>${(r.pct_data * 100).toFixed(0)}%</td>` +
          `<td>${r.map_50.toFixed(3)}</td>` +
          `<td>${r.fixation_accuracy === null ? "-" : r.fixation_accuracy.toFixed(3)}</td></tr>`,
      )
      .join("");
  }

  private paint(): void {
    if (!this.payload) return;
    const commands = renderFrame(this.payload, this.view);
    this.canvas.width = this.payload.width;
    this.canvas.height = this.payload.height;
    for (const cmd of commands) {
      this.execute(cmd);
    }
  }

  private execute(cmd: DrawCommand): void {
    const ctx = this.ctx;
    switch (cmd.kind) {
      case "image": {
        const img = new Image();
        img.onload = () => {
          ctx.drawImage(img, 0, 0);
          // repaint overlays above the bitmap once it arrives
          if (this.payload) {
            for (const c of renderFrame(this.payload, this.view)) {
              if (c.kind !== "image") this.execute(c);
            }
          }
        };
        img.src = `data:image/png;base64,${cmd.pngBase64}`;
        break;
      }
      case "box":
        ctx.strokeStyle = cmd.color;
        ctx.lineWidth = cmd.emphasis ? 4 : 2;
        ctx.setLineDash(cmd.dashed ? [6, 4] : []);
        ctx.strokeRect(cmd.box[0], cmd.box[1], cmd.box[2] - cmd.box[0], cmd.box[3] - cmd.box[1]);
        ctx.setLineDash([]);
        break;
      case "label":
        ctx.fillStyle = cmd.color;
        ctx.font = "12px sans-serif";
        ctx.fillText(cmd.text, cmd.x, cmd.y);
        break;
      case "fixation":
        ctx.strokeStyle = cmd.color;
        ctx.lineWidth = 2;
        ctx.beginPath();
        ctx.arc(cmd.x, cmd.y, 6, 0, 2 * Math.PI);
        ctx.stroke();
        ctx.beginPath();
        ctx.arc(cmd.x, cmd.y, 1.5, 0, 2 * Math.PI);
        ctx.fillStyle = cmd.color;
        ctx.fill();
        break;
    }
  }

  private refreshControls(): void {
    const banner = $("error-banner");
    banner.textContent = this.view.errorBanner ?? "";
    banner.style.display = this.view.errorBanner ? "block" : "none";
    $("field-errors").textContent = this.view.fieldErrors.join(", ");
    const submit = $("btn-submit") as HTMLButtonElement;
    submit.disabled = !this.payload || !canSubmit(this.view, this.payload.phase);
    const select = $("relabel-select") as HTMLSelectElement;
    if (this.payload && select.options.length === 0) {
      for (const label of this.payload.class_labels) {
        const opt = document.createElement("option");
        opt.value = label;
        opt.textContent = label;
        select.appendChild(opt);
      }
    }
    if (this.view.selected !== null) {
      const region = this.view.working[this.view.selected];
      if (region) select.value = region.label;
    }
    $("frame-label").textContent = String(this.view.frameIndex);
  }

  private banner(message: string): void {
    this.view = { ...this.view, errorBanner: message };
    this.refreshControls();
  }
}

new Console();
