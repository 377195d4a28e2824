// Thin typed client over the session service's HTTP API.

import { FramePayload, MetricsReport, Region, SessionState, parseFramePayload, parseMetricsJsonl } from "./types.js";

export class ApiError extends Error {
  readonly status: number;
  readonly detail: unknown;

  constructor(status: number, detail: unknown) {
    super(`service returned ${status}: ${JSON.stringify(detail)}`);
    this.status = status;
    this.detail = detail;
  }
}

export type CommandResult = {
  accepted?: boolean;
  retrain_scheduled?: boolean;
  frame_index: number;
  phase: string;
  reason?: string;
};

export class SessionClient {
  constructor(private readonly baseUrl: string) {}

  private async request(method: string, path: string, body?: unknown): Promise<Response> {
    const resp = await fetch(this.baseUrl + path, {
      method,
      headers: { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!resp.ok) {
      let detail: unknown = null;
      try {
        detail = (await resp.json()).detail;
      } catch {
        detail = await resp.text().catch(() => null);
      }
      throw new ApiError(resp.status, detail);
    }
    return resp;
  }

  async health(): Promise<boolean> {
    try {
      const resp = await fetch(this.baseUrl + "/healthz");
      return resp.ok;
    } catch {
      return false;
    }
  }

  async createSession(options: {
    dataset_path: string;
    detector?: Record<string, unknown>;
    hil?: Record<string, unknown>;
    model_seed?: number;
    expose_gt?: boolean;
  }): Promise<string> {
    const resp = await this.request("POST", "/sessions", { mode: "external", ...options });
    return (await resp.json()).session_id as string;
  }

  async getFrame(sessionId: string, frameIndex: number): Promise<FramePayload> {
    const resp = await this.request("GET", `/sessions/${sessionId}/frames/${frameIndex}`);
    return parseFramePayload(await resp.json());
  }

  async getState(sessionId: string): Promise<SessionState> {
    const resp = await this.request("GET", `/sessions/${sessionId}/state`);
    return (await resp.json()) as SessionState;
  }

  async submitFeedback(sessionId: string, frame: number, regions: Region[]): Promise<CommandResult> {
    const resp = await this.request("POST", `/sessions/${sessionId}/feedback`, { frame, regions });
    return (await resp.json()) as CommandResult;
  }

  async advance(sessionId: string): Promise<CommandResult> {
    const resp = await this.request("POST", `/sessions/${sessionId}/advance`);
    return (await resp.json()) as CommandResult;
  }

  async getMetrics(sessionId: string): Promise<MetricsReport> {
    const resp = await this.request("GET", `/sessions/${sessionId}/metrics`);
    return parseMetricsJsonl(await resp.text());
  }

  // Poll until the service leaves the training phase (retrain finished).
  async waitReady(sessionId: string, timeoutMs = 120000, intervalMs = 150): Promise<SessionState> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const state = await this.getState(sessionId);
      if (state.phase !== "training") return state;
      if (Date.now() > deadline) throw new Error("timed out waiting for retrain");
      await new Promise((r) => setTimeout(r, intervalMs));
    }
  }
}
