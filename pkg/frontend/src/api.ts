// Thin typed client for the control-plane HTTP API. Every mutation is one
// call; the UI never mutates simulation state any other way.

import type { Sample, ScenarioIn, SessionState, SwitchReport, RunReportDict, BamIn } from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function unwrap<T>(resp: Response): Promise<T> {
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      const body = await resp.json();
      detail = body.detail ?? JSON.stringify(body);
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(resp.status, detail);
  }
  return resp.json() as Promise<T>;
}

export class ApiClient {
  constructor(readonly base: string = "") {}

  private url(path: string): string {
    return `${this.base}${path}`;
  }

  createSession(scenario: ScenarioIn): Promise<SessionState> {
    return fetch(this.url("/sessions"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(scenario),
    }).then((r) => unwrap<SessionState>(r));
  }

  listSessions(): Promise<SessionState[]> {
    return fetch(this.url("/sessions")).then((r) => unwrap<SessionState[]>(r));
  }

  getSession(id: string): Promise<SessionState> {
    return fetch(this.url(`/sessions/${id}`)).then((r) => unwrap<SessionState>(r));
  }

  start(id: string, paused = false): Promise<SessionState> {
    return fetch(this.url(`/sessions/${id}/start?paused=${paused}`), { method: "POST" })
      .then((r) => unwrap<SessionState>(r));
  }

  pause(id: string): Promise<SessionState> {
    return fetch(this.url(`/sessions/${id}/pause`), { method: "POST" })
      .then((r) => unwrap<SessionState>(r));
  }

  resume(id: string): Promise<SessionState> {
    return fetch(this.url(`/sessions/${id}/resume`), { method: "POST" })
      .then((r) => unwrap<SessionState>(r));
  }

  step(id: string, events = 1): Promise<SessionState> {
    return fetch(this.url(`/sessions/${id}/step?events=${events}`), { method: "POST" })
      .then((r) => unwrap<SessionState>(r));
  }

  switchModel(id: string, bam: BamIn, bc?: number[], atTime?: number): Promise<SwitchReport> {
    return fetch(this.url(`/sessions/${id}/model`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ bam, bc: bc ?? null, at_time: atTime ?? null }),
    }).then((r) => unwrap<SwitchReport>(r));
  }

  retuneBc(id: string, bc: number[], link?: { src: number; dst: number }): Promise<SwitchReport> {
    return fetch(this.url(`/sessions/${id}/bc`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ bc, link: link ?? null }),
    }).then((r) => unwrap<SwitchReport>(r));
  }

  metrics(id: string, since = 0): Promise<{ cursor: number; samples: Sample[] }> {
    return fetch(this.url(`/sessions/${id}/metrics?since=${since}`))
      .then((r) => unwrap<{ cursor: number; samples: Sample[] }>(r));
  }

  report(id: string): Promise<{ runs: RunReportDict[]; state: SessionState }> {
    return fetch(this.url(`/sessions/${id}/report`))
      .then((r) => unwrap<{ runs: RunReportDict[]; state: SessionState }>(r));
  }

  exportCsv(id: string): Promise<string> {
    return fetch(this.url(`/sessions/${id}/export.csv`)).then((r) => {
      if (!r.ok) throw new ApiError(r.status, r.statusText);
      return r.text();
    });
  }

  recommend(features: number[]): Promise<{ model: string; bc_fractions: number[]; confidence: number }> {
    return fetch(this.url("/advisor/recommend"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ features }),
    }).then((r) => unwrap<{ model: string; bc_fractions: number[]; confidence: number }>(r));
  }

  streamUrl(id: string, since: number): string {
    return this.url(`/sessions/${id}/stream?since=${since}`);
  }
}
