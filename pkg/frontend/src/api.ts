/**
 * Typed client for the optimisation service.
 *
 * Every displayed number in the dashboard originates from one of these
 * responses; the client performs no numerical work of its own.
 */

import type {
  SessionSummary,
  SessionView,
  SuggestResponse,
  TellResponse,
} from "./types";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function parseError(response: Response): Promise<ApiError> {
  let detail = response.statusText;
  try {
    const body = await response.json();
    if (body && typeof body.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiError(response.status, detail);
}

export class ApiClient {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return `${this.baseUrl.replace(/\/$/, "")}${path}`;
  }

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(this.url(path), init);
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as T;
  }

  async createSession(config: Record<string, unknown>): Promise<{ id: string }> {
    return this.json("/sessions", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(config),
    });
  }

  async listSessions(): Promise<SessionSummary[]> {
    return this.json("/sessions");
  }

  async getSession(id: string): Promise<SessionView> {
    return this.json(`/sessions/${id}`);
  }

  async suggest(id: string): Promise<SuggestResponse> {
    return this.json(`/sessions/${id}/suggest`, { method: "POST" });
  }

  async tell(id: string, x: number[], y: number, revision: number): Promise<TellResponse> {
    return this.json(`/sessions/${id}/tell`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ x, y, revision }),
    });
  }

  async mapScores(id: string, grid = 101): Promise<{ x: number[]; score: number[] }> {
    return this.json(`/sessions/${id}/map?grid=${grid}&mode=gp_score`);
  }

  /** Download location of the byte-exact trace CSV (served, never rebuilt here). */
  traceCsvUrl(id: string): string {
    return this.url(`/sessions/${id}/trace.csv`);
  }
}
