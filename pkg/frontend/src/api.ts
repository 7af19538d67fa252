// Thin typed client over the harness console API. Every method maps to one
// endpoint; errors surface as ApiError with the server's message and status.

import type {
  MatrixCell,
  RoundEntry,
  ScenarioInfo,
  ScenarioPatch,
  TranscriptPage,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ConsoleClient {
  private readonly fetchImpl: FetchLike;

  constructor(
    public readonly baseUrl: string,
    fetchImpl?: FetchLike,
  ) {
    // bind so a bare globalThis.fetch keeps its receiver
    this.fetchImpl = fetchImpl ?? ((input, init) => globalThis.fetch(input, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError(0, `cannot reach ${this.baseUrl}: ${String(err)}`);
    }
    let body: unknown;
    try {
      body = await response.json();
    } catch {
      throw new ApiError(response.status, `non-JSON response from ${path}`);
    }
    if (!response.ok) {
      const message =
        body && typeof body === "object" && "error" in body
          ? String((body as { error: unknown }).error)
          : `HTTP ${response.status}`;
      throw new ApiError(response.status, message);
    }
    return body as T;
  }

  getScenario(): Promise<ScenarioInfo> {
    return this.request("/api/scenario");
  }

  /** Replace the scenario config; the server rebuilds the fabric. */
  setScenario(config: ScenarioPatch): Promise<ScenarioInfo> {
    return this.request("/api/scenario", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(config),
    });
  }

  submitQuery(terms: string[]): Promise<RoundEntry> {
    return this.request("/api/attack/query", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ terms }),
    });
  }

  getHistory(): Promise<{ rounds: RoundEntry[] }> {
    return this.request("/api/history");
  }

  getTranscript(after: number): Promise<TranscriptPage> {
    return this.request(`/api/transcript?after=${after}`);
  }

  getMatrix(): Promise<{ cells: MatrixCell[] }> {
    return this.request("/api/matrix");
  }
}
