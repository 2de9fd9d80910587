// Thin JSON client for /api/v1. Concurrent GETs to the same URL share
// one in-flight request; scenario polling backs off exponentially.

import type {
  ParcelDetail,
  ParcelPage,
  ScenarioResponse,
  WhatIfRequest,
  WhatIfResponse,
} from "./types";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public fields: { field: string; message: string }[] = [],
  ) {
    super(message);
  }
}

export function pollDelayMs(attempt: number, base = 500, max = 8000): number {
  return Math.min(base * 2 ** attempt, max);
}

export class ApiClient {
  private inflight = new Map<string, Promise<unknown>>();

  constructor(
    private baseUrl = "",
    private fetchFn: FetchLike = (url, init) => fetch(url, init),
    private sleep: (ms: number) => Promise<void> = (ms) =>
      new Promise((resolve) => setTimeout(resolve, ms)),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    let body: unknown = null;
    try {
      body = await response.json();
    } catch {
      body = null;
    }
    if (!response.ok) {
      const err = (body ?? {}) as { code?: string; message?: string; fields?: [] };
      throw new ApiError(
        response.status,
        err.code ?? "error",
        err.message ?? `HTTP ${response.status}`,
        err.fields ?? [],
      );
    }
    return body as T;
  }

  // GETs dedupe by URL while a request is still in the air.
  private getJson<T>(path: string): Promise<T> {
    const existing = this.inflight.get(path);
    if (existing) return existing as Promise<T>;
    const pending = this.request<T>(path).finally(() => this.inflight.delete(path));
    this.inflight.set(path, pending);
    return pending;
  }

  parcels(neighborhood: string | null, page: number): Promise<ParcelPage> {
    const params = new URLSearchParams({ page: String(page) });
    if (neighborhood) params.set("neighborhood", neighborhood);
    return this.getJson(`/api/v1/parcels?${params}`);
  }

  parcel(id: string): Promise<ParcelDetail> {
    return this.getJson(`/api/v1/parcels/${encodeURIComponent(id)}`);
  }

  whatIf(request: WhatIfRequest): Promise<WhatIfResponse> {
    return this.request("/api/v1/eligibility/whatif", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(request),
    });
  }

  submitScenario(config: Record<string, unknown>): Promise<ScenarioResponse> {
    return this.request("/api/v1/scenarios", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(config),
    });
  }

  scenarioStatus(id: string): Promise<ScenarioResponse> {
    return this.request(`/api/v1/scenarios/${encodeURIComponent(id)}`);
  }

  async runScenario(
    config: Record<string, unknown>,
    onProgress?: (attempt: number) => void,
  ): Promise<ScenarioResponse> {
    let response = await this.submitScenario(config);
    let attempt = 0;
    while (response.status === "running") {
      onProgress?.(attempt);
      await this.sleep(pollDelayMs(attempt));
      attempt += 1;
      response = await this.scenarioStatus(response.id);
    }
    if (response.status === "failed") {
      throw new ApiError(500, "scenario-failed", response.error ?? "scenario failed");
    }
    return response;
  }
}
