// Thin typed client over the engine's HTTP API.

import type {
  DeltaBreakdown,
  ModelSummary,
  QueueRow,
  TickBody,
  TickReport,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number,
  ) {
    super(message);
  }

  get busy(): boolean {
    return this.status === 409;
  }
}

export class EngineClient {
  constructor(
    private baseUrl: string,
    private fetchFn: typeof fetch = fetch,
  ) {}

  setBaseUrl(url: string): void {
    this.baseUrl = url;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError(`engine unreachable: ${String(err)}`, 0);
    }
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = (await response.json()) as { error?: string };
        if (body.error) detail = body.error;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(detail, response.status);
    }
    return (await response.json()) as T;
  }

  fetchQueue(): Promise<QueueRow[]> {
    return this.request<QueueRow[]>("/events/current");
  }

  submitTick(body: TickBody): Promise<TickReport> {
    return this.request<TickReport>("/ticks", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  deltaBreakdown(instanceId: string): Promise<DeltaBreakdown> {
    return this.request<DeltaBreakdown>(
      `/diagnostics/delta/${encodeURIComponent(instanceId)}`,
    );
  }

  flags(): Promise<Record<string, boolean>> {
    return this.request<Record<string, boolean>>("/diagnostics/flags");
  }

  model(typeId: string): Promise<ModelSummary> {
    return this.request<ModelSummary>(`/models/${encodeURIComponent(typeId)}`);
  }
}
