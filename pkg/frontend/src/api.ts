// Typed client for the /v1 API. The only network surface of the UI:
// every server interaction goes through these documented endpoints.

export interface ChatReply {
  reply: string;
  trace_id: string;
  timings: { total_ms?: number };
  error: string | null;
}

export interface RoutePayload {
  route: "direct" | "retrieve";
  reason: string;
}

export interface ToolCallPayload {
  tool: string;
  args: Record<string, unknown>;
  result_digest: string;
  duration_ms: number;
}

export interface VerdictPayload {
  verdict: "sufficient" | "insufficient";
  missing: string[];
  round: number;
}

export interface TracePayload {
  trace_id: string;
  user_id: string;
  query: string;
  config_flags: Record<string, unknown>;
  route: RoutePayload | null;
  tool_calls: ToolCallPayload[];
  verdicts: VerdictPayload[];
  evidence: { segments: Record<string, string>; ltm_ids: number[] } | null;
  response: string;
  warnings: string[];
  timings: { total_ms?: number };
}

export interface MemoryRecordPayload {
  memory_id: number;
  text: string;
  tags: string[];
  timestamp: number;
  related: number[];
  source_turns: number[] | null;
  score?: number;
  provenance?: string;
}

export interface MemoriesPayload {
  probe: string | null;
  tags?: string[];
  records: MemoryRecordPayload[];
  total: number;
}

export interface ProfileFactPayload {
  text: string;
  first_seen: number;
  last_confirmed: number;
  source_turns: number[] | null;
}

export interface ProfilePayload {
  schema_version: number;
  version: number;
  updated_at: number;
  categories: Record<string, ProfileFactPayload[]>;
}

export interface SummaryPayload {
  summary_id: number;
  covers_turns: [number, number];
  topics: string[];
  text: string;
  created_at: number;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

type FetchLike = typeof fetch;

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    } catch (err) {
      throw new ApiError(0, `network error: ${String(err)}`);
    }
    if (!response.ok) {
      const body = await response.text();
      throw new ApiError(response.status, body || response.statusText);
    }
    return (await response.json()) as T;
  }

  sendMessage(userId: string, message: string): Promise<ChatReply> {
    return this.request<ChatReply>(`/v1/users/${encodeURIComponent(userId)}/messages`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ message }),
    });
  }

  getTrace(userId: string, traceId: string): Promise<TracePayload> {
    return this.request<TracePayload>(
      `/v1/users/${encodeURIComponent(userId)}/traces/${encodeURIComponent(traceId)}`,
    );
  }

  getProfile(userId: string): Promise<ProfilePayload> {
    return this.request<ProfilePayload>(`/v1/users/${encodeURIComponent(userId)}/profile`);
  }

  getMemories(userId: string, probe?: string, k = 10): Promise<MemoriesPayload> {
    const params = new URLSearchParams();
    if (probe) params.set("probe", probe);
    params.set("k", String(k));
    return this.request<MemoriesPayload>(
      `/v1/users/${encodeURIComponent(userId)}/memories?${params.toString()}`,
    );
  }

  getSummaries(userId: string): Promise<{ summaries: SummaryPayload[] }> {
    return this.request<{ summaries: SummaryPayload[] }>(
      `/v1/users/${encodeURIComponent(userId)}/summaries`,
    );
  }

  health(): Promise<{ status: string; backend: string }> {
    return this.request<{ status: string; backend: string }>(`/v1/health`);
  }
}
