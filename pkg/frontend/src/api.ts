/**
 * Typed client for the service API. Thin by design: the UI round-trips
 * every action through these routes and renders what comes back.
 */

import type {
  DenialDetail,
  GenerateResponse,
  GenerationRequestWire,
  ManifestWire,
  RankPage,
  SearchResult,
  SongSummary,
  StatementWire,
  TreeResponse,
  VerifyResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: unknown
  ) {
    super(`API error ${status}`);
  }
}

/** A policy denial from POST /generate (HTTP 403 with a structured body). */
export class GenerationBlocked extends Error {
  constructor(public readonly denial: DenialDetail) {
    super("generation blocked by policy");
  }
}

async function readError(response: Response): Promise<ApiError> {
  let detail: unknown = null;
  try {
    detail = (await response.json()).detail;
  } catch {
    detail = await response.text().catch(() => null);
  }
  return new ApiError(response.status, detail);
}

export class RefrainClient {
  constructor(private readonly baseUrl: string = "") {}

  private async getJson<T>(path: string): Promise<T> {
    const response = await fetch(this.baseUrl + path);
    if (!response.ok) throw await readError(response);
    return response.json() as Promise<T>;
  }

  private async postJson<T>(path: string, body: unknown): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) throw await readError(response);
    return response.json() as Promise<T>;
  }

  health(): Promise<{ status: string; songs: number; ledger_entries: number }> {
    return this.getJson("/healthz");
  }

  browse(nodeId: string): Promise<TreeResponse> {
    return this.getJson(`/catalogue/tree/${nodeId}`);
  }

  search(query: string, limit = 8): Promise<{ query: string; results: SearchResult[] }> {
    const params = new URLSearchParams({ q: query, limit: String(limit) });
    return this.getJson(`/catalogue/search?${params}`);
  }

  song(songId: number): Promise<SongSummary> {
    return this.getJson(`/catalogue/songs/${songId}`);
  }

  async openSession(
    userId: string,
    prompt: { kind: "free_text"; text: string } | { kind: "categories"; categories: Record<string, string[]> },
    k?: number
  ): Promise<string> {
    const body: Record<string, unknown> = { user_id: userId, prompt };
    if (k !== undefined) body.k = k;
    const created = await this.postJson<{ session_id: string }>("/sessions", body);
    return created.session_id;
  }

  retrieve(sessionId: string): Promise<RankPage> {
    return this.postJson(`/sessions/${sessionId}/retrieve`, {});
  }

  refine(sessionId: string, rejected: number[] = []): Promise<RankPage> {
    return this.postJson(`/sessions/${sessionId}/refine`, { rejected });
  }

  verify(request: GenerationRequestWire): Promise<VerifyResponse> {
    return this.postJson("/verify", request);
  }

  /** Throws GenerationBlocked on a policy denial so callers can render it. */
  async generate(request: GenerationRequestWire, sessionId?: string): Promise<GenerateResponse> {
    const body: Record<string, unknown> = { ...request };
    if (sessionId !== undefined) body.session_id = sessionId;
    try {
      return await this.postJson<GenerateResponse>("/generate", body);
    } catch (error) {
      if (error instanceof ApiError && error.status === 403) {
        throw new GenerationBlocked(error.detail as DenialDetail);
      }
      throw error;
    }
  }

  provenance(outputId: string): Promise<{ output_id: string; manifest: ManifestWire }> {
    return this.getJson(`/outputs/${outputId}/provenance`);
  }

  statement(artistId: string, fromTs?: string, toTs?: string): Promise<StatementWire> {
    const params = new URLSearchParams({ artist: artistId });
    if (fromTs) params.set("from", fromTs);
    if (toTs) params.set("to", toTs);
    return this.getJson(`/ledger/statement?${params}`);
  }
}
