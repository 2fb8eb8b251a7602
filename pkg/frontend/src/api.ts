/** Typed client for the review service. The UI does no chess logic of
 * its own: positions, lines, and per-ply FENs all come from the server. */

export interface CandidateSummary {
  id: string;
  fen: string;
  reward: number;
  ci_score: number;
  themes: string[];
  verdict: string | null;
  max_similarity: number | null;
}

export interface Page {
  total: number;
  limit: number;
  offset: number;
  items: CandidateSummary[];
}

export interface Neighbor {
  id: string;
  similarity: number;
  fen: string;
  analysis_url: string;
}

export interface CandidateDetail {
  id: string;
  fen: string;
  side_to_move: "w" | "b";
  analysis_url: string;
  reward: number;
  ci_score: number;
  unique: boolean;
  solution_uci: string[];
  solution_san: string[];
  fens_by_ply: string[];
  themes: string[];
  evidence: Record<string, Array<[number, string]>>;
  neighbors: Neighbor[];
  verdict: string | null;
}

export interface VerdictAck {
  id: string;
  verdict: string | null;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class ReviewApi {
  constructor(
    private baseUrl: string = "",
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path, init);
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const body = await resp.json();
        if (body && typeof body.detail === "string") detail = body.detail;
      } catch {
        // non-JSON error body: keep the status text
      }
      throw new ApiError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }

  listCandidates(params: {
    theme?: string;
    status?: string;
    sort?: string;
    limit?: number;
    offset?: number;
  }): Promise<Page> {
    const query = new URLSearchParams();
    if (params.theme) query.set("theme", params.theme);
    if (params.status) query.set("status", params.status);
    if (params.sort) query.set("sort", params.sort);
    if (params.limit !== undefined) query.set("limit", String(params.limit));
    if (params.offset !== undefined) query.set("offset", String(params.offset));
    const qs = query.toString();
    return this.request<Page>("/candidates" + (qs ? "?" + qs : ""));
  }

  getCandidate(id: string): Promise<CandidateDetail> {
    return this.request<CandidateDetail>(`/candidates/${id}`);
  }

  postVerdict(
    id: string,
    decision: "accepted" | "rejected",
    reviewer: string,
    note = "",
  ): Promise<VerdictAck> {
    return this.request<VerdictAck>(`/candidates/${id}/verdict`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ decision, reviewer, note }),
    });
  }

  exportMarkdown(): Promise<string> {
    return this.fetchImpl(this.baseUrl + "/export/booklet.md").then(async (resp) => {
      if (!resp.ok) throw new ApiError(resp.status, await resp.text());
      return resp.text();
    });
  }
}
