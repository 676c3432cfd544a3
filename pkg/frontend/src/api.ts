// Typed client for the mock-up service. The studio performs no model math:
// everything shown comes back from these five endpoints.

export interface ElementBoxJson {
  x: number;
  y: number;
  w: number;
  h: number;
  class: string;
  text?: string;
}

export interface QualityScoresJson {
  overlap: number;
  iou: number;
  alignment: number;
  rerank_score: number;
}

export interface CandidateJson {
  id: string;
  method: "generator" | "text-only" | "multi-modal";
  prompt: string;
  elements: ElementBoxJson[];
  seed?: number;
  source_screen_id?: string;
  similarity?: number;
  scores?: QualityScoresJson;
}

export interface GenerateRequest {
  prompt: string;
  n: number;
  temperature?: number;
  seed?: number;
  pins?: ElementBoxJson[];
  postprocess?: boolean;
}

export interface GenerateResponse {
  prompt: string;
  candidates: CandidateJson[];
  filter_fallback: boolean;
  postprocessed: boolean;
}

export interface RetrieveRequest {
  prompt: string;
  mode: "text-only" | "multi-modal";
  k: number;
}

export interface RetrieveResponse {
  prompt: string;
  mode: string;
  candidates: CandidateJson[];
}

export interface HealthResponse {
  status: string;
  artifacts: { generator: boolean; dual_encoder: boolean; text_index: boolean };
}

export interface SemanticClassJson {
  id: number;
  name: string;
  kind: string;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly payload: unknown,
  ) {
    super(`service responded ${status}`);
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async post<T>(path: string, body: unknown): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    const payload = await resp.json();
    if (!resp.ok) throw new ApiError(resp.status, payload);
    return payload as T;
  }

  private async get<T>(path: string): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path);
    const payload = await resp.json();
    if (!resp.ok) throw new ApiError(resp.status, payload);
    return payload as T;
  }

  generate(req: GenerateRequest): Promise<GenerateResponse> {
    return this.post("/v1/generate", req);
  }

  retrieve(req: RetrieveRequest): Promise<RetrieveResponse> {
    return this.post("/v1/retrieve", req);
  }

  async candidateSvg(id: string): Promise<string> {
    const resp = await this.fetchImpl(`${this.baseUrl}/v1/candidates/${id}/svg`);
    if (!resp.ok) throw new ApiError(resp.status, await resp.text());
    return resp.text();
  }

  classes(): Promise<{ classes: SemanticClassJson[] }> {
    return this.get("/v1/classes");
  }

  health(): Promise<HealthResponse> {
    return this.get("/v1/health");
  }
}
