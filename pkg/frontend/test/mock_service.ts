// In-process stand-in for the mock-up service, faithful to the documented
// JSON schemas: generate echoes pins verbatim into every candidate (the
// prefix-forcing contract), retrieve returns source screens, candidate SVGs
// resolve by id, health reports loaded artifacts. Every request is recorded
// so tests can assert on the actual traffic.

import type {
  CandidateJson,
  ElementBoxJson,
  GenerateRequest,
  RetrieveRequest,
} from "../src/api.js";
import type { FetchLike } from "../src/api.js";

export interface RecordedCall {
  path: string;
  body?: unknown;
}

export class MockService {
  calls: RecordedCall[] = [];
  private counter = 0;
  private svgs = new Map<string, string>();
  failNext: { status: number; payload: unknown } | null = null;
  unreachable = false;

  fetch: FetchLike = async (input, init) => {
    const url = new URL(input);
    const path = url.pathname;
    const body = init?.body ? JSON.parse(String(init.body)) : undefined;
    this.calls.push({ path, body });

    if (this.unreachable) throw new TypeError("fetch failed: connection refused");
    if (this.failNext) {
      const { status, payload } = this.failNext;
      this.failNext = null;
      return jsonResponse(status, payload);
    }

    if (path === "/v1/health") {
      return jsonResponse(200, {
        status: "ok",
        artifacts: { generator: true, dual_encoder: true, text_index: true },
      });
    }
    if (path === "/v1/classes") {
      return jsonResponse(200, {
        classes: [
          { id: 0, name: "Image", kind: "content" },
          { id: 1, name: "Text", kind: "content" },
        ],
      });
    }
    if (path === "/v1/generate") {
      return jsonResponse(200, this.generate(body as GenerateRequest));
    }
    if (path === "/v1/retrieve") {
      return jsonResponse(200, this.retrieve(body as RetrieveRequest));
    }
    const svgMatch = path.match(/^\/v1\/candidates\/(.+)\/svg$/);
    if (svgMatch) {
      const svg = this.svgs.get(svgMatch[1]);
      if (!svg) return jsonResponse(404, { error: "unknown_candidate" });
      return new Response(svg, {
        status: 200,
        headers: { "Content-Type": "image/svg+xml" },
      });
    }
    return jsonResponse(404, { error: "unknown_path", path });
  };

  private nextId(): string {
    this.counter += 1;
    return `c${String(this.counter).padStart(6, "0")}`;
  }

  private candidate(
    method: CandidateJson["method"],
    prompt: string,
    elements: ElementBoxJson[],
    extra: Partial<CandidateJson> = {},
  ): CandidateJson {
    const id = this.nextId();
    this.svgs.set(id, `<svg xmlns="http://www.w3.org/2000/svg" data-id="${id}"></svg>`);
    return {
      id,
      method,
      prompt,
      elements,
      scores: { overlap: 0.01, iou: 0.0, alignment: 0.002, rerank_score: 0.8 },
      ...extra,
    };
  }

  private generate(req: GenerateRequest) {
    const pins = req.pins ?? [];
    const seed = req.seed ?? 0;
    const candidates = [];
    for (let i = 0; i < req.n; i++) {
      // pins come back verbatim; the sampled remainder varies by seed
      const sampled: ElementBoxJson = {
        x: 0.1,
        y: 0.1 + 0.05 * ((seed + i) % 5),
        w: 0.5,
        h: 0.08,
        class: "Text",
      };
      candidates.push(
        this.candidate("generator", req.prompt, [...pins, sampled], { seed: seed + i }),
      );
    }
    return {
      prompt: req.prompt,
      candidates,
      filter_fallback: false,
      postprocessed: req.postprocess !== false,
    };
  }

  private retrieve(req: RetrieveRequest) {
    const candidates = [];
    for (let i = 0; i < req.k; i++) {
      candidates.push(
        this.candidate(req.mode, req.prompt,
          [{ x: 0.05, y: 0.1 * (i + 1), w: 0.9, h: 0.08, class: "Image" }],
          { source_screen_id: `screen-${i}`, similarity: 1 - 0.1 * i }),
      );
    }
    return { prompt: req.prompt, mode: req.mode, candidates };
  }
}

function jsonResponse(status: number, payload: unknown): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}
