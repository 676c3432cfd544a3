// Session state for the steering loop. Serializes losslessly to JSON so a
// session can be shared and reloaded.

import type { CandidateJson, ElementBoxJson } from "./api.js";

export const METHODS = ["generator", "text-only", "multi-modal"] as const;
export type Method = (typeof METHODS)[number];

export const DEFAULT_TEMPERATURE = 0.1;
export const MIN_TEMPERATURE = 0.01;
export const MAX_TEMPERATURE = 2.0;
export const MAX_ELEMENTS = 128;

export interface GalleryCandidate {
  id: string;
  method: Method;
  elements: ElementBoxJson[];
  svg: string;
  seed?: number;
  sourceScreenId?: string;
  similarity?: number;
  rerankScore?: number;
}

export interface PanelState {
  seq: number; // request sequence; stale responses are discarded
  status: "idle" | "loading" | "ready" | "error";
  error?: string;
  candidates: GalleryCandidate[];
}

export interface ExchangeRecord {
  method: Method;
  endpoint: "/v1/generate" | "/v1/retrieve";
  seq: number;
  request: unknown;
  response: unknown;
}

export interface SessionState {
  prompt: string;
  methods: Record<Method, boolean>;
  temperature: number;
  n: number;
  seed: number;
  pins: ElementBoxJson[];
  panels: Record<Method, PanelState>;
  history: ExchangeRecord[];
}

export function freshPanel(): PanelState {
  return { seq: 0, status: "idle", candidates: [] };
}

export function initialState(): SessionState {
  return {
    prompt: "",
    methods: { generator: true, "text-only": true, "multi-modal": true },
    temperature: DEFAULT_TEMPERATURE,
    n: 5,
    seed: 0,
    pins: [],
    panels: {
      generator: freshPanel(),
      "text-only": freshPanel(),
      "multi-modal": freshPanel(),
    },
    history: [],
  };
}

export function clampTemperature(tau: number): number {
  if (Number.isNaN(tau)) return DEFAULT_TEMPERATURE;
  return Math.min(MAX_TEMPERATURE, Math.max(MIN_TEMPERATURE, tau));
}

export function validatePin(el: ElementBoxJson): string | null {
  const eps = 1e-6;
  if (!(el.x >= 0 && el.x <= 1 && el.y >= 0 && el.y <= 1)) {
    return "pin origin must lie in the unit square";
  }
  if (!(el.w > 0 && el.h > 0)) return "pin extent must be positive";
  if (el.x + el.w > 1 + eps || el.y + el.h > 1 + eps) {
    return "pin must not extend past the screen";
  }
  if (!el.class) return "pin needs a class name";
  return null;
}

export function validatePins(pins: ElementBoxJson[]): string | null {
  if (pins.length > MAX_ELEMENTS) {
    return `at most ${MAX_ELEMENTS} pins are allowed`;
  }
  for (const pin of pins) {
    const problem = validatePin(pin);
    if (problem) return problem;
  }
  return null;
}

export function candidateFromJson(c: CandidateJson, svg: string): GalleryCandidate {
  return {
    id: c.id,
    method: c.method,
    elements: c.elements,
    svg,
    seed: c.seed,
    sourceScreenId: c.source_screen_id,
    similarity: c.similarity,
    rerankScore: c.scores?.rerank_score,
  };
}

export function serializeSession(state: SessionState): string {
  return JSON.stringify(state);
}

export function restoreSession(json: string): SessionState {
  const parsed = JSON.parse(json) as SessionState;
  const base = initialState();
  return {
    ...base,
    ...parsed,
    methods: { ...base.methods, ...parsed.methods },
    panels: { ...base.panels, ...parsed.panels },
    temperature: clampTemperature(parsed.temperature ?? DEFAULT_TEMPERATURE),
  };
}
