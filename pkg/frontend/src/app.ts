// Studio controller: wires session state to the service client. One
// in-flight request per method panel; responses tagged with a stale sequence
// number are dropped. Every candidate shown traces back to a recorded
// request/response pair in the history.

import {
  ApiClient,
  ApiError,
  type CandidateJson,
  type ElementBoxJson,
  type GenerateRequest,
  type RetrieveRequest,
} from "./api.js";
import {
  type GalleryCandidate,
  type Method,
  METHODS,
  type SessionState,
  candidateFromJson,
  clampTemperature,
  initialState,
  restoreSession,
  serializeSession,
  validatePins,
} from "./state.js";

export type Listener = (state: SessionState) => void;

export class StudioApp {
  state: SessionState;
  private listeners: Listener[] = [];

  constructor(private readonly api: ApiClient, state?: SessionState) {
    this.state = state ?? initialState();
  }

  onChange(listener: Listener): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const l of this.listeners) l(this.state);
  }

  // -- controls

  setPrompt(prompt: string): void {
    this.state.prompt = prompt;
    this.emit();
  }

  setMethod(method: Method, enabled: boolean): void {
    this.state.methods[method] = enabled;
    this.emit();
  }

  setTemperature(tau: number): void {
    this.state.temperature = clampTemperature(tau);
    this.emit();
  }

  setCount(n: number): void {
    this.state.n = Math.min(50, Math.max(1, Math.round(n)));
    this.emit();
  }

  setSeed(seed: number): void {
    this.state.seed = Math.round(seed);
    this.emit();
  }

  // -- pinning

  canPin(candidate: GalleryCandidate): boolean {
    // retrieval candidates cannot seed the generator prefix
    return candidate.method === "generator";
  }

  pinElements(candidate: GalleryCandidate, indices: number[]): string | null {
    if (!this.canPin(candidate)) {
      return "pinning works on generator candidates only";
    }
    const picked = indices
      .filter((i) => i >= 0 && i < candidate.elements.length)
      .map((i) => candidate.elements[i]);
    const next = [...this.state.pins, ...picked];
    const problem = validatePins(next);
    if (problem) return problem;
    this.state.pins = next;
    this.emit();
    return null;
  }

  unpinAll(): void {
    this.state.pins = [];
    this.emit();
  }

  // -- the steering loop

  async promptAndFetch(): Promise<void> {
    const jobs: Promise<void>[] = [];
    for (const method of METHODS) {
      if (this.state.methods[method]) jobs.push(this.fetchPanel(method));
    }
    await Promise.all(jobs);
  }

  async pinAndResample(candidate: GalleryCandidate, indices: number[]): Promise<string | null> {
    const problem = this.pinElements(candidate, indices);
    if (problem) return problem;
    await this.fetchPanel("generator");
    return null;
  }

  private async fetchPanel(method: Method): Promise<void> {
    const panel = this.state.panels[method];
    const seq = ++panel.seq;
    panel.status = "loading";
    panel.error = undefined;
    this.emit();
    try {
      let candidates: CandidateJson[];
      let record: { endpoint: "/v1/generate" | "/v1/retrieve"; request: unknown; response: unknown };
      if (method === "generator") {
        const request: GenerateRequest = {
          prompt: this.state.prompt,
          n: this.state.n,
          temperature: this.state.temperature,
          seed: this.state.seed,
        };
        if (this.state.pins.length) request.pins = this.state.pins;
        const response = await this.api.generate(request);
        candidates = response.candidates;
        record = { endpoint: "/v1/generate", request, response };
      } else {
        const request: RetrieveRequest = {
          prompt: this.state.prompt,
          mode: method,
          k: this.state.n,
        };
        const response = await this.api.retrieve(request);
        candidates = response.candidates;
        record = { endpoint: "/v1/retrieve", request, response };
      }
      if (seq !== panel.seq) return; // superseded by a newer request
      const withSvg: GalleryCandidate[] = [];
      for (const c of candidates) {
        withSvg.push(candidateFromJson(c, await this.api.candidateSvg(c.id)));
      }
      if (seq !== panel.seq) return;
      panel.candidates = withSvg;
      panel.status = "ready";
      this.state.history.push({ method, seq, ...record });
    } catch (err) {
      if (seq !== panel.seq) return;
      panel.status = "error";
      panel.error =
        err instanceof ApiError
          ? `service error ${err.status}: ${JSON.stringify(err.payload)}`
          : String(err);
    }
    this.emit();
  }

  // -- persistence

  serialize(): string {
    return serializeSession(this.state);
  }

  static restore(api: ApiClient, json: string): StudioApp {
    return new StudioApp(api, restoreSession(json));
  }
}

export type { ElementBoxJson, GalleryCandidate, Method, SessionState };
