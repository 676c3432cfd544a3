import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { StudioApp } from "../src/app.js";
import {
  DEFAULT_TEMPERATURE,
  MAX_ELEMENTS,
  initialState,
  restoreSession,
  serializeSession,
  validatePins,
} from "../src/state.js";
import { MockService } from "./mock_service.js";

function makeApp() {
  const service = new MockService();
  const api = new ApiClient("http://service.test", service.fetch);
  const app = new StudioApp(api);
  return { app, service };
}

describe("prompt_and_fetch", () => {
  it("issues one request per enabled method and fills all panels", async () => {
    const { app, service } = makeApp();
    app.setPrompt("sign in page");
    await app.promptAndFetch();

    const posts = service.calls.filter((c) => c.body !== undefined);
    expect(posts.map((c) => c.path).sort()).toEqual([
      "/v1/generate",
      "/v1/retrieve",
      "/v1/retrieve",
    ]);
    for (const method of ["generator", "text-only", "multi-modal"] as const) {
      expect(app.state.panels[method].status).toBe("ready");
      expect(app.state.panels[method].candidates.length).toBe(5);
    }
    // every shown candidate carries the SVG returned by the service
    const cand = app.state.panels.generator.candidates[0];
    expect(cand.svg).toContain(`data-id="${cand.id}"`);
  });

  it("fetches only enabled methods", async () => {
    const { app, service } = makeApp();
    app.setPrompt("gallery");
    app.setMethod("text-only", false);
    app.setMethod("multi-modal", false);
    await app.promptAndFetch();
    const posts = service.calls.filter((c) => c.body !== undefined);
    expect(posts.map((c) => c.path)).toEqual(["/v1/generate"]);
  });

  it("surfaces service errors inline without crashing", async () => {
    const { app, service } = makeApp();
    app.setPrompt("x");
    app.setMethod("text-only", false);
    app.setMethod("multi-modal", false);
    service.failNext = { status: 409, payload: { error: "artifact_not_loaded" } };
    await app.promptAndFetch();
    expect(app.state.panels.generator.status).toBe("error");
    expect(app.state.panels.generator.error).toContain("409");
  });

  it("keeps working when the service is unreachable", async () => {
    const { app, service } = makeApp();
    service.unreachable = true;
    app.setPrompt("x");
    await app.promptAndFetch();
    for (const method of ["generator", "text-only", "multi-modal"] as const) {
      expect(app.state.panels[method].status).toBe("error");
    }
  });

  it("records request/response pairs so candidates are byte-traceable", async () => {
    const { app } = makeApp();
    app.setPrompt("list screen");
    await app.promptAndFetch();
    const shown = app.state.panels.generator.candidates.map((c) => c.id);
    const recorded = app.state.history
      .filter((h) => h.method === "generator")
      .flatMap((h) => (h.response as { candidates: { id: string }[] }).candidates)
      .map((c) => c.id);
    for (const id of shown) expect(recorded).toContain(id);
  });
});

describe("temperature_control", () => {
  it("defaults to 0.1 and sends it with generate requests", async () => {
    const { app, service } = makeApp();
    expect(app.state.temperature).toBe(DEFAULT_TEMPERATURE);
    app.setPrompt("p");
    await app.promptAndFetch();
    const gen = service.calls.find((c) => c.path === "/v1/generate");
    expect((gen?.body as { temperature: number }).temperature).toBe(0.1);
  });

  it("forwards slider values and clamps to the 0.01..2.0 range", async () => {
    const { app, service } = makeApp();
    app.setPrompt("p");
    app.setTemperature(2.0);
    await app.promptAndFetch();
    let gen = service.calls.filter((c) => c.path === "/v1/generate").pop();
    expect((gen?.body as { temperature: number }).temperature).toBe(2.0);

    app.setTemperature(99);
    expect(app.state.temperature).toBe(2.0);
    app.setTemperature(0.0001);
    expect(app.state.temperature).toBe(0.01);
  });
});

describe("pin_and_resample", () => {
  it("pins selected elements and every new candidate contains the pinned box", async () => {
    const { app } = makeApp();
    app.setPrompt("login page");
    await app.promptAndFetch();

    const source = app.state.panels.generator.candidates[0];
    const pinned = source.elements[0];
    const problem = await app.pinAndResample(source, [0]);
    expect(problem).toBeNull();

    // verified against the recorded API traffic, not just local state
    const resample = app.state.history
      .filter((h) => h.endpoint === "/v1/generate")
      .pop()!;
    const request = resample.request as { pins?: unknown[] };
    expect(request.pins).toEqual([pinned]);
    const response = resample.response as {
      candidates: { elements: (typeof pinned)[] }[];
    };
    expect(response.candidates.length).toBeGreaterThan(0);
    for (const cand of response.candidates) {
      expect(cand.elements).toContainEqual(pinned);
    }
    // and the gallery shows exactly those candidates
    for (const cand of app.state.panels.generator.candidates) {
      expect(cand.elements).toContainEqual(pinned);
    }
  });

  it("refuses to pin retrieval candidates", async () => {
    const { app } = makeApp();
    app.setPrompt("q");
    await app.promptAndFetch();
    const retrieval = app.state.panels["text-only"].candidates[0];
    expect(app.canPin(retrieval)).toBe(false);
    const problem = await app.pinAndResample(retrieval, [0]);
    expect(problem).toMatch(/generator/);
  });

  it("unpin all returns to ordinary generation", async () => {
    const { app, service } = makeApp();
    app.setPrompt("p");
    await app.promptAndFetch();
    const source = app.state.panels.generator.candidates[0];
    await app.pinAndResample(source, [0]);
    expect(app.state.pins.length).toBe(1);
    app.unpinAll();
    await app.promptAndFetch();
    const lastGen = service.calls.filter((c) => c.path === "/v1/generate").pop();
    expect((lastGen?.body as { pins?: unknown }).pins).toBeUndefined();
  });

  it("client-side validation rejects out-of-bounds and oversized pin sets", () => {
    expect(validatePins([{ x: 0.9, y: 0.1, w: 0.5, h: 0.1, class: "Text" }])).toMatch(
      /extend/,
    );
    expect(validatePins([{ x: -0.1, y: 0.1, w: 0.2, h: 0.1, class: "Text" }])).toMatch(
      /unit square/,
    );
    const many = Array.from({ length: MAX_ELEMENTS + 1 }, () => ({
      x: 0.1,
      y: 0.1,
      w: 0.1,
      h: 0.1,
      class: "Text",
    }));
    expect(validatePins(many)).toMatch(/at most/);
    expect(
      validatePins([{ x: 0.1, y: 0.1, w: 0.2, h: 0.1, class: "Text" }]),
    ).toBeNull();
  });
});

describe("stale responses", () => {
  it("discards a superseded response by sequence number", async () => {
    const { app, service } = makeApp();
    app.setPrompt("first");
    app.setMethod("text-only", false);
    app.setMethod("multi-modal", false);

    // fire two overlapping requests; the first resolves after the second
    const first = app.promptAndFetch();
    app.setPrompt("second");
    const second = app.promptAndFetch();
    await Promise.all([first, second]);

    expect(app.state.panels.generator.status).toBe("ready");
    for (const cand of app.state.panels.generator.candidates) {
      const record = app.state.history.find(
        (h) =>
          h.method === "generator" &&
          (h.response as { candidates: { id: string }[] }).candidates.some(
            (c) => c.id === cand.id,
          ),
      );
      expect((record?.request as { prompt: string }).prompt).toBe("second");
    }
  });
});

describe("session persistence", () => {
  it("serializes and reloads losslessly", async () => {
    const { app } = makeApp();
    app.setPrompt("settings page");
    app.setTemperature(0.4);
    app.setCount(7);
    await app.promptAndFetch();
    const source = app.state.panels.generator.candidates[0];
    await app.pinAndResample(source, [0]);

    const json = serializeSession(app.state);
    const restored = restoreSession(json);
    expect(restored).toEqual(app.state);
    expect(serializeSession(restored)).toBe(json);
  });

  it("restore fills gaps with defaults and clamps temperature", () => {
    const sparse = JSON.stringify({ prompt: "p", temperature: 9 });
    const state = restoreSession(sparse);
    expect(state.prompt).toBe("p");
    expect(state.temperature).toBe(2.0);
    expect(state.methods.generator).toBe(true);
    expect(state.panels["text-only"].status).toBe("idle");
  });

  it("initial state has documented defaults", () => {
    const state = initialState();
    expect(state.temperature).toBe(0.1);
    expect(state.n).toBe(5);
    expect(state.pins).toEqual([]);
  });
});
