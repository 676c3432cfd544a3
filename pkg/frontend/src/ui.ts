// DOM layer: renders session state and forwards user intent to the
// controller. No model math and no direct fetch calls live here.

import type { StudioApp } from "./app.js";
import type { GalleryCandidate, Method, SessionState } from "./state.js";
import { DEFAULT_TEMPERATURE, MAX_TEMPERATURE, METHODS, MIN_TEMPERATURE } from "./state.js";

const METHOD_LABELS: Record<Method, string> = {
  generator: "UI Generator",
  "text-only": "Text-only Retriever",
  "multi-modal": "Multi-modal Retriever",
};

export function mountStudio(root: HTMLElement, app: StudioApp): void {
  root.innerHTML = `
    <header class="bar">
      <input id="prompt" type="text" placeholder="describe the screen, e.g. 'login page with three input fields'"/>
      <button id="go">Create mock-ups</button>
    </header>
    <section class="controls">
      <span class="methods">${METHODS.map(
        (m) =>
          `<label><input type="checkbox" data-method="${m}" checked/> ${METHOD_LABELS[m]}</label>`,
      ).join("")}</span>
      <label class="tau">temperature
        <input id="tau" type="range" min="${MIN_TEMPERATURE}" max="${MAX_TEMPERATURE}"
               step="0.01" value="${DEFAULT_TEMPERATURE}"/>
        <output id="tau-value">${DEFAULT_TEMPERATURE.toFixed(2)}</output>
      </label>
      <label>candidates <input id="count" type="number" min="1" max="50" value="5"/></label>
      <label>seed <input id="seed" type="number" value="0"/></label>
      <span id="pins" class="pins"></span>
      <button id="unpin" hidden>unpin all</button>
      <button id="export">export session</button>
      <label class="import">import<input id="import" type="file" accept=".json" hidden/></label>
    </section>
    <main id="panels"></main>
  `;

  const promptInput = root.querySelector<HTMLInputElement>("#prompt")!;
  promptInput.addEventListener("input", () => app.setPrompt(promptInput.value));

  root.querySelector<HTMLButtonElement>("#go")!.addEventListener("click", () => {
    void app.promptAndFetch();
  });
  promptInput.addEventListener("keydown", (ev) => {
    if (ev.key === "Enter") void app.promptAndFetch();
  });

  for (const box of root.querySelectorAll<HTMLInputElement>("input[data-method]")) {
    box.addEventListener("change", () =>
      app.setMethod(box.dataset.method as Method, box.checked),
    );
  }

  const tau = root.querySelector<HTMLInputElement>("#tau")!;
  const tauValue = root.querySelector<HTMLOutputElement>("#tau-value")!;
  tau.addEventListener("input", () => {
    app.setTemperature(Number(tau.value));
    tauValue.textContent = Number(tau.value).toFixed(2);
  });

  const count = root.querySelector<HTMLInputElement>("#count")!;
  count.addEventListener("change", () => app.setCount(Number(count.value)));
  const seed = root.querySelector<HTMLInputElement>("#seed")!;
  seed.addEventListener("change", () => app.setSeed(Number(seed.value)));

  root.querySelector<HTMLButtonElement>("#unpin")!.addEventListener("click", () => {
    app.unpinAll();
  });

  root.querySelector<HTMLButtonElement>("#export")!.addEventListener("click", () => {
    const blob = new Blob([app.serialize()], { type: "application/json" });
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = "mockforge-session.json";
    a.click();
    URL.revokeObjectURL(a.href);
  });

  const importInput = root.querySelector<HTMLInputElement>("#import")!;
  root.querySelector(".import")!.addEventListener("click", () => importInput.click());
  importInput.addEventListener("change", async () => {
    const file = importInput.files?.[0];
    if (!file) return;
    const text = await file.text();
    app.state = JSON.parse(text);
    render(root, app, app.state);
  });

  app.onChange((state) => render(root, app, state));
  render(root, app, app.state);
}

function render(root: HTMLElement, app: StudioApp, state: SessionState): void {
  const pins = root.querySelector<HTMLElement>("#pins");
  const unpin = root.querySelector<HTMLButtonElement>("#unpin");
  if (pins && unpin) {
    pins.textContent = state.pins.length
      ? `${state.pins.length} pinned element${state.pins.length > 1 ? "s" : ""}`
      : "";
    unpin.hidden = state.pins.length === 0;
  }

  const panels = root.querySelector<HTMLElement>("#panels");
  if (!panels) return;
  panels.innerHTML = "";
  for (const method of METHODS) {
    if (!state.methods[method]) continue;
    const panel = state.panels[method];
    const row = document.createElement("section");
    row.className = "panel";
    const title = document.createElement("h2");
    title.textContent = METHOD_LABELS[method];
    row.appendChild(title);

    if (panel.status === "loading") {
      row.appendChild(note("working ..."));
    } else if (panel.status === "error") {
      const banner = note(`request failed: ${panel.error}`);
      banner.className = "error";
      const retry = document.createElement("button");
      retry.textContent = "retry";
      retry.addEventListener("click", () => void app.promptAndFetch());
      banner.appendChild(retry);
      row.appendChild(banner);
    } else if (panel.status === "ready" && panel.candidates.length === 0) {
      row.appendChild(note("no candidates survived post-processing"));
    }

    const grid = document.createElement("div");
    grid.className = "grid";
    for (const candidate of panel.candidates) {
      grid.appendChild(card(app, candidate, state));
    }
    row.appendChild(grid);
    panels.appendChild(row);
  }
}

function note(text: string): HTMLElement {
  const div = document.createElement("div");
  div.className = "note";
  div.textContent = text;
  return div;
}

function card(app: StudioApp, candidate: GalleryCandidate, state: SessionState): HTMLElement {
  const fig = document.createElement("figure");
  fig.className = "card";
  const mock = document.createElement("div");
  mock.className = "mock";
  mock.innerHTML = candidate.svg;
  markPins(mock, candidate, state);
  fig.appendChild(mock);

  const caption = document.createElement("figcaption");
  const bits: string[] = [candidate.method];
  if (candidate.sourceScreenId) bits.push(candidate.sourceScreenId);
  if (candidate.seed !== undefined) bits.push(`seed ${candidate.seed}`);
  if (candidate.rerankScore !== undefined) bits.push(`score ${candidate.rerankScore.toFixed(3)}`);
  if (candidate.similarity !== undefined) bits.push(`sim ${candidate.similarity.toFixed(3)}`);
  caption.textContent = bits.join(" · ");
  fig.appendChild(caption);

  const actions = document.createElement("div");
  actions.className = "actions";
  const pinButton = document.createElement("button");
  pinButton.textContent = "pin elements ...";
  if (!app.canPin(candidate)) {
    pinButton.disabled = true;
    pinButton.title = "pinning works on generator candidates only";
  } else {
    pinButton.addEventListener("click", () => {
      const picker = elementPicker(app, candidate);
      fig.appendChild(picker);
      pinButton.disabled = true;
    });
  }
  actions.appendChild(pinButton);
  fig.appendChild(actions);
  return fig;
}

function markPins(mock: HTMLElement, candidate: GalleryCandidate, state: SessionState): void {
  // outline returned boxes that match a pin
  const svg = mock.querySelector("svg");
  if (!svg || !state.pins.length) return;
  const keys = new Set(state.pins.map((p) => `${p.x},${p.y},${p.w},${p.h},${p.class}`));
  candidate.elements.forEach((el, i) => {
    if (!keys.has(`${el.x},${el.y},${el.w},${el.h},${el.class}`)) return;
    const group = svg.querySelector(`g[data-index="${i}"] rect`);
    if (group) {
      group.setAttribute("stroke", "#d53f8c");
      group.setAttribute("stroke-width", "3");
    }
  });
}

function elementPicker(app: StudioApp, candidate: GalleryCandidate): HTMLElement {
  const box = document.createElement("div");
  box.className = "picker";
  const list = document.createElement("div");
  candidate.elements.forEach((el, i) => {
    const label = document.createElement("label");
    const check = document.createElement("input");
    check.type = "checkbox";
    check.dataset.index = String(i);
    label.appendChild(check);
    label.append(` ${el.class} @ (${el.x.toFixed(2)}, ${el.y.toFixed(2)})`);
    list.appendChild(label);
  });
  box.appendChild(list);
  const go = document.createElement("button");
  go.textContent = "pin + resample";
  go.addEventListener("click", () => {
    const indices = [...box.querySelectorAll<HTMLInputElement>("input:checked")].map((c) =>
      Number(c.dataset.index),
    );
    void app.pinAndResample(candidate, indices).then((problem) => {
      if (problem) window.alert(problem);
    });
  });
  box.appendChild(go);
  return box;
}
