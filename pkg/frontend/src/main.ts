import { ApiClient } from "./api.js";
import { StudioApp } from "./app.js";
import { mountStudio } from "./ui.js";

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("api") ?? "http://127.0.0.1:8787";

const api = new ApiClient(baseUrl);
const app = new StudioApp(api);

const root = document.getElementById("studio");
if (!root) throw new Error("missing #studio mount point");
mountStudio(root, app);

api
  .health()
  .then((health) => {
    const missing = Object.entries(health.artifacts)
      .filter(([, loaded]) => !loaded)
      .map(([name]) => name);
    if (missing.length) {
      console.warn(`service is up but missing artifacts: ${missing.join(", ")}`);
    }
  })
  .catch(() => {
    const banner = document.createElement("div");
    banner.className = "error";
    banner.textContent = `cannot reach the mock-up service at ${baseUrl} - start it with: mockforge serve (or pass ?api=http://host:port)`;
    root.prepend(banner);
  });
