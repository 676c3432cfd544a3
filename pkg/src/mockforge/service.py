"""HTTP service exposing generation, retrieval and rendering.

Endpoints (JSON in/out unless noted):

* ``POST /v1/generate``   -- prompt, n, temperature?, seed?, pins?, postprocess?
* ``POST /v1/retrieve``   -- prompt, mode (text-only | multi-modal), k
* ``GET  /v1/candidates/{id}/svg`` -- rendered mock-up (image/svg+xml)
* ``GET  /v1/classes``    -- the class vocabulary
* ``GET  /v1/health``     -- status plus which artifacts are loaded

Handlers run threaded over immutable artifact snapshots; the only mutable
state is the LRU candidate cache. Endpoints whose artifact is absent answer
409 rather than failing startup.
"""

from __future__ import annotations

import json
import logging
import threading
import uuid
from collections import OrderedDict
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional

from .core import ClassVocabulary, ElementBox, MockupCandidate, UiScreen
from .generator import GeneratorModel, SamplerConfig, sample_ui
from .quality import MetricCalibration, postprocess, score_elements
from .render import render_svg
from .retrieval import DualEncoder, VectorIndex, retrieve_multimodal, retrieve_text_only

log = logging.getLogger(__name__)

CACHE_CAP = 1024
MAX_N = 50


class RequestProblem(Exception):
    """400 with per-field messages."""

    def __init__(self, fields: dict[str, str]):
        super().__init__(str(fields))
        self.fields = fields


@dataclass
class ServiceState:
    vocab: ClassVocabulary
    generator: Optional[GeneratorModel] = None
    generator_provider: Optional[object] = None
    calibration: Optional[MetricCalibration] = None
    dual_encoder: Optional[DualEncoder] = None
    retrieval_provider: Optional[object] = None
    ui_index: Optional[VectorIndex] = None
    text_index: Optional[VectorIndex] = None
    text_provider: Optional[object] = None
    screens_by_id: dict[str, UiScreen] = field(default_factory=dict)

    def __post_init__(self):
        self._cache: OrderedDict[str, MockupCandidate] = OrderedDict()
        self._lock = threading.Lock()
        self._counter = 0

    # -- candidate cache (LRU)

    def remember(self, candidate: MockupCandidate) -> str:
        with self._lock:
            self._counter += 1
            cid = f"c{self._counter:06d}"
            self._cache[cid] = candidate
            while len(self._cache) > CACHE_CAP:
                self._cache.popitem(last=False)
        return cid

    def lookup(self, cid: str) -> Optional[MockupCandidate]:
        with self._lock:
            cand = self._cache.get(cid)
            if cand is not None:
                self._cache.move_to_end(cid)
            return cand

    def health(self) -> dict:
        return {
            "status": "ok",
            "artifacts": {
                "generator": self.generator is not None,
                "dual_encoder": self.dual_encoder is not None and self.ui_index is not None,
                "text_index": self.text_index is not None,
            },
        }


def _element_to_json(el: ElementBox, vocab: ClassVocabulary) -> dict:
    d = {"x": el.x, "y": el.y, "w": el.w, "h": el.h,
         "class": vocab.by_id(el.class_id).name}
    if el.text:
        d["text"] = el.text
    return d


def _element_from_json(d: dict, vocab: ClassVocabulary, where: str) -> ElementBox:
    problems = {}
    for key in ("x", "y", "w", "h"):
        if key not in d or not isinstance(d[key], (int, float)):
            problems[f"{where}.{key}"] = "must be a number"
    name = d.get("class")
    if not isinstance(name, str) or not vocab.has_name(name):
        problems[f"{where}.class"] = "must be a known class name"
    if problems:
        raise RequestProblem(problems)
    el = ElementBox(x=float(d["x"]), y=float(d["y"]), w=float(d["w"]), h=float(d["h"]),
                    class_id=vocab.id_of(name), text=d.get("text"))
    if not (0 <= el.x <= 1 and 0 <= el.y <= 1 and el.w > 0 and el.h > 0
            and el.x + el.w <= 1 + 1e-6 and el.y + el.h <= 1 + 1e-6):
        raise RequestProblem({where: "box must lie inside the unit screen"})
    return el


def _candidate_to_json(cid: str, cand: MockupCandidate, vocab: ClassVocabulary) -> dict:
    d = {
        "id": cid,
        "method": cand.method,
        "prompt": cand.prompt,
        "elements": [_element_to_json(el, vocab) for el in cand.elements],
    }
    if cand.seed is not None:
        d["seed"] = cand.seed
    if cand.source_screen_id is not None:
        d["source_screen_id"] = cand.source_screen_id
    if cand.similarity is not None:
        d["similarity"] = cand.similarity
    if cand.scores is not None:
        d["scores"] = {
            "overlap": cand.scores.overlap,
            "iou": cand.scores.iou,
            "alignment": cand.scores.alignment,
            "rerank_score": cand.scores.rerank_score,
        }
    return d


def handle_generate(state: ServiceState, body: dict) -> dict:
    problems = {}
    prompt = body.get("prompt")
    if not isinstance(prompt, str) or not prompt.strip():
        problems["prompt"] = "must be a non-empty string"
    n = body.get("n", 1)
    if not isinstance(n, int) or not (1 <= n <= MAX_N):
        problems["n"] = f"must be an integer in 1..{MAX_N}"
    temperature = body.get("temperature", 0.1)
    if not isinstance(temperature, (int, float)) or not (0 < temperature <= 10):
        problems["temperature"] = "must be a number in (0, 10]"
    seed = body.get("seed", 0)
    if not isinstance(seed, int):
        problems["seed"] = "must be an integer"
    postprocess_flag = body.get("postprocess", True)
    if not isinstance(postprocess_flag, bool):
        problems["postprocess"] = "must be a boolean"
    if problems:
        raise RequestProblem(problems)

    pins = None
    if body.get("pins"):
        if not isinstance(body["pins"], list):
            raise RequestProblem({"pins": "must be a list of elements"})
        pins = [_element_from_json(p, state.vocab, f"pins[{i}]")
                for i, p in enumerate(body["pins"])]

    candidates = []
    for i in range(n):
        sampler = SamplerConfig(temperature=float(temperature), seed=seed + i)
        candidates.append(
            sample_ui(state.generator, prompt, sampler, state.generator_provider, pins))

    fallback = False
    if postprocess_flag and state.calibration is not None:
        candidates, fallback = postprocess(candidates, state.calibration)
    else:
        from dataclasses import replace

        candidates = [replace(c, scores=score_elements(c.elements)) for c in candidates]

    out = []
    for cand in candidates:
        cid = state.remember(cand)
        out.append(_candidate_to_json(cid, cand, state.vocab))
    return {"prompt": prompt, "candidates": out, "filter_fallback": fallback,
            "postprocessed": bool(postprocess_flag and state.calibration is not None)}


def handle_retrieve(state: ServiceState, body: dict) -> dict:
    problems = {}
    prompt = body.get("prompt")
    if not isinstance(prompt, str) or not prompt.strip():
        problems["prompt"] = "must be a non-empty string"
    mode = body.get("mode", "text-only")
    if mode not in ("text-only", "multi-modal"):
        problems["mode"] = "must be 'text-only' or 'multi-modal'"
    k = body.get("k", 5)
    if not isinstance(k, int) or not (1 <= k <= MAX_N):
        problems["k"] = f"must be an integer in 1..{MAX_N}"
    if problems:
        raise RequestProblem(problems)

    if mode == "text-only":
        candidates = retrieve_text_only(prompt, state.text_index, state.text_provider,
                                        state.screens_by_id, k)
    else:
        candidates = retrieve_multimodal(prompt, state.dual_encoder, state.ui_index,
                                         state.retrieval_provider, state.screens_by_id, k)
    out = []
    for cand in candidates:
        cid = state.remember(cand)
        out.append(_candidate_to_json(cid, cand, state.vocab))
    return {"prompt": prompt, "mode": mode, "candidates": out}


class _Handler(BaseHTTPRequestHandler):
    state: ServiceState = None  # set by make_server
    protocol_version = "HTTP/1.1"

    # -- plumbing

    def log_message(self, fmt, *args):
        log.debug("%s -- " + fmt, self.address_string(), *args)

    def _send(self, code: int, payload: bytes, content_type: str) -> None:
        self.send_response(code)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(payload)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.end_headers()
        self.wfile.write(payload)

    def _send_json(self, code: int, obj) -> None:
        self._send(code, json.dumps(obj).encode("utf-8"), "application/json")

    def _artifact_missing(self, name: str) -> None:
        self._send_json(409, {"error": "artifact_not_loaded", "artifact": name})

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        if not raw:
            raise RequestProblem({"body": "request body must be a JSON object"})
        try:
            body = json.loads(raw)
        except json.JSONDecodeError:
            raise RequestProblem({"body": "request body is not valid JSON"})
        if not isinstance(body, dict):
            raise RequestProblem({"body": "request body must be a JSON object"})
        return body

    # -- routes

    def do_OPTIONS(self):
        self._send(204, b"", "text/plain")

    def do_GET(self):
        try:
            if self.path == "/v1/health":
                self._send_json(200, self.state.health())
            elif self.path == "/v1/classes":
                classes = [{"id": c.id, "name": c.name, "kind": c.kind}
                           for c in self.state.vocab.classes]
                self._send_json(200, {"classes": classes})
            elif self.path.startswith("/v1/candidates/") and self.path.endswith("/svg"):
                cid = self.path[len("/v1/candidates/") : -len("/svg")]
                cand = self.state.lookup(cid)
                if cand is None:
                    self._send_json(404, {"error": "unknown_candidate", "id": cid})
                    return
                svg = render_svg(cand, self.state.vocab).svg
                self._send(200, svg.encode("utf-8"), "image/svg+xml")
            else:
                self._send_json(404, {"error": "unknown_path", "path": self.path})
        except Exception:
            self._internal_error()

    def do_POST(self):
        try:
            if self.path == "/v1/generate":
                if self.state.generator is None:
                    self._artifact_missing("generator")
                    return
                body = self._read_body()
                self._send_json(200, handle_generate(self.state, body))
            elif self.path == "/v1/retrieve":
                body = self._read_body()
                mode = body.get("mode", "text-only")
                if mode == "text-only" and self.state.text_index is None:
                    self._artifact_missing("text_index")
                    return
                if mode == "multi-modal" and (self.state.dual_encoder is None
                                              or self.state.ui_index is None):
                    self._artifact_missing("dual_encoder")
                    return
                self._send_json(200, handle_retrieve(self.state, body))
            else:
                self._send_json(404, {"error": "unknown_path", "path": self.path})
        except RequestProblem as exc:
            self._send_json(400, {"error": "invalid_request", "fields": exc.fields})
        except Exception:
            self._internal_error()

    def _internal_error(self):
        incident = uuid.uuid4().hex[:12]
        log.exception("internal error, incident %s", incident)
        self._send_json(500, {"error": "internal", "incident": incident})


def make_server(state: ServiceState, host: str = "127.0.0.1",
                port: int = 8787) -> ThreadingHTTPServer:
    handler = type("BoundHandler", (_Handler,), {"state": state})
    return ThreadingHTTPServer((host, port), handler)


def serve_forever(state: ServiceState, host: str, port: int) -> None:
    server = make_server(state, host, port)
    log.info("serving on http://%s:%d", host, port)
    try:
        server.serve_forever()
    finally:
        server.server_close()
