import json
import threading
import urllib.error
import urllib.request

import numpy as np
import pytest

from mockforge.core import ClassVocabulary, ElementBox, UiScreen
from mockforge.generator import GeneratorConfig, GeneratorModel
from mockforge.ingest import CorpusSplit
from mockforge.quality import MetricCalibration
from mockforge.retrieval import (
    DualEncoder,
    DualEncoderConfig,
    text_index_build,
    ui_index_build,
)
from mockforge.service import ServiceState, make_server
from mockforge.textfeat import HashedTfidfProvider

VOCAB = ClassVocabulary(["Image", "Text"])


def tiny_screens():
    screens = []
    for i, caption in enumerate(["login page", "photo gallery", "settings menu"]):
        els = (ElementBox(0.0, 0.0, 1.0, 1.0, VOCAB.unknown_id, is_leaf=False),
               ElementBox(0.1, 0.1 + 0.1 * i, 0.5, 0.08, VOCAB.id_of("Text"),
                          parent_idx=0),
               ElementBox(0.1, 0.5, 0.3, 0.2, VOCAB.id_of("Image"), parent_idx=0))
        screens.append(UiScreen(f"s{i}", f"app{i}", 1440, 2560, els,
                                captions=(caption,)))
    return screens


def build_state(with_generator=True, with_text=True, with_dual=True):
    screens = tiny_screens()
    provider = HashedTfidfProvider.fit([s.captions[0] for s in screens], dim=16)
    split = CorpusSplit("train", screens)
    kwargs = {}
    if with_generator:
        cfg = GeneratorConfig(hidden=16, intermediate=32, encoder_layers=1,
                              decoder_layers=1, heads=2, mixtures=2, text_max_len=8,
                              max_elements=6, dropout=0.0, provider_dim=16,
                              n_classes=len(VOCAB))
        kwargs["generator"] = GeneratorModel(cfg, VOCAB, seed=0)
        kwargs["generator_provider"] = provider
        kwargs["calibration"] = MetricCalibration({
            "overlap": [0.0, 0.5], "iou": [0.0, 0.5], "alignment": [0.0, 0.5]})
    if with_text:
        kwargs["text_index"] = text_index_build(split, provider)
        kwargs["text_provider"] = provider
    if with_dual:
        cfg = DualEncoderConfig(hidden=16, intermediate=32, layers=1, heads=2,
                                text_max_len=8, ui_max_len=16, dropout=0.0,
                                provider_dim=16, n_classes=len(VOCAB))
        enc = DualEncoder(cfg, seed=0)
        kwargs["dual_encoder"] = enc
        kwargs["retrieval_provider"] = provider
        kwargs["ui_index"] = ui_index_build(split, enc, provider)
    return ServiceState(vocab=VOCAB, screens_by_id={s.screen_id: s for s in screens},
                        **kwargs)


@pytest.fixture(scope="module")
def server_url():
    state = build_state()
    server = make_server(state, "127.0.0.1", 0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()


@pytest.fixture(scope="module")
def degraded_url():
    state = build_state(with_generator=False, with_dual=False)
    server = make_server(state, "127.0.0.1", 0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()


def call(url, path, body=None, method=None):
    req = urllib.request.Request(
        url + path,
        data=json.dumps(body).encode() if body is not None else None,
        headers={"Content-Type": "application/json"} if body is not None else {},
        method=method or ("POST" if body is not None else "GET"),
    )
    try:
        with urllib.request.urlopen(req, timeout=30) as resp:
            return resp.status, resp.headers.get("Content-Type"), resp.read()
    except urllib.error.HTTPError as err:
        return err.code, err.headers.get("Content-Type"), err.read()


class TestHealthAndClasses:
    def test_health(self, server_url):
        status, ctype, raw = call(server_url, "/v1/health")
        assert status == 200 and ctype == "application/json"
        body = json.loads(raw)
        assert body["status"] == "ok"
        assert body["artifacts"] == {"generator": True, "dual_encoder": True,
                                     "text_index": True}

    def test_health_degraded(self, degraded_url):
        body = json.loads(call(degraded_url, "/v1/health")[2])
        assert body["artifacts"] == {"generator": False, "dual_encoder": False,
                                     "text_index": True}

    def test_classes(self, server_url):
        status, _, raw = call(server_url, "/v1/classes")
        body = json.loads(raw)
        assert status == 200
        assert len(body["classes"]) == len(VOCAB)
        assert body["classes"][0] == {"id": 0, "name": "Image", "kind": "content"}


class TestGenerate:
    def test_valid_generate(self, server_url):
        status, _, raw = call(server_url, "/v1/generate",
                              {"prompt": "login page", "n": 5, "seed": 4})
        assert status == 200
        body = json.loads(raw)
        assert 1 <= len(body["candidates"]) <= 5
        for cand in body["candidates"]:
            assert cand["method"] == "generator"
            assert "scores" in cand
            for el in cand["elements"]:
                assert 0 <= el["x"] <= 1 and el["w"] > 0

    def test_seed_determinism_across_calls(self, server_url):
        a = json.loads(call(server_url, "/v1/generate",
                            {"prompt": "login page", "n": 2, "seed": 9})[2])
        b = json.loads(call(server_url, "/v1/generate",
                            {"prompt": "login page", "n": 2, "seed": 9})[2])
        geom = lambda body: [[(e["x"], e["y"], e["w"], e["h"]) for e in c["elements"]]
                             for c in body["candidates"]]
        assert geom(a) == geom(b)

    def test_pins_accepted(self, server_url):
        pin = {"x": 0.25, "y": 0.5, "w": 0.5, "h": 0.1, "class": "Text"}
        status, _, raw = call(server_url, "/v1/generate",
                              {"prompt": "login", "n": 2, "pins": [pin],
                               "postprocess": False})
        assert status == 200
        for cand in json.loads(raw)["candidates"]:
            assert {"x": 0.25, "y": 0.5, "w": 0.5, "h": 0.1, "class": "Text"} in [
                {k: e[k] for k in ("x", "y", "w", "h", "class")}
                for e in cand["elements"]]

    def test_400_field_messages(self, server_url):
        status, _, raw = call(server_url, "/v1/generate", {"prompt": "", "n": 99})
        assert status == 400
        body = json.loads(raw)
        assert body["error"] == "invalid_request"
        assert "prompt" in body["fields"] and "n" in body["fields"]

    def test_400_bad_pin(self, server_url):
        status, _, raw = call(server_url, "/v1/generate",
                              {"prompt": "x", "n": 1,
                               "pins": [{"x": 0.9, "y": 0.9, "w": 0.5, "h": 0.5,
                                         "class": "Text"}]})
        assert status == 400

    def test_400_malformed_json(self, server_url):
        req = urllib.request.Request(server_url + "/v1/generate", data=b"{oops",
                                     headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=30) as resp:
                status = resp.status
        except urllib.error.HTTPError as err:
            status = err.code
        assert status == 400

    def test_409_generator_missing(self, degraded_url):
        status, _, raw = call(degraded_url, "/v1/generate", {"prompt": "x", "n": 1})
        assert status == 409
        assert json.loads(raw)["artifact"] == "generator"


class TestRetrieve:
    def test_text_only_exact_caption(self, server_url):
        status, _, raw = call(server_url, "/v1/retrieve",
                              {"mode": "text-only", "prompt": "photo gallery", "k": 1})
        assert status == 200
        body = json.loads(raw)
        assert body["candidates"][0]["source_screen_id"] == "s1"
        assert body["candidates"][0]["similarity"] == pytest.approx(0.0, abs=1e-5)

    def test_multimodal(self, server_url):
        status, _, raw = call(server_url, "/v1/retrieve",
                              {"mode": "multi-modal", "prompt": "settings menu", "k": 2})
        assert status == 200
        body = json.loads(raw)
        assert len(body["candidates"]) == 2
        assert all(c["method"] == "multi-modal" for c in body["candidates"])

    def test_409_dual_encoder_missing(self, degraded_url):
        status, _, raw = call(degraded_url, "/v1/retrieve",
                              {"mode": "multi-modal", "prompt": "x", "k": 1})
        assert status == 409

    def test_400_bad_mode(self, server_url):
        status, _, _ = call(server_url, "/v1/retrieve", {"mode": "psychic", "prompt": "x"})
        assert status == 400


class TestCandidateSvg:
    def test_svg_fetch(self, server_url):
        body = json.loads(call(server_url, "/v1/generate",
                               {"prompt": "login page", "n": 1, "seed": 1})[2])
        cid = body["candidates"][0]["id"]
        status, ctype, raw = call(server_url, f"/v1/candidates/{cid}/svg")
        assert status == 200 and ctype == "image/svg+xml"
        assert raw.startswith(b"<svg")

    def test_404_unknown_candidate(self, server_url):
        status, _, raw = call(server_url, "/v1/candidates/c999999/svg")
        assert status == 404
        assert json.loads(raw)["error"] == "unknown_candidate"

    def test_404_unknown_path(self, server_url):
        assert call(server_url, "/v1/nope")[0] == 404


class TestReadsDoNotMutate:
    def test_health_and_classes_stable_across_posts(self, server_url):
        before = call(server_url, "/v1/classes")[2]
        call(server_url, "/v1/generate", {"prompt": "login page", "n": 1})
        call(server_url, "/v1/retrieve", {"mode": "text-only", "prompt": "x", "k": 1})
        after = call(server_url, "/v1/classes")[2]
        assert before == after
