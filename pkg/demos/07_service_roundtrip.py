"""Spin up the HTTP service on desk-scale artifacts and drive the documented
endpoints end to end: health, classes, generate, retrieve, SVG fetch, and a
pinned resample.

Run:  python demos/07_service_roundtrip.py   (a couple of minutes: trains tiny models)
"""

import json
import threading
import urllib.request

from mockforge.generator import GeneratorConfig, GeneratorTrainConfig, train_generator
from mockforge.ingest import extract_leaf_view
from mockforge.quality import calibrate
from mockforge.retrieval import (
    DualEncoderConfig,
    RetrieverTrainConfig,
    text_index_build,
    train_dual_encoder,
    ui_index_build,
)
from mockforge.service import ServiceState, make_server
from mockforge.synthetic import grammar_corpus
from mockforge.textfeat import HashedTfidfProvider

corpus = grammar_corpus(n_train=160, n_val=32, n_test=16, seed=6)
vocab = corpus.vocab
provider = HashedTfidfProvider.fit(
    [c for s in corpus.train.screens for c in s.captions], dim=64)

print("training a small dual encoder and generator ...")
encoder, _ = train_dual_encoder(
    corpus.train, corpus.validation, provider,
    RetrieverTrainConfig(
        encoder=DualEncoderConfig(hidden=32, intermediate=64, layers=2, heads=4,
                                  text_max_len=32, ui_max_len=32, dropout=0.0,
                                  provider_dim=64, n_classes=len(vocab)),
        batch_size=32, max_epochs=15, patience=5, seed=0))
model, _ = train_generator(
    corpus.train, corpus.validation, provider, vocab,
    GeneratorTrainConfig(
        model=GeneratorConfig(hidden=48, intermediate=96, encoder_layers=2,
                              decoder_layers=2, heads=4, mixtures=5, text_max_len=32,
                              max_elements=16, dropout=0.0, provider_dim=64,
                              n_classes=len(vocab)),
        batch_size=32, max_epochs=25, patience=5, seed=0))

state = ServiceState(
    vocab=vocab,
    generator=model, generator_provider=provider,
    calibration=calibrate([extract_leaf_view(s) for s in corpus.validation.screens]),
    dual_encoder=encoder, retrieval_provider=provider,
    ui_index=ui_index_build(corpus.train, encoder, provider),
    text_index=text_index_build(corpus.train, provider), text_provider=provider,
    screens_by_id={s.screen_id: s for s in corpus.train.screens},
)
server = make_server(state, "127.0.0.1", 0)
threading.Thread(target=server.serve_forever, daemon=True).start()
url = f"http://127.0.0.1:{server.server_address[1]}"
print(f"service on {url}\n")


def call(path, body=None):
    req = urllib.request.Request(
        url + path,
        data=json.dumps(body).encode() if body is not None else None,
        headers={"Content-Type": "application/json"} if body is not None else {})
    with urllib.request.urlopen(req, timeout=120) as resp:
        raw = resp.read()
        return json.loads(raw) if resp.headers.get("Content-Type", "").startswith(
            "application/json") else raw


print("GET /v1/health ->", call("/v1/health"))
print("GET /v1/classes ->", len(call("/v1/classes")["classes"]), "classes")

prompt = "settings page with three toggle rows and a top bar"
gen = call("/v1/generate", {"prompt": prompt, "n": 6, "temperature": 0.1, "seed": 0})
print(f"\nPOST /v1/generate n=6 -> {len(gen['candidates'])} candidates after "
      f"postprocessing (fallback={gen['filter_fallback']})")
for cand in gen["candidates"][:2]:
    print(f"  {cand['id']}: {len(cand['elements'])} elements, "
          f"rerank {cand['scores']['rerank_score']:.3f}")

ret = call("/v1/retrieve", {"mode": "multi-modal", "prompt": prompt, "k": 3})
print(f"\nPOST /v1/retrieve multi-modal -> "
      f"{[c['source_screen_id'] for c in ret['candidates']]}")

cid = gen["candidates"][0]["id"]
svg = call(f"/v1/candidates/{cid}/svg")
print(f"\nGET /v1/candidates/{cid}/svg -> {len(svg)} bytes of SVG")

# pin the first element of the best candidate and resample
pin = gen["candidates"][0]["elements"][0]
pinned = call("/v1/generate", {"prompt": prompt, "n": 3, "seed": 1,
                               "pins": [pin], "postprocess": False})
ok = all(any(e == pin for e in c["elements"]) for c in pinned["candidates"])
print(f"\npinned resample: pin present in all {len(pinned['candidates'])} "
      f"candidates: {ok}")

server.shutdown()
