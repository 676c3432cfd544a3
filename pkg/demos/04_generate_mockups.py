"""Train the UI generator on the synthetic grammar corpus, then sample
mock-ups: plain, temperature swept, and with pinned elements.

Run:  python demos/04_generate_mockups.py   (several minutes of CPU)
"""

import time

from mockforge.core import ElementBox
from mockforge.generator import (
    GeneratorConfig,
    GeneratorTrainConfig,
    SamplerConfig,
    sample_ui,
    train_generator,
)
from mockforge.synthetic import grammar_corpus
from mockforge.textfeat import HashedTfidfProvider


def describe(candidate, vocab):
    for el in candidate.elements:
        name = vocab.by_id(el.class_id).name
        print(f"    {name:16s} x={el.x:.2f} y={el.y:.2f} w={el.w:.2f} h={el.h:.2f}")


corpus = grammar_corpus(n_train=240, n_val=48, n_test=48, seed=4)
vocab = corpus.vocab
provider = HashedTfidfProvider.fit(
    [c for s in corpus.train.screens for c in s.captions], dim=64)

config = GeneratorTrainConfig(
    model=GeneratorConfig(hidden=64, intermediate=128, encoder_layers=3,
                          decoder_layers=3, heads=4, mixtures=5, text_max_len=32,
                          max_elements=16, dropout=0.0, provider_dim=64,
                          n_classes=len(vocab)),
    batch_size=32, max_epochs=60, patience=5, seed=0)

t0 = time.time()
model, history = train_generator(corpus.train, corpus.validation, provider, vocab,
                                 config)
print(f"trained {len(history)} epochs in {time.time() - t0:.0f}s; "
      f"val NLL {history[0]['val_nll']:.1f} -> {history[-1]['val_nll']:.1f} "
      f"(lower is better; negative = tight densities)")

prompt = "login page with three input fields and a top bar"
print(f"\nprompt: {prompt!r}")
for seed in (0, 1):
    cand = sample_ui(model, prompt, SamplerConfig(temperature=0.1, seed=seed,
                                                  max_elements=16), provider)
    print(f"  sample seed={seed}: {len(cand.elements)} elements")
    describe(cand, vocab)

# temperature sweeps trade determinism for variety
print("\ntemperature sweep (element counts over 5 seeds):")
for tau in (0.05, 0.1, 0.5, 1.0):
    counts = [len(sample_ui(model, prompt,
                            SamplerConfig(temperature=tau, seed=s, max_elements=16),
                            provider).elements) for s in range(5)]
    print(f"  tau={tau:<5} counts={counts}")

# pinned elements come back verbatim; the model designs around them
pin = ElementBox(x=0.25, y=0.8, w=0.5, h=0.08, class_id=vocab.id_of("Text Button"))
cand = sample_ui(model, prompt, SamplerConfig(temperature=0.1, seed=7,
                                              max_elements=16), provider, pins=[pin])
print("\npinned bottom button, resampled:")
describe(cand, vocab)
assert pin in cand.elements
