"""Text-only retrieval: pool caption embeddings, scan by Euclidean distance.

Run:  python demos/02_text_only_retrieval.py
"""

import numpy as np

from mockforge.retrieval import retrieve_text_only, text_index_build
from mockforge.synthetic import grammar_corpus
from mockforge.textfeat import HashedTfidfProvider, pool_description

corpus = grammar_corpus(n_train=160, n_val=16, n_test=16, seed=1)
train = corpus.train

# The provider stands in for a large language model: hashed signed one-hot
# token vectors weighted by idf, mean-pooled and L2-normalized.
provider = HashedTfidfProvider.fit(
    [c for s in train.screens for c in s.captions], dim=64)
vec = pool_description("login page with two input fields", provider)
print("pooled query vector: dim", vec.shape[0], "norm", f"{np.linalg.norm(vec):.3f}")

index = text_index_build(train, provider)
print(f"index: {len(index)} caption rows over {len(train.screens)} screens")

screens_by_id = {s.screen_id: s for s in train.screens}
for query in ("login page with two input fields",
              "settings page with five toggle rows and a top bar",
              "pop up dialog"):
    print(f"\nquery: {query!r}")
    hits = retrieve_text_only(query, index, provider, screens_by_id, k=3)
    for cand in hits:
        print(f"  {cand.source_screen_id:22s} distance={cand.similarity:.4f} "
              f"elements={len(cand.elements)}")

# A verbatim indexed caption comes back at distance zero, rank one.
caption = train.screens[0].captions[0]
top = retrieve_text_only(caption, index, provider, screens_by_id, k=1)[0]
print(f"\nverbatim caption {caption!r}")
print(f"  -> {top.source_screen_id} at distance {top.similarity:.6f}")
assert top.source_screen_id == train.screens[0].screen_id
