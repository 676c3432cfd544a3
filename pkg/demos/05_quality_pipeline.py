"""Quality metrics and the post-processing pipeline: score, calibrate,
filter, rerank, snap. Also the layout-similarity measures behind the
diversity and relevance numbers.

Run:  python demos/05_quality_pipeline.py
"""

import numpy as np

from mockforge.core import ElementBox, MockupCandidate
from mockforge.ingest import extract_leaf_view
from mockforge.quality import (
    calibrate,
    diversity,
    docsim,
    filter_candidates,
    metric_alignment,
    metric_iou,
    metric_overlap,
    postprocess,
    relevance,
    rerank_candidates,
    snap_to_grid,
)
from mockforge.synthetic import archetype_ground_truths, grammar_corpus

# --- the three well-formedness metrics on a hand-made layout
a = ElementBox(0.0, 0.0, 0.5, 0.5, 0)
b = ElementBox(0.25, 0.25, 0.5, 0.5, 0)
print("two half-screen boxes overlapping a quarter each:")
print(f"  overlap   = {metric_overlap([a, b]):.4f}  (area covered twice)")
print(f"  iou       = {metric_iou([a, b]):.4f}  (mean pairwise IoU)")
print(f"  alignment = {metric_alignment([a, b]):.4f}  (mean nearest-line distance)")

# --- calibration from a validation split drives filtering and reranking
corpus = grammar_corpus(n_train=80, n_val=48, n_test=16, seed=5)
cal = calibrate([extract_leaf_view(s) for s in corpus.validation.screens])
print("\nvalidation means (filter thresholds):",
      {k: round(v, 4) for k, v in cal.means.items()})

rng = np.random.default_rng(0)


def noisy_candidate(noise):
    els = []
    for el in extract_leaf_view(corpus.validation.screens[0]):
        els.append(ElementBox(
            x=float(np.clip(el.x + rng.normal(0, noise), 0, 1 - el.w)),
            y=float(np.clip(el.y + rng.normal(0, noise), 0, 1 - el.h)),
            w=el.w, h=el.h, class_id=el.class_id))
    return MockupCandidate(elements=tuple(els), prompt="demo", method="generator",
                           seed=int(noise * 1e4))


clean = [noisy_candidate(0.001) for _ in range(5)]
messy = [noisy_candidate(0.05) for _ in range(5)]
survivors = filter_candidates(clean + messy, cal)
print(f"filter: {len(survivors)}/10 candidates survive "
      f"(clean copies pass, heavily jittered ones exceed the means)")

ranked = rerank_candidates(clean + messy, cal)
print(f"rerank: kept top-50% = {len(ranked)} candidates; "
      f"scores {[round(c.scores.rerank_score, 3) for c in ranked]}")

kept, fallback = postprocess(clean + messy, cal)
print(f"postprocess (filter -> rerank -> snap): {len(kept)} kept, "
      f"fallback={fallback}")

snapped = snap_to_grid(messy[0])
print("\nsnap-to-grid moves every coordinate to 1/32 steps:")
print("  before:", [round(messy[0].elements[0].x, 4), round(messy[0].elements[0].y, 4)])
print("  after: ", [snapped.elements[0].x, snapped.elements[0].y])

# --- layout similarity, diversity, relevance
gts = archetype_ground_truths(corpus.vocab)
login, popup = gts["login"], gts["popup"]
print("\ndocsim(login, login) =", round(docsim(login, login), 4))
print("docsim(login, popup) =", round(docsim(login, popup), 4))

cands = [noisy_candidate(0.01) for _ in range(5)]
print("diversity of 5 near-identical candidates:", round(diversity(cands), 4),
      "(high value = low diversity)")
gt = extract_leaf_view(corpus.validation.screens[0])
print("relevance to the source screen:", round(relevance(cands, gt), 4))
