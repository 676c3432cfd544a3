"""Walk through the corpus model: raw hierarchy parsing, annotation merging,
the separator heuristic, and the two derived views (generator leaves vs
retrieval tokens).

Run:  python demos/01_corpus_and_views.py
"""

import tempfile
from pathlib import Path

from mockforge.core import ClassVocabulary, validate_screen
from mockforge.ingest import build_corpus, build_retrieval_token_view, extract_leaf_view
from mockforge.synthetic import write_raw_fixture
from mockforge.textfeat import HashedTfidfProvider

# Raw inputs: one JSON hierarchy per screen plus TSV tables for captions,
# semantic annotations and the split manifest. write_raw_fixture creates a
# ten-screen example tree.
workdir = Path(tempfile.mkdtemp(prefix="mockforge-demo-"))
paths = write_raw_fixture(workdir)
print(f"raw fixture in {workdir}")

vocab = ClassVocabulary.default()
result = build_corpus(paths["hierarchy_dir"], paths["captions"],
                      paths["annotations"], paths["manifest"], vocab)
print("split sizes:", result.report.split_sizes)
print("annotation coverage:", f"{result.report.annotation_coverage:.1%}")
print("class histogram:", result.report.class_histogram)

screen = result.train.screens[0]
print(f"\nscreen {screen.screen_id}: {len(screen.elements)} elements, "
      f"{len(screen.captions)} captions")
problems = validate_screen(screen, vocab)
print("validation problems:", problems or "none")

# The generator sees only leaf elements, top-left first.
leaves = extract_leaf_view(screen)
print("\nleaf view (canonical order):")
for el in leaves:
    print(f"  {vocab.by_id(el.class_id).name:10s} x={el.x:.3f} y={el.y:.3f} "
          f"w={el.w:.3f} h={el.h:.3f}")

# The retriever sees every element (intermediates included) as a token
# sequence wrapped in start/app-desc/end tokens.
provider = HashedTfidfProvider.fit([c for s in result.train.screens
                                    for c in s.captions], dim=32)
view = build_retrieval_token_view(screen, provider)
print(f"\nretrieval token view: {len(view)} tokens "
      f"(= {len(screen.elements)} elements + 3)")
print("kinds:", [t.kind for t in view.tokens])
