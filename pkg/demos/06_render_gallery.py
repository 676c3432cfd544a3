"""Render mock-ups to SVG and build a self-contained comparison gallery.

Run:  python demos/06_render_gallery.py
Writes demo output under ./demo_output/.
"""

from pathlib import Path

from mockforge.core import ClassVocabulary, MockupCandidate
from mockforge.render import Theme, parse_svg_boxes, render_gallery, render_svg
from mockforge.synthetic import ARCHETYPES, archetype_ground_truths

vocab = ClassVocabulary.default()
gts = archetype_ground_truths(vocab)

out = Path("demo_output")
out.mkdir(exist_ok=True)

# one SVG per archetype's canonical layout
for arch in ARCHETYPES:
    cand = MockupCandidate(elements=tuple(gts[arch]), prompt=arch, method="generator")
    result = render_svg(cand, vocab, canvas=(360, 640), theme=Theme(annotate=True))
    path = out / f"{arch}.svg"
    path.write_text(result.svg, encoding="utf-8")
    print(f"{arch:9s} -> {path} ({len(cand.elements)} elements, "
          f"{len(result.warnings)} warnings)")

# rendered geometry parses back out of the document
svg = render_svg(MockupCandidate(elements=tuple(gts["login"]), prompt="login",
                                 method="generator"), vocab).svg
boxes = parse_svg_boxes(svg)
print("\nround-trip of the login layout (class, x, y, w, h in canvas units):")
for row in boxes[:4]:
    print("  ", row)

# a 3-row gallery comparing "methods" (here: three archetypes standing in)
groups = {
    "generator": [MockupCandidate(elements=tuple(gts[a]), prompt="demo",
                                  method="generator", seed=i)
                  for i, a in enumerate(("login", "list", "popup"))],
    "text-only": [MockupCandidate(elements=tuple(gts[a]), prompt="demo",
                                  method="text-only", source_screen_id=f"s{i}")
                  for i, a in enumerate(("gallery", "search", "player"))],
}
html = render_gallery(groups, "demo prompt", vocab)
(out / "gallery.html").write_text(html, encoding="utf-8")
print(f"\ngallery -> {out / 'gallery.html'}")

scrambled = render_gallery(groups, "demo prompt", vocab, scramble_seed=42)
(out / "gallery_scrambled.html").write_text(scrambled, encoding="utf-8")
print(f"scrambled gallery -> {out / 'gallery_scrambled.html'}")
