"""Synthetic screen corpora for tests, demos and desk-scale training runs.

The grammar corpus covers eight screen archetypes (login, signup, list,
gallery, settings, player, search, popup), each instantiated from three
factors: an item count, a toolbar flag and a bottom-banner flag. Captions
spell out the archetype and every factor, so descriptions fully determine
the screen structure; geometry gets a small jitter so layouts are not
byte-identical. The popup archetype deliberately layers a dialog over a
backdrop, giving the corpus a realistic nonzero overlap mode.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import numpy as np

from .core import ClassVocabulary, ElementBox, UiScreen
from .ingest import CorpusBuildResult, CorpusSplit, IngestReport

SCREEN_W, SCREEN_H = 1440, 2560

ARCHETYPES = ("login", "signup", "list", "gallery", "settings", "player", "search", "popup")

COUNTS = (2, 3, 4, 5)
COUNT_WORDS = {2: "two", 3: "three", 4: "four", 5: "five"}

CAPTION_TEMPLATES = {
    "login": (
        "login page with {count} input fields{tb}{bn}",
        "sign in screen showing {count} input fields{tb}{bn}",
        "app login form with {count} input fields{tb}{bn}",
    ),
    "signup": (
        "sign up form with {count} form fields{tb}{bn}",
        "registration page showing {count} form fields{tb}{bn}",
        "account creation screen with {count} form fields{tb}{bn}",
    ),
    "list": (
        "screen with a list of {count} items{tb}{bn}",
        "list page showing {count} items{tb}{bn}",
        "scrolling list view with {count} items{tb}{bn}",
    ),
    "gallery": (
        "gallery of {count} photo cards{tb}{bn}",
        "grid screen showing {count} photo cards{tb}{bn}",
        "photo gallery page with {count} photo cards{tb}{bn}",
    ),
    "settings": (
        "settings page with {count} toggle rows{tb}{bn}",
        "preferences screen showing {count} toggle rows{tb}{bn}",
        "options menu with {count} toggle rows{tb}{bn}",
    ),
    "player": (
        "media player with {count} control icons{tb}{bn}",
        "music playback screen with {count} control icons{tb}{bn}",
        "audio player page showing {count} control icons{tb}{bn}",
    ),
    "search": (
        "search results page with {count} result lines{tb}{bn}",
        "search screen showing {count} result lines{tb}{bn}",
        "query results view with {count} result lines{tb}{bn}",
    ),
    "popup": (
        "pop up dialog with {count} option buttons{tb}{bn}",
        "modal window showing {count} option buttons{tb}{bn}",
        "overlay dialog with {count} option buttons{tb}{bn}",
    ),
}


def archetype_caption(arch: str, count: int, toolbar: bool, banner: bool,
                      variant: int = 0) -> str:
    template = CAPTION_TEMPLATES[arch][variant % len(CAPTION_TEMPLATES[arch])]
    return template.format(
        count=COUNT_WORDS[count],
        tb=" and a top bar" if toolbar else "",
        bn=" and a bottom banner" if banner else "",
    )


def canonical_prompt(arch: str) -> str:
    return archetype_caption(arch, 3, True, False, variant=0)


def _boxes(arch: str, count: int, toolbar: bool, banner: bool) -> list[tuple[str, float, float, float, float]]:
    """(class name, x, y, w, h) leaf boxes, before jitter."""
    out: list[tuple[str, float, float, float, float]] = []
    top = 0.02
    if toolbar:
        out.append(("Toolbar", 0.02, top, 0.96, 0.07))
        top += 0.11
    if banner:
        out.append(("Advertisement", 0.02, 0.90, 0.96, 0.08))

    # Row positions depend only on the index (never on the count), so a screen
    # with fewer items simply leaves later slots empty; rows are strictly
    # separated vertically, except popup's intentionally layered dialog.
    if arch == "login":
        out.append(("Image", 0.35, top + 0.01, 0.30, 0.10))
        for i in range(count):
            out.append(("Input", 0.10, top + 0.15 + 0.105 * i, 0.80, 0.05))
        out.append(("Text Button", 0.30, top + 0.69, 0.40, 0.05))
    elif arch == "signup":
        out.append(("Text", 0.10, top + 0.01, 0.50, 0.045))
        for i in range(count):
            out.append(("Input", 0.10, top + 0.09 + 0.105 * i, 0.80, 0.05))
        out.append(("Checkbox", 0.10, top + 0.62, 0.06, 0.03))
        out.append(("Text Button", 0.30, top + 0.69, 0.40, 0.05))
    elif arch == "list":
        for i in range(count):
            out.append(("List Item", 0.04, top + 0.02 + 0.14 * i, 0.92, 0.08))
    elif arch == "gallery":
        for i in range(count):
            out.append(("Card", 0.10, top + 0.02 + 0.155 * i, 0.80, 0.105))
    elif arch == "settings":
        out.append(("Text", 0.06, top + 0.01, 0.45, 0.04))
        for i in range(count):
            out.append(("On/Off Switch", 0.06, top + 0.09 + 0.105 * i, 0.88, 0.05))
    elif arch == "player":
        out.append(("Image", 0.15, top + 0.02, 0.70, 0.22))
        out.append(("Slider", 0.10, top + 0.29, 0.80, 0.03))
        out.append(("Button Bar", 0.20, top + 0.36, 0.60, 0.045))
        for i in range(count):  # vertical control rail
            out.append(("Icon", 0.10, top + 0.44 + 0.065 * i, 0.09, 0.045))
    elif arch == "search":
        out.append(("Input", 0.06, top + 0.01, 0.88, 0.055))
        out.append(("Multi-Tab", 0.06, top + 0.10, 0.88, 0.045))
        for i in range(count):
            out.append(("Text", 0.06, top + 0.19 + 0.105 * i, 0.88, 0.06))
    elif arch == "popup":
        body_h = 0.86 - top
        out.append(("Background Image", 0.02, top, 0.96, body_h))
        out.append(("Modal", 0.15, 0.28, 0.70, 0.44))
        for i in range(count):
            out.append(("Text Button", 0.22, 0.35 + 0.07 * i, 0.56, 0.045))
    else:
        raise ValueError(f"unknown archetype {arch!r}")
    return out


def build_archetype_elements(arch: str, count: int, toolbar: bool, banner: bool,
                             vocab: ClassVocabulary,
                             rng: Optional[np.random.Generator] = None,
                             jitter: float = 0.0) -> list[ElementBox]:
    """Instantiate one archetype; elements sharing a designed row move as a
    unit vertically (one y draw per row), so canonical order is stable."""
    boxes = _boxes(arch, count, toolbar, banner)
    row_dy: dict[float, float] = {}
    elements = []
    for name, x, y, w, h in boxes:
        if rng is not None and jitter > 0.0:
            if y not in row_dy:
                row_dy[y] = float(np.clip(rng.normal(0.0, jitter), -2.5 * jitter,
                                          2.5 * jitter))
            dx, dw, dh = np.clip(rng.normal(0.0, jitter, 3), -2.5 * jitter, 2.5 * jitter)
            x, y, w, h = x + dx, y + row_dy[y], w + dw, h + dh
        w = float(np.clip(w, 0.01, 1.0))
        h = float(np.clip(h, 0.01, 1.0))
        x = float(np.clip(x, 0.0, 1.0 - w))
        y = float(np.clip(y, 0.0, 1.0 - h))
        elements.append(ElementBox(x=x, y=y, w=w, h=h, class_id=vocab.id_of(name)))
    return elements


def archetype_ground_truths(vocab: ClassVocabulary) -> dict[str, list[ElementBox]]:
    """Canonical un-jittered instance per archetype (3 items, toolbar, no banner)."""
    return {
        arch: build_archetype_elements(arch, 3, True, False, vocab)
        for arch in ARCHETYPES
    }


def _make_screen(split: str, arch: str, idx: int, count: int, toolbar: bool, banner: bool,
                 vocab: ClassVocabulary, rng: np.random.Generator, jitter: float,
                 captions_per_screen: int = 3) -> UiScreen:
    leaves = build_archetype_elements(arch, count, toolbar, banner, vocab, rng, jitter)
    root = ElementBox(x=0.0, y=0.0, w=1.0, h=1.0, class_id=vocab.unknown_id,
                      parent_idx=None, is_leaf=False)
    elements = [root] + [
        ElementBox(el.x, el.y, el.w, el.h, el.class_id, el.text, 0, True) for el in leaves
    ]
    captions = tuple(
        archetype_caption(arch, count, toolbar, banner, variant=v)
        for v in range(captions_per_screen)
    )
    return UiScreen(
        screen_id=f"{split}-{arch}-{idx:03d}",
        app_id=f"{split}.app.{arch}",
        app_description=f"{arch} demo application",
        screen_w_px=SCREEN_W,
        screen_h_px=SCREEN_H,
        elements=tuple(elements),
        captions=captions,
    )


def _all_combos() -> list[tuple[int, bool, bool]]:
    return [(c, tb, bn) for c in COUNTS for tb in (False, True) for bn in (False, True)]


def grammar_corpus(vocab: Optional[ClassVocabulary] = None, n_train: int = 400,
                   n_val: int = 64, n_test: int = 64, seed: int = 0,
                   jitter: float = 0.012) -> CorpusBuildResult:
    """Factor-grammar corpus: test screens get unique factor combinations,
    so every caption identifies exactly one test screen."""
    vocab = vocab or ClassVocabulary.default()
    rng = np.random.default_rng(seed)
    combos = _all_combos()

    splits: dict[str, CorpusSplit] = {}
    for split, total in (("train", n_train), ("validation", n_val), ("test", n_test)):
        screens = []
        per_arch = total // len(ARCHETYPES)
        extra = total - per_arch * len(ARCHETYPES)
        for ai, arch in enumerate(ARCHETYPES):
            n = per_arch + (1 if ai < extra else 0)
            if split == "test" and n <= len(combos):
                pick = rng.choice(len(combos), size=n, replace=False)
                chosen = [combos[i] for i in pick]
            else:
                chosen = [combos[rng.integers(len(combos))] for _ in range(n)]
            for i, (count, tb, bn) in enumerate(chosen):
                screens.append(
                    _make_screen(split, arch, i, count, tb, bn, vocab, rng, jitter))
        splits[split] = CorpusSplit(name=split, screens=screens)

    report = IngestReport(split_sizes={k: len(v) for k, v in splits.items()})
    return CorpusBuildResult(splits=splits, vocab=vocab, report=report)


def unique_token_corpus(vocab: Optional[ClassVocabulary] = None, n_pairs: int = 8,
                        seed: int = 0) -> CorpusBuildResult:
    """Tiny corpus where each caption is a single distinctive token and each
    screen is one distinctive archetype instance."""
    vocab = vocab or ClassVocabulary.default()
    rng = np.random.default_rng(seed)
    # pairwise distinct signed hash buckets at dim 16 (hence any multiple of 16)
    words = ["alpha", "bravo", "delta", "foxtrot", "golf", "hotel", "india",
             "juliet", "kilo", "lima", "november", "quebec"]
    screens = []
    for i in range(n_pairs):
        arch = ARCHETYPES[i % len(ARCHETYPES)]
        count = COUNTS[i % len(COUNTS)]
        leaves = build_archetype_elements(arch, count, i % 2 == 0, False, vocab, rng, 0.0)
        root = ElementBox(0.0, 0.0, 1.0, 1.0, vocab.unknown_id, None, None, False)
        elements = [root] + [
            ElementBox(el.x, el.y, el.w, el.h, el.class_id, el.text, 0, True) for el in leaves
        ]
        screens.append(
            UiScreen(
                screen_id=f"tok-{i:02d}",
                app_id=f"tok.app.{i}",
                app_description=None,
                screen_w_px=SCREEN_W,
                screen_h_px=SCREEN_H,
                elements=tuple(elements),
                captions=(words[i],),
            )
        )
    split = CorpusSplit(name="train", screens=screens)
    splits = {
        "train": split,
        "validation": CorpusSplit(name="validation", screens=list(screens)),
        "test": CorpusSplit(name="test", screens=list(screens)),
    }
    return CorpusBuildResult(splits=splits, vocab=vocab,
                             report=IngestReport(split_sizes={"train": n_pairs}))


def caption_exactness_split(vocab: Optional[ClassVocabulary] = None,
                            n_screens: int = 200, captions_per: int = 5,
                            seed: int = 0, provider_dim: int = 64) -> CorpusSplit:
    """Split whose captions are globally unique AND pool to distinct hashed
    vectors at ``provider_dim``.

    Distinct marker tokens can land in the same signed hash bucket (there are
    only 2 * dim of them), which would make two different captions pool
    identically; extra disambiguation tokens are appended until every caption
    vector is unique.
    """
    from .textfeat import HashedTfidfProvider, pool_description

    vocab = vocab or ClassVocabulary.default()
    rng = np.random.default_rng(seed)
    caption_lists: list[list[str]] = []
    for i in range(n_screens):
        arch = ARCHETYPES[i % len(ARCHETYPES)]
        count = COUNTS[i % len(COUNTS)]
        base = archetype_caption(arch, count, i % 2 == 0, i % 3 == 0)
        caption_lists.append(
            [f"{base} for screen s{i:03d} option c{j}" for j in range(captions_per)])

    for round_no in range(64):
        flat = [c for caps in caption_lists for c in caps]
        provider = HashedTfidfProvider.fit(flat, dim=provider_dim)
        seen: dict[bytes, tuple[int, int]] = {}
        clashes: list[tuple[int, int]] = []
        for si, caps in enumerate(caption_lists):
            for ci, caption in enumerate(caps):
                key = pool_description(caption, provider).tobytes()
                if key in seen:
                    clashes.append((si, ci))
                else:
                    seen[key] = (si, ci)
        if not clashes:
            break
        for k, (si, ci) in enumerate(clashes):
            caption_lists[si][ci] += f" mark{round_no}x{k}"
    else:
        raise RuntimeError("could not disambiguate caption vectors")

    screens = []
    for i in range(n_screens):
        arch = ARCHETYPES[i % len(ARCHETYPES)]
        count = COUNTS[i % len(COUNTS)]
        leaves = build_archetype_elements(arch, count, i % 2 == 0, i % 3 == 0, vocab, rng, 0.004)
        root = ElementBox(0.0, 0.0, 1.0, 1.0, vocab.unknown_id, None, None, False)
        elements = [root] + [
            ElementBox(el.x, el.y, el.w, el.h, el.class_id, el.text, 0, True) for el in leaves
        ]
        screens.append(
            UiScreen(
                screen_id=f"cap-{i:03d}",
                app_id=f"cap.app.{i % 20}",
                app_description=None,
                screen_w_px=SCREEN_W,
                screen_h_px=SCREEN_H,
                elements=tuple(elements),
                captions=tuple(caption_lists[i]),
            )
        )
    return CorpusSplit(name="train", screens=screens)


# --- raw-input fixture for the ingest pipeline -------------------------------------


def _node(l, t, r, b, text=None, children=None) -> dict:
    node: dict = {"bounds": [l, t, r, b]}
    if text:
        node["text"] = text
    if children:
        node["children"] = children
    return node


def write_raw_fixture(root_dir) -> dict:
    """Ten-screen raw input tree (hierarchies + TSV tables), split 6/2/2."""
    root = Path(root_dir)
    hier = root / "hierarchies"
    hier.mkdir(parents=True, exist_ok=True)

    apps = [("app.alpha", "train", 6), ("app.beta", "validation", 2), ("app.gamma", "test", 2)]
    manifest_rows = []
    caption_rows = []
    annotation_rows = []
    idx = 0
    for app_id, split, n in apps:
        for _ in range(n):
            sid = f"fix-{idx:02d}"
            tree = _node(0, 0, SCREEN_W, SCREEN_H, children=[
                _node(0, 0, SCREEN_W, 320, text="Header"),
                _node(80, 400 + 40 * idx, SCREEN_W - 80, 1000 + 40 * idx, children=[
                    _node(120, 440 + 40 * idx, 700, 900, text="Hello"),
                    _node(760, 440 + 40 * idx, SCREEN_W - 120, 900),
                ]),
                _node(0, 2400, SCREEN_W, 2412),  # very short: separator heuristic
            ])
            doc = {
                "screen_id": sid,
                "app_id": app_id,
                "app_description": f"demo app {app_id}",
                "screen_w_px": SCREEN_W,
                "screen_h_px": SCREEN_H,
                "root": tree,
            }
            (hier / f"{sid}.json").write_text(json.dumps(doc, indent=1), encoding="utf-8")
            manifest_rows.append(f"{sid}\t{split}")
            caption_rows.append(f"{sid}\tdemo screen number {idx}")
            caption_rows.append(f"{sid}\tsimple fixture page {idx}")
            annotation_rows.append(f"{sid}\t1\tToolbar")
            annotation_rows.append(f"{sid}\t3\tText")
            annotation_rows.append(f"{sid}\t4\tImage")
            idx += 1

    paths = {
        "hierarchy_dir": hier,
        "captions": root / "captions.tsv",
        "annotations": root / "annotations.tsv",
        "manifest": root / "manifest.tsv",
    }
    paths["captions"].write_text("\n".join(caption_rows) + "\n", encoding="utf-8")
    paths["annotations"].write_text("\n".join(annotation_rows) + "\n", encoding="utf-8")
    paths["manifest"].write_text("\n".join(manifest_rows) + "\n", encoding="utf-8")
    return paths
