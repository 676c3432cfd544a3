"""Raw screen ingestion: hierarchy parsing, semantic-annotation merging, the
separator heuristic, the generator's leaf view, and the retriever's token view.

Raw inputs (all UTF-8):

* hierarchy documents -- one JSON file per screen shaped
  ``{"screen_id", "app_id", "app_description"?, "screen_w_px", "screen_h_px",
  "root": node}`` where a node is ``{"bounds": [l, t, r, b] (pixels),
  "text"?, "children"?: [node, ...]}``;
* caption table -- TSV rows ``screen_id<TAB>caption``, one row per caption;
* annotation table -- TSV rows ``screen_id<TAB>dfs_index<TAB>class_name``;
* split manifest -- TSV rows ``screen_id<TAB>split``.

Per-element problems drop the element, per-screen structural problems drop
the screen, manifest inconsistencies are fatal.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import (
    ClassVocabulary,
    ElementBox,
    UiScreen,
    canonical_sort,
)
from .textfeat import pool_description

log = logging.getLogger(__name__)

MAX_RETRIEVAL_TOKENS = 512

# normalized extent below which an unannotated leaf is treated as a separator
SEPARATOR_MAX_EXTENT = 0.02

TOKEN_START = "start"
TOKEN_END = "end"
TOKEN_APP_DESC = "app-desc"
TOKEN_ELEMENT = "element"


class IngestError(ValueError):
    """Unrecoverable problem in raw input data."""


class OverLongScreen(ValueError):
    """Screen exceeds the retrieval token budget and must be filtered out."""


@dataclass(frozen=True)
class UiToken:
    kind: str
    dims: Optional[np.ndarray] = None  # (4,) x, y, w, h for element tokens
    class_id: Optional[int] = None
    text_vec: Optional[np.ndarray] = None


@dataclass(frozen=True)
class RetrievalTokenView:
    tokens: tuple[UiToken, ...]

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass
class CorpusSplit:
    name: str  # train | validation | test
    screens: list[UiScreen]

    def __len__(self) -> int:
        return len(self.screens)


@dataclass
class IngestReport:
    split_sizes: dict[str, int] = field(default_factory=dict)
    dropped_screens: list[str] = field(default_factory=list)
    dropped_elements: int = 0
    class_histogram: dict[str, int] = field(default_factory=dict)
    annotation_coverage: float = 0.0

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2)


@dataclass
class CorpusBuildResult:
    splits: dict[str, CorpusSplit]
    vocab: ClassVocabulary
    report: IngestReport

    @property
    def train(self) -> CorpusSplit:
        return self.splits["train"]

    @property
    def validation(self) -> CorpusSplit:
        return self.splits["validation"]

    @property
    def test(self) -> CorpusSplit:
        return self.splits["test"]


def parse_view_hierarchy(raw: dict, screen_id: str, app_id: str, screen_w_px: int,
                         screen_h_px: int, vocab: ClassVocabulary,
                         app_description: Optional[str] = None,
                         captions: Sequence[str] = ()) -> UiScreen:
    """Depth-first flatten of a bounds tree into a normalized UiScreen.

    Parents precede children; dropped nodes (zero area, wildly out of
    bounds) detach their children to the nearest kept ancestor.
    """
    if screen_w_px <= 0 or screen_h_px <= 0:
        raise IngestError(f"screen {screen_id}: non-positive pixel size")
    elements: list[ElementBox] = []
    dropped = 0

    def walk(node, parent_idx: Optional[int], path: str):
        nonlocal dropped
        if not isinstance(node, dict):
            raise IngestError(f"screen {screen_id}: node {path} is not an object")
        bounds = node.get("bounds")
        if (not isinstance(bounds, (list, tuple))) or len(bounds) != 4:
            raise IngestError(f"screen {screen_id}: node {path} has no [l,t,r,b] bounds")
        l, t, r, b = (float(v) for v in bounds)
        children = node.get("children") or []
        keep = True
        if r <= l or b <= t:
            keep = False
            dropped += 1
        elif (abs(l) > 2 * screen_w_px or abs(r) > 2 * screen_w_px
              or abs(t) > 2 * screen_h_px or abs(b) > 2 * screen_h_px):
            log.warning("screen %s: node %s bounds far outside the screen, dropped",
                        screen_id, path)
            keep = False
            dropped += 1

        my_idx = parent_idx
        if keep:
            x0 = min(max(l / screen_w_px, 0.0), 1.0)
            y0 = min(max(t / screen_h_px, 0.0), 1.0)
            x1 = min(max(r / screen_w_px, 0.0), 1.0)
            y1 = min(max(b / screen_h_px, 0.0), 1.0)
            if x1 - x0 <= 0.0 or y1 - y0 <= 0.0:
                dropped += 1  # clipped away entirely
            else:
                text = node.get("text")
                elements.append(
                    ElementBox(
                        x=x0,
                        y=y0,
                        w=x1 - x0,
                        h=y1 - y0,
                        class_id=vocab.unknown_id,
                        text=text if isinstance(text, str) and text else None,
                        parent_idx=parent_idx,
                        is_leaf=not children,
                    )
                )
                my_idx = len(elements) - 1
        for i, child in enumerate(children):
            walk(child, my_idx, f"{path}/{i}")

    walk(raw, None, "")
    if dropped:
        log.debug("screen %s: dropped %d nodes", screen_id, dropped)
    return UiScreen(
        screen_id=screen_id,
        app_id=app_id,
        app_description=app_description,
        screen_w_px=screen_w_px,
        screen_h_px=screen_h_px,
        elements=tuple(elements),
        captions=tuple(captions),
    )


def parse_hierarchy_file(path, vocab: ClassVocabulary) -> UiScreen:
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    for key in ("screen_id", "app_id", "screen_w_px", "screen_h_px", "root"):
        if key not in doc:
            raise IngestError(f"{path}: missing key {key!r}")
    return parse_view_hierarchy(
        doc["root"],
        screen_id=str(doc["screen_id"]),
        app_id=str(doc["app_id"]),
        screen_w_px=int(doc["screen_w_px"]),
        screen_h_px=int(doc["screen_h_px"]),
        vocab=vocab,
        app_description=doc.get("app_description"),
    )


def merge_semantic_annotations(screen: UiScreen, annotations: dict[int, str],
                               vocab: ClassVocabulary) -> UiScreen:
    """Assign annotated classes by DFS index; unannotated elements stay UNKNOWN."""
    new_elements = []
    for i, el in enumerate(screen.elements):
        name = annotations.get(i)
        if name is None:
            new_elements.append(el)
            continue
        if not vocab.has_name(name):
            raise IngestError(
                f"screen {screen.screen_id}: annotation class {name!r} not in the vocabulary"
            )
        new_elements.append(replace(el, class_id=vocab.id_of(name)))
    return screen.with_elements(new_elements)


def annotation_coverage(screen: UiScreen, vocab: ClassVocabulary) -> tuple[int, int]:
    """(annotated, total) element counts; separators count as annotated."""
    total = len(screen.elements)
    annotated = sum(1 for el in screen.elements if el.class_id != vocab.unknown_id)
    return annotated, total


def apply_separator_heuristic(screen: UiScreen, vocab: ClassVocabulary,
                              max_extent: float = SEPARATOR_MAX_EXTENT) -> UiScreen:
    """Very narrow or very short UNKNOWN leaves become SEPARATOR."""
    new_elements = []
    for el in screen.elements:
        if (el.class_id == vocab.unknown_id and el.is_leaf
                and (el.w < max_extent or el.h < max_extent)):
            new_elements.append(replace(el, class_id=vocab.separator_id))
        else:
            new_elements.append(el)
    return screen.with_elements(new_elements)


def extract_leaf_view(screen: UiScreen) -> list[ElementBox]:
    """Leaf elements only, canonically sorted, hierarchy links cleared."""
    leaves = [replace(el, parent_idx=None) for el in screen.elements if el.is_leaf]
    return canonical_sort(leaves)


def build_retrieval_token_view(screen: UiScreen, provider) -> RetrievalTokenView:
    """start, app-desc, one token per element (intermediates included), end."""
    n_tokens = len(screen.elements) + 3
    if n_tokens > MAX_RETRIEVAL_TOKENS:
        raise OverLongScreen(
            f"screen {screen.screen_id}: {n_tokens} tokens exceed {MAX_RETRIEVAL_TOKENS}"
        )
    dim = provider.dim
    zero = np.zeros(dim, dtype=np.float32)
    tokens = [UiToken(kind=TOKEN_START, text_vec=zero)]
    if screen.app_description:
        app_vec = pool_description(screen.app_description, provider)
    else:
        app_vec = zero
    tokens.append(UiToken(kind=TOKEN_APP_DESC, text_vec=app_vec))
    for el in screen.elements:
        vec = pool_description(el.text, provider) if el.text else zero
        tokens.append(
            UiToken(
                kind=TOKEN_ELEMENT,
                dims=np.array([el.x, el.y, el.w, el.h], dtype=np.float32),
                class_id=el.class_id,
                text_vec=vec,
            )
        )
    tokens.append(UiToken(kind=TOKEN_END, text_vec=zero))
    return RetrievalTokenView(tokens=tuple(tokens))


# --- corpus building ----------------------------------------------------------


def read_tsv(path) -> list[list[str]]:
    rows = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if line:
                rows.append(line.split("\t"))
    return rows


def build_corpus(hierarchy_dir, captions_path, annotations_path, manifest_path,
                 vocab: ClassVocabulary) -> CorpusBuildResult:
    hierarchy_dir = Path(hierarchy_dir)

    split_of: dict[str, str] = {}
    for row in read_tsv(manifest_path):
        if len(row) != 2:
            raise IngestError(f"manifest row {row!r} is not screen_id<TAB>split")
        screen_id, split = row
        if split not in ("train", "validation", "test"):
            raise IngestError(f"unknown split {split!r} for screen {screen_id}")
        if screen_id in split_of:
            raise IngestError(f"screen {screen_id} listed in more than one split")
        split_of[screen_id] = split

    captions: dict[str, list[str]] = {}
    for row in read_tsv(captions_path):
        if len(row) != 2:
            raise IngestError(f"caption row {row!r} is not screen_id<TAB>caption")
        captions.setdefault(row[0], []).append(row[1])

    annotations: dict[str, dict[int, str]] = {}
    if annotations_path is not None:
        for row in read_tsv(annotations_path):
            if len(row) != 3:
                raise IngestError(f"annotation row {row!r} is not screen_id<TAB>idx<TAB>class")
            annotations.setdefault(row[0], {})[int(row[1])] = row[2]

    report = IngestReport()
    splits = {name: CorpusSplit(name=name, screens=[]) for name in ("train", "validation", "test")}
    annotated_total = 0
    element_total = 0

    # deterministic, manifest-ordered result
    for screen_id, split in split_of.items():
        path = hierarchy_dir / f"{screen_id}.json"
        if not path.exists():
            report.dropped_screens.append(screen_id)
            log.warning("screen %s: no hierarchy document, skipped", screen_id)
            continue
        try:
            screen = parse_hierarchy_file(path, vocab)
        except IngestError as exc:
            report.dropped_screens.append(screen_id)
            log.warning("screen %s: %s", screen_id, exc)
            continue
        screen = replace(screen, captions=tuple(captions.get(screen_id, [])))
        screen = merge_semantic_annotations(screen, annotations.get(screen_id, {}), vocab)
        annotated, total = annotation_coverage(screen, vocab)
        annotated_total += annotated
        element_total += total
        screen = apply_separator_heuristic(screen, vocab)
        for el in screen.elements:
            name = vocab.by_id(el.class_id).name
            report.class_histogram[name] = report.class_histogram.get(name, 0) + 1
        splits[split].screens.append(screen)

    apps: dict[str, str] = {}
    for split in splits.values():
        for screen in split.screens:
            prev = apps.get(screen.app_id)
            if prev is not None and prev != split.name:
                raise IngestError(
                    f"app {screen.app_id} appears in splits {prev} and {split.name}"
                )
            apps[screen.app_id] = split.name

    report.split_sizes = {name: len(split) for name, split in splits.items()}
    report.annotation_coverage = (annotated_total / element_total) if element_total else 0.0
    return CorpusBuildResult(splits=splits, vocab=vocab, report=report)
