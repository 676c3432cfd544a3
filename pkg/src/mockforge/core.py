"""Canonical domain types and the geometric/ordering conventions shared by the toolkit.

Screens live in a normalized coordinate system: x grows rightward, y grows
downward, and every element box is expressed as (x, y, w, h) fractions of the
screen. Elements are ordered top-left first: quantized y band, then x.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

GEOM_EPS = 1e-6

# y coordinates are quantized into this many horizontal bands before ordering;
# ~10px at a 640-unit screen height.
Y_BANDS = 64

CONTENT = "content"
SEPARATOR_KIND = "separator"
UNKNOWN_KIND = "unknown"
CONTROL = "control-token"

SEPARATOR = "SEPARATOR"
UNKNOWN = "UNKNOWN"
START = "START"
EOS = "EOS"
PAD = "PAD"

_SPECIAL_ORDER = (SEPARATOR, UNKNOWN, START, EOS, PAD)

# Element classes of the mobile-UI annotation set shipped as the default
# vocabulary; corpora may swap in their own list via a config file.
DEFAULT_CLASS_NAMES = [
    "Advertisement",
    "Background Image",
    "Bottom Navigation",
    "Button Bar",
    "Card",
    "Checkbox",
    "Date Picker",
    "Drawer",
    "Icon",
    "Image",
    "Input",
    "List Item",
    "Map View",
    "Modal",
    "Multi-Tab",
    "Number Stepper",
    "On/Off Switch",
    "Pager Indicator",
    "Radio Button",
    "Slider",
    "Text",
    "Text Button",
    "Toolbar",
    "Video",
    "Web View",
]


@dataclass(frozen=True)
class SemanticClass:
    id: int
    name: str
    kind: str  # content | separator | unknown | control-token


class ClassVocabulary:
    """Dense, stable class ids: content classes in listed order, then
    SEPARATOR, UNKNOWN, START, EOS, PAD."""

    def __init__(self, content_names: Sequence[str]):
        names = list(content_names)
        if len(set(names)) != len(names):
            raise ValueError("duplicate content class names")
        for special in _SPECIAL_ORDER:
            if special in names:
                raise ValueError(f"{special} is reserved and cannot be a content class")
        classes = [SemanticClass(i, n, CONTENT) for i, n in enumerate(names)]
        base = len(classes)
        classes.append(SemanticClass(base, SEPARATOR, SEPARATOR_KIND))
        classes.append(SemanticClass(base + 1, UNKNOWN, UNKNOWN_KIND))
        classes.append(SemanticClass(base + 2, START, CONTROL))
        classes.append(SemanticClass(base + 3, EOS, CONTROL))
        classes.append(SemanticClass(base + 4, PAD, CONTROL))
        self.classes = tuple(classes)
        self._by_name = {c.name: c for c in classes}

    def __len__(self) -> int:
        return len(self.classes)

    def __contains__(self, class_id: int) -> bool:
        return 0 <= class_id < len(self.classes)

    def by_id(self, class_id: int) -> SemanticClass:
        return self.classes[class_id]

    def by_name(self, name: str) -> SemanticClass:
        return self._by_name[name]

    def has_name(self, name: str) -> bool:
        return name in self._by_name

    def id_of(self, name: str) -> int:
        return self._by_name[name].id

    @property
    def content_ids(self) -> list[int]:
        return [c.id for c in self.classes if c.kind == CONTENT]

    @property
    def separator_id(self) -> int:
        return self._by_name[SEPARATOR].id

    @property
    def unknown_id(self) -> int:
        return self._by_name[UNKNOWN].id

    @property
    def start_id(self) -> int:
        return self._by_name[START].id

    @property
    def eos_id(self) -> int:
        return self._by_name[EOS].id

    @property
    def pad_id(self) -> int:
        return self._by_name[PAD].id

    def renderable(self, class_id: int) -> bool:
        return self.classes[class_id].kind != CONTROL

    def content_names(self) -> list[str]:
        return [c.name for c in self.classes if c.kind == CONTENT]

    def to_json(self) -> str:
        return json.dumps({"content_classes": self.content_names()}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ClassVocabulary":
        return cls(json.loads(text)["content_classes"])

    @classmethod
    def from_file(cls, path) -> "ClassVocabulary":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_json(f.read())

    @classmethod
    def default(cls) -> "ClassVocabulary":
        return cls(DEFAULT_CLASS_NAMES)

    def __eq__(self, other) -> bool:
        return isinstance(other, ClassVocabulary) and self.classes == other.classes


@dataclass(frozen=True)
class ElementBox:
    """One UI element in normalized screen coordinates.

    Geometry may be out of range on purpose (validate_screen reports rather
    than aborts), so no bounds are enforced at construction time.
    """

    x: float
    y: float
    w: float
    h: float
    class_id: int
    text: Optional[str] = None
    parent_idx: Optional[int] = None
    is_leaf: bool = True

    @property
    def cx(self) -> float:
        return self.x + self.w / 2.0

    @property
    def cy(self) -> float:
        return self.y + self.h / 2.0

    @property
    def area(self) -> float:
        return self.w * self.h


@dataclass(frozen=True)
class UiScreen:
    screen_id: str
    app_id: str
    screen_w_px: int
    screen_h_px: int
    elements: tuple[ElementBox, ...]
    captions: tuple[str, ...] = ()
    app_description: Optional[str] = None

    def with_elements(self, elements: Iterable[ElementBox]) -> "UiScreen":
        return replace(self, elements=tuple(elements))


@dataclass(frozen=True)
class MockupCandidate:
    """A created mock-up plus its provenance and (optional) quality scores."""

    elements: tuple[ElementBox, ...]
    prompt: str
    method: str  # text-only | multi-modal | generator
    source_screen_id: Optional[str] = None
    seed: Optional[int] = None
    scores: Optional["object"] = None  # quality.QualityScores once scored
    similarity: Optional[float] = None  # retrieval similarity/distance, if any

    def __post_init__(self):
        if self.method == "generator" and self.source_screen_id is not None:
            raise ValueError("generator candidates carry no source screen")
        if self.method in ("text-only", "multi-modal") and self.source_screen_id is None:
            raise ValueError(f"{self.method} candidates require a source screen")


def sort_key(el: ElementBox) -> tuple[int, float]:
    return (math.floor(el.y * Y_BANDS), el.x)


def canonical_sort(elements: Sequence[ElementBox]) -> list[ElementBox]:
    """Stable top-left-first ordering: quantized y band, ties by x."""
    return sorted(elements, key=sort_key)


def validate_screen(screen: UiScreen, vocab: ClassVocabulary) -> list[str]:
    """Collect every invariant violation; an empty list means the screen is valid."""
    problems: list[str] = []
    if screen.screen_w_px <= 0 or screen.screen_h_px <= 0:
        problems.append(
            f"screen {screen.screen_id}: non-positive pixel size "
            f"{screen.screen_w_px}x{screen.screen_h_px}"
        )
    for i, el in enumerate(screen.elements):
        where = f"screen {screen.screen_id} element {i}"
        if not (0.0 <= el.x <= 1.0) or not (0.0 <= el.y <= 1.0):
            problems.append(f"{where}: origin ({el.x}, {el.y}) outside [0,1]")
        if el.w <= 0.0 or el.h <= 0.0:
            problems.append(f"{where}: non-positive extent ({el.w}, {el.h})")
        if el.x + el.w > 1.0 + GEOM_EPS or el.y + el.h > 1.0 + GEOM_EPS:
            problems.append(f"{where}: extends past the screen edge")
        if el.class_id not in vocab:
            problems.append(f"{where}: unknown class id {el.class_id}")
        if el.parent_idx is not None:
            if not (0 <= el.parent_idx < len(screen.elements)):
                problems.append(f"{where}: parent index {el.parent_idx} out of range")
            elif el.parent_idx >= i:
                problems.append(
                    f"{where}: parent index {el.parent_idx} does not precede the element"
                )
    return problems


# --- canonical screen file format ------------------------------------------
# One JSON object per screen; files hold either a single object or JSON lines.


def screen_to_dict(screen: UiScreen, vocab: ClassVocabulary) -> dict:
    elements = []
    for el in screen.elements:
        d = {
            "x": el.x,
            "y": el.y,
            "w": el.w,
            "h": el.h,
            "class": vocab.by_id(el.class_id).name,
            "is_leaf": el.is_leaf,
        }
        if el.text is not None:
            d["text"] = el.text
        if el.parent_idx is not None:
            d["parent"] = el.parent_idx
        elements.append(d)
    return {
        "screen_id": screen.screen_id,
        "app_id": screen.app_id,
        "app_description": screen.app_description,
        "screen_w_px": screen.screen_w_px,
        "screen_h_px": screen.screen_h_px,
        "captions": list(screen.captions),
        "elements": elements,
    }


def screen_from_dict(d: dict, vocab: ClassVocabulary) -> UiScreen:
    elements = []
    for ed in d["elements"]:
        elements.append(
            ElementBox(
                x=float(ed["x"]),
                y=float(ed["y"]),
                w=float(ed["w"]),
                h=float(ed["h"]),
                class_id=vocab.id_of(ed["class"]),
                text=ed.get("text"),
                parent_idx=ed.get("parent"),
                is_leaf=bool(ed["is_leaf"]),
            )
        )
    return UiScreen(
        screen_id=d["screen_id"],
        app_id=d["app_id"],
        app_description=d.get("app_description"),
        screen_w_px=int(d["screen_w_px"]),
        screen_h_px=int(d["screen_h_px"]),
        elements=tuple(elements),
        captions=tuple(d.get("captions", [])),
    )


def write_screens_jsonl(path, screens: Iterable[UiScreen], vocab: ClassVocabulary) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for screen in screens:
            f.write(json.dumps(screen_to_dict(screen, vocab)) + "\n")


def read_screens_jsonl(path, vocab: ClassVocabulary) -> list[UiScreen]:
    """Read a canonical screen file: JSON lines, or one screen object per file."""
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    try:
        doc = json.loads(text)
        if isinstance(doc, dict):
            return [screen_from_dict(doc, vocab)]
    except json.JSONDecodeError:
        pass
    screens = []
    for line in text.splitlines():
        line = line.strip()
        if line:
            screens.append(screen_from_dict(json.loads(line), vocab))
    return screens
