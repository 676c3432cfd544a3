"""Low-fidelity vector-graphics rendering.

Each semantic class maps to a widget template: a drawing routine that fills
the element's box with schematic parts. Templates are aspect-aware; bars and
fields stretch while knobs, icons and glyphs keep their proportions. Every
element group opens with a bounding rect so emitted geometry can be parsed
back out of the document.
"""

from __future__ import annotations

import html
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence
from xml.etree import ElementTree

import numpy as np

from .core import ClassVocabulary, MockupCandidate

DEFAULT_CANVAS = (360, 640)


@dataclass(frozen=True)
class Theme:
    stroke: str = "#4a5568"
    fill: str = "#edf2f7"
    accent: str = "#a0aec0"
    frame: str = "#1a202c"
    stroke_width: float = 1.5
    annotate: bool = False


@dataclass
class RenderResult:
    svg: str
    warnings: list[str] = field(default_factory=list)

    def __str__(self) -> str:
        return self.svg


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _rect(x, y, w, h, theme: Theme, rx: float = 0.0, fill=None, dashed=False, cls=None) -> str:
    extra = f' rx="{_fmt(rx)}"' if rx else ""
    if dashed:
        extra += ' stroke-dasharray="4 3"'
    if cls:
        extra += f' class="{cls}"'
    return (f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}" height="{_fmt(h)}"'
            f' fill="{fill or theme.fill}" stroke="{theme.stroke}"'
            f' stroke-width="{theme.stroke_width}"{extra}/>')


def _line(x1, y1, x2, y2, theme: Theme, width=None) -> str:
    return (f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}"'
            f' stroke="{theme.stroke}" stroke-width="{_fmt(width or theme.stroke_width)}"/>')


def _circle(cx, cy, r, theme: Theme, fill=None) -> str:
    return (f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="{_fmt(r)}"'
            f' fill="{fill or theme.accent}" stroke="{theme.stroke}"'
            f' stroke-width="{theme.stroke_width}"/>')


def _text_lines(x, y, w, h, theme: Theme, n: Optional[int] = None) -> list[str]:
    if n is None:
        n = max(1, min(3, int(h // 12)))
    parts = []
    gap = h / (n + 1)
    for i in range(n):
        ly = y + gap * (i + 1)
        lw = w * (0.9 if i < n - 1 else 0.6)
        parts.append(_line(x + w * 0.05, ly, x + w * 0.05 + lw, ly, theme))
    return parts


# --- widget templates (x, y, w, h in canvas units) -----------------------------------


def _tpl_default(x, y, w, h, t: Theme) -> list[str]:
    return [_rect(x, y, w, h, t)]


def _tpl_unknown(x, y, w, h, t: Theme) -> list[str]:
    return [_rect(x, y, w, h, t, dashed=True, fill="none")]


def _tpl_separator(x, y, w, h, t: Theme) -> list[str]:
    if w >= h:
        cy = y + h / 2
        return [_line(x, cy, x + w, cy, t)]
    cx = x + w / 2
    return [_line(cx, y, cx, y + h, t)]


def _tpl_text(x, y, w, h, t: Theme) -> list[str]:
    return [_rect(x, y, w, h, t, fill="none")] + _text_lines(x, y, w, h, t)


def _tpl_text_button(x, y, w, h, t: Theme) -> list[str]:
    cy = y + h / 2
    return [
        _rect(x, y, w, h, t, rx=min(6.0, h / 2), fill=t.accent),
        _line(x + w * 0.3, cy, x + w * 0.7, cy, t),
    ]


def _tpl_image(x, y, w, h, t: Theme) -> list[str]:
    r = min(w, h) * 0.12
    return [
        _rect(x, y, w, h, t),
        _line(x, y + h, x + w * 0.45, y + h * 0.45, t),
        _line(x + w * 0.45, y + h * 0.45, x + w, y + h, t),
        _circle(x + w * 0.75, y + h * 0.3, r, t),
    ]


def _tpl_icon(x, y, w, h, t: Theme) -> list[str]:
    r = min(w, h) * 0.35  # glyph keeps its proportions
    return [_circle(x + w / 2, y + h / 2, r, t)]


def _tpl_input(x, y, w, h, t: Theme) -> list[str]:
    base = y + h * 0.8
    return [
        _rect(x, y, w, h, t, rx=3.0, fill="none"),
        _line(x + w * 0.05, base, x + w * 0.95, base, t),
        _line(x + w * 0.08, y + h * 0.3, x + w * 0.08, base - 2, t),
    ]


def _tpl_list_item(x, y, w, h, t: Theme) -> list[str]:
    r = min(h * 0.3, w * 0.08, 10.0)
    parts = [_rect(x, y, w, h, t, fill="none"),
             _circle(x + r + h * 0.15, y + h / 2, r, t)]
    tx = x + 2 * r + h * 0.3
    parts += _text_lines(tx, y, max(w - (tx - x) - w * 0.05, w * 0.3), h, t, n=2)
    return parts


def _tpl_toolbar(x, y, w, h, t: Theme) -> list[str]:
    r = min(h * 0.25, 8.0)
    return [
        _rect(x, y, w, h, t, fill=t.accent),
        _circle(x + h * 0.5, y + h / 2, r, t, fill=t.fill),
        _line(x + h * 1.2, y + h / 2, x + w * 0.6, y + h / 2, t),
    ]


def _tpl_slider(x, y, w, h, t: Theme) -> list[str]:
    cy = y + h / 2
    r = min(h / 2, 6.0)  # knob circle never stretches
    return [
        _line(x + r, cy, x + w - r, cy, t, width=max(t.stroke_width, 2.0)),
        _circle(x + w * 0.6, cy, r, t),
    ]


def _tpl_switch(x, y, w, h, t: Theme) -> list[str]:
    track_h = min(h * 0.6, 14.0)
    track_w = min(w, track_h * 2.2)
    tx = x + (w - track_w) / 2
    ty = y + (h - track_h) / 2
    return [
        _rect(tx, ty, track_w, track_h, t, rx=track_h / 2, fill=t.accent),
        _circle(tx + track_w - track_h / 2, ty + track_h / 2, track_h / 2 * 0.9, t, fill=t.fill),
    ]


def _tpl_checkbox(x, y, w, h, t: Theme) -> list[str]:
    s = min(w, h) * 0.8
    cx = x + (w - s) / 2
    cy = y + (h - s) / 2
    return [
        _rect(cx, cy, s, s, t, rx=2.0, fill="none"),
        _line(cx + s * 0.2, cy + s * 0.55, cx + s * 0.45, cy + s * 0.8, t),
        _line(cx + s * 0.45, cy + s * 0.8, cx + s * 0.85, cy + s * 0.2, t),
    ]


def _tpl_radio(x, y, w, h, t: Theme) -> list[str]:
    r = min(w, h) * 0.4
    cx, cy = x + w / 2, y + h / 2
    return [_circle(cx, cy, r, t, fill="none"), _circle(cx, cy, r * 0.45, t)]


def _tpl_pager(x, y, w, h, t: Theme) -> list[str]:
    r = min(h * 0.3, 3.5)
    n = max(2, min(5, int(w // (r * 5))))
    gap = w / (n + 1)
    return [_circle(x + gap * (i + 1), y + h / 2, r, t,
                    fill=t.stroke if i == 0 else "none") for i in range(n)]


def _tpl_advertisement(x, y, w, h, t: Theme) -> list[str]:
    return [
        _rect(x, y, w, h, t, fill="none", dashed=True),
        _line(x, y, x + w, y + h, t),
        _line(x + w, y, x, y + h, t),
    ]


def _tpl_web_view(x, y, w, h, t: Theme) -> list[str]:
    bar = min(h * 0.15, 16.0)
    return [_rect(x, y, w, h, t, fill="none"),
            _rect(x, y, w, bar, t, fill=t.accent)] + _text_lines(
                x, y + bar, w, h - bar, t)


def _tpl_video(x, y, w, h, t: Theme) -> list[str]:
    s = min(w, h) * 0.25  # play glyph keeps its shape
    cx, cy = x + w / 2, y + h / 2
    tri = (f'<polygon points="{_fmt(cx - s / 2)},{_fmt(cy - s / 2)} '
           f'{_fmt(cx - s / 2)},{_fmt(cy + s / 2)} {_fmt(cx + s / 2)},{_fmt(cy)}"'
           f' fill="{t.accent}" stroke="{t.stroke}" stroke-width="{t.stroke_width}"/>')
    return [_rect(x, y, w, h, t), tri]


def _tpl_card(x, y, w, h, t: Theme) -> list[str]:
    img_h = h * 0.55
    return ([_rect(x, y, w, h, t, rx=4.0, fill="none"),
             _rect(x, y, w, img_h, t, fill=t.accent)]
            + _text_lines(x, y + img_h, w, h - img_h, t, n=2))


def _tpl_modal(x, y, w, h, t: Theme) -> list[str]:
    btn_h = min(h * 0.2, 20.0)
    return [
        _rect(x, y, w, h, t, rx=5.0),
        _line(x + w * 0.08, y + h * 0.2, x + w * 0.7, y + h * 0.2, t),
        _rect(x + w * 0.52, y + h - btn_h * 1.4, w * 0.18, btn_h, t, rx=3.0, fill=t.accent),
        _rect(x + w * 0.74, y + h - btn_h * 1.4, w * 0.18, btn_h, t, rx=3.0, fill=t.accent),
    ]


def _tpl_bottom_nav(x, y, w, h, t: Theme) -> list[str]:
    r = min(h * 0.25, 7.0)
    n = 4
    gap = w / (n + 1)
    parts = [_rect(x, y, w, h, t, fill=t.accent)]
    parts += [_circle(x + gap * (i + 1), y + h / 2, r, t, fill=t.fill) for i in range(n)]
    return parts


def _tpl_button_bar(x, y, w, h, t: Theme) -> list[str]:
    n = 3
    seg = w / n
    parts = [_rect(x, y, w, h, t, fill="none")]
    for i in range(1, n):
        parts.append(_line(x + seg * i, y, x + seg * i, y + h, t))
    for i in range(n):
        cy = y + h / 2
        parts.append(_line(x + seg * i + seg * 0.25, cy, x + seg * (i + 1) - seg * 0.25, cy, t))
    return parts


def _tpl_multi_tab(x, y, w, h, t: Theme) -> list[str]:
    n = 3
    seg = w / n
    return [
        _rect(x, y, w, h, t, fill="none"),
        _line(x, y + h, x + seg, y + h, t, width=3.0),
        _line(x + seg * 1.3, y + h / 2, x + seg * 1.7, y + h / 2, t),
        _line(x + seg * 2.3, y + h / 2, x + seg * 2.7, y + h / 2, t),
    ]


def _tpl_map(x, y, w, h, t: Theme) -> list[str]:
    pin_r = min(w, h) * 0.08
    cx, cy = x + w / 2, y + h * 0.45
    return [
        _rect(x, y, w, h, t),
        _line(x, y + h * 0.3, x + w, y + h * 0.55, t),
        _line(x + w * 0.3, y, x + w * 0.45, y + h, t),
        _circle(cx, cy, pin_r, t, fill=t.stroke),
        _line(cx, cy, cx, cy + pin_r * 2.5, t),
    ]


def _tpl_drawer(x, y, w, h, t: Theme) -> list[str]:
    return [_rect(x, y, w, h, t)] + _text_lines(x, y, w * 0.8, h, t, n=min(4, max(2, int(h // 40))))


def _tpl_date_picker(x, y, w, h, t: Theme) -> list[str]:
    parts = [_rect(x, y, w, h, t, fill="none")]
    head = h * 0.2
    parts.append(_rect(x, y, w, head, t, fill=t.accent))
    for i in range(1, 4):
        parts.append(_line(x, y + head + (h - head) * i / 4, x + w, y + head + (h - head) * i / 4, t))
    for i in range(1, 5):
        parts.append(_line(x + w * i / 5, y + head, x + w * i / 5, y + h, t))
    return parts


def _tpl_stepper(x, y, w, h, t: Theme) -> list[str]:
    cy = y + h / 2
    g = min(w, h) * 0.15
    return [
        _rect(x, y, w, h, t, rx=3.0, fill="none"),
        _line(x + w / 2, y, x + w / 2, y + h, t),
        _line(x + w * 0.25 - g, cy, x + w * 0.25 + g, cy, t),
        _line(x + w * 0.75 - g, cy, x + w * 0.75 + g, cy, t),
        _line(x + w * 0.75, cy - g, x + w * 0.75, cy + g, t),
    ]


def _tpl_background_image(x, y, w, h, t: Theme) -> list[str]:
    return [
        _rect(x, y, w, h, t, fill="none", dashed=True),
        _line(x, y, x + w, y + h, t),
    ]


TEMPLATES: dict[str, Callable] = {
    "Advertisement": _tpl_advertisement,
    "Background Image": _tpl_background_image,
    "Bottom Navigation": _tpl_bottom_nav,
    "Button Bar": _tpl_button_bar,
    "Card": _tpl_card,
    "Checkbox": _tpl_checkbox,
    "Date Picker": _tpl_date_picker,
    "Drawer": _tpl_drawer,
    "Icon": _tpl_icon,
    "Image": _tpl_image,
    "Input": _tpl_input,
    "List Item": _tpl_list_item,
    "Map View": _tpl_map,
    "Modal": _tpl_modal,
    "Multi-Tab": _tpl_multi_tab,
    "Number Stepper": _tpl_stepper,
    "On/Off Switch": _tpl_switch,
    "Pager Indicator": _tpl_pager,
    "Radio Button": _tpl_radio,
    "Slider": _tpl_slider,
    "Text": _tpl_text,
    "Text Button": _tpl_text_button,
    "Toolbar": _tpl_toolbar,
    "Video": _tpl_video,
    "Web View": _tpl_web_view,
    "SEPARATOR": _tpl_separator,
    "UNKNOWN": _tpl_unknown,
}


def render_svg(candidate: MockupCandidate, vocab: ClassVocabulary,
               canvas: tuple[int, int] = DEFAULT_CANVAS,
               theme: Theme = Theme()) -> RenderResult:
    """One group per element in canonical order; later elements draw on top.

    The first rect of each group is the element's bounding box, so geometry
    survives a round trip through the document.
    """
    W, H = canvas
    warnings: list[str] = []
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}"'
        f' viewBox="0 0 {W} {H}">',
        f'<rect x="0.5" y="0.5" width="{W - 1}" height="{H - 1}" fill="white"'
        f' stroke="{theme.frame}" stroke-width="1"/>',
    ]
    for i, el in enumerate(candidate.elements):
        name = vocab.by_id(el.class_id).name if el.class_id in vocab else f"#{el.class_id}"
        if not vocab.renderable(el.class_id):
            warnings.append(f"element {i}: control class {name} not rendered")
            continue
        x, y = el.x * W, el.y * H
        w, h = el.w * W, el.h * H
        tpl = TEMPLATES.get(name)
        if tpl is None:
            warnings.append(f"element {i}: no template for class {name}, placeholder used")
            tpl = _tpl_unknown
        group = [f'<g class="el" data-class="{html.escape(name, quote=True)}" data-index="{i}">']
        group.append(_rect(x, y, w, h, theme, fill="none", cls="bbox"))
        group.extend(tpl(x, y, w, h, theme))
        if theme.annotate:
            group.append(
                f'<text x="{_fmt(x + 2)}" y="{_fmt(y + 10)}" font-size="8"'
                f' fill="{theme.stroke}" font-family="sans-serif">{html.escape(name)}</text>')
        group.append("</g>")
        parts.append("".join(group))
    parts.append("</svg>")
    return RenderResult(svg="\n".join(parts), warnings=warnings)


def parse_svg_boxes(svg_text: str) -> list[tuple[str, float, float, float, float]]:
    """(class name, x, y, w, h) per element group, in document order."""
    ns = {"svg": "http://www.w3.org/2000/svg"}
    root = ElementTree.fromstring(svg_text)
    out = []
    for g in root.iterfind(".//svg:g[@class='el']", ns):
        rect = g.find("svg:rect[@class='bbox']", ns)
        out.append((
            g.get("data-class"),
            float(rect.get("x")),
            float(rect.get("y")),
            float(rect.get("width")),
            float(rect.get("height")),
        ))
    return out


def render_gallery(candidates_by_method: dict[str, Sequence[MockupCandidate]],
                   prompt: str, vocab: ClassVocabulary,
                   canvas: tuple[int, int] = (180, 320),
                   theme: Theme = Theme(),
                   scramble_seed: Optional[int] = None) -> str:
    """Self-contained HTML grid of inline mock-ups with provenance captions.

    Without a scramble seed candidates group into one labeled row per
    method; with one, all cells shuffle reproducibly.
    """
    total = sum(len(v) for v in candidates_by_method.values())
    if total < 1:
        raise ValueError("gallery needs at least one candidate")
    cells = []
    for method, candidates in candidates_by_method.items():
        for cand in candidates:
            svg = render_svg(cand, vocab, canvas, theme).svg
            caption = method
            if cand.source_screen_id:
                caption += f" · {cand.source_screen_id}"
            if cand.seed is not None:
                caption += f" · seed {cand.seed}"
            if cand.scores is not None:
                caption += f" · score {cand.scores.rerank_score:.3f}"
            cells.append((method, f'<figure class="cell"><div class="mock">{svg}</div>'
                                  f"<figcaption>{html.escape(caption)}</figcaption></figure>"))
    style = (
        "<style>body{font-family:sans-serif;margin:24px;background:#fafafa}"
        ".row{margin-bottom:18px}.row h2{font-size:14px;margin:6px 0}"
        ".grid{display:flex;flex-wrap:wrap;gap:12px}"
        ".cell{margin:0}.mock{border:1px solid #ddd;background:#fff}"
        "figcaption{font-size:11px;color:#555;max-width:180px}</style>"
    )
    body = [f"<h1>{html.escape(prompt)}</h1>"]
    if scramble_seed is None:
        for method in candidates_by_method:
            row = [c for m, c in cells if m == method]
            if row:
                body.append(f'<div class="row"><h2>{html.escape(method)}</h2>'
                            f'<div class="grid">{"".join(row)}</div></div>')
    else:
        rng = np.random.default_rng(scramble_seed)
        order = rng.permutation(len(cells))
        shuffled = "".join(cells[i][1] for i in order)
        body.append(f'<div class="grid">{shuffled}</div>'
                    f"<!-- scramble seed {scramble_seed} -->")
    return ("<!DOCTYPE html><html><head><meta charset=\"utf-8\">"
            f"<title>{html.escape(prompt)}</title>{style}</head>"
            f"<body>{''.join(body)}</body></html>")
