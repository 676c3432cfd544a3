import numpy as np
import pytest

from mockforge.core import ClassVocabulary, ElementBox, MockupCandidate
from mockforge.render import (
    TEMPLATES,
    Theme,
    parse_svg_boxes,
    render_gallery,
    render_svg,
)

VOCAB = ClassVocabulary.default()


def candidate(elements, method="generator", **kw):
    return MockupCandidate(elements=tuple(elements), prompt="demo", method=method, **kw)


def el(name, x=0.1, y=0.1, w=0.3, h=0.1):
    return ElementBox(x, y, w, h, class_id=VOCAB.id_of(name))


class TestRenderSvg:
    def test_empty_candidate_blank_frame(self):
        result = render_svg(candidate([]), VOCAB)
        assert result.svg.startswith("<svg")
        assert parse_svg_boxes(result.svg) == []
        assert result.warnings == []

    def test_full_width_element_scales(self):
        result = render_svg(candidate([el("Image", 0.0, 0.0, 1.0, 0.5)]), VOCAB,
                            canvas=(360, 640))
        boxes = parse_svg_boxes(result.svg)
        assert boxes[0][0] == "Image"
        assert boxes[0][3] == pytest.approx(360, abs=0.5)

    def test_deterministic(self):
        cand = candidate([el("Text"), el("Slider", y=0.4)])
        a = render_svg(cand, VOCAB).svg
        b = render_svg(cand, VOCAB).svg
        assert a == b

    def test_geometry_round_trip(self):
        rng = np.random.default_rng(0)
        names = VOCAB.content_names()
        for _ in range(20):
            els = []
            for _ in range(int(rng.integers(1, 8))):
                w = float(rng.uniform(0.05, 0.6))
                h = float(rng.uniform(0.02, 0.4))
                els.append(ElementBox(
                    x=float(rng.uniform(0, 1 - w)), y=float(rng.uniform(0, 1 - h)),
                    w=w, h=h, class_id=VOCAB.id_of(names[int(rng.integers(len(names)))])))
            W, H = 360, 640
            svg = render_svg(candidate(els), VOCAB, canvas=(W, H)).svg
            boxes = parse_svg_boxes(svg)
            assert len(boxes) == len(els)
            for box, src in zip(boxes, els):
                assert box[1] == pytest.approx(src.x * W, abs=0.5)
                assert box[2] == pytest.approx(src.y * H, abs=0.5)
                assert box[3] == pytest.approx(src.w * W, abs=0.5)
                assert box[4] == pytest.approx(src.h * H, abs=0.5)

    def test_every_content_class_has_template(self):
        for name in VOCAB.content_names():
            assert name in TEMPLATES, f"no widget template for {name}"
        assert "SEPARATOR" in TEMPLATES and "UNKNOWN" in TEMPLATES

    def test_all_templates_draw_inside_canvas(self):
        # parse every numeric coordinate attribute and check canvas bounds
        import re

        els = []
        y = 0.0
        for name in VOCAB.content_names():
            els.append(el(name, x=0.1, y=y, w=0.5, h=0.03))
            y += 0.038
        svg = render_svg(candidate(els), VOCAB, canvas=(360, 640)).svg
        for attr in ("x", "x1", "x2", "cx"):
            for val in re.findall(rf'{attr}="([-0-9.]+)"', svg):
                assert -1e-6 <= float(val) <= 360 + 1e-6
        for attr in ("y", "y1", "y2", "cy"):
            for val in re.findall(rf'{attr}="([-0-9.]+)"', svg):
                assert -1e-6 <= float(val) <= 640 + 1e-6

    def test_control_class_warned_not_drawn(self):
        cand = candidate([ElementBox(0.1, 0.1, 0.2, 0.1, VOCAB.pad_id)])
        result = render_svg(cand, VOCAB)
        assert result.warnings
        assert parse_svg_boxes(result.svg) == []

    def test_annotation_toggle(self):
        cand = candidate([el("Text Button")])
        plain = render_svg(cand, VOCAB).svg
        labeled = render_svg(cand, VOCAB, theme=Theme(annotate=True)).svg
        assert "<text" not in plain and "<text" in labeled

    def test_separator_is_line(self):
        cand = candidate([ElementBox(0.1, 0.5, 0.8, 0.004, VOCAB.separator_id)])
        svg = render_svg(cand, VOCAB).svg
        assert "<line" in svg


class TestGallery:
    def make_sets(self):
        gen = [candidate([el("Text")], seed=i) for i in range(5)]
        ret = [candidate([el("Image")], method="text-only", source_screen_id=f"s{i}")
               for i in range(5)]
        mm = [candidate([el("Card")], method="multi-modal", source_screen_id=f"m{i}")
              for i in range(5)]
        return {"generator": gen, "text-only": ret, "multi-modal": mm}

    def test_three_by_five_grid(self):
        html = render_gallery(self.make_sets(), "demo prompt", VOCAB)
        assert html.count('<figure class="cell">') == 15
        assert html.count('<div class="row">') == 3
        assert "demo prompt" in html

    def test_scramble_reproducible(self):
        html1 = render_gallery(self.make_sets(), "p", VOCAB, scramble_seed=5)
        html2 = render_gallery(self.make_sets(), "p", VOCAB, scramble_seed=5)
        assert html1 == html2
        html3 = render_gallery(self.make_sets(), "p", VOCAB, scramble_seed=6)
        assert html1 != html3

    def test_single_candidate(self):
        html = render_gallery({"generator": [candidate([el("Text")])]}, "p", VOCAB)
        assert html.count('<figure class="cell">') == 1

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            render_gallery({"generator": []}, "p", VOCAB)

    def test_self_contained(self):
        html = render_gallery(self.make_sets(), "p", VOCAB)
        assert "http" not in html.split("xmlns")[0]  # no external asset links
        assert html.startswith("<!DOCTYPE html>")
