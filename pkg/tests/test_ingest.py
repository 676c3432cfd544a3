import json

import numpy as np
import pytest

from mockforge.core import ClassVocabulary, ElementBox, UiScreen
from mockforge.ingest import (
    IngestError,
    OverLongScreen,
    apply_separator_heuristic,
    build_corpus,
    build_retrieval_token_view,
    extract_leaf_view,
    merge_semantic_annotations,
    parse_view_hierarchy,
)
from mockforge.synthetic import write_raw_fixture
from mockforge.textfeat import HashedTfidfProvider


@pytest.fixture
def vocab():
    return ClassVocabulary(["Image", "Text", "Toolbar"])


@pytest.fixture
def provider():
    return HashedTfidfProvider.fit(["some text content here"], dim=16)


def node(l, t, r, b, text=None, children=None):
    d = {"bounds": [l, t, r, b]}
    if text is not None:
        d["text"] = text
    if children:
        d["children"] = children
    return d


class TestParseHierarchy:
    def test_normalization(self, vocab):
        raw = node(0, 0, 720, 1280)
        screen = parse_view_hierarchy(raw, "s", "a", 1440, 2560, vocab)
        el = screen.elements[0]
        assert (el.x, el.y, el.w, el.h) == (0.0, 0.0, 0.5, 0.5)

    def test_zero_area_dropped(self, vocab):
        raw = node(0, 0, 1440, 2560, children=[node(100, 100, 100, 300)])
        screen = parse_view_hierarchy(raw, "s", "a", 1440, 2560, vocab)
        assert len(screen.elements) == 1

    def test_dfs_parent_chain(self, vocab):
        raw = node(0, 0, 1440, 2560, children=[
            node(0, 0, 720, 1280, children=[node(0, 0, 360, 640)])])
        screen = parse_view_hierarchy(raw, "s", "a", 1440, 2560, vocab)
        assert [el.parent_idx for el in screen.elements] == [None, 0, 1]
        assert [el.is_leaf for el in screen.elements] == [False, False, True]

    def test_malformed_node_names_path(self, vocab):
        raw = node(0, 0, 100, 100, children=[{"no_bounds": True}])
        with pytest.raises(IngestError, match="/0"):
            parse_view_hierarchy(raw, "s", "a", 100, 100, vocab)

    def test_far_out_of_bounds_dropped_not_fatal(self, vocab):
        raw = node(0, 0, 1440, 2560, children=[node(0, 0, 40000, 100)])
        screen = parse_view_hierarchy(raw, "s", "a", 1440, 2560, vocab)
        assert len(screen.elements) == 1

    def test_children_of_dropped_node_reattach(self, vocab):
        raw = node(0, 0, 1440, 2560, children=[
            node(50, 50, 50, 50, children=[node(0, 0, 100, 100)])])
        screen = parse_view_hierarchy(raw, "s", "a", 1440, 2560, vocab)
        assert len(screen.elements) == 2
        assert screen.elements[1].parent_idx == 0

    def test_bounds_clipped_to_unit(self, vocab):
        raw = node(-100, 0, 1540, 2560, children=[])
        screen = parse_view_hierarchy(raw, "s", "a", 1440, 2560, vocab)
        el = screen.elements[0]
        assert el.x == 0.0 and el.x + el.w <= 1.0 + 1e-9


class TestAnnotations:
    def make_screen(self, vocab, n=3):
        els = tuple(ElementBox(0.1, 0.1 * (i + 1), 0.2, 0.05, vocab.unknown_id)
                    for i in range(n))
        return UiScreen("s", "a", 100, 100, els)

    def test_annotated_class_applied(self, vocab):
        screen = self.make_screen(vocab)
        out = merge_semantic_annotations(screen, {1: "Image"}, vocab)
        assert out.elements[1].class_id == vocab.id_of("Image")
        assert out.elements[0].class_id == vocab.unknown_id

    def test_unknown_class_is_hard_error(self, vocab):
        screen = self.make_screen(vocab)
        with pytest.raises(IngestError):
            merge_semantic_annotations(screen, {0: "Blob"}, vocab)


class TestSeparatorHeuristic:
    def test_very_short_unknown_leaf(self, vocab):
        screen = UiScreen("s", "a", 100, 100, (
            ElementBox(0.05, 0.5, 0.9, 0.005, vocab.unknown_id),))
        out = apply_separator_heuristic(screen, vocab)
        assert out.elements[0].class_id == vocab.separator_id

    def test_regular_unknown_kept(self, vocab):
        screen = UiScreen("s", "a", 100, 100, (
            ElementBox(0.1, 0.1, 0.3, 0.3, vocab.unknown_id),))
        out = apply_separator_heuristic(screen, vocab)
        assert out.elements[0].class_id == vocab.unknown_id

    def test_annotated_thin_element_untouched(self, vocab):
        screen = UiScreen("s", "a", 100, 100, (
            ElementBox(0.1, 0.1, 0.9, 0.005, vocab.id_of("Image")),))
        out = apply_separator_heuristic(screen, vocab)
        assert out.elements[0].class_id == vocab.id_of("Image")


class TestLeafView:
    def test_filters_and_sorts(self, vocab):
        els = (
            ElementBox(0.0, 0.0, 1.0, 1.0, vocab.unknown_id, is_leaf=False),
            ElementBox(0.1, 0.9, 0.2, 0.05, vocab.id_of("Text"), parent_idx=0),
            ElementBox(0.9, 0.1, 0.05, 0.05, vocab.id_of("Image"), parent_idx=0),
        )
        screen = UiScreen("s", "a", 100, 100, els)
        leaves = extract_leaf_view(screen)
        assert [el.class_id for el in leaves] == [vocab.id_of("Image"), vocab.id_of("Text")]
        assert all(el.parent_idx is None for el in leaves)

    def test_container_only_screen(self, vocab):
        screen = UiScreen("s", "a", 100, 100, (
            ElementBox(0, 0, 1, 1, vocab.unknown_id, is_leaf=False),))
        assert extract_leaf_view(screen) == []

    def test_subset_of_leaves(self, vocab):
        rng = np.random.default_rng(0)
        els = tuple(
            ElementBox(float(rng.uniform(0, 0.5)), float(rng.uniform(0, 0.5)),
                       0.1, 0.1, vocab.unknown_id, is_leaf=bool(rng.integers(2)))
            for _ in range(10))
        screen = UiScreen("s", "a", 100, 100, els)
        leaves = extract_leaf_view(screen)
        assert all(el.is_leaf for el in leaves)
        assert len(leaves) == sum(1 for el in els if el.is_leaf)


class TestTokenView:
    def make_screen(self, vocab, n, text=None, app_desc=None):
        els = tuple(ElementBox(0.1, 0.05 * (i + 1), 0.2, 0.04, vocab.unknown_id,
                               text=text) for i in range(n))
        return UiScreen("s", "a", 100, 100, els, app_description=app_desc)

    def test_token_count_is_elements_plus_three(self, vocab, provider):
        for n in (0, 1, 3, 7):
            view = build_retrieval_token_view(self.make_screen(vocab, n), provider)
            assert len(view) == n + 3

    def test_structure(self, vocab, provider):
        view = build_retrieval_token_view(self.make_screen(vocab, 3), provider)
        kinds = [t.kind for t in view.tokens]
        assert kinds[0] == "start" and kinds[1] == "app-desc" and kinds[-1] == "end"
        assert kinds[2:-1] == ["element"] * 3

    def test_over_long_rejected(self, vocab, provider):
        with pytest.raises(OverLongScreen):
            build_retrieval_token_view(self.make_screen(vocab, 510), provider)

    def test_textless_element_has_zero_vector(self, vocab, provider):
        view = build_retrieval_token_view(self.make_screen(vocab, 1), provider)
        assert not view.tokens[2].text_vec.any()

    def test_element_text_embedded(self, vocab, provider):
        view = build_retrieval_token_view(self.make_screen(vocab, 1, text="some text"),
                                          provider)
        assert view.tokens[2].text_vec.any()

    def test_app_description_pooled(self, vocab, provider):
        view = build_retrieval_token_view(
            self.make_screen(vocab, 1, app_desc="text content"), provider)
        assert view.tokens[1].text_vec.any()

    def test_intermediates_included(self, vocab, provider):
        els = (ElementBox(0, 0, 1, 1, vocab.unknown_id, is_leaf=False),
               ElementBox(0.1, 0.1, 0.2, 0.2, vocab.unknown_id, parent_idx=0))
        screen = UiScreen("s", "a", 100, 100, els)
        view = build_retrieval_token_view(screen, provider)
        assert len(view) == 5


class TestBuildCorpus:
    def test_fixture_splits(self, tmp_path):
        paths = write_raw_fixture(tmp_path)
        vocab = ClassVocabulary.default()
        result = build_corpus(paths["hierarchy_dir"], paths["captions"],
                              paths["annotations"], paths["manifest"], vocab)
        assert result.report.split_sizes == {"train": 6, "validation": 2, "test": 2}
        screen = result.train.screens[0]
        assert len(screen.captions) == 2
        # annotations landed
        names = {vocab.by_id(el.class_id).name for el in screen.elements}
        assert "Toolbar" in names and "Text" in names and "Image" in names
        # separator heuristic caught the very short strip
        assert "SEPARATOR" in names
        assert 0.0 < result.report.annotation_coverage < 1.0

    def test_duplicate_screen_is_fatal(self, tmp_path):
        paths = write_raw_fixture(tmp_path)
        manifest = paths["manifest"].read_text()
        first = manifest.splitlines()[0].split("\t")[0]
        paths["manifest"].write_text(manifest + f"{first}\ttest\n")
        with pytest.raises(IngestError, match="more than one split"):
            build_corpus(paths["hierarchy_dir"], paths["captions"],
                         paths["annotations"], paths["manifest"],
                         ClassVocabulary.default())

    def test_app_split_overlap_is_fatal(self, tmp_path):
        paths = write_raw_fixture(tmp_path)
        manifest_rows = paths["manifest"].read_text().splitlines()
        # move one app.alpha screen into the test split
        sid = manifest_rows[0].split("\t")[0]
        manifest_rows[0] = f"{sid}\ttest"
        paths["manifest"].write_text("\n".join(manifest_rows) + "\n")
        with pytest.raises(IngestError, match="app"):
            build_corpus(paths["hierarchy_dir"], paths["captions"],
                         paths["annotations"], paths["manifest"],
                         ClassVocabulary.default())

    def test_missing_hierarchy_drops_screen(self, tmp_path):
        paths = write_raw_fixture(tmp_path)
        (paths["hierarchy_dir"] / "fix-00.json").unlink()
        result = build_corpus(paths["hierarchy_dir"], paths["captions"],
                              paths["annotations"], paths["manifest"],
                              ClassVocabulary.default())
        assert "fix-00" in result.report.dropped_screens
        assert result.report.split_sizes["train"] == 5
