import numpy as np
import pytest

from mockforge import ndtensor as nd
from mockforge.core import ClassVocabulary, ElementBox, UiScreen
from mockforge.ingest import CorpusSplit, build_retrieval_token_view
from mockforge.ndtensor import Tensor
from mockforge.retrieval import (
    DualEncoder,
    DualEncoderConfig,
    RetrieverTrainConfig,
    VectorIndex,
    contrastive_loss,
    eval_topk,
    retrieve_multimodal,
    retrieve_text_only,
    text_index_build,
    topk_table_tsv,
    train_dual_encoder,
    ui_index_build,
)
from mockforge.synthetic import unique_token_corpus
from mockforge.textfeat import HashedTfidfProvider


@pytest.fixture
def vocab():
    return ClassVocabulary(["Image", "Text"])


def make_screen(vocab, sid="s0", app="a", captions=("hello world",), n=2):
    els = tuple(ElementBox(0.1, 0.1 * (i + 1), 0.3, 0.05, vocab.id_of("Text"))
                for i in range(n))
    return UiScreen(sid, app, 100, 200, els, captions=captions)


@pytest.fixture
def provider():
    return HashedTfidfProvider.fit(
        ["hello world", "other caption text", "login page", "gallery view"], dim=16)


class TestVectorIndex:
    def test_euclidean_ranking(self):
        index = VectorIndex([("a", 0), ("b", 0)],
                            np.array([[1.0, 0.0], [3.0, 4.0]], dtype=np.float32),
                            "euclidean")
        hits = index.search(np.zeros(2, dtype=np.float32), 2)
        assert [h[0] for h in hits] == [0, 1]
        assert hits[0][1] == pytest.approx(1.0)
        assert hits[1][1] == pytest.approx(5.0)

    def test_dot_ranking(self):
        index = VectorIndex([("a", None), ("b", None)],
                            np.array([[0.9, 0.1], [0.1, 0.9]], dtype=np.float32), "dot")
        hits = index.search(np.array([1.0, 0.0], dtype=np.float32), 1)
        assert hits[0][0] == 0

    def test_k_clamped(self):
        index = VectorIndex([("a", 0)], np.zeros((1, 2), dtype=np.float32), "euclidean")
        assert len(index.search(np.zeros(2), 10)) == 1

    def test_empty_index_errors(self):
        index = VectorIndex([], np.zeros((0, 2), dtype=np.float32), "euclidean")
        with pytest.raises(ValueError):
            index.search(np.zeros(2), 1)

    def test_duplicate_ids_rejected(self):
        with pytest.raises(ValueError):
            VectorIndex([("a", 0), ("a", 0)], np.zeros((2, 2), dtype=np.float32), "dot")

    def test_file_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        index = VectorIndex([("s1", 0), ("s2", None)],
                            rng.normal(size=(2, 4)).astype(np.float32), "dot")
        path = tmp_path / "index.uiix"
        index.save(path)
        again = VectorIndex.load(path)
        assert again.metric == "dot" and again.ids == index.ids
        assert np.array_equal(again.matrix, index.matrix)

    def test_full_scan_returns_every_id_once(self):
        rng = np.random.default_rng(1)
        index = VectorIndex([(f"s{i}", None) for i in range(7)],
                            rng.normal(size=(7, 3)).astype(np.float32), "euclidean")
        hits = index.search(rng.normal(size=3).astype(np.float32), 7)
        assert sorted(h[0] for h in hits) == list(range(7))


class TestTextOnly:
    def test_index_one_row_per_caption(self, vocab, provider):
        split = CorpusSplit("train", [
            make_screen(vocab, "s0", captions=("hello world", "other caption text")),
            make_screen(vocab, "s1", app="b", captions=("login page",) * 5),
        ])
        index = text_index_build(split, provider)
        assert len(index) == 7
        assert index.metric == "euclidean"

    def test_identical_caption_distance_zero(self, vocab, provider):
        screens = [make_screen(vocab, "s0", captions=("hello world",)),
                   make_screen(vocab, "s1", app="b", captions=("other caption text",))]
        split = CorpusSplit("train", screens)
        index = text_index_build(split, provider)
        by_id = {s.screen_id: s for s in screens}
        out = retrieve_text_only("hello world", index, provider, by_id, 1)
        assert out[0].source_screen_id == "s0"
        assert out[0].similarity == pytest.approx(0.0, abs=1e-6)
        assert out[0].method == "text-only"
        assert len(out[0].elements) == 2

    def test_dedup_flag(self, vocab, provider):
        screens = [make_screen(vocab, "s0", captions=("hello world", "hello world there"))]
        split = CorpusSplit("train", screens)
        index = text_index_build(split, provider)
        by_id = {s.screen_id: s for s in screens}
        out = retrieve_text_only("hello world", index, provider, by_id, 2, dedup=True)
        assert len(out) == 1


class TestContrastiveLoss:
    def test_literal_orthonormal_fixture(self):
        l = Tensor(np.eye(2, dtype=np.float64))
        r = Tensor(np.eye(2, dtype=np.float64))
        assert contrastive_loss(l, r, include_positive=False).item() == pytest.approx(-2.0)

    def test_standard_orthonormal_fixture(self):
        l = Tensor(np.eye(2, dtype=np.float64))
        r = Tensor(np.eye(2, dtype=np.float64))
        assert contrastive_loss(l, r, include_positive=True).item() == \
            pytest.approx(0.62652, abs=1e-4)

    def test_random_pairs_above_matched(self):
        # independent random unit vectors: loss approaches chance level and
        # stays strictly above the matched-pair case
        rng = np.random.default_rng(0)
        vals = []
        for _ in range(20):
            l = rng.normal(size=(8, 16))
            l /= np.linalg.norm(l, axis=1, keepdims=True)
            r = rng.normal(size=(8, 16))
            r /= np.linalg.norm(r, axis=1, keepdims=True)
            vals.append(contrastive_loss(Tensor(l), Tensor(r), True).item())
        matched = contrastive_loss(Tensor(np.eye(8)), Tensor(np.eye(8)), True).item()
        chance = float(np.mean(vals))
        assert chance > matched
        # analytic chance level for near-orthogonal vectors: 2*log(K)
        assert chance == pytest.approx(2 * np.log(8), abs=0.2)

    def test_batch_of_one_rejected(self):
        with pytest.raises(ValueError):
            contrastive_loss(Tensor(np.ones((1, 4))), Tensor(np.ones((1, 4))))

    def test_permutation_invariance(self):
        rng = np.random.default_rng(1)
        l = rng.normal(size=(5, 6))
        r = rng.normal(size=(5, 6))
        perm = rng.permutation(5)
        a = contrastive_loss(Tensor(l), Tensor(r), True).item()
        b = contrastive_loss(Tensor(l[perm]), Tensor(r[perm]), True).item()
        assert a == pytest.approx(b, rel=1e-6)

    def test_decreases_when_matched_dot_grows(self):
        # with r the identity basis, S == l, so the diagonal can be raised
        # while every other dot stays fixed
        rng = np.random.default_rng(2)
        S = rng.normal(size=(4, 4))
        r = np.eye(4)
        before = contrastive_loss(Tensor(S), Tensor(r), True).item()
        after = contrastive_loss(Tensor(S + 0.5 * np.eye(4)), Tensor(r), True).item()
        assert after < before

    @pytest.mark.parametrize("include_positive", [True, False])
    def test_grad_check(self, include_positive):
        worst = 0.0
        for seed in range(20):
            rng = np.random.default_rng(seed)
            l = nd.parameter(rng.normal(size=(4, 5)).astype(np.float64), "l")
            r = nd.parameter(rng.normal(size=(4, 5)).astype(np.float64), "r")
            err = nd.grad_check(
                lambda: contrastive_loss(l, r, include_positive),
                {"l": l, "r": r}, max_coords=4, rng=rng)
            worst = max(worst, err)
        assert worst < 1e-3


class TestDualEncoder:
    CFG = DualEncoderConfig(hidden=16, intermediate=32, layers=1, heads=2,
                            text_max_len=8, ui_max_len=16, dropout=0.0,
                            provider_dim=16, n_classes=7)

    def test_encode_text_deterministic_and_width(self, vocab, provider):
        enc = DualEncoder(self.CFG, seed=0)
        a = enc.encode_text("hello world", provider)
        b = enc.encode_text("hello world", provider)
        assert a.shape == (16,)
        assert np.array_equal(a, b)

    def test_different_captions_differ(self, vocab, provider):
        enc = DualEncoder(self.CFG, seed=0)
        a = enc.encode_text("hello world", provider)
        b = enc.encode_text("login page", provider)
        assert not np.allclose(a, b)

    def test_encode_ui_shape_and_determinism(self, vocab, provider):
        enc = DualEncoder(self.CFG, seed=0)
        view = build_retrieval_token_view(make_screen(vocab), provider)
        a = enc.encode_ui(view)
        assert a.shape == (16,)
        assert np.array_equal(a, enc.encode_ui(view))

    def test_over_length_caption_truncated(self, vocab, provider):
        enc = DualEncoder(self.CFG, seed=0)
        long_caption = " ".join(["word"] * 50)
        out = enc.encode_text(long_caption, provider)
        assert np.all(np.isfinite(out))


class TestTrainingAndEval:
    def test_synthetic_convergence_and_top1(self):
        corpus = unique_token_corpus(n_pairs=8)
        provider = HashedTfidfProvider.fit(
            [c for s in corpus.train.screens for c in s.captions], dim=16)
        cfg = RetrieverTrainConfig(
            encoder=DualEncoderConfig(hidden=16, intermediate=32, layers=1, heads=2,
                                      text_max_len=8, ui_max_len=24, dropout=0.0,
                                      provider_dim=16, n_classes=len(corpus.vocab)),
            batch_size=8, max_epochs=60, patience=60, seed=0)
        enc, history = train_dual_encoder(corpus.train, corpus.validation, provider, cfg)
        assert history[-1]["train_loss"] < history[0]["train_loss"]
        assert all("val_loss" in h for h in history)
        res = eval_topk(enc, corpus.test, provider, ks=(1,), seed=0)
        assert res["topk"][1] == 100.0

    def test_same_seed_same_weights(self):
        corpus = unique_token_corpus(n_pairs=4)
        provider = HashedTfidfProvider.fit(
            [c for s in corpus.train.screens for c in s.captions], dim=16)
        cfg = RetrieverTrainConfig(
            encoder=DualEncoderConfig(hidden=16, intermediate=32, layers=1, heads=2,
                                      text_max_len=8, ui_max_len=24, dropout=0.0,
                                      provider_dim=16, n_classes=len(corpus.vocab)),
            batch_size=4, max_epochs=3, patience=5, seed=11)
        enc1, h1 = train_dual_encoder(corpus.train, corpus.validation, provider, cfg)
        enc2, h2 = train_dual_encoder(corpus.train, corpus.validation, provider, cfg)
        assert h1 == h2
        for k, p in enc1.params().items():
            assert np.array_equal(p.data, enc2.params()[k].data)

    def test_batch_size_below_two_rejected(self):
        corpus = unique_token_corpus(n_pairs=4)
        provider = HashedTfidfProvider.fit(["a"], dim=16)
        cfg = RetrieverTrainConfig(batch_size=1)
        with pytest.raises(ValueError):
            train_dual_encoder(corpus.train, corpus.validation, provider, cfg)

    def test_topk_nondecreasing_and_full_at_count(self):
        corpus = unique_token_corpus(n_pairs=6)
        provider = HashedTfidfProvider.fit(
            [c for s in corpus.train.screens for c in s.captions], dim=16)
        enc = DualEncoder(DualEncoderConfig(hidden=16, intermediate=32, layers=1,
                                            heads=2, text_max_len=8, ui_max_len=24,
                                            dropout=0.0, provider_dim=16,
                                            n_classes=len(corpus.vocab)), seed=3)
        res = eval_topk(enc, corpus.test, provider, ks=(1, 2, 3, 6), seed=0)
        vals = [res["topk"][k] for k in (1, 2, 3, 6)]
        assert vals == sorted(vals)
        assert vals[-1] == 100.0

    def test_subset_protocol(self):
        corpus = unique_token_corpus(n_pairs=6)
        provider = HashedTfidfProvider.fit(
            [c for s in corpus.train.screens for c in s.captions], dim=16)
        enc = DualEncoder(DualEncoderConfig(hidden=16, intermediate=32, layers=1,
                                            heads=2, text_max_len=8, ui_max_len=24,
                                            dropout=0.0, provider_dim=16,
                                            n_classes=len(corpus.vocab)), seed=3)
        res = eval_topk(enc, corpus.test, provider, ks=(1, 3), subset_size=4, trials=3,
                        seed=0)
        assert res["protocol"] == "subset" and res["trials"] == 3
        assert res["topk"][1] <= res["topk"][3]
        with pytest.raises(ValueError):
            eval_topk(enc, corpus.test, provider, ks=(1, 10), subset_size=4)

    def test_multimodal_retrieve_provenance(self, vocab, provider):
        screens = [make_screen(vocab, f"s{i}", app=f"a{i}",
                               captions=(f"caption {i}",)) for i in range(3)]
        split = CorpusSplit("train", screens)
        enc = DualEncoder(DualEncoderConfig(hidden=16, intermediate=32, layers=1,
                                            heads=2, text_max_len=8, ui_max_len=24,
                                            dropout=0.0, provider_dim=16,
                                            n_classes=len(vocab)), seed=0)
        index = ui_index_build(split, enc, provider)
        assert index.metric == "dot"
        by_id = {s.screen_id: s for s in screens}
        out = retrieve_multimodal("hello world", enc, index, provider, by_id, 1)
        assert len(out) == 1
        assert out[0].method == "multi-modal"
        assert out[0].source_screen_id in by_id
        assert out[0].similarity is not None


class TestTable:
    def test_tsv_layout(self):
        rows = [("Multi-modal Retriever (entire test set)",
                 {"topk": {1: 2.8, 10: 4.84}})]
        out = topk_table_tsv(rows, (1, 10))
        lines = out.strip().split("\n")
        assert lines[0] == "method\tTop-1\tTop-10"
        assert lines[1] == "Multi-modal Retriever (entire test set)\t2.80%\t4.84%"


class TestLearnedTableMode:
    def test_training_updates_the_token_table(self):
        from mockforge.textfeat import LearnedTableProvider

        corpus = unique_token_corpus(n_pairs=6)
        docs = [c for s in corpus.train.screens for c in s.captions]
        provider = LearnedTableProvider.build(docs, dim=16)
        cfg = RetrieverTrainConfig(
            encoder=DualEncoderConfig(hidden=16, intermediate=32, layers=1, heads=2,
                                      text_max_len=8, ui_max_len=24, dropout=0.0,
                                      provider_dim=16, n_classes=len(corpus.vocab),
                                      text_vocab_size=provider.vocab_size),
            batch_size=6, max_epochs=10, patience=20, seed=0)
        enc, history = train_dual_encoder(corpus.train, corpus.validation, provider, cfg)
        assert history[-1]["train_loss"] < history[0]["train_loss"]
        assert enc.text_token_emb is not None
        # vocabulary rows moved away from their init; OOV row 0 stayed put
        fresh = DualEncoder(cfg.encoder, seed=cfg.seed)
        assert not np.allclose(enc.text_token_emb.data[1:],
                               fresh.text_token_emb.data[1:])
        a = enc.encode_text("alpha", provider)
        b = enc.encode_text("bravo", provider)
        assert not np.allclose(a, b)
