"""Text-only and multi-modal retrieval.

The text-only path embeds descriptions with a frozen provider and scans a
Euclidean index of caption vectors. The multi-modal path trains a dual
encoder (TextEncoder/UIEncoder Transformer pair) with a bidirectional
in-batch softmax loss and retrieves UI embeddings by dot product.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import ndtensor as nd
from .core import MockupCandidate, UiScreen
from .ingest import (
    CorpusSplit,
    OverLongScreen,
    RetrievalTokenView,
    TOKEN_APP_DESC,
    TOKEN_ELEMENT,
    TOKEN_END,
    TOKEN_START,
    build_retrieval_token_view,
    extract_leaf_view,
)
from .ndtensor import Tensor
from .textfeat import embed_tokens, pool_description, tokenize
from .transformer import Encoder, TransformerConfig, pooled_output

log = logging.getLogger(__name__)

UIIX_MAGIC = b"UIIX"
METRIC_CODES = {"euclidean": 0, "dot": 1}
METRIC_NAMES = {v: k for k, v in METRIC_CODES.items()}

_KIND_IDS = {TOKEN_START: 0, TOKEN_APP_DESC: 1, TOKEN_ELEMENT: 2, TOKEN_END: 3}


def caption_tokens(caption: str, provider) -> np.ndarray:
    """Caption inputs in the shape the encoder expects: token ids for a
    learned-table provider, provider vectors otherwise."""
    tokens = tokenize(caption)
    if getattr(provider, "mode", None) == "learned-table":
        return provider.token_ids(tokens)
    if not tokens:
        return np.zeros((0, provider.dim), dtype=np.float32)
    return embed_tokens(tokens, provider)


class VectorIndex:
    """Exact-scan nearest-neighbour index over fixed-width embeddings."""

    def __init__(self, ids: list[tuple[str, Optional[int]]], matrix: np.ndarray, metric: str):
        if metric not in METRIC_CODES:
            raise ValueError(f"unknown metric {metric!r}")
        if len(ids) != matrix.shape[0]:
            raise ValueError("ids and matrix row count differ")
        if len(set(ids)) != len(ids):
            raise ValueError("index ids must be unique")
        self.ids = ids
        self.matrix = np.asarray(matrix, dtype=np.float32)
        self.metric = metric

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def search(self, query: np.ndarray, k: int) -> list[tuple[int, float]]:
        """Top-k (row, score) pairs; score is L2 distance or dot product.

        Ties break by row order. k larger than the index returns every row.
        """
        if len(self.ids) == 0:
            raise ValueError("cannot search an empty index")
        if k < 1:
            raise ValueError("k must be >= 1")
        q = np.asarray(query, dtype=np.float32)
        if self.metric == "euclidean":
            scores = np.linalg.norm(self.matrix - q[None, :], axis=1)
            order = np.argsort(scores, kind="stable")
        else:
            scores = self.matrix @ q
            order = np.argsort(-scores, kind="stable")
        order = order[: min(k, len(self.ids))]
        return [(int(i), float(scores[i])) for i in order]

    def to_bytes(self) -> bytes:
        parts = [struct.pack("<4sBIQ", UIIX_MAGIC, METRIC_CODES[self.metric],
                             self.dim, len(self.ids))]
        for sid, cap in self.ids:
            raw = json.dumps([sid, cap]).encode("utf-8")
            parts.append(struct.pack("<I", len(raw)))
            parts.append(raw)
        parts.append(np.ascontiguousarray(self.matrix, dtype="<f4").tobytes())
        return b"".join(parts)

    def save(self, path) -> None:
        with open(path, "wb") as f:
            f.write(self.to_bytes())

    @classmethod
    def from_bytes(cls, data: bytes) -> "VectorIndex":
        magic, metric_code, dim, count = struct.unpack_from("<4sBIQ", data, 0)
        if magic != UIIX_MAGIC:
            raise ValueError("not a UIIX index file")
        offset = struct.calcsize("<4sBIQ")
        ids = []
        for _ in range(count):
            (n,) = struct.unpack_from("<I", data, offset)
            offset += 4
            sid, cap = json.loads(data[offset : offset + n].decode("utf-8"))
            ids.append((sid, cap))
            offset += n
        matrix = np.frombuffer(data, dtype="<f4", count=count * dim, offset=offset)
        return cls(ids, matrix.reshape(count, dim).copy(), METRIC_NAMES[metric_code])

    @classmethod
    def load(cls, path) -> "VectorIndex":
        with open(path, "rb") as f:
            return cls.from_bytes(f.read())


# --- text-only retriever --------------------------------------------------------


def text_index_build(split: CorpusSplit, provider) -> VectorIndex:
    """One row per (screen, caption): the pooled caption embedding."""
    ids: list[tuple[str, Optional[int]]] = []
    rows = []
    for screen in split.screens:
        for ci, caption in enumerate(screen.captions):
            ids.append((screen.screen_id, ci))
            rows.append(pool_description(caption, provider))
    matrix = np.stack(rows) if rows else np.zeros((0, provider.dim), dtype=np.float32)
    return VectorIndex(ids, matrix, "euclidean")


def retrieve_text_only(query: str, index: VectorIndex, provider,
                       screens_by_id: dict[str, UiScreen], k: int,
                       dedup: bool = False) -> list[MockupCandidate]:
    qvec = pool_description(query, provider)
    hits = index.search(qvec, k if not dedup else len(index))
    out: list[MockupCandidate] = []
    seen: set[str] = set()
    for row, dist in hits:
        screen_id, _ = index.ids[row]
        if dedup:
            if screen_id in seen:
                continue
            seen.add(screen_id)
        screen = screens_by_id[screen_id]
        out.append(
            MockupCandidate(
                elements=tuple(extract_leaf_view(screen)),
                prompt=query,
                method="text-only",
                source_screen_id=screen_id,
                similarity=dist,
            )
        )
        if len(out) == k:
            break
    return out


# --- dual encoder ----------------------------------------------------------------


@dataclass(frozen=True)
class DualEncoderConfig:
    hidden: int = 64
    intermediate: int = 256
    layers: int = 4
    heads: int = 4
    text_max_len: int = 64
    ui_max_len: int = 512
    dropout: float = 0.1
    provider_dim: int = 64
    n_classes: int = 30
    # learned-table mode: caption tokens index a trainable embedding matrix
    # (row 0 reserved for out-of-vocabulary) instead of frozen provider vectors
    text_vocab_size: Optional[int] = None


class DualEncoder:
    """TextEncoder/UIEncoder pair sharing one hidden width.

    Provider outputs are frozen inputs; only encoder weights (plus the input
    projections below) train.
    """

    def __init__(self, cfg: DualEncoderConfig, seed: int = 0, dtype=np.float32):
        self.cfg = cfg
        rng = np.random.default_rng(seed)
        h = cfg.hidden
        text_cfg = TransformerConfig(hidden=h, intermediate=cfg.intermediate,
                                     layers=cfg.layers, heads=cfg.heads,
                                     max_len=cfg.text_max_len, dropout=cfg.dropout)
        ui_cfg = TransformerConfig(hidden=h, intermediate=cfg.intermediate,
                                   layers=cfg.layers, heads=cfg.heads,
                                   max_len=cfg.ui_max_len, dropout=cfg.dropout)
        self.text_encoder = Encoder(rng, text_cfg, "text_enc", dtype)
        self.ui_encoder = Encoder(rng, ui_cfg, "ui_enc", dtype)

        from .transformer import xavier

        if cfg.text_vocab_size is not None:
            self.text_token_emb = nd.parameter(
                (rng.normal(size=(1 + cfg.text_vocab_size, h)) * 0.02).astype(dtype),
                "text_token_emb")
            self.text_proj = None
        else:
            self.text_token_emb = None
            self.text_proj = nd.parameter(xavier(rng, cfg.provider_dim, h, dtype),
                                          "text_proj")
        self.text_start = nd.parameter(
            (rng.normal(size=(h,)) * 0.02).astype(dtype), "text_start")
        self.kind_emb = nd.parameter((rng.normal(size=(4, h)) * 0.02).astype(dtype), "kind_emb")
        self.dims_proj = nd.parameter(xavier(rng, 4, h, dtype), "dims_proj")
        self.class_emb = nd.parameter(
            (rng.normal(size=(cfg.n_classes, h)) * 0.02).astype(dtype), "class_emb")
        self.textvec_proj = nd.parameter(xavier(rng, cfg.provider_dim, h, dtype), "textvec_proj")

    def params(self) -> dict:
        out = {
            "text_start": self.text_start,
            "kind_emb": self.kind_emb,
            "dims_proj": self.dims_proj,
            "class_emb": self.class_emb,
            "textvec_proj": self.textvec_proj,
        }
        if self.text_proj is not None:
            out["text_proj"] = self.text_proj
        if self.text_token_emb is not None:
            out["text_token_emb"] = self.text_token_emb
        out.update(self.text_encoder.params())
        out.update(self.ui_encoder.params())
        return out

    # -- text side

    def encode_text_batch(self, token_arrays: Sequence[np.ndarray], drop_rng=None) -> Tensor:
        """Pooled caption embeddings.

        Each entry is either a (k, provider_dim) float array (frozen provider
        mode) or a (k,) integer id array (learned-table mode).
        """
        cap = self.cfg.text_max_len - 1
        arrays = []
        for arr in token_arrays:
            if arr.shape[0] > cap:
                log.warning("caption of %d tokens truncated to %d", arr.shape[0], cap)
                arr = arr[:cap]
            arrays.append(arr)
        B = len(arrays)
        T = 1 + max((a.shape[0] for a in arrays), default=0)
        pad = np.ones((B, T), dtype=bool)
        pad[:, 0] = False
        for i, a in enumerate(arrays):
            pad[i, 1 : 1 + a.shape[0]] = False
        start = nd.reshape(self.text_start, (1, 1, self.cfg.hidden))
        start = nd.add(Tensor(np.zeros((B, 1, self.cfg.hidden), dtype=np.float32)), start)
        if T == 1:
            x = start
        elif self.text_token_emb is not None:
            ids = np.zeros((B, T - 1), dtype=np.int64)  # 0 = OOV/padding row
            for i, a in enumerate(arrays):
                ids[i, : a.shape[0]] = a
            x = nd.concat([start, nd.embedding(self.text_token_emb, ids)], axis=1)
        else:
            toks = np.zeros((B, T - 1, self.cfg.provider_dim), dtype=np.float32)
            for i, a in enumerate(arrays):
                toks[i, : a.shape[0]] = a
            x = nd.concat([start, nd.matmul(Tensor(toks), self.text_proj)], axis=1)
        return pooled_output(self.text_encoder(x, pad, drop_rng))

    def encode_text(self, caption: str, provider) -> np.ndarray:
        with nd.no_grad():
            return self.encode_text_batch([caption_tokens(caption, provider)]).data[0].copy()

    # -- UI side

    def encode_ui_batch(self, views: Sequence[RetrievalTokenView], drop_rng=None) -> Tensor:
        B = len(views)
        T = max(len(v) for v in views)
        if T > self.cfg.ui_max_len:
            raise ValueError(f"token view of {T} tokens exceeds {self.cfg.ui_max_len}")
        dim = self.cfg.provider_dim
        kind_ids = np.zeros((B, T), dtype=np.int64)
        dims = np.zeros((B, T, 4), dtype=np.float32)
        class_ids = np.zeros((B, T), dtype=np.int64)
        elem_mask = np.zeros((B, T, 1), dtype=np.float32)
        text_vecs = np.zeros((B, T, dim), dtype=np.float32)
        pad = np.ones((B, T), dtype=bool)
        for i, view in enumerate(views):
            for j, token in enumerate(view.tokens):
                pad[i, j] = False
                kind_ids[i, j] = _KIND_IDS[token.kind]
                if token.text_vec is not None:
                    text_vecs[i, j] = token.text_vec
                if token.kind == TOKEN_ELEMENT:
                    dims[i, j] = token.dims
                    class_ids[i, j] = token.class_id
                    elem_mask[i, j, 0] = 1.0
        x = nd.embedding(self.kind_emb, kind_ids)
        x = nd.add(x, nd.matmul(Tensor(dims), self.dims_proj))
        x = nd.add(x, nd.mul(nd.embedding(self.class_emb, class_ids), Tensor(elem_mask)))
        x = nd.add(x, nd.matmul(Tensor(text_vecs), self.textvec_proj))
        return pooled_output(self.ui_encoder(x, pad, drop_rng))

    def encode_ui(self, view: RetrievalTokenView) -> np.ndarray:
        with nd.no_grad():
            return self.encode_ui_batch([view]).data[0].copy()


def contrastive_loss(l: Tensor, r: Tensor, include_positive: bool = True) -> Tensor:
    """Bidirectional in-batch softmax loss over aligned (l_i, r_i) pairs.

    With include_positive=False the softmax denominators exclude j == i
    (the literal unbounded form); the default includes it.
    """
    K = l.shape[0]
    if K < 2:
        raise ValueError("contrastive loss needs at least 2 in-batch pairs")
    S = nd.matmul(l, nd.transpose(r, (1, 0)))  # S[i, j] = l_i . r_j
    diag_idx = np.arange(K)
    diag = nd.gather_last(S, diag_idx)
    St = nd.transpose(S, (1, 0))
    if include_positive:
        lse_lr = nd.logsumexp(S)
        lse_rl = nd.logsumexp(St)
    else:
        eye = np.eye(K, dtype=bool)
        lse_lr = nd.logsumexp(nd.masked_fill(S, eye))
        lse_rl = nd.logsumexp(nd.masked_fill(St, eye))
    term_lr = nd.mean(nd.sub(diag, lse_lr))
    term_rl = nd.mean(nd.sub(diag, lse_rl))
    return nd.neg(nd.add(term_lr, term_rl))


# --- training ----------------------------------------------------------------------


@dataclass
class RetrieverTrainConfig:
    encoder: DualEncoderConfig = field(default_factory=DualEncoderConfig)
    batch_size: int = 64
    lr: float = 1e-3
    max_epochs: int = 60
    patience: int = 5
    min_delta: float = 1e-4
    include_positive: bool = True
    seed: int = 0


@dataclass
class PreparedPairs:
    """Provider outputs frozen ahead of training."""

    views: list[RetrievalTokenView]
    caption_token_vecs: list[list[np.ndarray]]  # per screen, per caption
    screen_ids: list[str]
    skipped: int = 0


def prepare_pairs(split: CorpusSplit, provider) -> PreparedPairs:
    views, caps, ids = [], [], []
    skipped = 0
    for screen in split.screens:
        if not screen.captions:
            skipped += 1
            continue
        try:
            view = build_retrieval_token_view(screen, provider)
        except OverLongScreen:
            skipped += 1
            continue
        views.append(view)
        caps.append([caption_tokens(c, provider) for c in screen.captions])
        ids.append(screen.screen_id)
    if skipped:
        log.info("prepare_pairs: skipped %d screens", skipped)
    return PreparedPairs(views=views, caption_token_vecs=caps, screen_ids=ids, skipped=skipped)


def _batch_loss(enc: DualEncoder, pairs: PreparedPairs, idxs: np.ndarray,
                caption_choice: np.ndarray, include_positive: bool, drop_rng=None) -> Tensor:
    l = enc.encode_text_batch(
        [pairs.caption_token_vecs[i][caption_choice[n]] for n, i in enumerate(idxs)], drop_rng)
    r = enc.encode_ui_batch([pairs.views[i] for i in idxs], drop_rng)
    return contrastive_loss(l, r, include_positive)


def train_dual_encoder(train_split: CorpusSplit, val_split: CorpusSplit, provider,
                       config: RetrieverTrainConfig) -> tuple[DualEncoder, list[dict]]:
    """Adam at a constant learning rate; one uniformly sampled caption per
    screen per epoch; early stop when validation loss stops improving."""
    if config.batch_size < 2:
        raise ValueError("batch size must be >= 2 for in-batch negatives")
    enc = DualEncoder(config.encoder, seed=config.seed)
    params = enc.params()
    opt = nd.Adam(params, lr=config.lr)
    rng = np.random.default_rng(config.seed)

    train = prepare_pairs(train_split, provider)
    val = prepare_pairs(val_split, provider)
    if len(train.views) < 2:
        raise ValueError("not enough usable training pairs")

    history: list[dict] = []
    best_val = np.inf
    best_state: dict[str, np.ndarray] = {}
    stale = 0

    def val_loss() -> float:
        if len(val.views) < 2:
            return float("nan")
        total, batches = 0.0, 0
        with nd.no_grad():
            idxs = np.arange(len(val.views))
            choice = np.zeros(len(val.views), dtype=np.int64)  # fixed first caption
            for s in range(0, len(idxs) - 1, config.batch_size):
                chunk = idxs[s : s + config.batch_size]
                if len(chunk) < 2:
                    break
                loss = _batch_loss(enc, val, chunk, choice[chunk], config.include_positive)
                total += loss.item()
                batches += 1
        return total / max(batches, 1)

    for epoch in range(config.max_epochs):
        order = rng.permutation(len(train.views))
        choice = np.array(
            [rng.integers(len(train.caption_token_vecs[i])) for i in order], dtype=np.int64)
        epoch_loss, batches = 0.0, 0
        for s in range(0, len(order), config.batch_size):
            chunk = order[s : s + config.batch_size]
            if len(chunk) < 2:
                break
            opt.zero_grad()
            drop_rng = rng if config.encoder.dropout > 0 else None
            loss = _batch_loss(enc, train, chunk, choice[s : s + len(chunk)],
                               config.include_positive, drop_rng)
            nd.backward(loss)
            opt.step()
            epoch_loss += loss.item()
            batches += 1
        vloss = val_loss()
        history.append({"epoch": epoch, "train_loss": epoch_loss / max(batches, 1),
                        "val_loss": vloss, "lr": opt.lr})
        log.info("retriever epoch %d train %.4f val %.4f", epoch,
                 history[-1]["train_loss"], vloss)
        if not np.isnan(vloss) and vloss < best_val - config.min_delta:
            best_val = vloss
            best_state = {k: p.data.copy() for k, p in params.items()}
            stale = 0
        else:
            stale += 1
            if stale > config.patience:
                break

    if best_state:
        for k, p in params.items():
            p.data = best_state[k]
    return enc, history


# --- multi-modal retrieval ------------------------------------------------------------


def ui_index_build(split: CorpusSplit, enc: DualEncoder, provider,
                   batch_size: int = 64) -> VectorIndex:
    pairs = prepare_pairs(split, provider)
    rows = []
    with nd.no_grad():
        for s in range(0, len(pairs.views), batch_size):
            chunk = pairs.views[s : s + batch_size]
            rows.append(enc.encode_ui_batch(chunk).data.copy())
    matrix = np.concatenate(rows) if rows else np.zeros((0, enc.cfg.hidden), np.float32)
    ids: list[tuple[str, Optional[int]]] = [(sid, None) for sid in pairs.screen_ids]
    return VectorIndex(ids, matrix, "dot")


def retrieve_multimodal(query: str, enc: DualEncoder, ui_index: VectorIndex, provider,
                        screens_by_id: dict[str, UiScreen], k: int) -> list[MockupCandidate]:
    qvec = enc.encode_text(query, provider)
    hits = ui_index.search(qvec, k)
    out = []
    for row, score in hits:
        screen_id, _ = ui_index.ids[row]
        screen = screens_by_id[screen_id]
        out.append(
            MockupCandidate(
                elements=tuple(extract_leaf_view(screen)),
                prompt=query,
                method="multi-modal",
                source_screen_id=screen_id,
                similarity=score,
            )
        )
    return out


# --- evaluation -------------------------------------------------------------------------


def eval_topk(enc: DualEncoder, split: CorpusSplit, provider, ks: Sequence[int] = (1, 10),
              subset_size: Optional[int] = None, trials: Optional[int] = None,
              seed: int = 0, batch_size: int = 64) -> dict:
    """Rank each caption's ground-truth UI among candidate UI embeddings.

    Full protocol scores against every screen in the split; the subset
    protocol averages over ``trials`` random candidate subsets of
    ``subset_size`` (ground truth always included).
    """
    if subset_size is not None and subset_size < max(ks):
        raise ValueError("subset_size must be >= the largest k")
    pairs = prepare_pairs(split, provider)
    n = len(pairs.views)
    if n == 0:
        raise ValueError("empty split")

    with nd.no_grad():
        ui_rows = []
        for s in range(0, n, batch_size):
            ui_rows.append(enc.encode_ui_batch(pairs.views[s : s + batch_size]).data.copy())
        R = np.concatenate(ui_rows)

        caption_vecs = []
        gt = []
        for i, caps in enumerate(pairs.caption_token_vecs):
            for arr in caps:
                caption_vecs.append(arr)
                gt.append(i)
        L_rows = []
        for s in range(0, len(caption_vecs), batch_size):
            L_rows.append(enc.encode_text_batch(caption_vecs[s : s + batch_size]).data.copy())
        L = np.concatenate(L_rows)
    gt = np.array(gt)
    S = L @ R.T  # (queries, screens)
    q_count = S.shape[0]

    def rank_of(scores: np.ndarray, gt_idx: int, candidates: np.ndarray) -> int:
        gt_score = scores[gt_idx]
        cand_scores = scores[candidates]
        higher = int((cand_scores > gt_score).sum())
        ties_before = int(((cand_scores == gt_score) & (candidates < gt_idx)).sum())
        return 1 + higher + ties_before

    result = {"n_queries": q_count, "n_candidates": n, "ks": list(ks)}
    if subset_size is None:
        ranks = np.empty(q_count, dtype=np.int64)
        everyone = np.arange(n)
        for q in range(q_count):
            others = everyone[everyone != gt[q]]
            ranks[q] = rank_of(S[q], gt[q], others)
        result["protocol"] = "full"
        result["topk"] = {k: float((ranks <= k).mean() * 100.0) for k in ks}
    else:
        trials = trials or 5
        rng = np.random.default_rng(seed)
        per_trial = {k: [] for k in ks}
        for _ in range(trials):
            ranks = np.empty(q_count, dtype=np.int64)
            for q in range(q_count):
                others = np.delete(np.arange(n), gt[q])
                distractors = rng.choice(others, size=min(subset_size - 1, n - 1), replace=False)
                ranks[q] = rank_of(S[q], gt[q], distractors)
            for k in ks:
                per_trial[k].append(float((ranks <= k).mean() * 100.0))
        result["protocol"] = "subset"
        result["subset_size"] = subset_size
        result["trials"] = trials
        result["topk"] = {k: float(np.mean(per_trial[k])) for k in ks}
    return result


def topk_table_tsv(rows: list[tuple[str, dict]], ks: Sequence[int] = (1, 10)) -> str:
    """Accuracy table in the retrieval-report layout: one method per row,
    Top-k percentage columns."""
    header = "method\t" + "\t".join(f"Top-{k}" for k in ks)
    lines = [header]
    for label, result in rows:
        cells = [f"{result['topk'][k]:.2f}%" for k in ks]
        lines.append(label + "\t" + "\t".join(cells))
    return "\n".join(lines) + "\n"
