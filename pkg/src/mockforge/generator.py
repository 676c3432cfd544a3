"""Text-conditioned UI generation.

An encoder-decoder Transformer reads a description and emits, per step, a
mixture-of-Gaussians distribution for each of x, y, w, h plus a categorical
class distribution (a mixture density head). Training minimizes sequence
negative log likelihood with teacher forcing; sampling is autoregressive
with a temperature that rescales logits and Gaussian variances, stopping at
the EOS class. Already-placed ("pinned") elements can be forced as a prefix.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import ndtensor as nd
from .core import (
    ClassVocabulary,
    ElementBox,
    MockupCandidate,
    canonical_sort,
)
from .ingest import CorpusSplit, extract_leaf_view
from .ndtensor import Tensor
from .textfeat import embed_tokens, tokenize
from .transformer import Decoder, Encoder, TransformerConfig, xavier

log = logging.getLogger(__name__)

ATTRS = ("x", "y", "w", "h")
SIGMA_FLOOR = 1e-4
MIN_EXTENT = 1.0 / 64.0  # sampled w/h floor before snapping
ARGMAX_TAU = 1e-6  # at or below this temperature sampling is deterministic
LOG_2PI = float(np.log(2.0 * np.pi))


def caption_inputs(caption: str, provider) -> np.ndarray:
    """Token ids for a learned-table provider, provider vectors otherwise."""
    tokens = tokenize(caption)
    if getattr(provider, "mode", None) == "learned-table":
        return provider.token_ids(tokens)
    if not tokens:
        return np.zeros((0, provider.dim), dtype=np.float32)
    return embed_tokens(tokens, provider)


@dataclass(frozen=True)
class MdnParams:
    """Per-step output distribution: one Gaussian mixture per attribute
    (rows ordered x, y, w, h) plus class logits."""

    mixture_logits: np.ndarray  # (4, M)
    means: np.ndarray  # (4, M)
    log_scales: np.ndarray  # (4, M); sigma = exp(value)
    class_logits: np.ndarray  # (n_classes,)

    @property
    def mixtures(self) -> int:
        return self.mixture_logits.shape[1]


@dataclass(frozen=True)
class GeneratorConfig:
    hidden: int = 64
    intermediate: int = 256
    encoder_layers: int = 6
    decoder_layers: int = 6
    heads: int = 4
    mixtures: int = 5
    text_max_len: int = 64
    max_elements: int = 128
    dropout: float = 0.1
    provider_dim: int = 64
    n_classes: int = 30
    # learned-table mode: caption tokens index a trainable embedding matrix
    text_vocab_size: Optional[int] = None

    @property
    def target_max_len(self) -> int:
        return self.max_elements + 2  # start + elements + end


@dataclass(frozen=True)
class SamplerConfig:
    temperature: float = 0.1
    max_elements: int = 128
    seed: int = 0
    n_samples: int = 1

    def __post_init__(self):
        if not (0.0 < self.temperature <= 10.0):
            raise ValueError("temperature must be in (0, 10]")


class GeneratorModel:
    """Encoder over description vectors; decoder over element sequences;
    mixture-density head on top."""

    def __init__(self, cfg: GeneratorConfig, vocab: ClassVocabulary, seed: int = 0,
                 dtype=np.float32):
        if len(vocab) != cfg.n_classes:
            raise ValueError(
                f"config expects {cfg.n_classes} classes, vocabulary has {len(vocab)}")
        self.cfg = cfg
        self.vocab = vocab
        rng = np.random.default_rng(seed)
        h = cfg.hidden
        enc_cfg = TransformerConfig(hidden=h, intermediate=cfg.intermediate,
                                    layers=cfg.encoder_layers, heads=cfg.heads,
                                    max_len=cfg.text_max_len, dropout=cfg.dropout)
        dec_cfg = TransformerConfig(hidden=h, intermediate=cfg.intermediate,
                                    layers=cfg.decoder_layers, heads=cfg.heads,
                                    max_len=cfg.target_max_len, dropout=cfg.dropout)
        self.encoder = Encoder(rng, enc_cfg, "gen_enc", dtype)
        self.decoder = Decoder(rng, dec_cfg, "gen_dec", dtype)
        if cfg.text_vocab_size is not None:
            self.text_token_emb = nd.parameter(
                (rng.normal(size=(1 + cfg.text_vocab_size, h)) * 0.02).astype(dtype),
                "gen_text_token_emb")
            self.text_proj = None
        else:
            self.text_token_emb = None
            self.text_proj = nd.parameter(xavier(rng, cfg.provider_dim, h, dtype),
                                          "gen_text_proj")
        self.text_start = nd.parameter((rng.normal(size=(h,)) * 0.02).astype(dtype),
                                       "gen_text_start")
        self.class_emb = nd.parameter(
            (rng.normal(size=(cfg.n_classes, h)) * 0.02).astype(dtype), "gen_class_emb")
        self.elem_proj_w = nd.parameter(xavier(rng, 4 + h, h, dtype), "gen_elem_proj.w")
        self.elem_proj_b = nd.parameter(np.zeros(h, dtype=dtype), "gen_elem_proj.b")
        head_width = 12 * cfg.mixtures + cfg.n_classes
        self.head_w = nd.parameter(xavier(rng, h, head_width, dtype), "gen_head.w")
        self.head_b = nd.parameter(np.zeros(head_width, dtype=dtype), "gen_head.b")

    def params(self) -> dict:
        out = {
            "gen_text_start": self.text_start,
            "gen_class_emb": self.class_emb,
            "gen_elem_proj.w": self.elem_proj_w,
            "gen_elem_proj.b": self.elem_proj_b,
            "gen_head.w": self.head_w,
            "gen_head.b": self.head_b,
        }
        if self.text_proj is not None:
            out["gen_text_proj"] = self.text_proj
        if self.text_token_emb is not None:
            out["gen_text_token_emb"] = self.text_token_emb
        out.update(self.encoder.params())
        out.update(self.decoder.params())
        return out

    # -- input assembly

    def element_inputs(self, dims: np.ndarray, class_ids: np.ndarray) -> Tensor:
        """Project [x, y, w, h] ++ class embedding into the decoder width.

        dims (B, T, 4) float; class_ids (B, T) int. The start pseudo-element
        is zero dims with the START class.
        """
        emb = nd.embedding(self.class_emb, class_ids)
        x = nd.concat([Tensor(dims.astype(np.float32)), emb], axis=2)
        return nd.add(nd.matmul(x, self.elem_proj_w), self.elem_proj_b)

    def encode_text_batch(self, token_arrays: Sequence[np.ndarray], drop_rng=None):
        """Entries are (k, provider_dim) float arrays, or (k,) id arrays in
        learned-table mode."""
        cap = self.cfg.text_max_len - 1
        arrays = [a[:cap] for a in token_arrays]
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
            ids = np.zeros((B, T - 1), dtype=np.int64)
            for i, a in enumerate(arrays):
                ids[i, : a.shape[0]] = a
            x = nd.concat([start, nd.embedding(self.text_token_emb, ids)], axis=1)
        else:
            toks = np.zeros((B, T - 1, self.cfg.provider_dim), dtype=np.float32)
            for i, a in enumerate(arrays):
                toks[i, : a.shape[0]] = a
            x = nd.concat([start, nd.matmul(Tensor(toks), self.text_proj)], axis=1)
        return self.encoder(x, pad, drop_rng), pad

    def head(self, dec_out: Tensor) -> Tensor:
        return nd.add(nd.matmul(dec_out, self.head_w), self.head_b)

    def forward_teacher(self, token_arrays, dims, class_ids, tgt_pad, drop_rng=None) -> Tensor:
        """Head outputs (B, T, 12M + n_classes) for a teacher-forced batch."""
        memory, mem_pad = self.encode_text_batch(token_arrays, drop_rng)
        dec_in = self.element_inputs(dims, class_ids)
        dec_out = self.decoder(dec_in, memory, tgt_pad, mem_pad, drop_rng)
        return self.head(dec_out)


def split_head(raw: Tensor, mixtures: int):
    """Slice raw head output into (pi, mu, log_scale) stacks and class logits.

    pi/mu/log_scale are (..., 4, M); class logits are (..., n_classes).
    """
    M = mixtures
    parts = []
    for a in range(4):
        base = a * 3 * M
        pi = raw[..., base : base + M]
        mu = raw[..., base + M : base + 2 * M]
        ls = raw[..., base + 2 * M : base + 3 * M]
        parts.append((pi, mu, ls))
    class_logits = raw[..., 12 * M :]
    return parts, class_logits


def mdn_nll_tensors(raw: Tensor, mixtures: int, target_dims: np.ndarray,
                    target_classes: np.ndarray, content_mask: np.ndarray,
                    valid_mask: np.ndarray) -> Tensor:
    """Mean over sequences of the summed per-position NLL.

    Control targets (EOS) contribute only the class term; padded positions
    contribute nothing. target_dims (B, T, 4); masks (B, T) float 0/1.
    """
    parts, class_logits = split_head(raw, mixtures)
    class_lp = nd.log_softmax(class_logits)
    nll = nd.neg(nd.gather_last(class_lp, target_classes))
    cont = None
    for a, (pi, mu, ls) in enumerate(parts):
        sigma = nd.clamp_min(nd.exp(ls), SIGMA_FLOOR)
        t = Tensor(target_dims[..., a : a + 1].astype(raw.data.dtype))
        z = nd.div(nd.sub(t, mu), sigma)
        log_norm = nd.sub(
            nd.mul(nd.mul(z, z), -0.5),
            nd.add(nd.log(sigma), 0.5 * LOG_2PI),
        )
        comp = nd.add(nd.log_softmax(pi), log_norm)
        attr_ll = nd.logsumexp(comp)
        cont = nd.neg(attr_ll) if cont is None else nd.add(cont, nd.neg(attr_ll))
    nll = nd.add(nll, nd.mul(cont, Tensor(content_mask.astype(raw.data.dtype))))
    nll = nd.mul(nll, Tensor(valid_mask.astype(raw.data.dtype)))
    per_seq = nd.sum_(nll, axis=1)
    return nd.mean(per_seq)


def params_from_raw(raw_row: np.ndarray, mixtures: int) -> MdnParams:
    M = mixtures
    blocks = raw_row[: 12 * M].reshape(4, 3 * M)
    return MdnParams(
        mixture_logits=blocks[:, :M].copy(),
        means=blocks[:, M : 2 * M].copy(),
        log_scales=blocks[:, 2 * M :].copy(),
        class_logits=raw_row[12 * M :].copy(),
    )


def raw_from_params(params: MdnParams) -> np.ndarray:
    M = params.mixtures
    blocks = np.concatenate([params.mixture_logits, params.means, params.log_scales], axis=1)
    return np.concatenate([blocks.reshape(12 * M), params.class_logits]).astype(np.float32)


def mdn_nll(params: MdnParams, target) -> float:
    """NLL of one target under one step distribution.

    target is an ElementBox (content) or a class id (control, e.g. EOS).
    """
    if isinstance(target, ElementBox):
        class_id = target.class_id
        dims = np.array([[[target.x, target.y, target.w, target.h]]], dtype=np.float64)
        content = 1.0
    else:
        class_id = int(target)
        dims = np.zeros((1, 1, 4), dtype=np.float64)
        content = 0.0
    if not (0 <= class_id < params.class_logits.shape[0]):
        raise ValueError(f"target class {class_id} outside the class-logit range")
    raw = Tensor(raw_from_params(params).astype(np.float64).reshape(1, 1, -1))
    with nd.no_grad():
        loss = mdn_nll_tensors(
            raw, params.mixtures, dims,
            np.array([[class_id]]), np.array([[content]]), np.ones((1, 1)),
        )
    return loss.item()


# --- training -----------------------------------------------------------------------


@dataclass
class GeneratorTrainConfig:
    model: GeneratorConfig = field(default_factory=GeneratorConfig)
    batch_size: int = 32
    lr_stages: tuple[float, ...] = (1e-3, 1e-4, 1e-5)
    max_epochs: int = 120
    patience: int = 3
    min_delta: float = 1e-4
    seed: int = 0


@dataclass
class PreparedSequences:
    token_arrays: list[np.ndarray]  # one caption per screen (training pairs repeat screens)
    dims: list[np.ndarray]  # per screen: (n, 4) leaf geometry, canonical order
    classes: list[np.ndarray]  # per screen: (n,) class ids
    skipped: int = 0


def prepare_sequences(split: CorpusSplit, provider, vocab: ClassVocabulary,
                      max_elements: int, captions_per_screen: Optional[int] = None
                      ) -> PreparedSequences:
    """One training pair per (screen, caption); leaf views canonically sorted."""
    toks, dims, classes = [], [], []
    skipped = 0
    for screen in split.screens:
        leaves = extract_leaf_view(screen)
        if not leaves or not screen.captions:
            skipped += 1
            continue
        if len(leaves) > max_elements:
            skipped += 1
            continue
        d = np.array([[el.x, el.y, el.w, el.h] for el in leaves], dtype=np.float32)
        c = np.array([el.class_id for el in leaves], dtype=np.int64)
        caps = screen.captions[:captions_per_screen] if captions_per_screen else screen.captions
        for caption in caps:
            toks.append(caption_inputs(caption, provider))
            dims.append(d)
            classes.append(c)
    if skipped:
        log.info("prepare_sequences: skipped %d screens", skipped)
    return PreparedSequences(token_arrays=toks, dims=dims, classes=classes, skipped=skipped)


def _assemble_batch(seqs: PreparedSequences, idxs: np.ndarray, vocab: ClassVocabulary):
    """Teacher-forcing arrays: decoder inputs start with the START
    pseudo-element; targets end with EOS; padding masked out."""
    B = len(idxs)
    lens = [seqs.dims[i].shape[0] for i in idxs]
    T = max(lens) + 1  # start + elements, targets shift by one
    in_dims = np.zeros((B, T, 4), dtype=np.float32)
    in_cls = np.full((B, T), vocab.pad_id, dtype=np.int64)
    tgt_dims = np.zeros((B, T, 4), dtype=np.float32)
    tgt_cls = np.full((B, T), vocab.pad_id, dtype=np.int64)
    content = np.zeros((B, T), dtype=np.float32)
    valid = np.zeros((B, T), dtype=np.float32)
    pad = np.ones((B, T), dtype=bool)
    for b, i in enumerate(idxs):
        n = lens[b]
        in_cls[b, 0] = vocab.start_id
        in_dims[b, 1 : n + 1] = seqs.dims[i]
        in_cls[b, 1 : n + 1] = seqs.classes[i]
        pad[b, : n + 1] = False
        tgt_dims[b, :n] = seqs.dims[i]
        tgt_cls[b, :n] = seqs.classes[i]
        tgt_cls[b, n] = vocab.eos_id
        content[b, :n] = 1.0
        valid[b, : n + 1] = 1.0
    tokens = [seqs.token_arrays[i] for i in idxs]
    return tokens, in_dims, in_cls, tgt_dims, tgt_cls, content, valid, pad


def train_generator(train_split: CorpusSplit, val_split: CorpusSplit, provider,
                    vocab: ClassVocabulary, config: GeneratorTrainConfig
                    ) -> tuple[GeneratorModel, list[dict]]:
    """Teacher forcing with a staged learning rate: each time validation NLL
    plateaus for ``patience`` epochs the next (lower) rate kicks in; after
    the last stage plateaus, training stops and the best weights are kept."""
    model = GeneratorModel(config.model, vocab, seed=config.seed)
    params = model.params()
    opt = nd.Adam(params, lr=config.lr_stages[0])
    rng = np.random.default_rng(config.seed)

    train = prepare_sequences(train_split, provider, vocab, config.model.max_elements)
    val = prepare_sequences(val_split, provider, vocab, config.model.max_elements)
    if not train.token_arrays:
        raise ValueError("no usable training sequences")

    def eval_nll(seqs: PreparedSequences) -> float:
        if not seqs.token_arrays:
            return float("nan")
        total, batches = 0.0, 0
        with nd.no_grad():
            for s in range(0, len(seqs.token_arrays), config.batch_size):
                idxs = np.arange(s, min(s + config.batch_size, len(seqs.token_arrays)))
                toks, idims, icls, tdims, tcls, cont, valid_m, pad = _assemble_batch(
                    seqs, idxs, vocab)
                raw = model.forward_teacher(toks, idims, icls, pad)
                loss = mdn_nll_tensors(raw, config.model.mixtures, tdims, tcls, cont, valid_m)
                total += loss.item()
                batches += 1
        return total / max(batches, 1)

    history: list[dict] = []
    stage = 0
    best_val = np.inf
    best_state: dict[str, np.ndarray] = {}
    stale = 0

    for epoch in range(config.max_epochs):
        order = rng.permutation(len(train.token_arrays))
        epoch_loss, batches = 0.0, 0
        for s in range(0, len(order), config.batch_size):
            idxs = order[s : s + config.batch_size]
            opt.zero_grad()
            drop_rng = rng if config.model.dropout > 0 else None
            toks, idims, icls, tdims, tcls, cont, valid_m, pad = _assemble_batch(
                train, idxs, vocab)
            raw = model.forward_teacher(toks, idims, icls, pad, drop_rng)
            loss = mdn_nll_tensors(raw, config.model.mixtures, tdims, tcls, cont, valid_m)
            nd.backward(loss)
            opt.step()
            epoch_loss += loss.item()
            batches += 1
        vloss = eval_nll(val)
        history.append({"epoch": epoch, "train_nll": epoch_loss / max(batches, 1),
                        "val_nll": vloss, "lr": opt.lr, "stage": stage})
        log.info("generator epoch %d train %.4f val %.4f lr %g", epoch,
                 history[-1]["train_nll"], vloss, opt.lr)
        if not np.isnan(vloss) and vloss < best_val - config.min_delta:
            best_val = vloss
            best_state = {k: p.data.copy() for k, p in params.items()}
            stale = 0
        else:
            stale += 1
            if stale > config.patience:
                stage += 1
                if stage >= len(config.lr_stages):
                    break
                opt.lr = config.lr_stages[stage]
                stale = 0
                log.info("generator lr staged down to %g", opt.lr)

    if best_state:
        for k, p in params.items():
            p.data = best_state[k]
    return model, history


# --- sampling -----------------------------------------------------------------------


def forward_step_distribution(model: GeneratorModel, prefix: Sequence[ElementBox],
                              prompt_tokens: np.ndarray) -> MdnParams:
    """Distribution of the element following the given prefix.

    The prefix excludes the implicit START pseudo-element, which is always
    prepended here.
    """
    T = len(prefix) + 1
    if T > model.cfg.target_max_len:
        raise ValueError("prefix exceeds the decoder length budget")
    dims = np.zeros((1, T, 4), dtype=np.float32)
    cls = np.full((1, T), model.vocab.pad_id, dtype=np.int64)
    cls[0, 0] = model.vocab.start_id
    for i, el in enumerate(prefix):
        dims[0, i + 1] = (el.x, el.y, el.w, el.h)
        cls[0, i + 1] = el.class_id
    with nd.no_grad():
        raw = model.forward_teacher([prompt_tokens], dims, cls, np.zeros((1, T), dtype=bool))
    return params_from_raw(raw.data[0, -1], model.cfg.mixtures)


def sample_element(params: MdnParams, tau: float, rng: np.random.Generator,
                   vocab: ClassVocabulary) -> Optional[ElementBox]:
    """Draw one element; None signals EOS.

    Class and mixture logits are divided by tau, Gaussian variances are
    multiplied by tau. START/PAD class slots are never sampled.
    """
    if tau <= 0:
        raise ValueError("temperature must be positive")
    logits = params.class_logits.astype(np.float64).copy()
    logits[vocab.start_id] = -np.inf
    logits[vocab.pad_id] = -np.inf

    if tau <= ARGMAX_TAU:
        class_id = int(np.argmax(logits))
        if class_id == vocab.eos_id:
            return None
        values = []
        for a in range(4):
            m = int(np.argmax(params.mixture_logits[a]))
            values.append(float(params.means[a, m]))
    else:
        class_id = int(rng.choice(len(logits), p=_softmax(logits / tau)))
        if class_id == vocab.eos_id:
            return None
        values = []
        for a in range(4):
            probs = _softmax(params.mixture_logits[a].astype(np.float64) / tau)
            m = int(rng.choice(params.mixtures, p=probs))
            sigma = max(float(np.exp(params.log_scales[a, m])), SIGMA_FLOOR)
            values.append(float(rng.normal(params.means[a, m], np.sqrt(tau) * sigma)))

    x, y, w, h = values
    w = float(np.clip(w, MIN_EXTENT, 1.0))
    h = float(np.clip(h, MIN_EXTENT, 1.0))
    x = float(np.clip(x, 0.0, 1.0 - w))
    y = float(np.clip(y, 0.0, 1.0 - h))
    return ElementBox(x=x, y=y, w=w, h=h, class_id=class_id)


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def sample_ui(model: GeneratorModel, prompt: str, sampler: SamplerConfig,
              provider, pins: Optional[Sequence[ElementBox]] = None) -> MockupCandidate:
    """Autoregressive sampling until EOS or the element cap.

    Pinned elements are canonically sorted and forced as the decoder prefix;
    they appear verbatim in the result.
    """
    pins = canonical_sort(pins) if pins else []
    if len(pins) > sampler.max_elements:
        raise ValueError("more pins than max_elements")
    rng = np.random.default_rng(sampler.seed)
    prompt_tokens = caption_inputs(prompt, provider)
    prefix: list[ElementBox] = list(pins)
    sampled: list[ElementBox] = []
    while len(prefix) < sampler.max_elements:
        params = forward_step_distribution(model, prefix, prompt_tokens)
        el = sample_element(params, sampler.temperature, rng, model.vocab)
        if el is None:
            break
        prefix.append(el)
        sampled.append(el)
    return MockupCandidate(
        elements=tuple(canonical_sort(list(pins) + sampled)),
        prompt=prompt,
        method="generator",
        seed=sampler.seed,
    )
