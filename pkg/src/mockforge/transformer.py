"""Configurable Transformer encoder/decoder stacks on the ndtensor engine.

Pre-norm residual blocks, sinusoidal positions added to the (already
projected) inputs, multi-head scaled dot-product attention with pad and
causal masking. Callers hand in hidden-width input sequences; token/element
projections live with the models that own them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import ndtensor as nd
from .ndtensor import Tensor


@dataclass(frozen=True)
class TransformerConfig:
    hidden: int = 64
    intermediate: int = 256
    layers: int = 4
    heads: int = 4
    max_len: int = 512
    dropout: float = 0.1

    def __post_init__(self):
        if self.hidden % self.heads != 0:
            raise ValueError(f"hidden {self.hidden} not divisible by heads {self.heads}")
        if not (0.0 <= self.dropout < 1.0):
            raise ValueError("dropout must be in [0, 1)")


def sinusoidal_positions(max_len: int, hidden: int, dtype=np.float32) -> np.ndarray:
    pos = np.arange(max_len, dtype=np.float64)[:, None]
    i = np.arange(hidden, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, (2.0 * (i // 2)) / hidden)
    enc = np.where(i % 2 == 0, np.sin(angle), np.cos(angle))
    return enc.astype(dtype)


def xavier(rng: np.random.Generator, d_in: int, d_out: int, dtype) -> np.ndarray:
    limit = np.sqrt(6.0 / (d_in + d_out))
    return rng.uniform(-limit, limit, size=(d_in, d_out)).astype(dtype)


class Linear:
    def __init__(self, rng, d_in: int, d_out: int, name: str, bias: bool = True, dtype=np.float32):
        self.w = nd.parameter(xavier(rng, d_in, d_out, dtype), f"{name}.w")
        self.b = nd.parameter(np.zeros(d_out, dtype=dtype), f"{name}.b") if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        out = nd.matmul(x, self.w)
        if self.b is not None:
            out = nd.add(out, self.b)
        return out

    def params(self) -> dict:
        out = {self.w.name: self.w}
        if self.b is not None:
            out[self.b.name] = self.b
        return out


class LayerNorm:
    def __init__(self, hidden: int, name: str, dtype=np.float32):
        self.gain = nd.parameter(np.ones(hidden, dtype=dtype), f"{name}.gain")
        self.bias = nd.parameter(np.zeros(hidden, dtype=dtype), f"{name}.bias")

    def __call__(self, x: Tensor) -> Tensor:
        return nd.layer_norm(x, self.gain, self.bias)

    def params(self) -> dict:
        return {self.gain.name: self.gain, self.bias.name: self.bias}


class MultiHeadAttention:
    def __init__(self, rng, cfg: TransformerConfig, name: str, dtype=np.float32):
        h = cfg.hidden
        self.heads = cfg.heads
        self.head_dim = h // cfg.heads
        self.wq = Linear(rng, h, h, f"{name}.wq", dtype=dtype)
        self.wk = Linear(rng, h, h, f"{name}.wk", dtype=dtype)
        self.wv = Linear(rng, h, h, f"{name}.wv", dtype=dtype)
        self.wo = Linear(rng, h, h, f"{name}.wo", dtype=dtype)

    def __call__(self, query: Tensor, memory: Tensor, attn_mask: Optional[np.ndarray]) -> Tensor:
        """attn_mask: bool array broadcastable to (B, heads, Tq, Tk); True = blocked."""
        B, Tq, H = query.shape
        Tk = memory.shape[1]
        q = self._split(self.wq(query), B, Tq)
        k = self._split(self.wk(memory), B, Tk)
        v = self._split(self.wv(memory), B, Tk)
        scores = nd.mul(nd.matmul(q, nd.transpose(k, (0, 1, 3, 2))), 1.0 / np.sqrt(self.head_dim))
        if attn_mask is not None:
            scores = nd.masked_fill(scores, attn_mask)
        attn = nd.softmax(scores)
        ctx = nd.matmul(attn, v)  # (B, heads, Tq, head_dim)
        ctx = nd.reshape(nd.transpose(ctx, (0, 2, 1, 3)), (B, Tq, H))
        return self.wo(ctx)

    def _split(self, x: Tensor, B: int, T: int) -> Tensor:
        x = nd.reshape(x, (B, T, self.heads, self.head_dim))
        return nd.transpose(x, (0, 2, 1, 3))

    def params(self) -> dict:
        out = {}
        for lin in (self.wq, self.wk, self.wv, self.wo):
            out.update(lin.params())
        return out


class FeedForward:
    def __init__(self, rng, cfg: TransformerConfig, name: str, dtype=np.float32):
        self.lin1 = Linear(rng, cfg.hidden, cfg.intermediate, f"{name}.lin1", dtype=dtype)
        self.lin2 = Linear(rng, cfg.intermediate, cfg.hidden, f"{name}.lin2", dtype=dtype)

    def __call__(self, x: Tensor) -> Tensor:
        return self.lin2(nd.relu(self.lin1(x)))

    def params(self) -> dict:
        return {**self.lin1.params(), **self.lin2.params()}


def _maybe_dropout(x: Tensor, p: float, rng) -> Tensor:
    if rng is None or p <= 0.0:
        return x
    return nd.dropout(x, p, rng)


class EncoderLayer:
    def __init__(self, rng, cfg: TransformerConfig, name: str, dtype=np.float32):
        self.cfg = cfg
        self.ln1 = LayerNorm(cfg.hidden, f"{name}.ln1", dtype)
        self.attn = MultiHeadAttention(rng, cfg, f"{name}.attn", dtype)
        self.ln2 = LayerNorm(cfg.hidden, f"{name}.ln2", dtype)
        self.ff = FeedForward(rng, cfg, f"{name}.ff", dtype)

    def __call__(self, x, attn_mask, drop_rng=None):
        h = self.ln1(x)
        x = nd.add(x, _maybe_dropout(self.attn(h, h, attn_mask), self.cfg.dropout, drop_rng))
        x = nd.add(x, _maybe_dropout(self.ff(self.ln2(x)), self.cfg.dropout, drop_rng))
        return x

    def params(self) -> dict:
        return {**self.ln1.params(), **self.attn.params(), **self.ln2.params(), **self.ff.params()}


class DecoderLayer:
    def __init__(self, rng, cfg: TransformerConfig, name: str, dtype=np.float32):
        self.cfg = cfg
        self.ln1 = LayerNorm(cfg.hidden, f"{name}.ln1", dtype)
        self.self_attn = MultiHeadAttention(rng, cfg, f"{name}.self_attn", dtype)
        self.ln2 = LayerNorm(cfg.hidden, f"{name}.ln2", dtype)
        self.cross_attn = MultiHeadAttention(rng, cfg, f"{name}.cross_attn", dtype)
        self.ln3 = LayerNorm(cfg.hidden, f"{name}.ln3", dtype)
        self.ff = FeedForward(rng, cfg, f"{name}.ff", dtype)

    def __call__(self, x, memory, self_mask, cross_mask, drop_rng=None):
        h = self.ln1(x)
        x = nd.add(x, _maybe_dropout(self.self_attn(h, h, self_mask), self.cfg.dropout, drop_rng))
        x = nd.add(
            x,
            _maybe_dropout(
                self.cross_attn(self.ln2(x), memory, cross_mask), self.cfg.dropout, drop_rng
            ),
        )
        x = nd.add(x, _maybe_dropout(self.ff(self.ln3(x)), self.cfg.dropout, drop_rng))
        return x

    def params(self) -> dict:
        out = {}
        for part in (self.ln1, self.self_attn, self.ln2, self.cross_attn, self.ln3, self.ff):
            out.update(part.params())
        return out


def pad_attn_mask(pad: np.ndarray) -> np.ndarray:
    """(B, Tk) key padding -> (B, 1, 1, Tk) attention mask."""
    return pad[:, None, None, :]


def causal_mask(T: int) -> np.ndarray:
    return np.triu(np.ones((T, T), dtype=bool), k=1)[None, None, :, :]


class Encoder:
    """Stack of pre-norm encoder layers with a final norm."""

    def __init__(self, rng, cfg: TransformerConfig, name: str = "enc", dtype=np.float32):
        self.cfg = cfg
        self.pe = sinusoidal_positions(cfg.max_len, cfg.hidden, dtype)
        self.layers = [EncoderLayer(rng, cfg, f"{name}.layer{i}", dtype) for i in range(cfg.layers)]
        self.final_ln = LayerNorm(cfg.hidden, f"{name}.final_ln", dtype)

    def __call__(self, x: Tensor, pad: Optional[np.ndarray] = None, drop_rng=None) -> Tensor:
        B, T, _ = x.shape
        if T > self.cfg.max_len:
            raise ValueError(f"sequence length {T} exceeds max_len {self.cfg.max_len}")
        x = nd.add(x, Tensor(self.pe[:T]))
        mask = pad_attn_mask(pad) if pad is not None else None
        for layer in self.layers:
            x = layer(x, mask, drop_rng)
        return self.final_ln(x)

    def params(self) -> dict:
        out = {}
        for layer in self.layers:
            out.update(layer.params())
        out.update(self.final_ln.params())
        return out


class Decoder:
    """Causal self-attention + cross-attention stack with a final norm."""

    def __init__(self, rng, cfg: TransformerConfig, name: str = "dec", dtype=np.float32):
        self.cfg = cfg
        self.pe = sinusoidal_positions(cfg.max_len, cfg.hidden, dtype)
        self.layers = [DecoderLayer(rng, cfg, f"{name}.layer{i}", dtype) for i in range(cfg.layers)]
        self.final_ln = LayerNorm(cfg.hidden, f"{name}.final_ln", dtype)

    def __call__(self, x: Tensor, memory: Tensor, tgt_pad: Optional[np.ndarray] = None,
                 mem_pad: Optional[np.ndarray] = None, drop_rng=None) -> Tensor:
        B, T, _ = x.shape
        if T > self.cfg.max_len:
            raise ValueError(f"prefix length {T} exceeds max_len {self.cfg.max_len}")
        if memory.shape[1] == 0:
            raise ValueError("decoder requires a nonempty encoder sequence")
        x = nd.add(x, Tensor(self.pe[:T]))
        self_mask = causal_mask(T)
        if tgt_pad is not None:
            self_mask = self_mask | pad_attn_mask(tgt_pad)
        cross_mask = pad_attn_mask(mem_pad) if mem_pad is not None else None
        for layer in self.layers:
            x = layer(x, memory, self_mask, cross_mask, drop_rng)
        return self.final_ln(x)

    def params(self) -> dict:
        out = {}
        for layer in self.layers:
            out.update(layer.params())
        out.update(self.final_ln.params())
        return out


def pooled_output(seq_out: Tensor) -> Tensor:
    """The start-token (position 0) vector of each sequence."""
    if seq_out.shape[1] < 1:
        raise ValueError("cannot pool an empty sequence")
    return seq_out[:, 0]
