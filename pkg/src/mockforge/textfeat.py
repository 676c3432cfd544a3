"""Tokenization and pluggable text-embedding providers.

Three provider modes share one interface:

* ``hashed-tfidf`` -- training-free signed-hash vectors weighted by inverse
  document frequency; the default stand-in for a large language model.
* ``file-backed`` -- vectors precomputed offline (e.g. real 768-wide language
  model embeddings) and loaded from an EMBV file.
* ``learned-table`` -- an embedding matrix owned and trained by a model.

Providers are immutable after construction and deterministic, so concurrent
callers can share them freely.
"""

from __future__ import annotations

import hashlib
import math
import struct
from typing import Iterable, Sequence

import numpy as np

HASH_SEED = 0x6D6F636B666F7267  # fixed so vectors are stable across runs

EMBV_MAGIC = b"EMBV"
EMBV_VERSION = 1
KEYS_ARE_SENTENCES = 0
KEYS_ARE_TOKENS = 1


class MissingEmbedding(KeyError):
    """A file-backed provider has no entry for the requested key."""


def tokenize(text: str) -> list[str]:
    """Lower-case, split on whitespace, and split punctuation into its own tokens."""
    tokens: list[str] = []
    for chunk in text.lower().split():
        run = ""
        for ch in chunk:
            if ch.isalnum():
                run += ch
            else:
                if run:
                    tokens.append(run)
                    run = ""
                tokens.append(ch)
        if run:
            tokens.append(run)
    return tokens


def _hash64(token: str, salt: bytes) -> int:
    h = hashlib.blake2b(
        token.encode("utf-8"), digest_size=8, key=HASH_SEED.to_bytes(8, "little"), salt=salt
    )
    return int.from_bytes(h.digest(), "little")


class HashedTfidfProvider:
    """Signed hashed one-hot token vectors scaled by smoothed idf.

    token index = h(token) mod dim, sign from a second hash;
    idf(token) = log((N + 1) / (df + 1)) + 1 over the corpus the provider was
    fitted on. Sentence vectors are the L2-normalized mean of token vectors.
    """

    mode = "hashed-tfidf"

    def __init__(self, dim: int = 64, doc_count: int = 0, df: dict[str, int] | None = None):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.doc_count = doc_count
        self.df = dict(df or {})

    @classmethod
    def fit(cls, documents: Iterable[str], dim: int = 64) -> "HashedTfidfProvider":
        df: dict[str, int] = {}
        n = 0
        for doc in documents:
            n += 1
            for token in set(tokenize(doc)):
                df[token] = df.get(token, 0) + 1
        return cls(dim=dim, doc_count=n, df=df)

    def idf(self, token: str) -> float:
        return math.log((self.doc_count + 1) / (self.df.get(token, 0) + 1)) + 1.0

    def token_vectors(self, tokens: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(tokens), self.dim), dtype=np.float32)
        for i, token in enumerate(tokens):
            idx = _hash64(token, b"idx") % self.dim
            sign = 1.0 if _hash64(token, b"sgn") & 1 else -1.0
            out[i, idx] = sign * self.idf(token)
        return out

    def pool(self, text_or_tokens) -> np.ndarray:
        tokens = _as_tokens(text_or_tokens)
        if not tokens:
            return np.zeros(self.dim, dtype=np.float32)
        mean = self.token_vectors(tokens).mean(axis=0)
        norm = float(np.linalg.norm(mean))
        if norm == 0.0:
            return mean
        return (mean / norm).astype(np.float32)

    def spec(self) -> dict:
        return {
            "mode": self.mode,
            "dim": self.dim,
            "doc_count": self.doc_count,
            "df": self.df,
        }

    @classmethod
    def from_spec(cls, spec: dict) -> "HashedTfidfProvider":
        return cls(dim=spec["dim"], doc_count=spec["doc_count"], df=spec["df"])


class FileBackedProvider:
    """Vectors loaded verbatim from an EMBV file.

    With sentence keys only pooling works; with token keys both per-token
    lookup and mean pooling work. Sentence keys are the whitespace-joined
    lower-cased token sequence of the original text.
    """

    mode = "file-backed"

    def __init__(self, dim: int, entries: dict[str, np.ndarray], key_kind: int):
        self.dim = dim
        self.entries = entries
        self.key_kind = key_kind

    @classmethod
    def load(cls, path) -> "FileBackedProvider":
        with open(path, "rb") as f:
            data = f.read()
        return cls.from_bytes(data)

    @classmethod
    def from_bytes(cls, data: bytes) -> "FileBackedProvider":
        magic, version, dim, count, key_kind = struct.unpack_from("<4sIIQB", data, 0)
        if magic != EMBV_MAGIC:
            raise ValueError("not an EMBV embedding file")
        if version != EMBV_VERSION:
            raise ValueError(f"unsupported EMBV version {version}")
        offset = struct.calcsize("<4sIIQB")
        entries: dict[str, np.ndarray] = {}
        for _ in range(count):
            (key_len,) = struct.unpack_from("<I", data, offset)
            offset += 4
            key = data[offset : offset + key_len].decode("utf-8")
            offset += key_len
            vec = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).copy()
            offset += 4 * dim
            entries[key] = vec
        return cls(dim=dim, entries=entries, key_kind=key_kind)

    def token_vectors(self, tokens: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(tokens), self.dim), dtype=np.float32)
        for i, token in enumerate(tokens):
            if token not in self.entries:
                raise MissingEmbedding(token)
            out[i] = self.entries[token]
        return out

    def pool(self, text_or_tokens) -> np.ndarray:
        tokens = _as_tokens(text_or_tokens)
        if not tokens:
            return np.zeros(self.dim, dtype=np.float32)
        if self.key_kind == KEYS_ARE_SENTENCES:
            key = " ".join(tokens)
            if key not in self.entries:
                raise MissingEmbedding(key)
            return self.entries[key].copy()
        return self.token_vectors(tokens).mean(axis=0).astype(np.float32)

    def spec(self) -> dict:
        return {"mode": self.mode, "dim": self.dim, "key_kind": self.key_kind}


def write_embedding_file(path, dim: int, entries: dict[str, np.ndarray], key_kind: int) -> None:
    with open(path, "wb") as f:
        f.write(struct.pack("<4sIIQB", EMBV_MAGIC, EMBV_VERSION, dim, len(entries), key_kind))
        for key, vec in entries.items():
            vec = np.asarray(vec, dtype="<f4")
            if vec.shape != (dim,):
                raise ValueError(f"entry {key!r} has shape {vec.shape}, expected ({dim},)")
            raw = key.encode("utf-8")
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)
            f.write(vec.tobytes())


class LearnedTableProvider:
    """Token-to-row resolver for an embedding table trained end-to-end.

    The trainable table lives with the model parameters (the model keys rows
    by ``token_ids``); the numpy table here is a frozen snapshot used only
    where plain provider vectors are needed (e.g. pooled element text).
    Out-of-vocabulary tokens map to row 0.
    """

    mode = "learned-table"

    def __init__(self, vocabulary: Sequence[str], table: np.ndarray):
        self.vocabulary = list(vocabulary)
        self.index = {tok: i + 1 for i, tok in enumerate(self.vocabulary)}
        self.table = table  # (1 + len(vocabulary), dim); row 0 is OOV
        self.dim = int(table.shape[1])

    @classmethod
    def build_vocabulary(cls, documents: Iterable[str]) -> list[str]:
        seen: dict[str, None] = {}
        for doc in documents:
            for token in tokenize(doc):
                seen.setdefault(token, None)
        return list(seen)

    @classmethod
    def build(cls, documents: Iterable[str], dim: int) -> "LearnedTableProvider":
        vocab = cls.build_vocabulary(documents)
        return cls(vocab, np.zeros((1 + len(vocab), dim), dtype=np.float32))

    @property
    def vocab_size(self) -> int:
        return len(self.vocabulary)

    def spec(self) -> dict:
        return {"mode": self.mode, "dim": self.dim, "vocabulary": self.vocabulary}

    @classmethod
    def from_spec(cls, spec: dict) -> "LearnedTableProvider":
        return cls(spec["vocabulary"],
                   np.zeros((1 + len(spec["vocabulary"]), spec["dim"]), dtype=np.float32))

    def token_ids(self, tokens: Sequence[str]) -> np.ndarray:
        return np.array([self.index.get(t, 0) for t in tokens], dtype=np.int64)

    def token_vectors(self, tokens: Sequence[str]) -> np.ndarray:
        return self.table[self.token_ids(tokens)].astype(np.float32)

    def pool(self, text_or_tokens) -> np.ndarray:
        tokens = _as_tokens(text_or_tokens)
        if not tokens:
            return np.zeros(self.dim, dtype=np.float32)
        return self.token_vectors(tokens).mean(axis=0).astype(np.float32)


def _as_tokens(text_or_tokens) -> list[str]:
    if isinstance(text_or_tokens, str):
        return tokenize(text_or_tokens)
    return list(text_or_tokens)


def embed_tokens(tokens: Sequence[str], provider) -> np.ndarray:
    """One provider-width vector per token."""
    return provider.token_vectors(tokens)


def pool_description(text_or_tokens, provider) -> np.ndarray:
    """Single fixed-length vector for a whole description."""
    return provider.pool(text_or_tokens)


def provider_from_spec(spec: dict, embv_bytes: bytes | None = None):
    mode = spec["mode"]
    if mode == "hashed-tfidf":
        return HashedTfidfProvider.from_spec(spec)
    if mode == "learned-table":
        return LearnedTableProvider.from_spec(spec)
    if mode == "file-backed":
        if embv_bytes is None:
            raise ValueError("file-backed provider needs its EMBV payload")
        return FileBackedProvider.from_bytes(embv_bytes)
    raise ValueError(f"cannot rebuild provider mode {mode!r} from a spec alone")
