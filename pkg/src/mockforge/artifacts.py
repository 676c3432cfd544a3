"""Model artifact archives.

A weight snapshot is a manifest (name -> shape/dtype/offset) plus one raw
little-endian blob. An artifact is a zip holding manifest.json, weights.bin,
vocab.json and, when present, calibration.json and the provider payload.
Loading verifies recorded shapes against the freshly built model.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import zipfile
from typing import Optional

import numpy as np

from .core import ClassVocabulary
from .generator import GeneratorConfig, GeneratorModel
from .ndtensor import Tensor
from .quality import MetricCalibration
from .retrieval import DualEncoder, DualEncoderConfig, VectorIndex
from .textfeat import provider_from_spec


class ArtifactError(ValueError):
    pass


def save_weights(params: dict[str, Tensor]) -> tuple[bytes, dict]:
    blob = bytearray()
    manifest = {}
    for name in sorted(params):
        arr = np.ascontiguousarray(params[name].data)
        manifest[name] = {
            "shape": list(arr.shape),
            "dtype": str(arr.dtype),
            "offset": len(blob),
        }
        blob.extend(arr.astype(arr.dtype.newbyteorder("<")).tobytes())
    return bytes(blob), manifest


def load_weights(blob: bytes, manifest: dict) -> dict[str, np.ndarray]:
    out = {}
    for name, meta in manifest.items():
        shape = tuple(meta["shape"])
        dtype = np.dtype(meta["dtype"]).newbyteorder("<")
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(blob, dtype=dtype, count=count, offset=meta["offset"])
        out[name] = arr.reshape(shape).astype(meta["dtype"])
    return out


def assign_weights(params: dict[str, Tensor], arrays: dict[str, np.ndarray]) -> None:
    missing = set(params) - set(arrays)
    extra = set(arrays) - set(params)
    if missing or extra:
        raise ArtifactError(f"weight name mismatch: missing={sorted(missing)[:4]} "
                            f"extra={sorted(extra)[:4]}")
    for name, p in params.items():
        if tuple(p.data.shape) != tuple(arrays[name].shape):
            raise ArtifactError(
                f"shape mismatch for {name}: artifact {arrays[name].shape}, "
                f"model {p.data.shape}")
        p.data = arrays[name].copy()


def _write_common(zf: zipfile.ZipFile, kind: str, config: dict, params, provider,
                  vocab: Optional[ClassVocabulary],
                  calibration: Optional[MetricCalibration]) -> None:
    blob, weight_manifest = save_weights(params) if params is not None else (b"", {})
    manifest = {
        "kind": kind,
        "config": config,
        "provider": provider.spec() if provider is not None else None,
        "weights": weight_manifest,
        "weights_sha256": hashlib.sha256(blob).hexdigest(),
    }
    zf.writestr("manifest.json", json.dumps(manifest, indent=1))
    if params is not None:
        zf.writestr("weights.bin", blob)
    if vocab is not None:
        zf.writestr("vocab.json", vocab.to_json())
    if calibration is not None:
        zf.writestr("calibration.json", calibration.to_json())


def _read_manifest(zf: zipfile.ZipFile) -> dict:
    manifest = json.loads(zf.read("manifest.json"))
    if manifest["weights"]:
        blob = zf.read("weights.bin")
        digest = hashlib.sha256(blob).hexdigest()
        if digest != manifest["weights_sha256"]:
            raise ArtifactError("weight blob does not match its recorded hash")
    return manifest


def save_dual_encoder(path, enc: DualEncoder, provider,
                      vocab: Optional[ClassVocabulary] = None) -> None:
    with zipfile.ZipFile(path, "w", zipfile.ZIP_DEFLATED) as zf:
        _write_common(zf, "dual-encoder", dataclasses.asdict(enc.cfg), enc.params(),
                      provider, vocab, None)


def load_dual_encoder(path) -> tuple[DualEncoder, object]:
    with zipfile.ZipFile(path, "r") as zf:
        manifest = _read_manifest(zf)
        if manifest["kind"] != "dual-encoder":
            raise ArtifactError(f"expected a dual-encoder artifact, got {manifest['kind']!r}")
        cfg = DualEncoderConfig(**manifest["config"])
        enc = DualEncoder(cfg, seed=0)
        assign_weights(enc.params(), load_weights(zf.read("weights.bin"), manifest["weights"]))
        provider = provider_from_spec(manifest["provider"])
    return enc, provider


def save_generator(path, model: GeneratorModel, provider,
                   calibration: Optional[MetricCalibration] = None) -> None:
    with zipfile.ZipFile(path, "w", zipfile.ZIP_DEFLATED) as zf:
        _write_common(zf, "generator", dataclasses.asdict(model.cfg), model.params(),
                      provider, model.vocab, calibration)


def load_generator(path) -> tuple[GeneratorModel, object, Optional[MetricCalibration]]:
    with zipfile.ZipFile(path, "r") as zf:
        manifest = _read_manifest(zf)
        if manifest["kind"] != "generator":
            raise ArtifactError(f"expected a generator artifact, got {manifest['kind']!r}")
        cfg = GeneratorConfig(**manifest["config"])
        vocab = ClassVocabulary.from_json(zf.read("vocab.json").decode("utf-8"))
        model = GeneratorModel(cfg, vocab, seed=0)
        assign_weights(model.params(), load_weights(zf.read("weights.bin"), manifest["weights"]))
        provider = provider_from_spec(manifest["provider"])
        calibration = None
        if "calibration.json" in zf.namelist():
            calibration = MetricCalibration.from_json(zf.read("calibration.json").decode("utf-8"))
    return model, provider, calibration


def save_text_index(path, index: VectorIndex, provider,
                    vocab: Optional[ClassVocabulary] = None) -> None:
    with zipfile.ZipFile(path, "w", zipfile.ZIP_DEFLATED) as zf:
        _write_common(zf, "text-index", {"metric": index.metric, "dim": index.dim,
                                         "count": len(index)}, None, provider, vocab, None)
        zf.writestr("index.uiix", index.to_bytes())


def load_text_index(path) -> tuple[VectorIndex, object]:
    with zipfile.ZipFile(path, "r") as zf:
        manifest = _read_manifest(zf)
        if manifest["kind"] != "text-index":
            raise ArtifactError(f"expected a text-index artifact, got {manifest['kind']!r}")
        index = VectorIndex.from_bytes(zf.read("index.uiix"))
        provider = provider_from_spec(manifest["provider"])
    return index, provider
