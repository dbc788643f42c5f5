"""
Model File Store
================

Single-file, versioned, little-endian model format. See docs/model_format.md
for the byte layout. Masks are stored as packed bit-arrays; the trailing
CRC-32 covers every preceding byte.
"""

import logging
import struct
import zlib
from pathlib import Path
from typing import Any

import numpy as np
import orjson

from core.exceptions import CorruptModelError, ModelShapeError, ModelVersionError
from core.persistence import atomic_write_bytes
from data.models import LayerKind, LayerSpec
from services.flops import layer_sparsity
from services.model_zoo import BASELINE_LAYERS, Model, bias_shape, weight_shape

logger = logging.getLogger(__name__)

MAGIC = b"ECGPRUNE"
FORMAT_VERSION = 1

_KINDS = list(LayerKind)


def _pack_str(value: str) -> bytes:
    raw = value.encode("utf-8")
    return struct.pack("<H", len(raw)) + raw


def encode_model(model: Model) -> bytes:
    chunks = [MAGIC, struct.pack("<Iq", FORMAT_VERSION, model.seed)]

    chunks.append(struct.pack("<I", len(model.specs)))
    for spec in model.specs:
        chunks.append(_pack_str(spec.name))
        chunks.append(struct.pack(
            "<B5IB",
            _KINDS.index(spec.kind),
            spec.in_channels or 0, spec.out_channels or 0, spec.kernel or 0, spec.stride or 0, spec.units or 0,
            int(spec.fused_relu),
        ))

    chunks.append(struct.pack("<I", len(model.params)))
    for name, tensor in model.params.items():
        chunks.append(_pack_str(name))
        chunks.append(struct.pack(f"<B{tensor.ndim}I", tensor.ndim, *tensor.shape))
        chunks.append(np.ascontiguousarray(tensor, dtype="<f8").tobytes())

    chunks.append(struct.pack("<I", len(model.masks)))
    for layer, mask in model.masks.items():
        chunks.append(_pack_str(layer))
        chunks.append(struct.pack("<I", mask.size))
        chunks.append(np.packbits(mask.ravel().astype(np.uint8)).tobytes())

    chunks.append(struct.pack("<I", len(model.trainable)))
    for group, flag in model.trainable.items():
        chunks.append(_pack_str(group))
        chunks.append(struct.pack("<B", int(flag)))

    meta = orjson.dumps(
        {"history": model.history, "sparsity": layer_sparsity(model)},
        option=orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY,
    )
    chunks.append(struct.pack("<I", len(meta)))
    chunks.append(meta)

    body = b"".join(chunks)
    return body + struct.pack("<I", zlib.crc32(body))


def save_model(model: Model, path: str | Path) -> Path:
    target = atomic_write_bytes(path, encode_model(model))
    logger.info(f"Saved model to {target}")
    return target


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, n: int) -> bytes:
        if self.offset + n > len(self.data):
            raise CorruptModelError(f"model file truncated at byte {self.offset} (needed {n} more)",
                                    context="model-file")
        chunk = self.data[self.offset:self.offset + n]
        self.offset += n
        return chunk

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def string(self) -> str:
        (n,) = self.unpack("<H")
        try:
            return self.take(n).decode("utf-8")
        except UnicodeDecodeError as e:
            raise CorruptModelError(f"invalid name at byte {self.offset}: {e}", context="model-file") from e


def decode_model(data: bytes) -> Model:
    if len(data) < len(MAGIC) + 4 or data[:len(MAGIC)] != MAGIC:
        raise CorruptModelError("not a model file (bad magic header)", context="model-file")
    (version,) = struct.unpack_from("<I", data, len(MAGIC))
    if version != FORMAT_VERSION:
        raise ModelVersionError(f"unsupported model format version {version} (expected {FORMAT_VERSION})",
                                context="model-file")
    if len(data) < len(MAGIC) + 16:
        raise CorruptModelError("model file truncated", context="model-file")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != crc:
        raise CorruptModelError("checksum mismatch (truncated or corrupted file)", context="model-file")

    r = _Reader(body)
    r.take(len(MAGIC))
    _, seed = r.unpack("<Iq")

    specs: list[LayerSpec] = []
    (n_layers,) = r.unpack("<I")
    for _ in range(n_layers):
        name = r.string()
        kind_idx, in_ch, out_ch, kernel, stride, units, fused = r.unpack("<B5IB")
        if kind_idx >= len(_KINDS):
            raise CorruptModelError(f"unknown layer kind {kind_idx} for {name}", context="model-file")
        specs.append(LayerSpec(
            name=name, kind=_KINDS[kind_idx],
            in_channels=in_ch or None, out_channels=out_ch or None,
            kernel=kernel or None, stride=stride or None, units=units or None,
            fused_relu=bool(fused),
        ))

    params: dict[str, np.ndarray] = {}
    (n_params,) = r.unpack("<I")
    for _ in range(n_params):
        name = r.string()
        (ndim,) = r.unpack("<B")
        shape = r.unpack(f"<{ndim}I")
        count = int(np.prod(shape)) if shape else 1
        params[name] = np.frombuffer(r.take(8 * count), dtype="<f8").astype(np.float64).reshape(shape)

    masks: dict[str, np.ndarray] = {}
    (n_masks,) = r.unpack("<I")
    for _ in range(n_masks):
        layer = r.string()
        (size,) = r.unpack("<I")
        bits = np.unpackbits(np.frombuffer(r.take((size + 7) // 8), dtype=np.uint8))[:size]
        masks[layer] = bits.astype(bool)

    trainable: dict[str, bool] = {}
    (n_groups,) = r.unpack("<I")
    for _ in range(n_groups):
        group = r.string()
        (flag,) = r.unpack("<B")
        trainable[group] = bool(flag)

    (meta_len,) = r.unpack("<I")
    try:
        meta: dict[str, Any] = orjson.loads(r.take(meta_len))
    except orjson.JSONDecodeError as e:
        raise CorruptModelError(f"invalid metadata block: {e}", context="model-file") from e
    if r.offset != len(body):
        raise CorruptModelError(f"{len(body) - r.offset} trailing bytes after metadata", context="model-file")

    _check_architecture(specs, params, masks)
    masks = {layer: bits.reshape(params[f"{layer}.weight"].shape) for layer, bits in masks.items()}
    for layer, mask in masks.items():
        if np.any(params[f"{layer}.weight"][~mask] != 0.0):
            raise CorruptModelError(f"masked weights of {layer} are not zero", context="model-file")

    return Model(specs, params, masks, trainable, seed, history=meta.get("history", []))


def _check_architecture(specs: list[LayerSpec], params: dict[str, np.ndarray], masks: dict[str, np.ndarray]):
    if specs != BASELINE_LAYERS:
        raise ModelShapeError("layer table does not match the baseline architecture", context="model-file")
    for spec in specs:
        if not spec.has_params:
            continue
        for key, expected in ((f"{spec.name}.weight", weight_shape(spec)), (f"{spec.name}.bias", bias_shape(spec))):
            actual = params.get(key)
            if actual is None or actual.shape != expected:
                raise ModelShapeError(
                    f"parameter {key} has shape {None if actual is None else actual.shape}, expected {expected}",
                    context="model-file",
                )
        if spec.prunable:
            mask = masks.get(spec.name)
            if mask is None or mask.size != int(np.prod(weight_shape(spec))):
                raise ModelShapeError(f"mask for {spec.name} missing or wrong size", context="model-file")


def load_model(path: str | Path) -> Model:
    with open(path, "rb") as f:
        data = f.read()
    model = decode_model(data)
    logger.info(f"Loaded model from {path} (seed={model.seed}, {len(model.history)} history entries)")
    return model
