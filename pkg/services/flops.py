"""
FLOPs Accounting
================

Run-time complexity of the baseline and its pruned variants.

`flops_layer` / `flops_total` follow the reference per-layer table verbatim
(conv rows `out_len x k x (1-eta) x out_ch x 2`, ReLU rows one op per element,
pooling / flatten zero). That table leaves out the input-channel factor of
conv2 and conv3 and the activations after conv3 and dense1; the "exact" mode
and `flops_model` count the realized architecture instead.

Table sum: 917440 x (1 - eta) + 19136, i.e. 936576 at eta = 0.
"""

import math

import numpy as np

from core.exceptions import FlopsError
from data.models import LayerKind
from services.model_zoo import BASELINE_LAYERS, Model, sequence_lengths

TABLE_MODE = "table"
EXACT_MODE = "exact"

PRUNABLE_TABLE_FLOPS = 917440
FIXED_TABLE_FLOPS = 19136

# (base count, scales with 1 - eta) per layer index 1..10
_TABLE: dict[int, tuple[int, bool]] = {
    1: (71 * 50 * 128 * 2, True),
    2: (71 * 128, False),
    3: (0, False),
    4: (18 * 7 * 32 * 2, True),
    5: (18 * 32, False),
    6: (0, False),
    7: (1 * 9 * 32 * 2, True),
    8: (0, False),
    9: (32 * 128 * 2, False),
    10: (128 * 5 * 2, False),
}


def _round(value: float) -> int:
    return int(math.floor(value + 0.5))


def _check_eta(eta: float):
    if not 0.0 <= eta <= 1.0:
        raise FlopsError(f"sparsity must lie in [0, 1], got {eta}")


def flops_layer(index: int, eta: float, mode: str = TABLE_MODE) -> int:
    """FLOPs of layer `index` (1..10) at sparsity `eta`, rounded to the nearest integer."""
    if index not in _TABLE:
        raise FlopsError(f"layer index must be in 1..10, got {index}")
    _check_eta(eta)
    if mode == TABLE_MODE:
        base, scaled = _TABLE[index]
        return _round(base * (1.0 - eta)) if scaled else base
    if mode == EXACT_MODE:
        return _exact_layer(index, eta)
    raise FlopsError(f"unknown FLOPs mode {mode!r}")


def _exact_layer(index: int, eta: float) -> int:
    spec = BASELINE_LAYERS[index - 1]
    lengths = sequence_lengths(BASELINE_LAYERS)
    if spec.kind == LayerKind.CONV:
        out_len = lengths[spec.name]
        macs = out_len * spec.kernel * spec.in_channels * spec.out_channels * (1.0 - eta)
        flops = _round(2 * macs)
        return flops + (out_len * spec.out_channels if spec.fused_relu else 0)
    if spec.kind == LayerKind.DENSE:
        return spec.in_channels * spec.units * 2 + (spec.units if spec.fused_relu else 0)
    if spec.kind == LayerKind.ACTIVATION:
        prev = BASELINE_LAYERS[index - 2]
        return lengths[prev.name] * prev.out_channels
    return 0


def flops_total(eta: float, mode: str = TABLE_MODE) -> int:
    """Whole-network FLOPs at sparsity `eta`; in table mode 917440 x (1 - eta) + 19136."""
    _check_eta(eta)
    if mode == TABLE_MODE:
        return _round(PRUNABLE_TABLE_FLOPS * (1.0 - eta) + FIXED_TABLE_FLOPS)
    return sum(flops_layer(i, eta, mode) for i in _TABLE)


def flops_reduction(eta: float) -> float:
    """Fractional complexity reduction relative to the unpruned table total."""
    return 1.0 - flops_total(eta) / flops_total(0.0)


def flops_model(model: Model) -> dict[str, int]:
    """
    FLOPs of a realized (masked) model, counting 2 per surviving multiply-accumulate
    and 1 per activation element, keyed by layer name plus "total".
    """
    lengths = sequence_lengths(model.specs)
    counts: dict[str, int] = {}
    width = 0
    for spec in model.specs:
        flops = 0
        if spec.kind == LayerKind.CONV:
            out_len = lengths[spec.name]
            flops = out_len * int(np.count_nonzero(model.masks[spec.name])) * 2
            width = out_len * spec.out_channels
        elif spec.kind == LayerKind.DENSE:
            flops = spec.in_channels * spec.units * 2
            width = spec.units
        elif spec.kind == LayerKind.ACTIVATION:
            flops = width
        if spec.fused_relu:
            flops += width
        counts[spec.name] = flops
    counts["total"] = sum(counts.values())
    return counts


def layer_sparsity(model: Model) -> dict[str, dict[str, float]]:
    """Zero count, weight count and realized sparsity per prunable layer."""
    census = {}
    for layer in model.prunable_layers:
        mask = model.masks[layer]
        zeros = int(mask.size - np.count_nonzero(mask))
        census[layer] = {"zeros": zeros, "weights": int(mask.size), "sparsity": zeros / mask.size}
    return census
