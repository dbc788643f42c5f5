"""
Pruning Engine
==============

Magnitude-based, per-layer weight pruning of the three convolutional layers
and the three strategies built on it:

- simple: mask every conv layer at once, no retraining.
- finetune: mask every conv layer at once, then fine-tune everything except
  the conv layers (weights and biases frozen).
- multistage: for conv1, conv2, conv3 in turn, mask that layer and fine-tune
  every remaining parameter; zeros from earlier stages stay frozen.

Biases are never pruned. Every strategy works on a copy of its input model.
"""

import logging
import math

import numpy as np

from core.exceptions import ConfigError, DatasetError
from data.models import Strategy, StrategyConfig
from services.dataset import BeatSet
from services.model_zoo import Model
from services.training import finetune
from utilities.seeding import derive_seed

logger = logging.getLogger(__name__)


def pruned_count(n: int, eta: float) -> int:
    """floor(eta * n), tolerant of binary representation error (0.6 * 6400 -> 3840)."""
    return min(n, math.floor(eta * n + 1e-9))


def magnitude_select(weights: np.ndarray, eta: float, current: np.ndarray | None = None) -> np.ndarray:
    """
    Boolean keep-mask zeroing the floor(eta * N) smallest-magnitude weights.

    Ties go to the smallest row-major index. Positions already masked in
    `current` are ranked first so they stay masked.
    """
    if not 0.0 <= eta <= 1.0:
        raise ConfigError(f"sparsity must lie in [0, 1], got {eta}")
    weights = np.asarray(weights, dtype=np.float64)
    keys = np.abs(weights).ravel()
    if current is not None:
        keys = np.where(current.ravel(), keys, -1.0)
    order = np.argsort(keys, kind="stable")
    keep = np.ones(keys.size, dtype=bool)
    keep[order[:pruned_count(keys.size, eta)]] = False
    if current is not None:
        keep &= current.ravel()
    return keep.reshape(weights.shape)


def mask_layer(model: Model, layer: str, eta: float) -> int:
    """Masks `layer` of `model` in place at sparsity `eta`; returns how many positions were newly zeroed."""
    before = model.masks[layer]
    keep = magnitude_select(model.weight(layer), eta, before)
    model.masks[layer] = keep
    key = f"{layer}.weight"
    model.params[key] = np.where(keep, model.params[key], 0.0)
    return int(np.count_nonzero(before & ~keep))


def _require(train_set: BeatSet):
    if len(train_set) == 0:
        raise DatasetError("pruning with fine-tuning needs a non-empty training set", context="pruning")


def simple_prune(model: Model, eta: float) -> Model:
    pruned = model.copy()
    for layer in pruned.prunable_layers:
        mask_layer(pruned, layer, eta)
    pruned.history.append({"op": "prune", "strategy": Strategy.SIMPLE.value, "eta": eta})
    logger.info(f"Simple pruning at eta={eta}", extra={"payload": {"strategy": "simple", "eta": eta}})
    return pruned


def prune_with_finetune(model: Model, cfg: StrategyConfig, train_set: BeatSet, val_set: BeatSet) -> Model:
    _require(train_set)
    eta = cfg.sparsity
    pruned = model.copy()
    newly = sum(mask_layer(pruned, layer, eta) for layer in pruned.prunable_layers)
    pruned.history.append({"op": "prune", "strategy": Strategy.FINETUNE.value, "eta": eta})
    if newly == 0:
        logger.info(f"No weights masked at eta={eta}; skipping fine-tuning")
        return pruned

    flags = {group: group not in pruned.prunable_layers for group in pruned.trainable}
    tuned, log = finetune(pruned, flags, train_set, val_set, cfg.finetune_config())
    logger.info(
        f"Pruning with fine-tuning at eta={eta}: {len(log.epochs)} epochs",
        extra={"payload": {"strategy": "finetune", "eta": eta, "epochs": len(log.epochs)}},
    )
    return tuned


def multistage_prune(model: Model, cfg: StrategyConfig, train_set: BeatSet, val_set: BeatSet) -> Model:
    _require(train_set)
    eta = cfg.sparsity
    current = model.copy()
    for stage, layer in enumerate(current.prunable_layers, start=1):
        newly = mask_layer(current, layer, eta)
        current.history.append({"op": "prune", "strategy": Strategy.MULTISTAGE.value, "eta": eta, "stage": stage,
                                "layer": layer})
        if newly == 0:
            logger.info(f"Stage {stage} ({layer}): nothing masked; skipping fine-tuning")
            continue
        flags = {group: True for group in current.trainable}
        stage_cfg = cfg.finetune_config(seed=derive_seed(cfg.seed, "multistage", stage))
        current, log = finetune(current, flags, train_set, val_set, stage_cfg)
        logger.info(
            f"Stage {stage} ({layer}): masked {newly} weights, fine-tuned {len(log.epochs)} epochs",
            extra={"payload": {"strategy": "multistage", "eta": eta, "stage": stage, "layer": layer,
                               "masked": newly}},
        )
    return current


def apply_strategy(model: Model, cfg: StrategyConfig, train_set: BeatSet, val_set: BeatSet) -> Model:
    if cfg.strategy == Strategy.SIMPLE:
        return simple_prune(model, cfg.sparsity)
    if cfg.strategy == Strategy.FINETUNE:
        return prune_with_finetune(model, cfg, train_set, val_set)
    if cfg.strategy == Strategy.MULTISTAGE:
        return multistage_prune(model, cfg, train_set, val_set)
    raise ConfigError(f"unknown strategy {cfg.strategy!r}")
