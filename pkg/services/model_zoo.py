"""
Baseline Model Zoo
==================

This module defines the 10-layer 1D CNN heartbeat classifier used as the
pruning baseline, its seeded initialization, and single-beat / batch
inference. The three convolutional layers are the only prunable ones.

Sequence lengths through the chain:
260 -conv(k50,s3)-> 71 -relu- -pool(k2,s3)-> 24 -conv(k7)-> 18 -relu-
-pool(k2,s2)-> 9 -conv(k9)+relu-> 1 -flatten-> 32 -dense(128)+relu- -dense(5)
"""

import copy
import logging
import math
from typing import Any

import numpy as np

from core.exceptions import ShapeError
from data.models import BEAT_LENGTH, NUM_CLASSES, LayerKind, LayerSpec
from utilities.autodiff import DTYPE, Trace, forward, output_length

logger = logging.getLogger(__name__)

BASELINE_LAYERS: list[LayerSpec] = [
    LayerSpec(name="conv1", kind=LayerKind.CONV, in_channels=1, out_channels=128, kernel=50, stride=3),
    LayerSpec(name="relu1", kind=LayerKind.ACTIVATION),
    LayerSpec(name="pool1", kind=LayerKind.POOL, kernel=2, stride=3),
    LayerSpec(name="conv2", kind=LayerKind.CONV, in_channels=128, out_channels=32, kernel=7, stride=1),
    LayerSpec(name="relu2", kind=LayerKind.ACTIVATION),
    LayerSpec(name="pool2", kind=LayerKind.POOL, kernel=2, stride=2),
    LayerSpec(name="conv3", kind=LayerKind.CONV, in_channels=32, out_channels=32, kernel=9, stride=1,
              fused_relu=True),
    LayerSpec(name="flatten", kind=LayerKind.FLATTEN),
    LayerSpec(name="dense1", kind=LayerKind.DENSE, in_channels=32, units=128, fused_relu=True),
    LayerSpec(name="dense2", kind=LayerKind.DENSE, in_channels=128, units=NUM_CLASSES),
]

CONV_OUTPUT_LENGTHS = {"conv1": 71, "conv2": 18, "conv3": 1}

INFERENCE_CHUNK = 256


def weight_shape(spec: LayerSpec) -> tuple[int, ...]:
    if spec.kind == LayerKind.CONV:
        return (spec.out_channels, spec.in_channels, spec.kernel)
    return (spec.units, spec.in_channels)


def bias_shape(spec: LayerSpec) -> tuple[int]:
    return (spec.out_channels if spec.kind == LayerKind.CONV else spec.units,)


def sequence_lengths(specs: list[LayerSpec], length: int = BEAT_LENGTH) -> dict[str, int]:
    """Output sequence length after each conv/pool layer, derived from the shape algebra."""
    lengths = {}
    for spec in specs:
        if spec.kind in (LayerKind.CONV, LayerKind.POOL):
            length = output_length(length, spec.kernel, spec.stride)
            lengths[spec.name] = length
    return lengths


class Model:
    """
    Layer chain plus parameters, per-conv-layer masks and per-group trainability.

    Masked positions are stored as exact 0.0 in the weight tensors; `masks`
    maps a conv layer name to a boolean array congruent with its weight
    (False = pruned).
    """
    def __init__(
        self,
        specs: list[LayerSpec],
        params: dict[str, np.ndarray],
        masks: dict[str, np.ndarray],
        trainable: dict[str, bool],
        seed: int,
        history: list[dict[str, Any]] | None = None,
    ):
        self.specs = specs
        self.params = params
        self.masks = masks
        self.trainable = trainable
        self.seed = seed
        self.history = history or []

    @property
    def prunable_layers(self) -> list[str]:
        return [s.name for s in self.specs if s.prunable]

    @property
    def param_layers(self) -> list[str]:
        return [s.name for s in self.specs if s.has_params]

    def spec(self, name: str) -> LayerSpec:
        for s in self.specs:
            if s.name == name:
                return s
        raise KeyError(name)

    def weight(self, layer: str) -> np.ndarray:
        return self.params[f"{layer}.weight"]

    def copy(self) -> "Model":
        return Model(
            specs=list(self.specs),
            params={k: v.copy() for k, v in self.params.items()},
            masks={k: v.copy() for k, v in self.masks.items()},
            trainable=dict(self.trainable),
            seed=self.seed,
            history=copy.deepcopy(self.history),
        )

    def apply_masks(self):
        """Re-asserts weight = weight * mask with exact zeros at masked positions."""
        for layer, mask in self.masks.items():
            key = f"{layer}.weight"
            self.params[key] = np.where(mask, self.params[key], 0.0)

    def forward(self, x: np.ndarray) -> Trace:
        return forward(self.specs, self.params, x)


def build_baseline(seed: int) -> Model:
    """
    Builds the baseline classifier with scaled uniform fan-in initialization.

    Weights are drawn from U(-sqrt(6/fan_in), sqrt(6/fan_in)) in layer order
    from a generator seeded by `seed`; biases start at zero. All masks are
    all-ones and every group is trainable.
    """
    specs = list(BASELINE_LAYERS)
    lengths = sequence_lengths(specs)
    realized = {name: lengths[name] for name in CONV_OUTPUT_LENGTHS}
    if realized != CONV_OUTPUT_LENGTHS:
        raise ShapeError("baseline conv output lengths", expected=CONV_OUTPUT_LENGTHS, actual=realized)

    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    masks: dict[str, np.ndarray] = {}
    trainable: dict[str, bool] = {}
    for spec in specs:
        if not spec.has_params:
            continue
        shape = weight_shape(spec)
        fan_in = int(np.prod(shape[1:]))
        bound = math.sqrt(6.0 / fan_in)
        params[f"{spec.name}.weight"] = rng.uniform(-bound, bound, size=shape).astype(DTYPE)
        params[f"{spec.name}.bias"] = np.zeros(bias_shape(spec), dtype=DTYPE)
        trainable[spec.name] = True
        if spec.prunable:
            masks[spec.name] = np.ones(shape, dtype=bool)

    logger.debug(f"Built baseline model (seed={seed}, conv lengths={realized})")
    return Model(specs, params, masks, trainable, seed)


def _as_beats(samples: np.ndarray) -> np.ndarray:
    x = np.asarray(samples, dtype=DTYPE)
    if x.ndim == 1:
        x = x[np.newaxis, :]
    if x.ndim == 2:
        x = x[:, np.newaxis, :]
    if x.ndim != 3 or x.shape[1:] != (1, BEAT_LENGTH):
        raise ShapeError("beat input", expected=(1, BEAT_LENGTH), actual=np.asarray(samples).shape)
    return x


def predict(model: Model, beat: np.ndarray) -> tuple[int, np.ndarray]:
    """Classifies one beat ([260] or [1, 260]); ties go to the lowest class index."""
    beat = np.asarray(beat, dtype=DTYPE)
    if beat.shape not in ((BEAT_LENGTH,), (1, BEAT_LENGTH)):
        raise ShapeError("beat input", expected=(1, BEAT_LENGTH), actual=beat.shape)
    probs = model.forward(beat.reshape(1, BEAT_LENGTH)).probs[0]
    return int(np.argmax(probs)), probs


def predict_batch(model: Model, samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Predicted classes and probabilities for an [N, 260] sample matrix."""
    x = _as_beats(samples)
    probs = np.empty((x.shape[0], NUM_CLASSES), dtype=DTYPE)
    for start in range(0, x.shape[0], INFERENCE_CHUNK):
        probs[start:start + INFERENCE_CHUNK] = model.forward(x[start:start + INFERENCE_CHUNK]).probs
    return probs.argmax(axis=1), probs
