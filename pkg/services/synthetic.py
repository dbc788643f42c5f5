"""
Synthetic Beat Generator
========================

Builds ECG-like 260-sample beats from per-class morphology templates so the
whole pipeline can run without MIT-BIH. Each template is a sum of Gaussian
bumps (P wave, QRS deflections, T wave) around the window centre.

The five templates share the normal beat's layout and differ by small shifts
of QRS width, bump amplitude and wave position, so the classes overlap once
beats vary. Every generated beat jitters its bumps (amplitude, width, offset)
and its overall gain and baseline, then gets white noise. All of that
variability scales with `sigma`; at sigma=0 every beat equals its template.
"""

import logging
from collections.abc import Mapping, Sequence

import numpy as np

from core.exceptions import ConfigError
from data.models import BEAT_LENGTH, CLASS_ORDER, NUM_CLASSES, BeatClass, BeatOrigin
from services.dataset import BeatSet

logger = logging.getLogger(__name__)

CENTER = BEAT_LENGTH // 2

# (offset from centre in samples, width in samples, amplitude)
MORPHOLOGIES: dict[BeatClass, list[tuple[float, float, float]]] = {
    # narrow upright QRS, upright P and T
    BeatClass.N: [(-70, 10, 0.15), (-10, 3, -0.15), (0, 4, 1.0), (10, 3, -0.2), (80, 18, 0.35)],
    # premature: shallow inverted P nearer the QRS, slightly smaller R
    BeatClass.S: [(-50, 9, -0.08), (-10, 3, -0.15), (0, 4, 0.9), (10, 3, -0.2), (78, 18, 0.33)],
    # no P, wider QRS, taller late T
    BeatClass.V: [(-10, 4, -0.12), (0, 7, 0.95), (12, 4, -0.25), (84, 22, 0.45)],
    # fusion: small P, QRS between N and V width, deeper S
    BeatClass.F: [(-70, 10, 0.08), (-10, 3, -0.12), (0, 5.5, 0.85), (12, 4, -0.35), (80, 19, 0.3)],
    # paced: small spike before a widened QRS, flattened T
    BeatClass.Q: [(-20, 1.5, 0.4), (-10, 3, -0.1), (0, 6, 0.95), (11, 3, -0.2), (85, 20, 0.12)],
}

# per-unit-sigma spread of the per-beat variations
AMPLITUDE_JITTER = 2.0   # relative
WIDTH_JITTER = 2.0       # relative
OFFSET_JITTER = 20.0     # samples
GAIN_JITTER = 2.0        # relative, whole beat
BASELINE_JITTER = 1.0    # absolute, whole beat


def beat_template(cls: BeatClass) -> np.ndarray:
    t = np.arange(BEAT_LENGTH, dtype=np.float64)
    beat = np.zeros(BEAT_LENGTH, dtype=np.float64)
    for offset, width, amp in MORPHOLOGIES[cls]:
        beat += amp * np.exp(-0.5 * ((t - (CENTER + offset)) / width) ** 2)
    return beat


def _jittered_beats(cls: BeatClass, n: int, sigma: float, rng: np.random.Generator) -> np.ndarray:
    t = np.arange(BEAT_LENGTH, dtype=np.float64)[np.newaxis, :]
    beats = np.zeros((n, BEAT_LENGTH), dtype=np.float64)
    for offset, width, amp in MORPHOLOGIES[cls]:
        a = amp * (1.0 + AMPLITUDE_JITTER * sigma * rng.normal(size=(n, 1)))
        w = width * np.maximum(1.0 + WIDTH_JITTER * sigma * rng.normal(size=(n, 1)), 0.25)
        c = CENTER + offset + OFFSET_JITTER * sigma * rng.normal(size=(n, 1))
        beats += a * np.exp(-0.5 * ((t - c) / w) ** 2)
    gain = 1.0 + GAIN_JITTER * sigma * rng.normal(size=(n, 1))
    baseline = BASELINE_JITTER * sigma * rng.normal(size=(n, 1))
    noise = sigma * rng.normal(size=(n, BEAT_LENGTH))
    return gain * beats + baseline + noise


def generate_synthetic(
    counts: Mapping[BeatClass, int] | Sequence[int], seed: int = 0, sigma: float = 0.05
) -> BeatSet:
    """
    Generates `counts` beats per class (N, S, V, F, Q order for sequences).

    With sigma=0 every beat of a class equals its template.
    """
    if isinstance(counts, Mapping):
        per_class = [int(counts.get(c, 0)) for c in CLASS_ORDER]
    else:
        per_class = [int(n) for n in counts]
    if len(per_class) != NUM_CLASSES or any(n < 0 for n in per_class):
        raise ConfigError(f"expected {NUM_CLASSES} non-negative class counts, got {per_class}")
    if sigma < 0:
        raise ConfigError(f"noise sigma must be >= 0, got {sigma}")

    rng = np.random.default_rng(seed)
    blocks, labels = [], []
    for cls, n in zip(CLASS_ORDER, per_class):
        if sigma == 0:
            blocks.append(np.tile(beat_template(cls), (n, 1)))
        else:
            blocks.append(_jittered_beats(cls, n, sigma, rng))
        labels.append(np.full(n, cls.index, dtype=np.int64))

    origin = list(BeatOrigin).index(BeatOrigin.GENERATED)
    total = sum(per_class)
    beats = BeatSet(
        np.vstack(blocks) if total else np.empty((0, BEAT_LENGTH)),
        np.concatenate(labels),
        np.full(total, origin, dtype=np.int64),
    )
    logger.info(f"Generated {total} synthetic beats (seed={seed}, sigma={sigma})")
    return beats
