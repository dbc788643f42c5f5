"""
Beat Dataset Service
====================

This module handles pre-segmented heartbeat ingestion (beat-CSV), seeded
stratified partitioning and SMOTE class balancing of the training partition.

Beat-CSV: one beat per line, `label,s1,...,s260`, UTF-8, decimal floats,
lines starting with '#' are comments. Labels are the AAMI letters N S V F Q.
"""

import logging
import math
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator
from sklearn.neighbors import NearestNeighbors

from core.exceptions import BeatFormatError, DatasetError, LabelError
from core.persistence import atomic_write_bytes
from data.models import BEAT_LENGTH, CLASS_ORDER, NUM_CLASSES, BeatClass, BeatOrigin, SmoteProvenance

logger = logging.getLogger(__name__)

_ORIGINS = list(BeatOrigin)


class BeatRecord(BaseModel):
    """One labeled heartbeat of 260 samples."""
    model_config = ConfigDict(frozen=True)

    samples: tuple[float, ...]
    label: BeatClass
    origin: BeatOrigin = BeatOrigin.REAL

    @field_validator("samples")
    @classmethod
    def _check_samples(cls, v: tuple[float, ...]) -> tuple[float, ...]:
        if len(v) != BEAT_LENGTH:
            raise ValueError(f"expected {BEAT_LENGTH} samples, got {len(v)}")
        if not all(math.isfinite(s) for s in v):
            raise ValueError("samples must be finite")
        return v


class BeatSet:
    """
    Immutable collection of beats held as arrays.

    samples: [n, 260] float64; labels: [n] class indices; origins: [n] indices
    into BeatOrigin. `provenance` lists how each SMOTE-generated record was built;
    `warnings` carries data-quality notes (e.g. from splitting) forward to reports.
    """
    def __init__(
        self,
        samples: np.ndarray,
        labels: np.ndarray,
        origins: np.ndarray | None = None,
        provenance: list[SmoteProvenance] | None = None,
        warnings: list[str] | None = None,
    ):
        samples = np.array(samples, dtype=np.float64).reshape(-1, BEAT_LENGTH)
        labels = np.array(labels, dtype=np.int64).reshape(-1)
        if samples.shape[0] != labels.shape[0]:
            raise DatasetError(f"{samples.shape[0]} sample rows but {labels.shape[0]} labels")
        if not np.all(np.isfinite(samples)):
            raise DatasetError("beat samples must be finite")
        if labels.size and (labels.min() < 0 or labels.max() >= NUM_CLASSES):
            raise LabelError(f"beat labels must lie in [0, {NUM_CLASSES})")
        if origins is None:
            origins = np.zeros(labels.shape[0], dtype=np.int64)
        self.samples = samples
        self.labels = labels
        self.origins = np.array(origins, dtype=np.int64).reshape(-1)
        self.provenance = provenance or []
        self.warnings = list(warnings or [])
        for arr in (self.samples, self.labels, self.origins):
            arr.setflags(write=False)

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def histogram(self) -> dict[BeatClass, int]:
        counts = np.bincount(self.labels, minlength=NUM_CLASSES)
        return {cls: int(counts[i]) for i, cls in enumerate(CLASS_ORDER)}

    @classmethod
    def from_records(cls, records: list[BeatRecord]) -> "BeatSet":
        return cls(
            samples=np.array([r.samples for r in records], dtype=np.float64).reshape(-1, BEAT_LENGTH),
            labels=np.array([r.label.index for r in records], dtype=np.int64),
            origins=np.array([_ORIGINS.index(r.origin) for r in records], dtype=np.int64),
        )

    def records(self) -> list[BeatRecord]:
        return [
            BeatRecord(samples=tuple(self.samples[i].tolist()), label=CLASS_ORDER[self.labels[i]],
                       origin=_ORIGINS[self.origins[i]])
            for i in range(len(self))
        ]

    def subset(self, indices: np.ndarray) -> "BeatSet":
        indices = np.asarray(indices, dtype=np.int64)
        return BeatSet(self.samples[indices], self.labels[indices], self.origins[indices], warnings=self.warnings)


# ---------------------------------------------------------------------------
# Beat-CSV
# ---------------------------------------------------------------------------

def load_beats(path: str | Path) -> BeatSet:
    """Parses a beat-CSV file; any bad row raises BeatFormatError naming its line."""
    tokens = {c.value: c.index for c in CLASS_ORDER}
    rows: list[list[float]] = []
    labels: list[int] = []
    with open(path, "rb") as f:
        for line_no, raw_bytes in enumerate(f, start=1):
            try:
                raw = raw_bytes.decode("utf-8-sig" if line_no == 1 else "utf-8")
            except UnicodeDecodeError as e:
                raise BeatFormatError(f"invalid UTF-8 at byte {e.start}: {e.reason}", line_no, str(path)) from e
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = [x.strip() for x in line.split(",")]
            label = fields[0]
            if label not in tokens:
                raise BeatFormatError(f"unknown label token {label!r}", line_no, str(path))
            if len(fields) - 1 != BEAT_LENGTH:
                raise BeatFormatError(f"expected {BEAT_LENGTH} samples, got {len(fields) - 1}", line_no, str(path))
            try:
                values = [float(x) for x in fields[1:]]
            except ValueError as e:
                raise BeatFormatError(f"non-numeric sample: {e}", line_no, str(path)) from e
            if not all(math.isfinite(v) for v in values):
                raise BeatFormatError("NaN/Inf sample value", line_no, str(path))
            rows.append(values)
            labels.append(tokens[label])

    beats = BeatSet(np.array(rows, dtype=np.float64).reshape(-1, BEAT_LENGTH), np.array(labels, dtype=np.int64))
    logger.info(f"Loaded {len(beats)} beats from {path}: {_fmt_hist(beats)}")
    return beats


def save_beats(beats: BeatSet, path: str | Path) -> Path:
    """Writes a beat-CSV with shortest round-trip decimals, so load_beats(save_beats(x)) == x."""
    lines = [f"# {len(beats)} beats, label,s1..s{BEAT_LENGTH}"]
    for i in range(len(beats)):
        values = ",".join(repr(v) for v in beats.samples[i].tolist())
        lines.append(f"{CLASS_ORDER[beats.labels[i]].value},{values}")
    return atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("utf-8"))


def _fmt_hist(beats: BeatSet) -> str:
    return " ".join(f"{c.value}={n}" for c, n in beats.histogram.items())


# ---------------------------------------------------------------------------
# Splitting
# ---------------------------------------------------------------------------

def largest_remainder(total: int, fractions: list[float]) -> list[int]:
    """Integer allocation of `total` proportional to `fractions`; ties go to the earlier partition."""
    quotas = [total * f for f in fractions]
    counts = [math.floor(q + 1e-9) for q in quotas]
    remainders = [q - c for q, c in zip(quotas, counts)]
    for i in sorted(range(len(fractions)), key=lambda i: (-remainders[i], i))[: max(0, total - sum(counts))]:
        counts[i] += 1
    return counts


def stratified_split(
    beats: BeatSet, fractions: tuple[float, ...] = (0.7, 0.15, 0.15), seed: int = 0
) -> tuple[BeatSet, ...]:
    """
    Per-class proportional partition (default train/val/test = 70/15/15).

    Class members are put in a canonical order (lexicographic by samples)
    before the seeded shuffle, so the result depends on the multiset of beats
    and not on their order in the input. A class with fewer records than
    partitions is noted in every partition's `warnings`.
    """
    if any(f <= 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise DatasetError(f"split fractions must be positive and sum to 1, got {fractions}")

    rng = np.random.default_rng(seed)
    parts: list[list[int]] = [[] for _ in fractions]
    warnings: list[str] = []
    for cls_index in range(NUM_CLASSES):
        members = np.flatnonzero(beats.labels == cls_index)
        if members.size == 0:
            continue
        if members.size < len(fractions):
            message = f"class {CLASS_ORDER[cls_index].value} has {members.size} records for {len(fractions)} partitions"
            warnings.append(message)
            logger.warning(
                message,
                extra={"payload": {"class": CLASS_ORDER[cls_index].value, "count": int(members.size)}},
            )
        canonical = members[np.lexsort(beats.samples[members].T[::-1])]
        shuffled = canonical[rng.permutation(members.size)]
        start = 0
        for part, n in zip(parts, largest_remainder(int(members.size), list(fractions))):
            part.extend(shuffled[start:start + n].tolist())
            start += n

    partitions = tuple(beats.subset(np.array(sorted(p), dtype=np.int64)) for p in parts)
    for partition in partitions:
        partition.warnings.extend(warnings)
    return partitions


# ---------------------------------------------------------------------------
# SMOTE
# ---------------------------------------------------------------------------

def smote_balance(beats: BeatSet, k: int = 5, seed: int = 0) -> BeatSet:
    """
    Over-samples every minority class up to the majority count.

    Each synthetic beat is x + lam * (x_nn - x) for a seeded-random class
    member x, one of its k nearest same-class neighbours x_nn (Euclidean) and
    lam ~ U[0, 1). Original records are kept unchanged and in place; synthetic
    ones are appended class by class.
    """
    if k < 1:
        raise DatasetError(f"SMOTE neighbour count must be >= 1, got {k}")
    counts = np.bincount(beats.labels, minlength=NUM_CLASSES)
    majority = int(counts.max()) if len(beats) else 0
    rng = np.random.default_rng(seed)

    new_samples: list[np.ndarray] = []
    new_labels: list[int] = []
    provenance: list[SmoteProvenance] = []
    next_index = len(beats)

    for cls_index in range(NUM_CLASSES):
        n_cls = int(counts[cls_index])
        needed = majority - n_cls
        if needed <= 0:
            continue
        cls = CLASS_ORDER[cls_index].value
        if n_cls == 0:
            logger.warning(f"Class {cls} absent from training data; cannot over-sample")
            continue
        if n_cls == 1:
            raise DatasetError(f"SMOTE needs at least 2 records of class {cls} to interpolate, found 1")

        members = np.flatnonzero(beats.labels == cls_index)
        X = beats.samples[members]
        k_eff = min(k, n_cls - 1)
        nn = NearestNeighbors(n_neighbors=k_eff + 1).fit(X)
        neighbours = nn.kneighbors(X, return_distance=False)
        neighbour_lists = []
        for row, candidates in enumerate(neighbours):
            others = [c for c in candidates if c != row][:k_eff]
            neighbour_lists.append(others)

        for _ in range(needed):
            base = int(rng.integers(n_cls))
            nb = int(neighbour_lists[base][int(rng.integers(len(neighbour_lists[base])))])
            lam = float(rng.random())
            new_samples.append(X[base] + lam * (X[nb] - X[base]))
            new_labels.append(cls_index)
            provenance.append(SmoteProvenance(
                record_index=next_index, base_index=int(members[base]), neighbor_index=int(members[nb]), lam=lam,
            ))
            next_index += 1
        logger.info(f"SMOTE generated {needed} beats for class {cls} (k={k_eff})")

    if not new_samples:
        return beats
    smote_origin = _ORIGINS.index(BeatOrigin.SMOTE)
    return BeatSet(
        np.vstack([beats.samples, np.array(new_samples)]),
        np.concatenate([beats.labels, np.array(new_labels, dtype=np.int64)]),
        np.concatenate([beats.origins, np.full(len(new_labels), smote_origin, dtype=np.int64)]),
        provenance=list(beats.provenance) + provenance,
        warnings=beats.warnings,
    )
