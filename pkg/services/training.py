"""
Training Service
================

Mini-batch cross-entropy training of the baseline and the fine-tuning loop
used by the pruning strategies. Masked weights and frozen parameter groups are
never changed; validation loss drives optional early stopping.
"""

import logging
import math

import numpy as np

from core.exceptions import DatasetError, NoTrainableParametersError, NumericError
from data.models import EpochRecord, MetricsRow, TrainConfig, TrainLog
from services.dataset import BeatSet
from services.metrics import confusion, metrics_rows
from services.model_zoo import INFERENCE_CHUNK, Model
from utilities.autodiff import backward, softmax_cross_entropy_batch
from utilities.optim import OptimizerState, optimizer_step

logger = logging.getLogger(__name__)


class EvaluationResult:
    """Confusion matrix, per-class and overall metric rows and mean loss of one evaluation."""
    def __init__(self, cm: np.ndarray, loss: float, rows: list[MetricsRow]):
        self.confusion = cm
        self.loss = loss
        self.per_class = rows[:-1]
        self.overall = rows[-1]

    @property
    def accuracy(self) -> float:
        return self.overall.accuracy

    def to_dict(self) -> dict:
        return {
            "loss": self.loss,
            "confusion": self.confusion.tolist(),
            "per_class": [r.model_dump() for r in self.per_class],
            "overall": self.overall.model_dump(),
        }


def evaluate(model: Model, beats: BeatSet) -> EvaluationResult:
    if len(beats) == 0:
        raise DatasetError("cannot evaluate on an empty beat set", context="evaluate")
    preds = np.empty(len(beats), dtype=np.int64)
    loss_sum = 0.0
    for start in range(0, len(beats), INFERENCE_CHUNK):
        x = beats.samples[start:start + INFERENCE_CHUNK, np.newaxis, :]
        y = beats.labels[start:start + INFERENCE_CHUNK]
        logits = model.forward(x).logits
        loss, _, _ = softmax_cross_entropy_batch(logits, y)
        loss_sum += loss * len(y)
        preds[start:start + len(y)] = logits.argmax(axis=1)
    cm = confusion(preds, beats.labels)
    return EvaluationResult(cm, loss_sum / len(beats), metrics_rows(cm))


def _require(train_set: BeatSet, val_set: BeatSet):
    if len(train_set) == 0:
        raise DatasetError("training set is empty", context="training")
    if len(val_set) == 0:
        raise DatasetError("validation set is empty", context="training")


def _fit(model: Model, train_set: BeatSet, val_set: BeatSet, cfg: TrainConfig, op: str) -> tuple[Model, TrainLog]:
    n = len(train_set)
    batch_size = cfg.batch_size
    if batch_size > n:
        logger.warning(f"Batch size {batch_size} exceeds training set size {n}; using {n}")
        batch_size = n

    rng = np.random.default_rng(cfg.seed)
    state = OptimizerState(cfg.optimizer, model.params)
    x_all = train_set.samples[:, np.newaxis, :]
    y_all = train_set.labels
    log = TrainLog()
    best_loss = math.inf
    best_params: dict[str, np.ndarray] | None = None
    stale = 0

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for b, start in enumerate(range(0, n, batch_size)):
            idx = order[start:start + batch_size]
            grads = backward(model.forward(x_all[idx]), y_all[idx], model.masks)
            if not math.isfinite(grads.loss):
                raise NumericError(f"non-finite loss {grads.loss} at epoch {epoch}, batch {b}",
                                   epoch=epoch, batch=b)
            optimizer_step(model.params, grads, state, model.masks, model.trainable)
            total += grads.loss * len(idx)

        val = evaluate(model, val_set)
        if not math.isfinite(val.loss):
            raise NumericError(f"non-finite validation loss at epoch {epoch}", epoch=epoch)
        record = EpochRecord(epoch=epoch, train_loss=total / n, val_loss=val.loss, val_accuracy=val.accuracy)
        log.epochs.append(record)
        logger.info(
            f"{op} epoch {epoch}/{cfg.epochs}: train_loss={record.train_loss:.4f} "
            f"val_loss={record.val_loss:.4f} val_acc={record.val_accuracy:.4f}",
            extra={"payload": {"op": op, **record.model_dump()}},
        )

        if cfg.patience > 0:
            if val.loss < best_loss:
                best_loss, stale = val.loss, 0
                best_params = {k: v.copy() for k, v in model.params.items()}
                log.best_epoch = epoch
            else:
                stale += 1
                if stale >= cfg.patience:
                    log.stopped_early = True
                    logger.info(f"{op} stopped early at epoch {epoch} (best epoch {log.best_epoch})")
                    break

    if best_params is not None:
        model.params = best_params
    model.history.append({
        "op": op,
        "epochs_run": len(log.epochs),
        "best_epoch": log.best_epoch,
        "config": cfg.model_dump(mode="json"),
        "log": log.model_dump(mode="json"),
    })
    return model, log


def train(model: Model, train_set: BeatSet, val_set: BeatSet, cfg: TrainConfig) -> tuple[Model, TrainLog]:
    """
    Trains a copy of `model`; the input model is left untouched.

    With patience > 0 the returned parameters are those of the epoch with the
    lowest validation loss.
    """
    _require(train_set, val_set)
    return _fit(model.copy(), train_set, val_set, cfg, "train")


def finetune(
    model: Model, trainable: dict[str, bool], train_set: BeatSet, val_set: BeatSet, cfg: TrainConfig
) -> tuple[Model, TrainLog]:
    """Like `train`, but only parameter groups flagged in `trainable` are updated."""
    _require(train_set, val_set)
    flags = {group: bool(trainable.get(group, False)) for group in model.trainable}
    if not any(flags.values()):
        raise NoTrainableParametersError("fine-tuning requested with every parameter group frozen",
                                         context="finetune")
    tuned = model.copy()
    tuned.trainable = flags
    return _fit(tuned, train_set, val_set, cfg, "finetune")
