from __future__ import annotations

from enum import Enum
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class BeatClass(str, Enum):
    """AAMI heartbeat classes; declaration order is the class index."""
    N = "N"
    S = "S"
    V = "V"
    F = "F"
    Q = "Q"

    @property
    def index(self) -> int:
        return CLASS_ORDER.index(self)

    @classmethod
    def from_index(cls, index: int) -> BeatClass:
        return CLASS_ORDER[index]

CLASS_ORDER: list[BeatClass] = list(BeatClass)
NUM_CLASSES = len(CLASS_ORDER)
BEAT_LENGTH = 260

class BeatOrigin(str, Enum):
    REAL = "real"
    SMOTE = "synthetic-smote"
    GENERATED = "synthetic-generated"

class LayerKind(str, Enum):
    CONV = "conv"
    ACTIVATION = "activation"
    POOL = "pool"
    FLATTEN = "flatten"
    DENSE = "dense"

class LayerSpec(BaseModel):
    """One entry of the layer chain. Geometry fields unused by a kind stay None."""
    model_config = ConfigDict(frozen=True)

    name: str
    kind: LayerKind
    in_channels: int | None = None
    out_channels: int | None = None
    kernel: int | None = None
    stride: int | None = None
    units: int | None = None
    fused_relu: bool = False

    @property
    def prunable(self) -> bool:
        return self.kind == LayerKind.CONV

    @property
    def has_params(self) -> bool:
        return self.kind in (LayerKind.CONV, LayerKind.DENSE)

class OptimizerRule(str, Enum):
    SGD = "sgd"
    ADAM = "adam"

class OptimizerConfig(BaseModel):
    rule: OptimizerRule = OptimizerRule.ADAM
    lr: float = Field(default=1e-3, ge=0.0)
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    eps: float = Field(default=1e-8, gt=0.0)

class TrainConfig(BaseModel):
    epochs: int = Field(default=50, gt=0)
    batch_size: int = Field(default=32, gt=0)
    patience: int = Field(default=5, ge=0)  # 0 disables early stopping
    seed: int = 7
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)

class Strategy(str, Enum):
    SIMPLE = "simple"
    FINETUNE = "finetune"
    MULTISTAGE = "multistage"

class StrategyConfig(BaseModel):
    strategy: Strategy = Strategy.SIMPLE
    sparsity: float = Field(default=0.0, ge=0.0, le=1.0)
    finetune_epochs: int = Field(default=10, gt=0)
    batch_size: int = Field(default=32, gt=0)
    patience: int = Field(default=5, ge=0)
    seed: int = 7
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)

    def finetune_config(self, seed: int | None = None) -> TrainConfig:
        return TrainConfig(
            epochs=self.finetune_epochs,
            batch_size=self.batch_size,
            patience=self.patience,
            seed=self.seed if seed is None else seed,
            optimizer=self.optimizer,
        )

class EpochRecord(BaseModel):
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float

class TrainLog(BaseModel):
    epochs: list[EpochRecord] = Field(default_factory=list)
    best_epoch: int | None = None
    stopped_early: bool = False

class MetricsRow(BaseModel):
    """Accuracy, sensitivity, specificity, precision and F1 as fractions in [0, 1]."""
    label: str
    accuracy: float
    sensitivity: float
    specificity: float
    precision: float
    f1: float
    degenerate: list[str] = Field(default_factory=list)

    @field_validator("accuracy", "sensitivity", "specificity", "precision", "f1")
    @classmethod
    def _unit_interval(cls, v: float) -> float:
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"metric {v} outside [0, 1]")
        return v

class SweepRow(BaseModel):
    strategy: Strategy
    eta: float
    accuracy: float | None = None
    sensitivity: float | None = None
    precision: float | None = None
    f1: float | None = None
    loss: float | None = None
    flops: int
    error: str | None = None

class ReportMetadata(BaseModel):
    seed: int
    config_hash: str
    artifact_version: str
    strategies: list[Strategy]
    sparsities: list[float]
    accuracy_mode: str = "multiclass trace / total"
    overall_mode: str = "binary collapse: negative = N, positive = S, V, F, Q"
    flops_mode: str = "table formula 917440*(1-eta)+19136"
    warnings: list[str] = Field(default_factory=list)

class SweepReport(BaseModel):
    metadata: ReportMetadata
    baseline: dict[str, Any] | None = None
    rows: list[SweepRow] = Field(default_factory=list)

    @model_validator(mode='after')
    def _sorted_rows(self) -> SweepReport:
        order = {s: i for i, s in enumerate(Strategy)}
        self.rows.sort(key=lambda r: (order[r.strategy], r.eta))
        return self

class SmoteProvenance(BaseModel):
    """Records how a SMOTE sample was built: base + lam * (neighbor - base)."""
    record_index: int
    base_index: int
    neighbor_index: int
    lam: float
