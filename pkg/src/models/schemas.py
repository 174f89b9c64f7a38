"""Pydantic schemas for the anomaly detection pipeline."""

import math
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.config.constants import ABLATION_VARIANTS, DEFAULT_VOCAB, UNK_TOKEN
from src.models.enums import GateResult, NegativePairs, Precision, TrainingStage, Verdict


# ============================================================================
# Configuration
# ============================================================================

class Config(BaseModel):
    """Model, loss and optimizer hyperparameters.

    The JSON form uses exactly these field names, with `lambda` for the
    reconstruction weight. `defect_exposure` is the fraction of every
    training batch that is also encoded with synthetic defects; those
    embeddings are pushed at least `defect_margin` away from the batch texts.
    """

    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)

    embed_dim: int = Field(default=32, gt=0)
    image_size: int = Field(default=64, gt=0)
    channels: int = 1
    vocab: List[str] = Field(default_factory=lambda: list(DEFAULT_VOCAB))
    token_dim: int = Field(default=16, gt=0)
    alpha: float = Field(default=0.2, ge=0.0)
    beta: float = Field(default=1.0, gt=0.0)
    sigma: float = Field(default=1.0, gt=0.0)
    lambda_: float = Field(default=0.1, ge=0.0, alias="lambda")
    lr: float = Field(default=1e-3, ge=0.0)
    batch_size: int = Field(default=8, gt=0)
    epochs_pretrain: int = Field(default=20, ge=0)
    epochs_finetune: int = Field(default=30, ge=0)
    seed: int = Field(default=42, ge=0, lt=2 ** 64)

    precision: Precision = Precision.FLOAT32
    encoder_depth: int = 3
    use_contrastive: bool = True
    negative_pairs: NegativePairs = NegativePairs.ALL
    defect_exposure: float = Field(default=0.5, ge=0.0, le=1.0)
    defect_margin: float = Field(default=3.0, gt=0.0)
    threshold_percentile: float = Field(default=5.0, gt=0.0, lt=100.0)

    @field_validator("channels")
    @classmethod
    def validate_channels(cls, v):
        """Only grayscale and RGB images are supported."""
        if v not in (1, 3):
            raise ValueError("channels must be 1 or 3")
        return v

    @field_validator("encoder_depth")
    @classmethod
    def validate_encoder_depth(cls, v):
        """Full encoder has three conv stages, the shallow variant one."""
        if v not in (1, 3):
            raise ValueError("encoder_depth must be 1 or 3")
        return v

    @field_validator("image_size")
    @classmethod
    def validate_image_size(cls, v):
        """The encoder halves the resolution three times."""
        if v % 8 != 0:
            raise ValueError("image_size must be divisible by 8")
        return v

    @field_validator("vocab")
    @classmethod
    def validate_vocab(cls, v):
        """Vocabulary is nonempty, duplicate-free and starts with the UNK token."""
        if len(set(v)) != len(v):
            raise ValueError("vocab must not contain duplicates")
        if not v or v[0] != UNK_TOKEN:
            if UNK_TOKEN in v:
                raise ValueError(f"{UNK_TOKEN} must be the first vocab entry")
            v = [UNK_TOKEN] + list(v)
        return v

    @model_validator(mode="after")
    def validate_margins(self):
        """Margins grow from positive pairs to negatives to synthetic defects."""
        if not self.beta > self.alpha:
            raise ValueError(f"beta ({self.beta}) must be greater than alpha ({self.alpha})")
        if self.defect_exposure > 0 and not self.defect_margin > self.beta:
            raise ValueError(
                f"defect_margin ({self.defect_margin}) must be greater than beta ({self.beta})"
            )
        return self

    @property
    def dtype(self) -> str:
        return self.precision.value

    @property
    def feature_size(self) -> int:
        """Side of the last encoder activation map."""
        return self.image_size // (2 ** self.encoder_depth)

    def with_updates(self, **updates) -> "Config":
        """Validated copy with some fields replaced (field names, not aliases)."""
        data = self.model_dump()
        data.update(updates)
        return Config.model_validate(data)

    def to_json_dict(self) -> dict:
        """JSON-compatible dict keyed by the config-file field names."""
        return self.model_dump(mode="json", by_alias=True)


# ============================================================================
# Gate Check Models
# ============================================================================

class GateCheckResult(BaseModel):
    """Result of an integrity gate check on one dataset file."""

    sample_id: str
    gate_name: str
    gate_result: GateResult
    gate_reason: str

    @property
    def passed(self) -> bool:
        """Check if gate passed."""
        return self.gate_result == GateResult.PASS


class DatasetMeta(BaseModel):
    """Contents of a dataset root's meta.json."""

    model_config = ConfigDict(extra="forbid")

    category: str
    descriptor: str
    image_size: int = Field(gt=0)
    channels: int

    @field_validator("channels")
    @classmethod
    def validate_channels(cls, v):
        if v not in (1, 3):
            raise ValueError("channels must be 1 or 3")
        return v


# ============================================================================
# Training Models
# ============================================================================

class LossBreakdown(BaseModel):
    """Loss terms for one batch (or an epoch mean).

    total == contrastive + exposure + lambda * reconstruction.
    """

    contrastive: float = Field(ge=0.0)
    exposure: float = Field(default=0.0, ge=0.0)
    reconstruction: float = Field(ge=0.0)
    total: float
    batch_size: int = Field(gt=0)

    @field_validator("total")
    @classmethod
    def validate_total(cls, v):
        """Losses must stay finite."""
        if not math.isfinite(v):
            raise ValueError("total loss must be finite")
        return v


class EpochLoss(BaseModel):
    """Mean loss breakdown of one epoch, tagged with its training stage."""

    stage: TrainingStage
    epoch: int = Field(ge=0)
    loss: LossBreakdown


# ============================================================================
# Scoring Models
# ============================================================================

class ScoreResult(BaseModel):
    """Anomaly score of one image against its description."""

    score: float = Field(gt=0.0, le=1.0)
    squared_distance: float = Field(ge=0.0)
    verdict: Verdict
    threshold: float


# ============================================================================
# Evaluation Models
# ============================================================================

class SampleScore(BaseModel):
    """Per-sample record in an evaluation report."""

    id: str
    score: float
    squared_distance: float
    label: Verdict
    verdict: Verdict


class EvalReport(BaseModel):
    """Image- and pixel-level metrics for one trained model on one dataset."""

    method: str
    category: str
    image_auc: float = Field(ge=0.0, le=1.0)
    pixel_auc: float = Field(ge=0.0, le=1.0)
    iou: float = Field(ge=0.0, le=1.0)
    iou_cutoff: float = Field(ge=0.0, le=1.0)
    accuracy: float = Field(ge=0.0, le=1.0)
    pixel_precision: float = Field(ge=0.0, le=1.0)
    pixel_recall: float = Field(ge=0.0, le=1.0)
    threshold: float
    samples: List[SampleScore] = Field(default_factory=list)
    config_hash: str
    seed: int
    runtime_seconds: float = 0.0


class VariantSummary(BaseModel):
    """Mean and sample standard deviation of one ablation variant over seeds."""

    name: str
    reports: List[EvalReport]
    image_auc_mean: float
    image_auc_std: float
    pixel_auc_mean: float
    pixel_auc_std: float
    iou_mean: float
    iou_std: float


class AblationResult(BaseModel):
    """Per-variant summaries of a multi-seed ablation."""

    seeds: List[int]
    variants: Dict[str, VariantSummary]

    @field_validator("variants")
    @classmethod
    def validate_variants(cls, v):
        """Exactly the four ablation variants are present."""
        expected = {variant.value for variant in ABLATION_VARIANTS}
        if set(v) != expected:
            raise ValueError(f"variants must be exactly {sorted(expected)}, got {sorted(v)}")
        return v


class CheckpointMetadata(BaseModel):
    """Training metadata stored in a checkpoint manifest."""

    epochs_completed: int = Field(ge=0)
    step: int = Field(ge=0)
    seed: int
    final_loss: Optional[LossBreakdown] = None
    loss_history: List[EpochLoss] = Field(default_factory=list)
    rng_state: List[int]
    threshold: Optional[float] = None
