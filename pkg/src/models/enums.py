"""Enums for the anomaly detection pipeline."""

from enum import Enum


class GateResult(str, Enum):
    """Result of a gate check."""
    PASS = "PASS"
    FAIL = "FAIL"


class Verdict(str, Enum):
    """Normal/anomalous decision, used for both ground truth and predictions."""
    NORMAL = "normal"
    ANOMALOUS = "anomalous"


class Category(str, Enum):
    """Synthetic texture categories."""
    STRIPES = "stripes"
    CHECKER = "checker"
    BLOTCH = "blotch"
    GRADIENT = "gradient"


class DefectShape(str, Enum):
    """Shapes injected into anomalous synthetic samples."""
    RECTANGLE = "rectangle"
    ELLIPSE = "ellipse"
    SCRATCH = "scratch"


class Precision(str, Enum):
    """Floating point width for parameters and activations."""
    FLOAT32 = "float32"   # Training default
    FLOAT64 = "float64"   # Gradient checks


class TrainingStage(str, Enum):
    """Stages of the two-stage optimization."""
    PRETRAIN = "pretrain"     # Mixed synthetic categories
    FINETUNE = "finetune"     # Target category only


class AblationVariant(str, Enum):
    """Model variants compared by the ablation runner."""
    FULL = "full"
    NO_CONTRASTIVE = "no_contrastive"
    NO_FINETUNE = "no_finetune"
    SHALLOW_ENCODER = "shallow_encoder"


class NegativePairs(str, Enum):
    """Which cross pairs of a batch the contrastive loss pushes apart."""
    ALL = "all"                       # Every (visual i, textual j != i) pair
    DISTINCT_TEXT = "distinct_text"   # Only pairs whose descriptions differ
