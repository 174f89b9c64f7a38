"""Constants for the anomaly detection pipeline."""

from typing import Dict, List, Tuple

from src.models.enums import AblationVariant, Category

METHOD_NAME = "CLAD"

# Tokenizer
UNK_TOKEN = "<unk>"
UNK_ID = 0

# Synthetic descriptors: one fixed sentence per category
DESCRIPTOR_TEMPLATE = "uniform {category} texture no defects"
SYNTHETIC_CATEGORIES: List[Category] = [
    Category.STRIPES,
    Category.CHECKER,
    Category.BLOTCH,
    Category.GRADIENT,
]


def _default_vocab() -> List[str]:
    vocab = [UNK_TOKEN]
    for category in SYNTHETIC_CATEGORIES:
        for token in DESCRIPTOR_TEMPLATE.format(category=category.value).split():
            if token not in vocab:
                vocab.append(token)
    return vocab


DEFAULT_VOCAB: List[str] = _default_vocab()

# Synthetic generator
DEFAULT_COUNTS: Tuple[int, int, int] = (64, 16, 16)   # train, test normal, test anomalous
DEFAULT_VAL_COUNTS: Tuple[int, int] = (8, 8)          # validation normal, anomalous
DEFAULT_IMAGE_SIZE = 64
PIXEL_JITTER = 0.05
CHECKER_CELL = 8
DEFECT_COUNT_RANGE = (1, 3)                 # inclusive
DEFECT_OFFSET_RANGE = (0.3, 0.6)
MAX_MASK_FRACTION = 0.25
# Defect extents as fractions of the image side
RECT_SIDE_RANGE = (1 / 8, 1 / 4)
ELLIPSE_RADIUS_RANGE = (1 / 16, 1 / 8)
SCRATCH_LENGTH_RANGE = (1 / 4, 1 / 2)
SCRATCH_HALF_WIDTH = 1.0

# Network layout
ENCODER_CHANNELS = (8, 16, 16)
DECODER_CHANNELS = (16, 16, 8)
KERNEL_SIZE = 3

# Adam
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8

# Scoring
THRESHOLD_PERCENTILE = 5.0
DEFAULT_THRESHOLD = 0.5   # Used when no threshold was calibrated

# Evaluation
IOU_CUTOFFS: List[float] = [round(0.05 * k, 2) for k in range(1, 20)]

ABLATION_VARIANTS: List[AblationVariant] = [
    AblationVariant.FULL,
    AblationVariant.NO_CONTRASTIVE,
    AblationVariant.NO_FINETUNE,
    AblationVariant.SHALLOW_ENCODER,
]

REPORT_CSV_COLUMNS: List[str] = [
    "name",
    "image_auc_mean",
    "image_auc_std",
    "pixel_auc_mean",
    "pixel_auc_std",
    "iou",
]

# Checkpoints
CHECKPOINT_FORMAT = "CLAD-CKPT v1"
# Blob encoding per Config.precision
BLOB_DTYPES: Dict[str, str] = {"float32": "<f4", "float64": "<f8"}

# Dataset directory layout
META_FILENAME = "meta.json"
SPLIT_DIRS: Dict[str, str] = {
    "train_normal": "train/normal",
    "test_normal": "test/normal",
    "test_anomalous": "test/anomalous",
    "val_normal": "val/normal",
    "val_anomalous": "val/anomalous",
}
MASK_DIRS: Dict[str, str] = {
    "test_anomalous": "test/masks",
    "val_anomalous": "val/masks",
}
