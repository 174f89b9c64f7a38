"""Procedural industrial-texture datasets with injected defects.

Every sample draws from its own xoshiro256** stream derived from
(seed, category, split, index), so the clean texture behind any anomalous
sample can be regenerated on its own with `clean_image`.
"""

import logging
import math
from typing import Callable, Dict, List, Sequence, Tuple, Union

import numpy as np
from scipy.ndimage import gaussian_filter

from src.config.constants import (
    CHECKER_CELL,
    DEFAULT_COUNTS,
    DEFAULT_IMAGE_SIZE,
    DEFAULT_VAL_COUNTS,
    DEFECT_COUNT_RANGE,
    DEFECT_OFFSET_RANGE,
    DESCRIPTOR_TEMPLATE,
    ELLIPSE_RADIUS_RANGE,
    MAX_MASK_FRACTION,
    PIXEL_JITTER,
    RECT_SIDE_RANGE,
    SCRATCH_HALF_WIDTH,
    SCRATCH_LENGTH_RANGE,
    SYNTHETIC_CATEGORIES,
)
from src.data.dataset import Dataset, Sample
from src.data.tokenizer import build_vocab, tokenize
from src.models.enums import Category, DefectShape, Verdict
from src.models.exceptions import UsageError
from src.numerics.rng import MASK64, SplitMix64, Xoshiro256

logger = logging.getLogger(__name__)

SPLIT_CODES: Dict[str, int] = {
    "train_normal": 0,
    "test_normal": 1,
    "test_anomalous": 2,
    "val_normal": 3,
    "val_anomalous": 4,
}

SPLIT_IDS: Dict[str, str] = {
    "train_normal": "train/normal",
    "test_normal": "test/normal",
    "test_anomalous": "test/anomalous",
    "val_normal": "val/normal",
    "val_anomalous": "val/anomalous",
}

DEFECT_SHAPES = [DefectShape.RECTANGLE, DefectShape.ELLIPSE, DefectShape.SCRATCH]


def parse_category(category: Union[str, Category]) -> Category:
    try:
        return Category(category)
    except ValueError:
        valid = ", ".join(c.value for c in SYNTHETIC_CATEGORIES)
        raise UsageError(f"Unknown category '{category}' (expected one of: {valid})") from None


def descriptor_for(category: Union[str, Category]) -> str:
    return DESCRIPTOR_TEMPLATE.format(category=parse_category(category).value)


def _sample_seed(seed: int, category: Category, split: str, index: int) -> int:
    category_code = SYNTHETIC_CATEGORIES.index(category)
    key = (seed + (category_code << 40) + (SPLIT_CODES[split] << 32) + index) & MASK64
    return SplitMix64(key).next_u64()


# ----------------------------------------------------------------------------
# Base textures, values in [0, 1] before jitter
# ----------------------------------------------------------------------------

def _stripes(rng: Xoshiro256, size: int) -> np.ndarray:
    phase = rng.uniform(0.0, 2.0 * math.pi)
    period = size / 8.0
    rows = 0.5 + 0.4 * np.sin(2.0 * math.pi * np.arange(size) / period + phase)
    return np.repeat(rows[:, None], size, axis=1)


def _checker(rng: Xoshiro256, size: int) -> np.ndarray:
    offset_y = rng.integers(0, CHECKER_CELL)
    offset_x = rng.integers(0, CHECKER_CELL)
    y, x = np.mgrid[0:size, 0:size]
    parity = ((y + offset_y) // CHECKER_CELL + (x + offset_x) // CHECKER_CELL) % 2
    return np.where(parity == 0, 0.25, 0.75)


def _blotch(rng: Xoshiro256, size: int) -> np.ndarray:
    noise = rng.numpy_generator().random((size, size))
    smooth = gaussian_filter(noise, sigma=size / 16.0, mode="wrap")
    low, high = smooth.min(), smooth.max()
    if high - low < 1e-12:
        return np.full((size, size), 0.5)
    return 0.2 + 0.6 * (smooth - low) / (high - low)


def _gradient(rng: Xoshiro256, size: int) -> np.ndarray:
    ramp = 0.1 + 0.8 * np.arange(size) / (size - 1)
    return np.repeat(ramp[None, :], size, axis=0)


BASE_TEXTURES: Dict[Category, Callable[[Xoshiro256, int], np.ndarray]] = {
    Category.STRIPES: _stripes,
    Category.CHECKER: _checker,
    Category.BLOTCH: _blotch,
    Category.GRADIENT: _gradient,
}


def _render_clean(rng: Xoshiro256, category: Category, size: int, channels: int) -> np.ndarray:
    base = BASE_TEXTURES[category](rng, size)
    jitter = rng.numpy_generator().uniform(-PIXEL_JITTER, PIXEL_JITTER, (channels, size, size))
    return np.clip(base[None, :, :] + jitter, 0.0, 1.0)


# ----------------------------------------------------------------------------
# Defects
# ----------------------------------------------------------------------------

def _rectangle(rng: Xoshiro256, size: int) -> np.ndarray:
    low, high = (max(1, round(f * size)) for f in RECT_SIDE_RANGE)
    height = rng.integers(low, high + 1)
    width = rng.integers(low, high + 1)
    top = rng.integers(0, size - height + 1)
    left = rng.integers(0, size - width + 1)
    mask = np.zeros((size, size), dtype=bool)
    mask[top:top + height, left:left + width] = True
    return mask


def _ellipse(rng: Xoshiro256, size: int) -> np.ndarray:
    low, high = (f * size for f in ELLIPSE_RADIUS_RANGE)
    radius_y = rng.uniform(low, high)
    radius_x = rng.uniform(low, high)
    center_y = rng.integers(0, size)
    center_x = rng.integers(0, size)
    y, x = np.mgrid[0:size, 0:size]
    return ((y - center_y) / radius_y) ** 2 + ((x - center_x) / radius_x) ** 2 <= 1.0


def _scratch(rng: Xoshiro256, size: int) -> np.ndarray:
    low, high = (f * size for f in SCRATCH_LENGTH_RANGE)
    length = rng.uniform(low, high)
    angle = rng.uniform(0.0, math.pi)
    start_y = rng.integers(0, size)
    start_x = rng.integers(0, size)
    dy, dx = length * math.sin(angle), length * math.cos(angle)

    # Distance from every pixel centre to the segment
    y, x = np.mgrid[0:size, 0:size].astype(np.float64)
    t = ((y - start_y) * dy + (x - start_x) * dx) / (length * length)
    t = np.clip(t, 0.0, 1.0)
    distance = np.hypot(y - (start_y + t * dy), x - (start_x + t * dx))
    return distance < SCRATCH_HALF_WIDTH


DEFECT_MASKS: Dict[DefectShape, Callable[[Xoshiro256, int], np.ndarray]] = {
    DefectShape.RECTANGLE: _rectangle,
    DefectShape.ELLIPSE: _ellipse,
    DefectShape.SCRATCH: _scratch,
}


def inject_defects(clean: np.ndarray, rng: Xoshiro256) -> Tuple[np.ndarray, np.ndarray]:
    """Add 1-3 defects to a clean [C, H, W] image.

    Each defect adds an intensity offset of uniform(0.3, 0.6) on its
    support (the largest offset wins where defects overlap). A defect that
    would push the mask past 25% of the image is dropped. The offset
    brightens pixels below 0.5 and darkens the rest, so every masked pixel
    moves by at least 0.3 after clamping.

    Args:
        clean: Clean image in [0, 1]
        rng: Stream the defect parameters are drawn from

    Returns:
        (defective image, binary [H, W] mask of the defect support)
    """
    size = clean.shape[-1]
    offsets = np.zeros((size, size))
    count = rng.integers(DEFECT_COUNT_RANGE[0], DEFECT_COUNT_RANGE[1] + 1)
    for _ in range(count):
        shape = DEFECT_SHAPES[rng.integers(0, len(DEFECT_SHAPES))]
        support = DEFECT_MASKS[shape](rng, size)
        magnitude = rng.uniform(*DEFECT_OFFSET_RANGE)
        merged = np.where(support, np.maximum(offsets, magnitude), offsets)
        if offsets.any() and (merged > 0).mean() > MAX_MASK_FRACTION:
            continue
        offsets = merged

    sign = np.where(clean < 0.5, 1.0, -1.0)
    image = np.clip(clean + sign * offsets[None, :, :], 0.0, 1.0)
    return image, (offsets > 0).astype(np.float64)


# ----------------------------------------------------------------------------
# Datasets
# ----------------------------------------------------------------------------

def clean_image(
    seed: int,
    category: Union[str, Category],
    split: str,
    index: int,
    image_size: int = DEFAULT_IMAGE_SIZE,
    channels: int = 1
) -> np.ndarray:
    """The jittered defect-free texture of one sample, as generate_synthetic draws it."""
    category = parse_category(category)
    rng = Xoshiro256(_sample_seed(seed, category, split, index))
    return _render_clean(rng, category, image_size, channels)


def _make_split(
    seed: int,
    category: Category,
    split: str,
    count: int,
    image_size: int,
    channels: int,
    tokens: List[int]
) -> List[Sample]:
    anomalous = split.endswith("anomalous")
    samples = []
    for index in range(count):
        rng = Xoshiro256(_sample_seed(seed, category, split, index))
        image = _render_clean(rng, category, image_size, channels)
        mask = None
        if anomalous:
            image, mask = inject_defects(image, rng)
        samples.append(Sample(
            id=f"{SPLIT_IDS[split]}/{index:03d}",
            image=image,
            tokens=list(tokens),
            label=Verdict.ANOMALOUS if anomalous else Verdict.NORMAL,
            mask=mask,
        ))
    return samples


def generate_synthetic(
    seed: int,
    category: Union[str, Category],
    counts: Sequence[int] = DEFAULT_COUNTS,
    image_size: int = DEFAULT_IMAGE_SIZE,
    val_counts: Sequence[int] = DEFAULT_VAL_COUNTS,
    channels: int = 1
) -> Dataset:
    """Generate one category's dataset, fully determined by the arguments.

    Args:
        seed: Unsigned 64-bit seed
        category: stripes, checker, blotch or gradient
        counts: (train normal, test normal, test anomalous)
        image_size: Side length, divisible by 8
        val_counts: (validation normal, validation anomalous)
        channels: 1 (grayscale) or 3 (colour)

    Returns:
        Dataset with masks on every anomalous sample
    """
    category = parse_category(category)
    if len(counts) != 3 or any(c < 0 for c in counts) or counts[0] < 1:
        raise UsageError(f"counts must be (train > 0, test normal >= 0, test anomalous >= 0), got {counts}")
    if len(val_counts) != 2 or any(c < 0 for c in val_counts):
        raise UsageError(f"val_counts must be two non-negative integers, got {val_counts}")
    if image_size < 8 or image_size % 8 != 0:
        raise UsageError(f"image_size must be a positive multiple of 8, got {image_size}")
    if channels not in (1, 3):
        raise UsageError(f"channels must be 1 or 3, got {channels}")

    descriptor = descriptor_for(category)
    vocab = build_vocab([descriptor])
    dataset = Dataset(category=category.value, descriptor=descriptor, image_size=image_size,
                      channels=channels, vocab=vocab)
    tokens = tokenize(descriptor, dataset.token_vocab)

    split_counts = {
        "train_normal": counts[0],
        "test_normal": counts[1],
        "test_anomalous": counts[2],
        "val_normal": val_counts[0],
        "val_anomalous": val_counts[1],
    }
    splits = {
        split: _make_split(seed, category, split, count, image_size, channels, tokens)
        for split, count in split_counts.items()
    }
    logger.info(
        f"Generated {category.value} dataset (seed={seed}, size={image_size}): "
        + ", ".join(f"{split}={count}" for split, count in split_counts.items())
    )
    return Dataset(
        category=category.value,
        descriptor=descriptor,
        image_size=image_size,
        channels=channels,
        vocab=vocab,
        **splits,
    )


def generate_pretraining_corpus(
    seed: int,
    target: Union[str, Category],
    counts: Sequence[int] = DEFAULT_COUNTS,
    image_size: int = DEFAULT_IMAGE_SIZE,
    channels: int = 1
) -> List[Dataset]:
    """Training splits of every synthetic category except `target` (all four for other targets)."""
    try:
        target = Category(target)
    except ValueError:
        target = None
    return [
        generate_synthetic(seed, category, (counts[0], 0, 0), image_size, (0, 0), channels)
        for category in SYNTHETIC_CATEGORIES
        if category != target
    ]
