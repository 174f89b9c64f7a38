"""8-bit PGM (P5) / PPM (P6) images through Pillow."""

import logging
from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from src.models.exceptions import FormatError, UsageError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def quantize(values: np.ndarray) -> np.ndarray:
    """[0, 1] floats to 0-255 with round-half-up."""
    return np.clip(np.floor(np.asarray(values, dtype=np.float64) * 255.0 + 0.5), 0, 255).astype(np.uint8)


def read_pnm(path: PathLike) -> np.ndarray:
    """Read a P5/P6 file as a [C, H, W] float64 array in [0, 1].

    Raises:
        FormatError: If the file is missing, unreadable, or not 8-bit gray/RGB
    """
    path = Path(path)
    try:
        with Image.open(path) as image:
            image.load()
            mode = image.mode
            pixels = np.asarray(image)
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as e:
        raise FormatError(f"Cannot read image {path}: {e}") from e

    if mode == "L":
        array = pixels[None, :, :]
    elif mode == "RGB":
        array = np.transpose(pixels, (2, 0, 1))
    else:
        raise FormatError(f"Unsupported image mode {mode} in {path} (expected 8-bit PGM or PPM)")
    return array.astype(np.float64) / 255.0


def write_pnm(values: np.ndarray, path: PathLike) -> Path:
    """Write [C, H, W] (C = 1 or 3) or [H, W] values in [0, 1] as PGM/PPM."""
    array = np.asarray(values)
    if array.ndim == 3 and array.shape[0] == 1:
        array = array[0]
    if array.ndim == 2:
        image = Image.fromarray(quantize(array))
    elif array.ndim == 3 and array.shape[0] == 3:
        image = Image.fromarray(np.ascontiguousarray(np.transpose(quantize(array), (1, 2, 0))))
    else:
        raise UsageError(f"Cannot write an image of shape {array.shape} (expected [H,W], [1,H,W] or [3,H,W])")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    image.save(path, format="PPM")
    return path


def read_mask(path: PathLike) -> np.ndarray:
    """Read a single-channel mask as an [H, W] float64 array."""
    array = read_pnm(path)
    if array.shape[0] != 1:
        raise FormatError(f"Mask {path} must be single-channel")
    return array[0]


def write_mask(mask: np.ndarray, path: PathLike) -> Path:
    """Write a binary [H, W] mask as a 0/255 PGM."""
    return write_pnm((np.asarray(mask) > 0.5).astype(np.float64), path)
