"""Grad-CAM localization of the regions that drive the image-text mismatch.

The target scalar is the squared embedding distance D = ||z_v - z_t||^2
(high = anomalous). Channel weights are the spatial means of dD/dA over
the last conv activations A; the map is ReLU(sum_k w_k A_k), upsampled
to the image by nearest neighbour.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from src.config.constants import DEFAULT_THRESHOLD
from src.models.exceptions import DimensionError, UsageError
from src.models.schemas import Config, ScoreResult
from src.network.encoders import VisualForward, encode_image, encode_texts
from src.network.params import ModelParams
from src.numerics import ops
from src.numerics.tensor import Tensor, grad
from src.scoring.anomaly import classify, score_from_distance
from src.storage.pnm import write_pnm

logger = logging.getLogger(__name__)


@dataclass
class Heatmap:
    """Non-negative relevance map at image resolution.

    Attributes:
        values: [H, W] array, all >= 0
        source_resolution: (h, w) of the activation map before upsampling
    """

    values: np.ndarray
    source_resolution: Tuple[int, int]


def cam_from_weights(activations: np.ndarray, cam_weights: np.ndarray) -> np.ndarray:
    """ReLU(sum_k cam_weights[k] * activations[k]) for activations [K, h, w]."""
    activations = np.asarray(activations, dtype=np.float64)
    cam_weights = np.asarray(cam_weights, dtype=np.float64)
    if activations.ndim != 3 or cam_weights.shape != (activations.shape[0],):
        raise DimensionError(
            f"need activations [K,h,w] and K weights, got {activations.shape} and {cam_weights.shape}",
            axis=0,
        )
    return np.maximum(np.tensordot(cam_weights, activations, axes=1), 0.0)


def cam_from_gradients(activations: np.ndarray, gradients: np.ndarray) -> np.ndarray:
    """Grad-CAM map with channel weights = spatial mean of the gradients."""
    gradients = np.asarray(gradients, dtype=np.float64)
    if gradients.shape != np.shape(activations):
        raise DimensionError(
            f"gradient shape {gradients.shape} != activation shape {np.shape(activations)}"
        )
    return cam_from_weights(activations, gradients.mean(axis=(1, 2)))


def upsample_map(values: np.ndarray, size: int) -> np.ndarray:
    """Nearest-neighbour upsampling of an [h, w] map to [size, size]."""
    h, w = values.shape
    if size % h or size % w:
        raise DimensionError(f"cannot upsample a {h}x{w} map to {size}x{size}")
    return np.repeat(np.repeat(values, size // h, axis=0), size // w, axis=1)


def normalize(values: np.ndarray) -> np.ndarray:
    """Min-max scale to [0, 1]; a constant map becomes all zeros."""
    values = np.asarray(values, dtype=np.float64)
    low, high = values.min(), values.max()
    if high - low <= 0:
        return np.zeros_like(values)
    return (values - low) / (high - low)


def _cam_maps(forward: VisualForward, z_t: Union[Tensor, np.ndarray]) -> np.ndarray:
    """Raw maps [N, h, w] from one reverse pass over D summed across the batch."""
    z_t_data = z_t.data if isinstance(z_t, Tensor) else np.asarray(z_t)
    if z_t_data.shape != forward.z_v.shape:
        raise DimensionError(
            f"text embedding shape {z_t_data.shape} != visual embedding shape {forward.z_v.shape}",
            axis=z_t_data.ndim - 1,
        )
    target = Tensor(z_t_data.astype(forward.z_v.dtype))
    distance = ops.sum(ops.square(ops.sub(forward.z_v, target)))
    if not distance.requires_grad:
        raise UsageError("grad_cam needs a forward pass through tracked parameters")
    (gradients,) = grad(distance, [forward.activations])

    activations = forward.activations.data
    if activations.ndim == 3:
        activations, gradients = activations[None], gradients[None]
    return np.stack([cam_from_gradients(a, g) for a, g in zip(activations, gradients)])


def grad_cam(forward: VisualForward, z_t: Union[Tensor, np.ndarray]) -> Heatmap:
    """Heatmap of dD/dA-weighted activations for one encoded image.

    Args:
        forward: Result of encode_image with its tape still live
        z_t: Text embedding [d] (treated as a constant)

    Returns:
        Heatmap at the encoded image's resolution

    Raises:
        UsageError: If the forward pass's tape was already consumed
    """
    if forward.z_v.ndim != 1:
        raise DimensionError(f"grad_cam takes a single image, got z_v of shape {forward.z_v.shape}", axis=0)
    raw = _cam_maps(forward, z_t)[0]
    size = forward.input_size or raw.shape[-1]
    return Heatmap(values=upsample_map(raw, size), source_resolution=raw.shape)


def localize_many(
    params: ModelParams,
    images: Sequence[np.ndarray],
    token_lists: Sequence[Sequence[int]],
    config: Config,
    threshold: Optional[float] = None
) -> List[Tuple[ScoreResult, Heatmap, np.ndarray]]:
    """Score and localize a batch of images with one forward and one reverse pass.

    Args:
        params: Trained parameters
        images: [C, H, W] images
        token_lists: Descriptor token ids per image
        config: Supplies sigma
        threshold: tau (default DEFAULT_THRESHOLD)

    Returns:
        (ScoreResult, Heatmap, pixel_scores in [0, 1]) per image
    """
    if len(images) != len(token_lists):
        raise DimensionError(f"{len(images)} images but {len(token_lists)} descriptions", axis=0)
    if not images:
        return []
    tau = DEFAULT_THRESHOLD if threshold is None else threshold

    forward = encode_image(params, np.stack([np.asarray(image) for image in images]).astype(config.dtype))
    z_t = encode_texts(params, list(token_lists)).detach()
    z_v = forward.z_v.data
    raw_maps = _cam_maps(forward, z_t)

    results = []
    for row_v, row_t, raw in zip(z_v, z_t.data, raw_maps):
        distance = float(np.sum((row_v.astype(np.float64) - row_t.astype(np.float64)) ** 2))
        score = score_from_distance(distance, config.sigma)
        result = ScoreResult(score=score, squared_distance=distance, verdict=classify(score, tau), threshold=tau)
        heatmap = Heatmap(values=upsample_map(raw, forward.input_size), source_resolution=raw.shape)
        results.append((result, heatmap, normalize(heatmap.values)))
    return results


def localize(
    params: ModelParams,
    image: np.ndarray,
    tokens: Sequence[int],
    config: Config,
    threshold: Optional[float] = None
) -> Tuple[ScoreResult, Heatmap, np.ndarray]:
    """Score one image and explain it: (ScoreResult, Heatmap, pixel_scores)."""
    return localize_many(params, [image], [tokens], config, threshold)[0]


def heatmap_to_pgm(values: np.ndarray, path: Union[str, Path]) -> Path:
    """Export [0, 1] pixel scores as an 8-bit PGM (round-half-up)."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise DimensionError(f"heatmap must be [H, W], got {values.shape}", axis=0)
    if values.size and (values.min() < 0 or values.max() > 1):
        raise UsageError("heatmap values must lie in [0, 1]; normalize first")
    path = write_pnm(values, path)
    logger.debug(f"Wrote heatmap {path}")
    return path
