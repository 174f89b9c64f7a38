"""Exponential-similarity anomaly score and threshold decisions."""

import logging
import math
from typing import List, Optional, Sequence, Union

import numpy as np

from src.config.constants import DEFAULT_THRESHOLD, THRESHOLD_PERCENTILE
from src.models.enums import Verdict
from src.models.exceptions import DimensionError, UsageError
from src.models.schemas import Config, ScoreResult
from src.network.encoders import encode_image, encode_texts
from src.network.params import ModelParams
from src.numerics.tensor import Tensor

logger = logging.getLogger(__name__)

Embedding = Union[Tensor, np.ndarray, Sequence[float]]

# Smallest score reported; exp underflows to 0 for very distant pairs
MIN_SCORE = np.finfo(np.float64).tiny


def _values(z: Embedding) -> np.ndarray:
    data = z.data if isinstance(z, Tensor) else z
    return np.asarray(data, dtype=np.float64)


def squared_distance(z_v: Embedding, z_t: Embedding) -> float:
    """||z_v - z_t||^2 in double precision."""
    a, b = _values(z_v), _values(z_t)
    if a.shape != b.shape:
        raise DimensionError(f"embedding shapes differ: {a.shape} vs {b.shape}", axis=a.ndim - 1)
    return float(np.sum((a - b) ** 2))


def score_from_distance(distance: float, sigma: float) -> float:
    """exp(-distance / sigma), clamped to stay strictly positive."""
    if sigma <= 0:
        raise UsageError(f"sigma must be positive, got {sigma}")
    return max(math.exp(-distance / sigma), MIN_SCORE)


def anomaly_score(z_v: Embedding, z_t: Embedding, sigma: float) -> float:
    """S = exp(-||z_v - z_t||^2 / sigma), in (0, 1]; 1 iff the embeddings coincide."""
    if sigma <= 0:
        raise UsageError(f"sigma must be positive, got {sigma}")
    return score_from_distance(squared_distance(z_v, z_t), sigma)


def classify(score: float, tau: float) -> Verdict:
    """Anomalous iff score < tau (a score equal to tau is normal)."""
    return Verdict.ANOMALOUS if score < tau else Verdict.NORMAL


def calibrate_threshold(scores: Sequence[float], percentile: float = THRESHOLD_PERCENTILE) -> float:
    """Threshold at the given percentile of held-out normal scores.

    Args:
        scores: Anomaly scores of normal validation samples
        percentile: Share of normal samples allowed below the threshold, in (0, 100)

    Returns:
        tau (linear interpolation between order statistics)
    """
    if len(scores) == 0:
        raise UsageError("calibrate_threshold needs at least one score")
    if not 0 < percentile < 100:
        raise UsageError(f"percentile must be in (0, 100), got {percentile}")
    tau = float(np.percentile(np.asarray(scores, dtype=np.float64), percentile))
    logger.info(f"Calibrated threshold tau={tau:.6f} at percentile {percentile} of {len(scores)} scores")
    return tau


def score_batch(
    params: ModelParams,
    images: Sequence[np.ndarray],
    token_lists: Sequence[Sequence[int]],
    config: Config,
    threshold: Optional[float] = None
) -> List[ScoreResult]:
    """Score several (image, description) pairs with one batched forward pass.

    Args:
        params: Trained parameters
        images: [C, H, W] images
        token_lists: Descriptor token ids, one list per image
        config: Supplies sigma
        threshold: tau (default DEFAULT_THRESHOLD)

    Returns:
        One ScoreResult per image
    """
    if len(images) != len(token_lists):
        raise DimensionError(f"{len(images)} images but {len(token_lists)} descriptions", axis=0)
    if not images:
        return []
    tau = DEFAULT_THRESHOLD if threshold is None else threshold
    batch = np.stack([np.asarray(image) for image in images]).astype(config.dtype)
    z_v = encode_image(params, batch).z_v.data
    z_t = encode_texts(params, list(token_lists)).data

    results = []
    for row_v, row_t in zip(z_v, z_t):
        distance = squared_distance(row_v, row_t)
        score = score_from_distance(distance, config.sigma)
        results.append(ScoreResult(
            score=score,
            squared_distance=distance,
            verdict=classify(score, tau),
            threshold=tau,
        ))
    return results


def score_sample(
    params: ModelParams,
    image: np.ndarray,
    tokens: Sequence[int],
    config: Config,
    threshold: Optional[float] = None
) -> ScoreResult:
    """Score one (image, description) pair."""
    return score_batch(params, [image], [tokens], config, threshold)[0]
