"""Training objectives: cross-modal contrastive, defect exposure, reconstruction, total."""

from typing import Optional, Union

import numpy as np

from src.models.exceptions import DimensionError, UsageError
from src.numerics import ops
from src.numerics.tensor import Tensor

Scalar = Union[Tensor, float]


def _as_batch(z: Tensor) -> Tensor:
    if z.ndim == 1:
        return ops.reshape(z, (1, z.shape[0]))
    if z.ndim != 2:
        raise DimensionError(f"embeddings must be [N, d], got shape {z.shape}", axis=0)
    return z


def contrastive_loss(
    zv_batch: Tensor,
    zt_batch: Tensor,
    alpha: float,
    beta: float,
    negative_mask: Optional[np.ndarray] = None
) -> Tensor:
    """Margin-based cross-modal contrastive loss.

    (1/N) sum_i [||zv_i - zt_i||^2 - alpha]_+
      + (1/N) sum_i sum_{j != i} max(0, beta - ||zv_i - zt_j||^2)

    Negatives pair visual i with textual j only.

    Args:
        zv_batch: Visual embeddings [N, d] (a single [d] row is promoted)
        zt_batch: Textual embeddings [N, d], row i paired with zv_batch row i
        alpha: Positive-pair margin, >= 0
        beta: Negative-pair margin, > 0
        negative_mask: Optional [N, N] booleans selecting which (i, j) pairs
            count as negatives (default: every j != i); the diagonal is
            always excluded

    Returns:
        Scalar loss tensor
    """
    if alpha < 0 or beta <= 0:
        raise UsageError(f"margins need alpha >= 0 and beta > 0 (got {alpha}, {beta})")
    zv = _as_batch(zv_batch)
    zt = _as_batch(zt_batch)
    if zv.shape[0] != zt.shape[0]:
        raise DimensionError(
            f"batch sizes differ: {zv.shape[0]} visual vs {zt.shape[0]} textual", axis=0
        )
    if zv.shape[1] != zt.shape[1]:
        raise DimensionError(
            f"embedding dims differ: {zv.shape[1]} vs {zt.shape[1]}", axis=1
        )
    n = zv.shape[0]

    positive_sq = ops.sum(ops.square(ops.sub(zv, zt)), axis=1)
    positive = ops.mean(ops.relu(ops.sub(positive_sq, alpha)))

    pair_sq = ops.pairwise_sq_dist(zv, zt)
    selected = ~np.eye(n, dtype=bool)
    if negative_mask is not None:
        negative_mask = np.asarray(negative_mask, dtype=bool)
        if negative_mask.shape != (n, n):
            raise DimensionError(f"negative_mask must be [{n}, {n}], got {negative_mask.shape}", axis=0)
        selected &= negative_mask
    hinge = ops.mul(ops.relu(ops.sub(beta, pair_sq)), Tensor(selected.astype(pair_sq.dtype)))
    negative = ops.mul(ops.sum(hinge), 1.0 / n)

    return ops.add(positive, negative)


def exposure_loss(za_batch: Tensor, zt_batch: Tensor, margin: float) -> Tensor:
    """Hinge pushing embeddings of defective images away from every text.

    (1/N) sum_a sum_j max(0, margin - ||za_a - zt_j||^2)

    N is the number of text rows, so the term is on the same per-sample
    scale as the negative part of `contrastive_loss`.

    Args:
        za_batch: Visual embeddings of defective images [M, d]
        zt_batch: Textual embeddings of the batch [N, d]
        margin: Squared distance below which a defect is penalized, > 0

    Returns:
        Scalar loss tensor
    """
    if margin <= 0:
        raise UsageError(f"exposure margin must be > 0, got {margin}")
    za = _as_batch(za_batch)
    zt = _as_batch(zt_batch)
    if za.shape[1] != zt.shape[1]:
        raise DimensionError(f"embedding dims differ: {za.shape[1]} vs {zt.shape[1]}", axis=1)
    hinge = ops.relu(ops.sub(margin, ops.pairwise_sq_dist(za, zt)))
    return ops.mul(ops.sum(hinge), 1.0 / zt.shape[0])


def _sse(prediction: Tensor, target: Tensor, what: str) -> Tensor:
    if prediction.shape != target.shape:
        raise DimensionError(
            f"{what} reconstruction shape {prediction.shape} != target shape {target.shape}"
        )
    return ops.sum(ops.square(ops.sub(prediction, target)))


def reconstruction_loss(
    image: Tensor,
    image_recon: Tensor,
    bow_target: Tensor,
    bow_recon: Tensor
) -> Tensor:
    """||image_recon - image||^2 + ||bow_recon - bow_target||^2.

    Sums of squared errors, not means. With a leading batch axis
    ([N, C, H, W] images and [N, V] vectors) the result is the mean over
    the batch of the per-sample sums.
    """
    image_term = _sse(image_recon, image, "image")
    text_term = _sse(bow_recon, bow_target, "bag-of-words")
    total = ops.add(image_term, text_term)
    if image.ndim == 4:
        if bow_target.ndim != 2 or bow_target.shape[0] != image.shape[0]:
            raise DimensionError(
                f"batched image {image.shape} needs a matching [N, V] target, got {bow_target.shape}",
                axis=0,
            )
        total = ops.mul(total, 1.0 / image.shape[0])
    return total


def total_loss(
    contrastive: Scalar,
    reconstruction: Scalar,
    lambda_: float,
    exposure: Scalar = 0.0
) -> Tensor:
    """contrastive + exposure + lambda * reconstruction."""
    if lambda_ < 0:
        raise UsageError(f"lambda must be >= 0, got {lambda_}")
    return ops.add(ops.add(contrastive, exposure), ops.mul(reconstruction, lambda_))
