"""Visual and textual encoders."""

from dataclasses import dataclass
from typing import List, Sequence, Union

import numpy as np

from src.models.exceptions import DimensionError, UsageError
from src.network.params import ModelParams
from src.numerics import ops
from src.numerics.tensor import Tensor

TokenIds = Sequence[int]


@dataclass
class VisualForward:
    """Output of the visual encoder.

    Attributes:
        z_v: Embedding, [d] (or [N, d] for a batch)
        activations: Post-ReLU output of the last conv stage, [K, h, w] (or [N, K, h, w])
        input_size: Side of the encoded image
    """

    z_v: Tensor
    activations: Tensor
    input_size: int = 0


def _as_image_tensor(params: ModelParams, image: Union[Tensor, np.ndarray]) -> Tensor:
    config = params.config
    tensor = image if isinstance(image, Tensor) else Tensor(np.asarray(image, dtype=config.dtype))
    if tensor.ndim not in (3, 4):
        raise DimensionError(f"image must be [C,H,W] or [N,C,H,W], got {tensor.shape}", axis=0)
    channels, height, width = tensor.shape[-3:]
    if channels != config.channels:
        raise DimensionError(
            f"image has {channels} channels, model expects {config.channels}", axis="C"
        )
    if height != config.image_size:
        raise DimensionError(f"image height {height} != image_size {config.image_size}", axis="H")
    if width != config.image_size:
        raise DimensionError(f"image width {width} != image_size {config.image_size}", axis="W")
    return tensor


def encode_image(params: ModelParams, image: Union[Tensor, np.ndarray]) -> VisualForward:
    """z_v = f_v(I): stride-2 conv+ReLU stages, global average pool, affine projection.

    Args:
        params: Model parameters
        image: [C, H, W] image in [0, 1], or a batch [N, C, H, W]

    Returns:
        VisualForward with the embedding and the last conv activations
    """
    x_in = _as_image_tensor(params, image)
    x = x_in
    for stage in range(1, params.config.encoder_depth + 1):
        x = ops.relu(ops.conv2d(
            x, params[f"conv{stage}.weight"], params[f"conv{stage}.bias"], stride=2, pad=1
        ))
    activations = x
    pooled = ops.global_avg_pool(activations)
    z_v = ops.linear(pooled, params["proj_v.weight"], params["proj_v.bias"])
    return VisualForward(z_v=z_v, activations=activations, input_size=x_in.shape[-1])


def _token_weights(tokens: TokenIds, vocab_size: int) -> np.ndarray:
    """Row of averaging weights: 1/L for every occurrence of a token id."""
    if len(tokens) == 0:
        raise UsageError("encode_text needs at least one token")
    weights = np.zeros(vocab_size, dtype=np.float64)
    for token in tokens:
        if not 0 <= int(token) < vocab_size:
            raise UsageError(f"token id {token} out of range for vocab of size {vocab_size}")
        weights[int(token)] += 1.0
    return weights / len(tokens)


def encode_text(params: ModelParams, tokens: TokenIds) -> Tensor:
    """z_t = f_t(T): mean of token-table rows, then affine projection.

    Args:
        params: Model parameters
        tokens: Nonempty token ids below |vocab|

    Returns:
        Embedding of shape [d]
    """
    table = params["token_table"]
    weights = Tensor(_token_weights(tokens, table.shape[0]).astype(table.dtype))
    pooled = ops.matmul(weights, table)
    return ops.linear(pooled, params["proj_t.weight"], params["proj_t.bias"])


def encode_texts(params: ModelParams, batch: List[TokenIds]) -> Tensor:
    """Batched encode_text, shape [N, d]."""
    table = params["token_table"]
    weights = np.stack([_token_weights(tokens, table.shape[0]) for tokens in batch])
    pooled = ops.matmul(Tensor(weights.astype(table.dtype)), table)
    return ops.linear(pooled, params["proj_t.weight"], params["proj_t.bias"])
