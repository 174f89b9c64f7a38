"""Inverse maps used by the reconstruction loss."""

from typing import Union

import numpy as np

from src.config.constants import DECODER_CHANNELS
from src.models.exceptions import DimensionError
from src.network.params import ModelParams
from src.numerics import ops
from src.numerics.tensor import Tensor


def _check_embedding(params: ModelParams, z: Union[Tensor, np.ndarray], what: str) -> Tensor:
    tensor = z if isinstance(z, Tensor) else Tensor(np.asarray(z, dtype=params.config.dtype))
    if tensor.ndim not in (1, 2) or tensor.shape[-1] != params.config.embed_dim:
        raise DimensionError(
            f"{what} expects an embedding of dim {params.config.embed_dim}, got shape {tensor.shape}",
            axis=tensor.ndim - 1,
        )
    return tensor


def decode_image(params: ModelParams, z_v: Union[Tensor, np.ndarray]) -> Tensor:
    """f_v^-1: embedding to image.

    Affine expand to 16 x (S/8) x (S/8), two nearest-upsample + conv + ReLU
    stages, then a final upsample + conv with no output nonlinearity.

    Args:
        params: Model parameters
        z_v: Visual embedding [d] or a batch [N, d]

    Returns:
        Reconstruction [C, S, S] (or [N, C, S, S])
    """
    z_v = _check_embedding(params, z_v, "decode_image")
    side = params.config.image_size // 8
    x = ops.linear(z_v, params["expand.weight"], params["expand.bias"])
    lead = (z_v.shape[0],) if z_v.ndim == 2 else ()
    x = ops.reshape(x, lead + (DECODER_CHANNELS[0], side, side))

    for stage in (1, 2, 3):
        x = ops.conv2d(
            ops.upsample_nearest(x, 2),
            params[f"dec{stage}.weight"],
            params[f"dec{stage}.bias"],
            stride=1,
            pad=1,
        )
        if stage < 3:
            x = ops.relu(x)
    return x


def decode_text(params: ModelParams, z_t: Union[Tensor, np.ndarray]) -> Tensor:
    """f_t^-1: affine map from a text embedding to a |vocab| bag-of-words vector."""
    z_t = _check_embedding(params, z_t, "decode_text")
    return ops.linear(z_t, params["bow_head.weight"], params["bow_head.bias"])
