"""Named parameter set of both encoders and both decoders."""

import logging
import math
from typing import Dict, Iterator, List, Mapping, Tuple

import numpy as np

from src.config.constants import DECODER_CHANNELS, ENCODER_CHANNELS, KERNEL_SIZE
from src.models.exceptions import DimensionError
from src.models.schemas import Config
from src.numerics.rng import Xoshiro256
from src.numerics.tensor import Tensor
from src.utils.hash_utils import array_checksum

logger = logging.getLogger(__name__)

Shape = Tuple[int, ...]


def parameter_shapes(config: Config) -> List[Tuple[str, Shape]]:
    """Names and shapes of every parameter, in initialization order.

    Args:
        config: Model configuration

    Returns:
        List of (name, shape) pairs
    """
    k = KERNEL_SIZE
    d = config.embed_dim
    shapes: List[Tuple[str, Shape]] = []

    # Visual encoder: `encoder_depth` stride-2 conv stages
    in_channels = config.channels
    for stage in range(config.encoder_depth):
        out_channels = ENCODER_CHANNELS[stage]
        shapes.append((f"conv{stage + 1}.weight", (out_channels, in_channels, k, k)))
        shapes.append((f"conv{stage + 1}.bias", (out_channels,)))
        in_channels = out_channels
    shapes.append(("proj_v.weight", (d, in_channels)))
    shapes.append(("proj_v.bias", (d,)))

    # Textual encoder
    shapes.append(("token_table", (len(config.vocab), config.token_dim)))
    shapes.append(("proj_t.weight", (d, config.token_dim)))
    shapes.append(("proj_t.bias", (d,)))

    # Visual decoder: expand to 16 x (S/8) x (S/8), then three upsample+conv stages
    side = config.image_size // 8
    shapes.append(("expand.weight", (DECODER_CHANNELS[0] * side * side, d)))
    shapes.append(("expand.bias", (DECODER_CHANNELS[0] * side * side,)))
    decoder_out = (DECODER_CHANNELS[1], DECODER_CHANNELS[2], config.channels)
    in_channels = DECODER_CHANNELS[0]
    for stage, out_channels in enumerate(decoder_out, start=1):
        shapes.append((f"dec{stage}.weight", (out_channels, in_channels, k, k)))
        shapes.append((f"dec{stage}.bias", (out_channels,)))
        in_channels = out_channels

    # Textual decoder
    shapes.append(("bow_head.weight", (len(config.vocab), d)))
    shapes.append(("bow_head.bias", (len(config.vocab),)))
    return shapes


def _fans(shape: Shape) -> Tuple[int, int]:
    """fan_in and fan_out of a matrix [out, in] or a kernel [out, in, kh, kw]."""
    receptive = int(np.prod(shape[2:])) if len(shape) > 2 else 1
    return shape[1] * receptive, shape[0] * receptive


class ModelParams(Mapping[str, Tensor]):
    """Ordered mapping from parameter name to tracked leaf tensor."""

    def __init__(self, tensors: Dict[str, Tensor], config: Config):
        """Wrap named tensors after checking them against the config.

        Args:
            tensors: Parameter tensors keyed by name
            config: Configuration the shapes must match
        """
        expected = parameter_shapes(config)
        if [name for name, _ in expected] != list(tensors):
            raise DimensionError(
                f"parameter names {list(tensors)} do not match the configured layout"
            )
        for name, shape in expected:
            if tensors[name].shape != shape:
                raise DimensionError(
                    f"parameter {name} has shape {tensors[name].shape}, expected {shape}", axis=name
                )
        self._tensors = tensors
        self.config = config

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def zero_grad(self) -> None:
        for tensor in self._tensors.values():
            tensor.zero_grad()

    def arrays(self) -> Dict[str, np.ndarray]:
        return {name: tensor.data for name, tensor in self._tensors.items()}

    def checksum(self) -> str:
        """SHA256 over names and float32 values, in layout order."""
        return array_checksum((name, tensor.data) for name, tensor in self._tensors.items())

    def copy(self) -> "ModelParams":
        return ModelParams.from_arrays(self.arrays(), self.config)

    @classmethod
    def from_arrays(cls, arrays: Mapping[str, np.ndarray], config: Config) -> "ModelParams":
        """Tracked leaves holding copies of `arrays`, cast to the config precision."""
        tensors = {
            name: Tensor(np.array(arrays[name], dtype=config.dtype), requires_grad=True)
            for name, _ in parameter_shapes(config)
            if name in arrays
        }
        return cls(tensors, config)


def init_params(config: Config) -> ModelParams:
    """Xavier-uniform weights and zero biases from xoshiro256**(config.seed).

    Weights are drawn in layout order, each from uniform(-s, s) with
    s = sqrt(6 / (fan_in + fan_out)).

    Args:
        config: Model configuration

    Returns:
        Freshly initialized ModelParams
    """
    rng = Xoshiro256(config.seed)
    arrays: Dict[str, np.ndarray] = {}
    for name, shape in parameter_shapes(config):
        if name.endswith(".bias"):
            arrays[name] = np.zeros(shape)
            continue
        fan_in, fan_out = _fans(shape)
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        arrays[name] = rng.uniform_array(-bound, bound, int(np.prod(shape))).reshape(shape)

    params = ModelParams.from_arrays(arrays, config)
    logger.debug(f"Initialized {len(params)} parameter tensors (seed={config.seed})")
    return params
