"""Adam optimizer over a ModelParams mapping."""

from typing import Dict, Optional

import numpy as np

from src.config.constants import ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON
from src.models.exceptions import NumericalError
from src.network.params import ModelParams


class Adam:
    """Adaptive moment estimation with bias-corrected first and second moments."""

    def __init__(
        self,
        lr: float,
        beta1: float = ADAM_BETA1,
        beta2: float = ADAM_BETA2,
        epsilon: float = ADAM_EPSILON,
        step: int = 0
    ):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.t = step
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}

    def step(self, params: ModelParams, grads: Optional[Dict[str, np.ndarray]] = None) -> None:
        """Apply one update in place.

        Args:
            params: Parameters to update
            grads: Gradient per parameter name (default: each tensor's `.grad`;
                a missing gradient counts as zero)
        """
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t

        for name, tensor in params.items():
            g = grads.get(name) if grads is not None else tensor.grad
            if g is None:
                g = np.zeros_like(tensor.data)
            if name not in self.m:
                self.m[name] = np.zeros_like(tensor.data, dtype=np.float64)
                self.v[name] = np.zeros_like(tensor.data, dtype=np.float64)

            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)

            update = (self.lr / bc1) * m / (np.sqrt(v / bc2) + self.epsilon)
            new_value = (tensor.data - update).astype(tensor.dtype)
            if not np.all(np.isfinite(new_value)):
                raise NumericalError(f"Adam update produced non-finite values in {name}")
            tensor.data = new_value
