"""Finite-difference gradient oracle."""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Union

import numpy as np

from src.models.exceptions import UsageError
from src.numerics.tensor import Tensor, backward

logger = logging.getLogger(__name__)

ScalarFn = Callable[[Tensor], Union[Tensor, float]]


def _scalar_value(value: Union[Tensor, float]) -> float:
    if isinstance(value, Tensor):
        if value.size != 1:
            raise UsageError(f"finite_diff_grad: f must return a scalar, got shape {value.shape}")
        return value.item()
    array = np.asarray(value)
    if array.size != 1:
        raise UsageError(f"finite_diff_grad: f must return a scalar, got shape {array.shape}")
    return float(array.reshape(-1)[0])


def finite_diff_grad(f: ScalarFn, at: Tensor, h: float = 1e-6) -> Tensor:
    """Central-difference gradient of a scalar function.

    Args:
        f: Deterministic, pure function of one tensor returning a scalar
        at: Point of evaluation (not modified)
        h: Step size

    Returns:
        Tensor shaped like `at` holding (f(x + h e_i) - f(x - h e_i)) / 2h
    """
    if h <= 0:
        raise UsageError(f"finite_diff_grad: step must be positive, got {h}")
    base = np.array(at.data, copy=True)
    out = np.array([_difference_at(f, base, i, h) for i in range(base.size)], dtype=np.float64)
    return Tensor(out.reshape(at.shape).astype(at.dtype))


def _difference_at(f: ScalarFn, base: np.ndarray, index: int, h: float) -> float:
    """Central difference of f along one flat coordinate of `base` (restored afterwards)."""
    flat = base.reshape(-1)
    original = flat[index]
    flat[index] = original + h
    f_plus = _scalar_value(f(Tensor(base.copy())))
    flat[index] = original - h
    f_minus = _scalar_value(f(Tensor(base.copy())))
    flat[index] = original
    return (f_plus - f_minus) / (2.0 * h)


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """||a - n|| / max(||a||, ||n||); 0 when both vanish."""
    scale = max(float(np.linalg.norm(analytic)), float(np.linalg.norm(numeric)))
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric)) / scale


@dataclass
class GradCheckReport:
    """Per-tensor relative errors between backward and finite differences.

    Attributes:
        errors: Relative error per input name
        kinks: Coordinates excluded per input name because a finite
            difference straddled a non-differentiable point
    """

    errors: Dict[str, float] = field(default_factory=dict)
    kinks: Dict[str, int] = field(default_factory=dict)

    @property
    def kink_count(self) -> int:
        return sum(self.kinks.values())

    @property
    def max_error(self) -> float:
        return max(self.errors.values()) if self.errors else 0.0

    def passed(self, tolerance: float) -> bool:
        return self.max_error < tolerance


def check_gradients(
    loss_fn: Callable[[Dict[str, Tensor]], Tensor],
    inputs: Dict[str, Tensor],
    h: float = 1e-6,
    kink_tolerance: Optional[float] = None
) -> GradCheckReport:
    """Compare backward against finite differences for every named input.

    Args:
        loss_fn: Builds a scalar from the named tensors
        inputs: Tracked tensors; their values are left unchanged
        h: Finite-difference step
        kink_tolerance: When set, coordinates that miss the analytic value
            and whose central differences at h and h/2 disagree by more
            than this are excluded (a ReLU or hinge switched inside the step)

    Returns:
        GradCheckReport with one relative error per input
    """
    for tensor in inputs.values():
        tensor.zero_grad()
    backward(loss_fn(inputs))
    report = GradCheckReport()

    for name, tensor in inputs.items():
        def partial(value: Tensor, name=name) -> Tensor:
            swapped = dict(inputs)
            swapped[name] = value
            return loss_fn(swapped)

        numeric = finite_diff_grad(partial, tensor, h).data
        analytic = tensor.grad if tensor.grad is not None else np.zeros_like(tensor.data)
        if kink_tolerance is not None:
            base = np.array(tensor.data, copy=True)
            smooth = np.ones(numeric.shape, dtype=bool)
            suspects = np.flatnonzero(np.abs(numeric - analytic) > kink_tolerance)
            for index in suspects:
                halved = _difference_at(partial, base, int(index), h / 2.0)
                if abs(numeric.flat[index] - halved) > kink_tolerance:
                    smooth.flat[index] = False
            report.kinks[name] = int(smooth.size - smooth.sum())
            analytic = np.where(smooth, analytic, 0.0)
            numeric = np.where(smooth, numeric, 0.0)
        report.errors[name] = relative_error(analytic, numeric)
        logger.debug(f"gradcheck {name}: relative error {report.errors[name]:.3e}")

    return report
