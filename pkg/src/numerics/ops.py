"""Differentiable primitives.

Every primitive returns a new Tensor, records a backward closure when any
input is tracked, and raises NumericalError instead of emitting NaN/Inf.
Binary elementwise ops follow numpy broadcasting; gradients are summed
back to each operand's shape.
"""

from typing import Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from src.models.exceptions import DimensionError, UsageError
from src.numerics.tensor import Tensor, as_tensor, make_result

Operand = Union[Tensor, float, int, np.ndarray]


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _pair(a: Operand, b: Operand) -> Tuple[Tensor, Tensor]:
    like = a if isinstance(a, Tensor) else b if isinstance(b, Tensor) else None
    return as_tensor(a, like), as_tensor(b, like)


def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} are incompatible") from None


# ----------------------------------------------------------------------------
# Elementwise arithmetic
# ----------------------------------------------------------------------------

def add(a: Operand, b: Operand) -> Tensor:
    a, b = _pair(a, b)
    _broadcast_shape(a, b, "add")

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return make_result(a.data + b.data, (a, b), backward, "add")


def sub(a: Operand, b: Operand) -> Tensor:
    a, b = _pair(a, b)
    _broadcast_shape(a, b, "sub")

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return make_result(a.data - b.data, (a, b), backward, "sub")


def mul(a: Operand, b: Operand) -> Tensor:
    a, b = _pair(a, b)
    _broadcast_shape(a, b, "mul")

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    with np.errstate(over="ignore", invalid="ignore"):
        out = a.data * b.data
    return make_result(out, (a, b), backward, "mul")


def square(x: Tensor) -> Tensor:
    def backward(g):
        return (2.0 * x.data * g,)

    with np.errstate(over="ignore"):
        out = x.data * x.data
    return make_result(out, (x,), backward, "square")


def exp(x: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        out = np.exp(x.data)

    def backward(g):
        return (g * out,)

    return make_result(out, (x,), backward, "exp")


def relu(x: Tensor) -> Tensor:
    """max(0, x); the subgradient at exactly 0 is 0."""
    active = x.data > 0

    def backward(g):
        return (g * active,)

    return make_result(np.where(active, x.data, 0).astype(x.dtype), (x,), backward, "relu")


# ----------------------------------------------------------------------------
# Reductions and shape manipulation
# ----------------------------------------------------------------------------

def sum(x: Tensor, axis: Optional[Union[int, Tuple[int, ...]]] = None) -> Tensor:  # noqa: A001
    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, x.shape).astype(x.dtype),)
        return (np.broadcast_to(np.expand_dims(g, axis), x.shape).astype(x.dtype),)

    return make_result(np.asarray(x.data.sum(axis=axis)), (x,), backward, "sum")


def mean(x: Tensor, axis: Optional[Union[int, Tuple[int, ...]]] = None) -> Tensor:
    if axis is None:
        count = x.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = int(np.prod([x.shape[a] for a in axes]))
    return mul(sum(x, axis=axis), 1.0 / count)


def reshape(x: Tensor, shape: Tuple[int, ...]) -> Tensor:
    if int(np.prod(shape)) != x.size:
        raise DimensionError(f"reshape: cannot view {x.shape} as {shape}")

    def backward(g):
        return (g.reshape(x.shape),)

    return make_result(x.data.reshape(shape), (x,), backward, "reshape")


def transpose(x: Tensor) -> Tensor:
    if x.ndim != 2:
        raise DimensionError(f"transpose needs a matrix, got shape {x.shape}", axis=0)

    def backward(g):
        return (g.T,)

    return make_result(x.data.T, (x,), backward, "transpose")


def stack(tensors: Sequence[Tensor]) -> Tensor:
    """Stack equally shaped tensors along a new leading axis."""
    if not tensors:
        raise UsageError("stack needs at least one tensor")
    shape = tensors[0].shape
    for index, tensor in enumerate(tensors):
        if tensor.shape != shape:
            raise DimensionError(f"stack: element {index} has shape {tensor.shape}, expected {shape}")

    def backward(g):
        return tuple(g[i] for i in range(len(tensors)))

    return make_result(np.stack([t.data for t in tensors]), tuple(tensors), backward, "stack")


# ----------------------------------------------------------------------------
# Linear algebra
# ----------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product for 2-D @ 2-D, 1-D @ 2-D and 2-D @ 1-D operands."""
    a, b = _pair(a, b)
    if a.ndim not in (1, 2) or b.ndim not in (1, 2) or (a.ndim == 1 and b.ndim == 1):
        raise DimensionError(f"matmul: unsupported shapes {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[0]:
        raise DimensionError(
            f"matmul: inner dimensions differ ({a.shape} @ {b.shape})", axis=a.ndim - 1
        )

    def backward(g):
        if a.ndim == 2 and b.ndim == 2:
            return g @ b.data.T, a.data.T @ g
        if a.ndim == 1:
            return b.data @ g, np.outer(a.data, g)
        return np.outer(g, b.data), a.data.T @ g

    with np.errstate(over="ignore", invalid="ignore"):
        out = a.data @ b.data
    return make_result(out, (a, b), backward, "matmul")


def linear(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Affine map x @ weight.T + bias for x of shape [in] or [N, in]."""
    return add(matmul(x, transpose(weight)), bias)


def pairwise_sq_dist(a: Tensor, b: Tensor) -> Tensor:
    """Matrix of squared Euclidean distances ||a_i - b_j||^2, shape [N, M]."""
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(f"pairwise_sq_dist needs matrices, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[1]:
        raise DimensionError(
            f"pairwise_sq_dist: embedding dims differ ({a.shape[1]} vs {b.shape[1]})", axis=1
        )
    diff = a.data[:, None, :] - b.data[None, :, :]

    def backward(g):
        weighted = 2.0 * g[:, :, None] * diff
        return weighted.sum(axis=1), -weighted.sum(axis=0)

    with np.errstate(over="ignore"):
        out = (diff * diff).sum(axis=-1)
    return make_result(out, (a, b), backward, "pairwise_sq_dist")


# ----------------------------------------------------------------------------
# Convolutional primitives
# ----------------------------------------------------------------------------

def _as_batch(x: Tensor, op: str) -> bool:
    if x.ndim == 3:
        return False
    if x.ndim == 4:
        return True
    raise DimensionError(f"{op} needs [C,H,W] or [N,C,H,W], got shape {x.shape}", axis=0)


def conv2d(
    x: Tensor,
    kernel: Tensor,
    bias: Tensor,
    stride: int = 1,
    pad: int = 0
) -> Tensor:
    """2-D cross-correlation with zero padding.

    Args:
        x: Input of shape [C_in, H, W] or [N, C_in, H, W]
        kernel: Weights of shape [C_out, C_in, kh, kw] with odd kh, kw
        bias: Per-output-channel bias of shape [C_out]
        stride: Positive step between windows
        pad: Zero padding added on every side

    Returns:
        Output of shape [C_out, H', W'] (or batched), H' = (H + 2*pad - kh) // stride + 1
    """
    batched = _as_batch(x, "conv2d")
    if stride < 1 or pad < 0:
        raise UsageError(f"conv2d: stride must be >= 1 and pad >= 0 (got {stride}, {pad})")
    if kernel.ndim != 4:
        raise DimensionError(f"conv2d: kernel must be [C_out,C_in,kh,kw], got {kernel.shape}")
    c_out, c_in, kh, kw = kernel.shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise UsageError(f"conv2d: kernel size must be odd, got {kh}x{kw}")
    if bias.shape != (c_out,):
        raise DimensionError(f"conv2d: bias shape {bias.shape} != ({c_out},)", axis="C_out")

    data = x.data if batched else x.data[None]
    n, channels, height, width = data.shape
    if channels != c_in:
        raise DimensionError(f"conv2d: input has {channels} channels, kernel expects {c_in}", axis="C_in")
    if height + 2 * pad < kh:
        raise DimensionError(f"conv2d: padded height {height + 2 * pad} < kernel {kh}", axis="H")
    if width + 2 * pad < kw:
        raise DimensionError(f"conv2d: padded width {width + 2 * pad} < kernel {kw}", axis="W")

    padded = np.pad(data, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    windows = sliding_window_view(padded, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    out_h, out_w = windows.shape[2], windows.shape[3]

    # [N, C_in, H', W', kh, kw] x [C_out, C_in, kh, kw] -> [N, H', W', C_out]
    out = np.tensordot(windows, kernel.data, axes=([1, 4, 5], [1, 2, 3]))
    out = out.transpose(0, 3, 1, 2) + bias.data[None, :, None, None]
    out = np.ascontiguousarray(out, dtype=np.result_type(x.dtype, kernel.dtype))

    def backward(g):
        g4 = g if batched else g[None]
        grad_kernel = np.tensordot(g4, windows, axes=([0, 2, 3], [0, 2, 3]))
        grad_bias = g4.sum(axis=(0, 2, 3))
        if not x.requires_grad:
            return None, grad_kernel, grad_bias
        grad_padded = np.zeros_like(padded)
        for i in range(kh):
            for j in range(kw):
                contribution = np.tensordot(g4, kernel.data[:, :, i, j], axes=([1], [0]))
                grad_padded[
                    :, :, i:i + stride * out_h:stride, j:j + stride * out_w:stride
                ] += contribution.transpose(0, 3, 1, 2)
        grad_input = grad_padded[:, :, pad:pad + height, pad:pad + width]
        if not batched:
            grad_input = grad_input[0]
        return grad_input, grad_kernel, grad_bias

    if not batched:
        out = out[0]
    return make_result(out, (x, kernel, bias), backward, "conv2d")


def global_avg_pool(x: Tensor) -> Tensor:
    """Spatial mean: [C,H,W] -> [C] or [N,C,H,W] -> [N,C]."""
    _as_batch(x, "global_avg_pool")
    return mean(x, axis=(-2, -1))


def upsample_nearest(x: Tensor, factor: int = 2) -> Tensor:
    """Nearest-neighbour upsampling of the last two axes by an integer factor."""
    _as_batch(x, "upsample_nearest")
    if factor < 1:
        raise UsageError(f"upsample factor must be >= 1, got {factor}")
    out = np.repeat(np.repeat(x.data, factor, axis=-2), factor, axis=-1)

    def backward(g):
        lead = g.shape[:-2]
        height, width = x.shape[-2], x.shape[-1]
        folded = g.reshape(*lead, height, factor, width, factor)
        return (folded.sum(axis=(-3, -1)),)

    return make_result(out, (x,), backward, "upsample_nearest")
