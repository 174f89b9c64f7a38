"""Dense tensors with define-by-run reverse-mode differentiation.

A Tensor wraps a row-major numpy array. Primitives in `src.numerics.ops`
create output tensors that remember their parents and a backward closure;
a Tape is the topologically ordered record of those primitives reachable
from one scalar, replayed in reverse to accumulate gradients.
"""

import logging
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.models.exceptions import NumericalError, UsageError

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, Sequence, float, int]
BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


class Tensor:
    """n-dimensional numeric array with optional gradient tracking."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_op", "_consumed", "_spent_root")

    def __init__(
        self,
        data: ArrayLike,
        requires_grad: bool = False,
        dtype: Optional[Union[str, np.dtype]] = None
    ):
        """Create a tensor.

        Args:
            data: Array-like values
            requires_grad: Whether this tensor is a tracked leaf
            dtype: Float dtype (default: keep float arrays as-is, float64 otherwise)
        """
        array = np.asarray(data, dtype=dtype)
        if dtype is None and array.dtype.kind != "f":
            array = array.astype(np.float64)
        if not np.all(np.isfinite(array)):
            raise NumericalError("Tensor values must be finite")
        self.data: np.ndarray = array
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self._parents: Tuple["Tensor", ...] = ()
        self._backward: Optional[BackwardFn] = None
        self._op = "leaf"
        self._consumed = False
        self._spent_root = False

    # ------------------------------------------------------------------
    # Metadata
    # ------------------------------------------------------------------

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def item(self) -> float:
        if self.size != 1:
            raise UsageError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        """Untracked tensor sharing this tensor's values."""
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        tracked = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{tracked}, op={self._op})"

    # ------------------------------------------------------------------
    # Operators (delegate to primitives)
    # ------------------------------------------------------------------

    def __add__(self, other):
        from src.numerics import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from src.numerics import ops
        return ops.add(other, self)

    def __sub__(self, other):
        from src.numerics import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from src.numerics import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from src.numerics import ops
        return ops.mul(self, other)

    def __rmul__(self, other):
        from src.numerics import ops
        return ops.mul(other, self)

    def __truediv__(self, other):
        from src.numerics import ops
        if isinstance(other, Tensor):
            raise UsageError("Division is only supported by a constant")
        return ops.mul(self, 1.0 / float(other))

    def __neg__(self):
        from src.numerics import ops
        return ops.mul(self, -1.0)

    def __matmul__(self, other):
        from src.numerics import ops
        return ops.matmul(self, other)


def as_tensor(value: Union[Tensor, ArrayLike], like: Optional[Tensor] = None) -> Tensor:
    """Wrap constants as untracked tensors, matching `like`'s dtype."""
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(value, dtype=dtype))


def check_finite(array: np.ndarray, op: str) -> None:
    """Raise NumericalError if a primitive produced NaN/Inf."""
    if not np.all(np.isfinite(array)):
        raise NumericalError(f"{op} produced non-finite values (overflow or invalid input)")


def make_result(
    data: np.ndarray,
    parents: Sequence[Tensor],
    backward: BackwardFn,
    op: str
) -> Tensor:
    """Create a primitive's output and link it into the graph when needed.

    Args:
        data: Output values
        parents: Input tensors, in the order `backward` returns gradients
        backward: Maps the output gradient to one gradient (or None) per parent
        op: Primitive name, for diagnostics

    Returns:
        Output tensor, tracked iff any parent is tracked
    """
    check_finite(data, op)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.requires_grad = any(p.requires_grad for p in parents)
    out.grad = None
    out._op = op
    out._consumed = False
    out._spent_root = False
    if out.requires_grad:
        out._parents = tuple(parents)
        out._backward = backward
    else:
        out._parents = ()
        out._backward = None
    return out


def _topological_order(root: Tensor) -> List[Tensor]:
    """Tracked tensors reachable from root, parents before children."""
    order: List[Tensor] = []
    visited = set()
    stack: List[Tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    return order


class Tape:
    """Ordered record of the primitives between tracked leaves and one scalar."""

    def __init__(self, root: Tensor):
        """Record the graph below `root`.

        Args:
            root: Single-element tensor with tracked ancestry

        Raises:
            UsageError: If root is not a scalar, is untracked, or its tape was consumed
        """
        if root.size != 1:
            raise UsageError(f"backward needs a single-element tensor, got shape {root.shape}")
        if not root.requires_grad:
            raise UsageError("backward called on a tensor with no tracked ancestry")
        self.root = root
        self.nodes = _topological_order(root)
        if root._spent_root or any(node._consumed for node in self.nodes):
            raise UsageError("tape already consumed; run a fresh forward pass")
        self.consumed = False

    @property
    def leaves(self) -> List[Tensor]:
        return [node for node in self.nodes if node.is_leaf]

    def replay(self) -> Dict[int, np.ndarray]:
        """Reverse accumulation without consuming the tape.

        Returns:
            Gradient of the root for every recorded tensor, keyed by id()
        """
        if self.consumed:
            raise UsageError("tape already consumed; run a fresh forward pass")
        grads: Dict[int, np.ndarray] = {id(self.root): np.ones_like(self.root.data)}
        for node in reversed(self.nodes):
            upstream = grads.get(id(node))
            if upstream is None or node._backward is None:
                continue
            for parent, grad in zip(node._parents, node._backward(upstream)):
                if grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = grads[key] + grad if key in grads else grad
        return grads

    def backward(self) -> None:
        """Accumulate d(root)/d(leaf) into every tracked leaf's `.grad`, then consume."""
        grads = self.replay()
        for leaf in self.leaves:
            grad = grads.get(id(leaf))
            if grad is None:
                continue
            leaf.grad = grad.copy() if leaf.grad is None else leaf.grad + grad
        self._consume()

    def gradients(self, wrt: Iterable[Tensor]) -> List[np.ndarray]:
        """Gradients of the root with respect to arbitrary recorded tensors, then consume."""
        grads = self.replay()
        result = [
            grads.get(id(tensor), np.zeros_like(tensor.data)) for tensor in wrt
        ]
        self._consume()
        return result

    def _consume(self) -> None:
        self.consumed = True
        # A leaf root stays usable as an input to fresh forwards
        self.root._spent_root = True
        for node in self.nodes:
            if not node.is_leaf:
                node._consumed = True
                node._backward = None


def backward(scalar: Tensor) -> None:
    """Populate `.grad` on every tracked leaf below `scalar`."""
    Tape(scalar).backward()


def grad(scalar: Tensor, wrt: Sequence[Tensor]) -> List[np.ndarray]:
    """d(scalar)/d(t) for each t in `wrt` (leaf or intermediate)."""
    return Tape(scalar).gradients(wrt)
