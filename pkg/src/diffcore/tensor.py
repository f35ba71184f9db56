from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from utility.errors import VNValueError

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tensor:
    """A dense array of 64-bit floats taking part in reverse-mode differentiation.

    Leaves are either constants (``requires_grad=False``) or parameters. Tensors
    produced by ops are never written to after construction; parameters are only
    changed in place by the optimizer.
    """

    __slots__ = ("data", "requires_grad", "name")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        name: Optional[str] = None,
    ) -> None:
        """Initialize a tensor.

        Args:
            data: Array-like values, converted to a float64 array (copied)
            requires_grad: Whether gradients should flow into this tensor
            name: Optional parameter name, used in error messages and gradients
        """
        self.data: np.ndarray = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.name = name

    @staticmethod
    def constant(data) -> "Tensor":
        return Tensor(data, requires_grad=False)

    @staticmethod
    def parameter(data, name: str) -> "Tensor":
        return Tensor(data, requires_grad=True, name=name)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def ndim(self) -> int:
        return int(self.data.ndim)

    def item(self) -> float:
        if self.data.size != 1:
            raise VNValueError(f"item() needs a single value, got shape {self.shape}")
        return float(self.data.reshape(()))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.data)))

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"


class Node:
    """One primitive operation recorded on a tape."""

    __slots__ = ("op_name", "inputs", "output", "backward_fn")

    def __init__(
        self,
        op_name: str,
        inputs: Tuple[Tensor, ...],
        output: Tensor,
        backward_fn: BackwardFn,
    ) -> None:
        self.op_name = op_name
        self.inputs = inputs
        self.output = output
        self.backward_fn = backward_fn


class Tape:
    """Ordered record of primitive operations.

    Nodes are appended in execution order, so every node's inputs were produced
    by earlier nodes (or are leaves). ``backward`` walks the nodes in exact
    reverse order.
    """

    def __init__(self) -> None:
        self.nodes: List[Node] = []
        self._outputs: set = set()

    def record(
        self,
        op_name: str,
        inputs: Tuple[Tensor, ...],
        output: Tensor,
        backward_fn: BackwardFn,
    ) -> None:
        self.nodes.append(Node(op_name, inputs, output, backward_fn))
        self._outputs.add(id(output))

    def produced(self, tensor: Tensor) -> bool:
        return id(tensor) in self._outputs

    def __len__(self) -> int:
        return len(self.nodes)


class Gradients:
    """Gradients of one backward pass, looked up by tensor.

    Tensors the loss does not depend on get an all-zero gradient.
    """

    def __init__(self, tape: Tape, grads: Dict[int, np.ndarray]) -> None:
        # the tape keeps every recorded tensor alive, so ids stay unique
        self._tape = tape
        self._grads = grads

    def of(self, tensor: Tensor) -> np.ndarray:
        grad = self._grads.get(id(tensor))
        if grad is None:
            return np.zeros_like(tensor.data)
        return grad

    def reached(self, tensor: Tensor) -> bool:
        return id(tensor) in self._grads

    def collect(self, tensors: Iterable[Tuple[str, Tensor]]) -> Dict[str, np.ndarray]:
        """Map names to gradients for the given (name, tensor) pairs."""
        return {name: self.of(tensor) for name, tensor in tensors}


def backward(tape: Tape, loss: Tensor) -> Gradients:
    """Run reverse-mode differentiation of a scalar loss over a tape.

    Args:
        tape: Tape on which ``loss`` was produced
        loss: Scalar tensor

    Returns:
        Gradients for every tensor reachable from the loss

    Raises:
        VNValueError: If the loss is not a scalar or was not produced on the tape
    """
    if loss.size != 1:
        raise VNValueError(f"backward: loss must be a scalar, got shape {loss.shape}")
    if not tape.produced(loss):
        raise VNValueError("backward: loss was not produced on this tape")

    grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(tape.nodes):
        out_grad = grads.get(id(node.output))
        if out_grad is None:
            continue
        input_grads = node.backward_fn(out_grad)
        for tensor, grad in zip(node.inputs, input_grads):
            if grad is None or not tensor.requires_grad:
                continue
            key = id(tensor)
            if key in grads:
                grads[key] = grads[key] + grad
            else:
                grads[key] = grad
    return Gradients(tape, grads)
