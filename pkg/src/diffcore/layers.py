from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from diffcore import ops
from diffcore.tensor import Tape, Tensor
from utility.errors import VNValueError

Activation = Callable[[Optional[Tape], Tensor], Tensor]


class MLP:
    """A stack of linear layers with SiLU between them.

    Parameters are named ``<name>.<layer>.weight`` / ``<name>.<layer>.bias``.
    """

    def __init__(self, name: str, sizes: Sequence[int]) -> None:
        """Create an all-zero network.

        Args:
            name: Prefix used for parameter names
            sizes: Layer widths from input to output, at least two entries
        """
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise VNValueError(f"MLP {name}: invalid layer sizes {list(sizes)}")
        self.name = name
        self.sizes = tuple(int(s) for s in sizes)
        self.layers: List[Tuple[Tensor, Tensor]] = []
        for k, (fan_in, fan_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            W = Tensor.parameter(np.zeros((fan_out, fan_in)), f"{name}.{k}.weight")
            b = Tensor.parameter(np.zeros(fan_out), f"{name}.{k}.bias")
            self.layers.append((W, b))

    @classmethod
    def init_uniform(
        cls, name: str, sizes: Sequence[int], rng: np.random.Generator
    ) -> "MLP":
        """Create a network with weights and biases uniform in +-sqrt(1/fan_in)."""
        mlp = cls(name, sizes)
        for W, b in mlp.layers:
            bound = np.sqrt(1.0 / W.shape[1])
            W.data[...] = rng.uniform(-bound, bound, size=W.shape)
            b.data[...] = rng.uniform(-bound, bound, size=b.shape)
        return mlp

    def parameters(self) -> Dict[str, Tensor]:
        named: Dict[str, Tensor] = {}
        for W, b in self.layers:
            assert W.name is not None and b.name is not None
            named[W.name] = W
            named[b.name] = b
        return named

    def __call__(
        self,
        tape: Optional[Tape],
        x: Tensor,
        output_activation: Optional[Activation] = None,
    ) -> Tensor:
        h = x
        last = len(self.layers) - 1
        for k, (W, b) in enumerate(self.layers):
            h = ops.linear(tape, h, W, b)
            if k < last:
                h = ops.silu(tape, h)
        if output_activation is not None:
            h = output_activation(tape, h)
        return h
