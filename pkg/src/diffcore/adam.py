from dataclasses import dataclass, field
from typing import Dict, Mapping

import numpy as np

from utility.errors import VNNumericalError, VNShapeError, VNValueError


@dataclass
class AdamState:
    """Moment accumulators and step counter of the Adam optimizer."""

    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def create(cls, params: Mapping[str, np.ndarray], lr: float = 0.001) -> "AdamState":
        if lr < 0:
            raise VNValueError(f"learning rate must be >= 0, got {lr}")
        state = cls(lr=lr)
        for name, value in params.items():
            state.m[name] = np.zeros_like(value, dtype=np.float64)
            state.v[name] = np.zeros_like(value, dtype=np.float64)
        return state

    def to_dict(self) -> dict:
        return {
            "lr": self.lr,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "t": self.t,
            "m": {k: _array_to_dict(a) for k, a in sorted(self.m.items())},
            "v": {k: _array_to_dict(a) for k, a in sorted(self.v.items())},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AdamState":
        return cls(
            lr=float(data["lr"]),
            beta1=float(data["beta1"]),
            beta2=float(data["beta2"]),
            eps=float(data["eps"]),
            t=int(data["t"]),
            m={k: _array_from_dict(a) for k, a in data["m"].items()},
            v={k: _array_from_dict(a) for k, a in data["v"].items()},
        )


def _array_to_dict(array: np.ndarray) -> dict:
    return {"shape": list(array.shape), "values": [float(x) for x in array.ravel()]}


def _array_from_dict(data: dict) -> np.ndarray:
    return np.array(data["values"], dtype=np.float64).reshape(data["shape"])


def adam_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
) -> AdamState:
    """Apply one bias-corrected Adam update to ``params`` in place.

    Args:
        params: Parameter arrays keyed by name, updated in place
        grads: Gradients keyed by the same names
        state: Optimizer state, updated in place

    Returns:
        The updated state

    Raises:
        VNShapeError: If a gradient or accumulator shape disagrees with its parameter
        VNNumericalError: If any gradient is non-finite; nothing is updated then
    """
    for name, value in params.items():
        if name not in grads:
            raise VNValueError(f"adam_step: missing gradient for {name}")
        grad = grads[name]
        if grad.shape != value.shape:
            raise VNShapeError(f"adam_step[{name}]", value.shape, grad.shape)
        if name in state.m and state.m[name].shape != value.shape:
            raise VNShapeError(f"adam_step[{name}]", value.shape, state.m[name].shape)
        if not np.all(np.isfinite(grad)):
            raise VNNumericalError(f"adam_step: non-finite gradient for {name}")

    state.t += 1
    bc1 = 1.0 - state.beta1**state.t
    bc2 = 1.0 - state.beta2**state.t
    step_size = state.lr / bc1

    for name, value in params.items():
        g = grads[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(value)
            state.v[name] = np.zeros_like(value)
        m = state.m[name]
        v = state.v[name]
        # in place, so the state dicts see the update
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        denom = np.sqrt(v / bc2) + state.eps
        value -= step_size * m / denom
    return state
