"""Differentiable primitives.

Every op takes the tape first. With ``tape=None`` the op only evaluates and
its result does not require gradients. Elementwise ops require equal shapes;
``linear`` and the reductions accept any number of leading batch axes.
"""

from typing import Optional, Sequence, Tuple, Union

import numpy as np

from diffcore.tensor import BackwardFn, Tape, Tensor
from utility.errors import VNShapeError, VNValueError

# Largest float64 strictly below 1; keeps tanh outputs inside (-1, 1).
_TANH_BOUND = float(np.nextafter(1.0, 0.0))


def _record(
    tape: Optional[Tape],
    op_name: str,
    inputs: Tuple[Tensor, ...],
    out_data: np.ndarray,
    backward_fn: BackwardFn,
) -> Tensor:
    requires_grad = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor.__new__(Tensor)
    out.data = out_data
    out.requires_grad = requires_grad
    out.name = None
    if requires_grad:
        assert tape is not None
        tape.record(op_name, inputs, out, backward_fn)
    return out


def _same_shape(op_name: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise VNShapeError(op_name, a.shape, b.shape)


###############################################
#               Dense layers                  #
###############################################


def linear(tape: Optional[Tape], x: Tensor, W: Tensor, b: Tensor) -> Tensor:
    """y = W x + b over the last axis of ``x``."""
    if W.ndim != 2 or x.ndim == 0 or x.shape[-1] != W.shape[1]:
        raise VNShapeError("linear", x.shape, W.shape)
    if b.shape != (W.shape[0],):
        raise VNShapeError("linear", b.shape, W.shape)
    out_features, in_features = W.shape
    xd, Wd = x.data, W.data
    out = xd @ Wd.T + b.data

    def backward_fn(g: np.ndarray):
        g2 = g.reshape(-1, out_features)
        x2 = xd.reshape(-1, in_features)
        return g @ Wd, g2.T @ x2, g2.sum(axis=0)

    return _record(tape, "linear", (x, W, b), out, backward_fn)


###############################################
#               Activations                   #
###############################################


def silu(tape: Optional[Tape], x: Tensor) -> Tensor:
    xd = x.data
    sig = 0.5 * (1.0 + np.tanh(0.5 * xd))
    out = xd * sig

    def backward_fn(g: np.ndarray):
        return (g * sig * (1.0 + xd * (1.0 - sig)),)

    return _record(tape, "silu", (x,), out, backward_fn)


def tanh_act(tape: Optional[Tape], x: Tensor) -> Tensor:
    out = np.clip(np.tanh(x.data), -_TANH_BOUND, _TANH_BOUND)

    def backward_fn(g: np.ndarray):
        return (g * (1.0 - out * out),)

    return _record(tape, "tanh", (x,), out, backward_fn)


def exp(tape: Optional[Tape], x: Tensor) -> Tensor:
    out = np.exp(x.data)

    def backward_fn(g: np.ndarray):
        return (g * out,)

    return _record(tape, "exp", (x,), out, backward_fn)


def exp_excess(tape: Optional[Tape], x: Tensor) -> Tensor:
    """exp(x) - 1 - x, never negative; a series is used near zero."""
    xd = x.data
    small = np.abs(xd) < 1e-3
    series = xd * xd * (0.5 + xd * (1.0 / 6.0 + xd / 24.0))
    out = np.where(small, series, np.expm1(xd) - xd)
    out = np.maximum(out, 0.0)

    def backward_fn(g: np.ndarray):
        return (g * np.expm1(xd),)

    return _record(tape, "exp_excess", (x,), out, backward_fn)


def square(tape: Optional[Tape], x: Tensor) -> Tensor:
    xd = x.data

    def backward_fn(g: np.ndarray):
        return (2.0 * g * xd,)

    return _record(tape, "square", (x,), xd * xd, backward_fn)


def clamp(tape: Optional[Tape], x: Tensor, low: float, high: float) -> Tensor:
    """Clip to [low, high]; the gradient is zero where clipping is active."""
    xd = x.data
    inside = (xd >= low) & (xd <= high)

    def backward_fn(g: np.ndarray):
        return (np.where(inside, g, 0.0),)

    return _record(tape, "clamp", (x,), np.clip(xd, low, high), backward_fn)


###############################################
#               Arithmetic                    #
###############################################


def add(tape: Optional[Tape], a: Tensor, b: Tensor) -> Tensor:
    _same_shape("add", a, b)

    def backward_fn(g: np.ndarray):
        return g, g

    return _record(tape, "add", (a, b), a.data + b.data, backward_fn)


def sub(tape: Optional[Tape], a: Tensor, b: Tensor) -> Tensor:
    _same_shape("sub", a, b)

    def backward_fn(g: np.ndarray):
        return g, -g

    return _record(tape, "sub", (a, b), a.data - b.data, backward_fn)


def mul(tape: Optional[Tape], a: Tensor, b: Tensor) -> Tensor:
    _same_shape("mul", a, b)
    ad, bd = a.data, b.data

    def backward_fn(g: np.ndarray):
        return g * bd, g * ad

    return _record(tape, "mul", (a, b), ad * bd, backward_fn)


def scale(tape: Optional[Tape], x: Tensor, factor: float) -> Tensor:
    factor = float(factor)

    def backward_fn(g: np.ndarray):
        return (g * factor,)

    return _record(tape, "scale", (x,), x.data * factor, backward_fn)


def shift(tape: Optional[Tape], x: Tensor, offset: float) -> Tensor:
    offset = float(offset)

    def backward_fn(g: np.ndarray):
        return (g,)

    return _record(tape, "shift", (x,), x.data + offset, backward_fn)


def mul_const(tape: Optional[Tape], x: Tensor, c: np.ndarray) -> Tensor:
    """Elementwise product with a constant array of the same shape."""
    c = np.asarray(c, dtype=np.float64)
    if c.shape != x.shape:
        raise VNShapeError("mul_const", x.shape, c.shape)

    def backward_fn(g: np.ndarray):
        return (g * c,)

    return _record(tape, "mul_const", (x,), x.data * c, backward_fn)


###############################################
#               Shape plumbing                #
###############################################


def concat(tape: Optional[Tape], tensors: Sequence[Tensor]) -> Tensor:
    """Concatenate along the last axis; leading axes must agree."""
    if not tensors:
        raise VNValueError("concat: no tensors given")
    lead = tensors[0].shape[:-1]
    for t in tensors[1:]:
        if t.shape[:-1] != lead:
            raise VNShapeError("concat", tensors[0].shape, t.shape)
    widths = [t.shape[-1] for t in tensors]
    splits = np.cumsum(widths)[:-1]
    out = np.concatenate([t.data for t in tensors], axis=-1)

    def backward_fn(g: np.ndarray):
        return tuple(np.split(g, splits, axis=-1))

    return _record(tape, "concat", tuple(tensors), out, backward_fn)


def slice_last(tape: Optional[Tape], x: Tensor, start: int, stop: int) -> Tensor:
    """Take x[..., start:stop]."""
    width = x.shape[-1] if x.ndim else 0
    if not 0 <= start < stop <= width:
        raise VNValueError(f"slice_last: [{start}:{stop}] invalid for shape {x.shape}")
    shape = x.shape

    def backward_fn(g: np.ndarray):
        grad = np.zeros(shape)
        grad[..., start:stop] = g
        return (grad,)

    return _record(tape, "slice", (x,), x.data[..., start:stop].copy(), backward_fn)


def stack(tape: Optional[Tape], tensors: Sequence[Tensor]) -> Tensor:
    """Stack equal-shape tensors along a new leading axis."""
    if not tensors:
        raise VNValueError("stack: no tensors given")
    for t in tensors[1:]:
        _same_shape("stack", tensors[0], t)
    out = np.stack([t.data for t in tensors], axis=0)

    def backward_fn(g: np.ndarray):
        return tuple(g[k] for k in range(g.shape[0]))

    return _record(tape, "stack", tuple(tensors), out, backward_fn)


def expand(tape: Optional[Tape], x: Tensor, count: int) -> Tensor:
    """Repeat ``x`` along a new leading axis of length ``count``."""
    if count < 1:
        raise VNValueError(f"expand: count must be positive, got {count}")
    out = np.broadcast_to(x.data, (count,) + x.shape).copy()

    def backward_fn(g: np.ndarray):
        return (g.sum(axis=0),)

    return _record(tape, "expand", (x,), out, backward_fn)


def take_rows(
    tape: Optional[Tape], table: Tensor, index: Union[int, np.ndarray]
) -> Tensor:
    """Gather rows of a 2-D table; an integer index returns a single row."""
    if table.ndim != 2:
        raise VNValueError(f"take_rows: table must be 2-D, got shape {table.shape}")
    idx = np.asarray(index)
    if idx.dtype.kind not in "iu":
        raise VNValueError(f"take_rows: index must be integral, got {idx.dtype}")
    rows = table.shape[0]
    if np.any(idx < 0) or np.any(idx >= rows):
        raise VNValueError(f"take_rows: index {index} out of range [0, {rows})")
    out = table.data[idx]

    def backward_fn(g: np.ndarray):
        grad = np.zeros_like(table.data)
        np.add.at(grad, idx, g)
        return (grad,)

    return _record(tape, "take_rows", (table,), out, backward_fn)


###############################################
#               Reductions                    #
###############################################


def sum_all(tape: Optional[Tape], x: Tensor) -> Tensor:
    shape = x.shape

    def backward_fn(g: np.ndarray):
        return (np.full(shape, float(g)),)

    return _record(tape, "sum", (x,), np.asarray(x.data.sum()), backward_fn)


def mean_axes(tape: Optional[Tape], x: Tensor, axes: Tuple[int, ...]) -> Tensor:
    """Average over the given axes (negative axes allowed)."""
    ndim = x.ndim
    norm_axes = tuple(sorted({a % ndim for a in axes}))
    count = 1
    for a in norm_axes:
        count *= x.shape[a]
    shape = x.shape
    out = x.data.mean(axis=norm_axes)

    def backward_fn(g: np.ndarray):
        expanded = np.expand_dims(g, norm_axes)
        return (np.broadcast_to(expanded / count, shape).copy(),)

    return _record(tape, "mean", (x,), np.asarray(out), backward_fn)


def dot_const(tape: Optional[Tape], x: Tensor, c: np.ndarray) -> Tensor:
    """Scalar sum(x * c) with a constant array ``c``."""
    c = np.asarray(c, dtype=np.float64)
    if c.shape != x.shape:
        raise VNShapeError("dot_const", x.shape, c.shape)
    out = np.asarray(np.sum(x.data * c))

    def backward_fn(g: np.ndarray):
        return (float(g) * c,)

    return _record(tape, "dot_const", (x,), out, backward_fn)
