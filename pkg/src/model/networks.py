"""Forward maps of the model: embedding lookup, encoder, reparameterized
sampling, drift, diffusion and decoder.

All maps accept an optional leading batch axis (one row per district). Time
is not an input of the drift or diffusion networks.
"""

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from diffcore import ops
from diffcore.tensor import Tape, Tensor
from model.params import ModelParams
from utility.errors import VNShapeError, VNValueError

LOGVAR_MIN = -10.0
LOGVAR_MAX = 10.0


@dataclass
class GaussianHead:
    """Diagonal Gaussian given by mean and (clamped) log-variance."""

    mean: Tensor
    logvar: Tensor


def _check_finite(op_name: str, *tensors: Tensor) -> None:
    for t in tensors:
        if not t.is_finite():
            raise VNValueError(f"{op_name}: non-finite input of shape {t.shape}")


def _check_width(op_name: str, x: Tensor, width: int) -> None:
    if x.ndim == 0 or x.shape[-1] != width:
        raise VNShapeError(op_name, x.shape, (width,))


def _split_head(tape: Optional[Tape], out: Tensor, size: int) -> GaussianHead:
    mean = ops.slice_last(tape, out, 0, size)
    raw_logvar = ops.slice_last(tape, out, size, 2 * size)
    return GaussianHead(mean, ops.clamp(tape, raw_logvar, LOGVAR_MIN, LOGVAR_MAX))


def embed(
    tape: Optional[Tape], params: ModelParams, district: Union[int, np.ndarray]
) -> Tensor:
    """Embedding row(s) of the given district index (or index array)."""
    return ops.take_rows(tape, params.embeddings, district)


def encode(
    tape: Optional[Tape], params: ModelParams, y0: Tensor, e_d: Tensor
) -> GaussianHead:
    """Posterior q(z_0 | y_0, e_d) from the first observation and the embedding."""
    _check_width("encode", y0, params.dims.N)
    _check_width("encode", e_d, params.dims.m)
    _check_finite("encode", y0, e_d)
    out = params.encoder(tape, ops.concat(tape, [y0, e_d]))
    return _split_head(tape, out, params.dims.n)


def reparameterize(
    tape: Optional[Tape], head: GaussianHead, eps: Union[np.ndarray, Tensor]
) -> Tensor:
    """z = mean + exp(logvar / 2) * eps."""
    eps_data = eps.data if isinstance(eps, Tensor) else np.asarray(eps, dtype=np.float64)
    if eps_data.shape != head.mean.shape:
        raise VNShapeError("reparameterize", head.mean.shape, eps_data.shape)
    std = ops.exp(tape, ops.scale(tape, head.logvar, 0.5))
    return ops.add(tape, head.mean, ops.mul_const(tape, std, eps_data))


def drift(tape: Optional[Tape], params: ModelParams, z: Tensor, e_d: Tensor) -> Tensor:
    _check_width("drift", z, params.dims.n)
    _check_width("drift", e_d, params.dims.m)
    return params.drift(tape, ops.concat(tape, [z, e_d]))


def diffusion(
    tape: Optional[Tape], params: ModelParams, z: Tensor, e_d: Tensor
) -> Tensor:
    """Diagonal noise amplitude, every component strictly inside (-1, 1)."""
    _check_width("diffusion", z, params.dims.n)
    _check_width("diffusion", e_d, params.dims.m)
    return params.diffusion(tape, ops.concat(tape, [z, e_d]), ops.tanh_act)


def decode(
    tape: Optional[Tape], params: ModelParams, z: Tensor, e_d: Tensor
) -> GaussianHead:
    """Likelihood p(y_t | z_t, e_d) over the observed indicators."""
    _check_width("decode", z, params.dims.n)
    _check_width("decode", e_d, params.dims.m)
    _check_finite("decode", z, e_d)
    out = params.decoder(tape, ops.concat(tape, [z, e_d]))
    return _split_head(tape, out, params.dims.N)
