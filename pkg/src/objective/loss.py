"""Negative ELBO: Gaussian NLL over the trajectory plus beta times the KL of z_0.

Both terms are per-feature averages, so a single district's loss is

    1/(2NT) sum_t sum_j [log s2_tj + (y_tj - mu_tj)^2 / s2_tj]
      + beta * 1/(2n) sum_j [-log s2_j - 1 + s2_j + mu_j^2]

with the log(2 pi) constant left out. Batched inputs carry districts on the
axis after time (NLL) or on the leading axis (KL); the breakdown averages over
districts.
"""

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from diffcore import ops
from diffcore.tensor import Tape, Tensor
from model.networks import GaussianHead
from utility.errors import VNShapeError


@dataclass
class LossBreakdown:
    """NLL, KL, beta and total = nll + beta * kl of one forward pass."""

    nll: float
    kl: float
    beta: float
    total: float
    loss: Optional[Tensor] = field(default=None, compare=False, repr=False)

    @classmethod
    def assemble(
        cls, nll: float, kl: float, beta: float, loss: Optional[Tensor] = None
    ) -> "LossBreakdown":
        return cls(nll, kl, beta, nll + beta * kl, loss)

    def to_dict(self) -> dict:
        return {"nll": self.nll, "kl": self.kl, "beta": self.beta, "total": self.total}


def gaussian_nll(
    tape: Optional[Tape],
    y: Union[np.ndarray, Tensor],
    mean: Tensor,
    logvar: Tensor,
) -> Tensor:
    """Per-feature Gaussian NLL, averaged over time (axis 0) and features (last axis).

    Returns a scalar for (T, N) inputs and one value per district for (T, B, N).
    """
    y_t = y if isinstance(y, Tensor) else Tensor.constant(y)
    if y_t.shape != mean.shape or mean.shape != logvar.shape:
        raise VNShapeError("gaussian_nll", y_t.shape, mean.shape if y_t.shape != mean.shape else logvar.shape)
    if mean.ndim < 2:
        raise VNShapeError("gaussian_nll", mean.shape, ("T", "N"))
    residual = ops.sub(tape, y_t, mean)
    precision = ops.exp(tape, ops.scale(tape, logvar, -1.0))
    # log(2 pi) omitted
    term = ops.add(tape, logvar, ops.mul(tape, ops.square(tape, residual), precision))
    return ops.scale(tape, ops.mean_axes(tape, term, (0, -1)), 0.5)


def kl_gaussian(tape: Optional[Tape], head: GaussianHead) -> Tensor:
    """KL(N(mean, exp(logvar)) || N(0, I)) averaged over the last axis."""
    if head.mean.shape != head.logvar.shape:
        raise VNShapeError("kl_gaussian", head.mean.shape, head.logvar.shape)
    term = ops.add(
        # exp_excess(lv) = exp(lv) - 1 - lv
        tape, ops.exp_excess(tape, head.logvar), ops.square(tape, head.mean)
    )
    return ops.scale(tape, ops.mean_axes(tape, term, (-1,)), 0.5)


def district_mean(tape: Optional[Tape], x: Tensor) -> Tensor:
    if x.ndim == 0:
        return x
    return ops.mean_axes(tape, x, tuple(range(x.ndim)))


def elbo_loss(
    tape: Optional[Tape],
    y: Union[np.ndarray, Tensor],
    decoded: GaussianHead,
    z0_head: GaussianHead,
    beta: float,
) -> LossBreakdown:
    """Single-sample negative ELBO; the KL term covers z_0 only.

    Args:
        tape: Tape to record on, or None
        y: Observations, (T, N) or (T, B, N)
        decoded: Decoder heads for every step, same shape as ``y``
        z0_head: Encoder posterior, (n,) or (B, n)
        beta: KL weight

    Returns:
        LossBreakdown whose ``loss`` tensor is the differentiable total
    """
    nll = district_mean(tape, gaussian_nll(tape, y, decoded.mean, decoded.logvar))
    kl = district_mean(tape, kl_gaussian(tape, z0_head))
    loss = ops.add(tape, nll, ops.scale(tape, kl, beta))
    return LossBreakdown.assemble(nll.item(), kl.item(), float(beta), loss)
