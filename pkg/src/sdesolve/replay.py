"""Memory-bounded gradients through the solver by noise replay.

The forward pass keeps only segment checkpoints. The backward pass walks the
segments in reverse, regenerates their increments from the noise source,
recomputes each segment on a fresh tape and backpropagates the per-step loss
gradients plus the adjoint carried in from the following segment.
"""

import math
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from diffcore import ops
from diffcore.tensor import Tape, Tensor, backward
from model.networks import embed
from model.params import ModelParams
from sdesolve.integrator import (
    District,
    NoiseSource,
    SavedStateCounter,
    TimeGrid,
    euler_maruyama,
    increments_checksum,
    integrate,
    network_coefficients,
)
from utility.errors import VNReplayError, VNShapeError


@dataclass
class SolverGradients:
    """Parameter gradients of a loss that depends on the latent path."""

    grads: Dict[str, np.ndarray]
    z0_grad: np.ndarray
    peak_saved_states: int
    segments: int


def default_segment_length(steps: int) -> int:
    return max(1, math.ceil(math.sqrt(steps)))


def _check_loss_grads(grid: TimeGrid, z0: np.ndarray, loss_grads: np.ndarray) -> None:
    expected = (grid.steps,) + z0.shape
    if loss_grads.shape != expected:
        raise VNShapeError("loss_grads_per_step", expected, loss_grads.shape)


def backward_stored(
    params: ModelParams,
    z0: np.ndarray,
    district: District,
    grid: TimeGrid,
    increments: np.ndarray,
    loss_grads_per_step: np.ndarray,
) -> SolverGradients:
    """Stored-activation reference: one tape over the whole path."""
    _check_loss_grads(grid, z0, loss_grads_per_step)
    counter = SavedStateCounter()
    tape = Tape()
    z0_leaf = Tensor(z0, requires_grad=True)
    path = integrate(tape, params, z0_leaf, district, grid, increments, counter)
    loss = ops.dot_const(tape, ops.stack(tape, path.states), loss_grads_per_step)
    grads = backward(tape, loss)
    return SolverGradients(
        grads.collect(params.named_parameters()),
        grads.of(z0_leaf),
        counter.peak,
        1,
    )


def backward_replay(
    params: ModelParams,
    z0: np.ndarray,
    district: District,
    grid: TimeGrid,
    rng_replay: NoiseSource,
    loss_grads_per_step: np.ndarray,
    expected_checksum: str,
    segment_length: int = 0,
) -> SolverGradients:
    """Gradients of sum_k <z_k, loss_grads_per_step[k]> by segment recomputation.

    Args:
        params: Model parameters
        z0: Initial latent state used in the forward pass, shape (n,) or (B, n)
        district: District index or index array
        grid: Time grid of the forward pass
        rng_replay: Noise source that regenerates the forward increments
        loss_grads_per_step: dL/dz_k for k = 0..T-1, shape (T,) + z0.shape
        expected_checksum: Checksum of the forward increments (LatentPath.checksum)
        segment_length: Steps per segment; 0 selects ceil(sqrt(T))

    Returns:
        SolverGradients; encoder and decoder entries are zero

    Raises:
        VNReplayError: If the regenerated increments differ from the forward ones
    """
    z0 = np.asarray(z0, dtype=np.float64)
    _check_loss_grads(grid, z0, loss_grads_per_step)
    increments = rng_replay.draw()
    if increments_checksum(increments) != expected_checksum:
        raise VNReplayError(
            "regenerated Brownian increments do not match the forward pass"
        )
    seg = segment_length or default_segment_length(grid.steps)
    last = grid.increments
    counter = SavedStateCounter()

    # forward sweep without a tape, keeping segment start states only
    e_const = embed(None, params, district)
    drift_fn, diffusion_fn = network_coefficients(params, e_const)
    checkpoints: Dict[int, np.ndarray] = {0: z0}
    counter.hold()
    z = Tensor.constant(z0)
    for start in range(0, last, seg):
        stop = min(start + seg, last)
        z = euler_maruyama(None, z, drift_fn, diffusion_fn, grid.dt, increments[start:stop])[-1]
        # The final state is never a segment start
        if stop < last:
            checkpoints[stop] = z.data
            counter.hold()

    totals = {name: np.zeros_like(t.data) for name, t in params.named_parameters()}
    adjoint = np.zeros_like(z0)
    starts: List[int] = sorted(checkpoints)
    # Replay segments last to first, carrying the adjoint of each segment start backwards
    for start in reversed(starts):
        stop = min(start + seg, last)
        if stop == start:
            continue
        tape = Tape()
        z_start = Tensor(checkpoints[start], requires_grad=True)
        e_d = embed(tape, params, district)
        seg_drift, seg_diffusion = network_coefficients(params, e_d)
        states = euler_maruyama(
            tape, z_start, seg_drift, seg_diffusion, grid.dt, increments[start:stop]
        )
        counter.hold(len(states) - 1)
        weights = loss_grads_per_step[start + 1 : stop + 1].copy()
        # The segment end also receives the adjoint flowing back from later segments
        weights[-1] = weights[-1] + adjoint
        # d(surrogate)/d(theta) is the vector-Jacobian product of this segment
        surrogate = ops.dot_const(tape, ops.stack(tape, states[1:]), weights)
        grads = backward(tape, surrogate)
        for name, tensor in params.named_parameters():
            if grads.reached(tensor):
                totals[name] = totals[name] + grads.of(tensor)
        adjoint = grads.of(z_start)
        counter.release(len(states) - 1)
        del checkpoints[start]
        counter.release()

    # z_0 also enters the loss directly through the first decoded step
    z0_grad = adjoint + loss_grads_per_step[0]
    return SolverGradients(totals, z0_grad, counter.peak, len(starts))
