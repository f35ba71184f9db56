import hashlib
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from diffcore import ops
from diffcore.tensor import Tape, Tensor
from model.networks import diffusion, drift, embed
from model.params import ModelParams
from stochastic.brownian import brownian_increments
from stochastic.rng import PURPOSE_INCREMENTS, RngStream
from utility.errors import VNIntegrationError, VNShapeError, VNValueError

# |z| beyond this is treated as model blow-up
DIVERGENCE_LIMIT = 1e6

Coefficient = Callable[[Optional[Tape], Tensor], Tensor]
District = Union[int, np.ndarray]


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_k = k * dt, k = 0..steps-1, with dt = 1 / steps."""

    steps: int

    def __post_init__(self) -> None:
        if not isinstance(self.steps, int) or self.steps < 1:
            raise VNValueError(f"TimeGrid: steps must be a positive integer, got {self.steps}")

    @property
    def dt(self) -> float:
        return 1.0 / self.steps

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.steps) * self.dt

    @property
    def increments(self) -> int:
        return self.steps - 1


class SavedStateCounter:
    """Counts latent states held in memory with their recorded activations."""

    def __init__(self) -> None:
        self.current = 0
        self.peak = 0

    def hold(self, count: int = 1) -> None:
        self.current += count
        self.peak = max(self.peak, self.current)

    def release(self, count: int = 1) -> None:
        self.current -= count


def increments_checksum(increments: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(increments).tobytes()).hexdigest()


@dataclass(frozen=True)
class NoiseSource:
    """Regenerable Brownian increments, one stream per district.

    ``draw()`` returns shape (steps, dim) for a single district and
    (steps, districts, dim) for a batch.
    """

    streams: Tuple[RngStream, ...]
    steps: int
    dt: float
    dim: int
    batched: bool = True

    @classmethod
    def for_districts(
        cls,
        seed: int,
        epoch: int,
        district: District,
        grid: TimeGrid,
        dim: int,
        sample: int = 0,
        purpose: int = PURPOSE_INCREMENTS,
    ) -> "NoiseSource":
        batched = np.ndim(district) > 0
        indices = [int(d) for d in np.atleast_1d(district)]
        streams = tuple(
            RngStream.for_purpose(seed, purpose, epoch, d, sample) for d in indices
        )
        return cls(streams, grid.increments, grid.dt, dim, batched)

    def draw(self) -> np.ndarray:
        if self.steps == 0:
            shape = (0, len(self.streams), self.dim) if self.batched else (0, self.dim)
            return np.zeros(shape)
        paths = [brownian_increments(s, self.steps, self.dt, self.dim).data for s in self.streams]
        if not self.batched:
            return paths[0]
        return np.stack(paths, axis=1)


@dataclass
class LatentPath:
    """Latent trajectory z_0..z_{T-1} and the increments that produced it."""

    states: List[Tensor]
    increments: np.ndarray
    grid: TimeGrid
    district: District
    checksum: str

    @property
    def values(self) -> np.ndarray:
        """States as one array of shape (T, ..., n)."""
        return np.stack([s.data for s in self.states], axis=0)


def _failing_rows(z: np.ndarray) -> Optional[Tuple[int, ...]]:
    """Leading-axis rows holding a non-finite or diverged entry; None when unbatched."""
    if z.ndim < 2:
        return None
    # NaN compares False, so test finiteness separately
    bad = ~np.isfinite(z) | (np.abs(np.nan_to_num(z)) > DIVERGENCE_LIMIT)
    return tuple(int(r) for r in np.flatnonzero(bad.reshape(z.shape[0], -1).any(axis=1)))


def euler_maruyama(
    tape: Optional[Tape],
    z0: Tensor,
    drift_fn: Coefficient,
    diffusion_fn: Coefficient,
    dt: float,
    increments: np.ndarray,
    counter: Optional[SavedStateCounter] = None,
) -> List[Tensor]:
    """Integrate dz = f(z) dt + g(z) dW with diagonal noise.

    z_{k+1} = z_k + f(z_k) dt + g(z_k) * dW_k for every row of ``increments``.

    Args:
        tape: Tape to record on, or None to only evaluate
        z0: Initial state, shape (..., n)
        drift_fn: f, called as drift_fn(tape, z)
        diffusion_fn: g, called as diffusion_fn(tape, z); same shape as z
        dt: Step size
        increments: Brownian increments, shape (steps,) + z0.shape
        counter: Optional saved-state instrumentation

    Returns:
        The states z_0..z_steps

    Raises:
        VNIntegrationError: If a state becomes non-finite or exceeds DIVERGENCE_LIMIT
    """
    if increments.shape[1:] != z0.shape:
        raise VNShapeError("euler_maruyama", z0.shape, increments.shape)
    states = [z0]
    if counter is not None and tape is not None:
        counter.hold()
    z = z0
    for k in range(increments.shape[0]):
        f = drift_fn(tape, z)
        g = diffusion_fn(tape, z)
        z = ops.add(
            tape,
            ops.add(tape, z, ops.scale(tape, f, dt)),
            ops.mul_const(tape, g, increments[k]),
        )
        if not z.is_finite():
            raise VNIntegrationError(k + 1, "non-finite latent state", _failing_rows(z.data))
        if np.max(np.abs(z.data)) > DIVERGENCE_LIMIT:
            raise VNIntegrationError(
                k + 1, f"|z| exceeded {DIVERGENCE_LIMIT:g}", _failing_rows(z.data)
            )
        states.append(z)
        if counter is not None and tape is not None:
            counter.hold()
    return states


def network_coefficients(
    params: ModelParams, e_d: Tensor
) -> Tuple[Coefficient, Coefficient]:
    """Drift and diffusion closures conditioned on one embedding (row or batch)."""

    def drift_fn(tape: Optional[Tape], z: Tensor) -> Tensor:
        return drift(tape, params, z, e_d)

    def diffusion_fn(tape: Optional[Tape], z: Tensor) -> Tensor:
        return diffusion(tape, params, z, e_d)

    return drift_fn, diffusion_fn


def integrate(
    tape: Optional[Tape],
    params: ModelParams,
    z0: Tensor,
    district: District,
    grid: TimeGrid,
    increments: np.ndarray,
    counter: Optional[SavedStateCounter] = None,
) -> LatentPath:
    """Solve the latent SDE of one district (or a batch of districts) on ``grid``.

    Args:
        tape: Tape to record on, or None to only evaluate
        params: Model parameters
        z0: Initial latent state, shape (n,) or (B, n)
        district: District index, or index array matching the batch
        grid: Time grid with T states
        increments: N(0, dt) increments, shape (T - 1,) + z0.shape
        counter: Optional saved-state instrumentation

    Returns:
        LatentPath with T states
    """
    increments = np.asarray(increments, dtype=np.float64)
    expected = (grid.increments,) + z0.shape
    if increments.shape != expected:
        raise VNShapeError("integrate", expected, increments.shape)
    e_d = embed(tape, params, district)
    drift_fn, diffusion_fn = network_coefficients(params, e_d)
    states = euler_maruyama(
        tape, z0, drift_fn, diffusion_fn, grid.dt, increments, counter
    )
    return LatentPath(states, increments, grid, district, increments_checksum(increments))
