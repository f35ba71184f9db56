from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from diffcore.tensor import Tensor
from stochastic.rng import RngStream
from utility.errors import VNValueError


def brownian_increments(rng: RngStream, steps: int, dt: float, dim: int) -> Tensor:
    """Independent N(0, dt) increments of a ``dim``-dimensional Wiener process.

    Args:
        rng: Stream the draws come from
        steps: Number of increments (rows)
        dt: Time step, > 0
        dim: Number of independent noise channels (columns)

    Returns:
        Tensor of shape (steps, dim)
    """
    if dt <= 0 or not np.isfinite(dt):
        raise VNValueError(f"brownian_increments: dt must be positive, got {dt}")
    if steps < 1 or dim < 1:
        raise VNValueError(
            f"brownian_increments: steps and dim must be >= 1, got {steps}, {dim}"
        )
    draws = rng.generator().standard_normal((steps, dim))
    return Tensor.constant(np.sqrt(dt) * draws)


@dataclass(frozen=True)
class BridgeSegment:
    """Endpoints and volatility of a Brownian bridge from (t_a, x_a) to (t_b, x_b)."""

    t_a: float
    t_b: float
    x_a: float
    x_b: float
    sigma: float

    def __post_init__(self) -> None:
        if not self.t_b > self.t_a:
            raise VNValueError(f"BridgeSegment: need t_b > t_a, got {self.t_a}, {self.t_b}")
        if not self.sigma >= 0:
            raise VNValueError(f"BridgeSegment: sigma must be >= 0, got {self.sigma}")

    def variance_at(self, t: float) -> float:
        """Marginal variance sigma^2 (t - t_a)(t_b - t) / (t_b - t_a)."""
        return self.sigma**2 * (t - self.t_a) * (self.t_b - t) / (self.t_b - self.t_a)


def _bridge_grid(segment: BridgeSegment, times: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    t = np.asarray(times, dtype=np.float64)
    if t.ndim != 1:
        raise VNValueError(f"brownian_bridge: times must be 1-D, got shape {t.shape}")
    if t.size and np.any(np.diff(t) < 0):
        raise VNValueError("brownian_bridge: times must be sorted ascending")
    outside = (t < segment.t_a) | (t > segment.t_b)
    if np.any(outside):
        raise VNValueError(
            f"brownian_bridge: time {t[outside][0]} outside [{segment.t_a}, {segment.t_b}]"
        )
    grid = np.unique(np.concatenate([[segment.t_a], t, [segment.t_b]]))
    return t, grid


def _bridge_from_normals(
    segment: BridgeSegment, t: np.ndarray, grid: np.ndarray, normals: np.ndarray
) -> np.ndarray:
    # W(u - t_a) on the grid as the cumulative sum of independent increments
    steps = np.sqrt(np.diff(grid)) * normals
    lead = normals.shape[:-1]
    w = np.concatenate([np.zeros(lead + (1,)), np.cumsum(steps, axis=-1)], axis=-1)
    w_at = w[..., np.searchsorted(grid, t)]
    w_end = w[..., -1:]
    frac = (t - segment.t_a) / (segment.t_b - segment.t_a)
    values = segment.x_a + frac * (segment.x_b - segment.x_a) + segment.sigma * (w_at - frac * w_end)
    # pin the endpoints exactly
    values = np.where(t == segment.t_a, segment.x_a, values)
    values = np.where(t == segment.t_b, segment.x_b, values)
    return values


def brownian_bridge(segment: BridgeSegment, times: Sequence[float], rng: RngStream) -> np.ndarray:
    """Sample one bridge path at ``times`` (sorted, inside [t_a, t_b]).

    The path is x_a + s (x_b - x_a) + sigma [W(t - t_a) - s W(t_b - t_a)] with
    s = (t - t_a) / (t_b - t_a) and a single Brownian path W shared by all times.
    """
    t, grid = _bridge_grid(segment, times)
    normals = rng.generator().standard_normal(grid.size - 1)
    return _bridge_from_normals(segment, t, grid, normals)


def sample_bridges(
    segment: BridgeSegment, times: Sequence[float], rng: RngStream, count: int
) -> np.ndarray:
    """Sample ``count`` independent bridge paths; returns shape (count, len(times))."""
    if count < 1:
        raise VNValueError(f"sample_bridges: count must be >= 1, got {count}")
    t, grid = _bridge_grid(segment, times)
    normals = rng.generator().standard_normal((count, grid.size - 1))
    return _bridge_from_normals(segment, t, grid, normals)
