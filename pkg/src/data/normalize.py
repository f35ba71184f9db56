from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from model.dims import INDICATOR_NAMES
from utility.errors import VNValidationError, VNValueError

# Relative spread below which an indicator counts as constant
_ZERO_STD = 1e-12


@dataclass(frozen=True)
class NormStats:
    """Per-indicator z-score statistics over all districts and months."""

    mean: Tuple[float, ...]
    std: Tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.mean) != len(self.std):
            raise VNValueError("NormStats: mean and std lengths differ")
        if any(not s > 0 for s in self.std):
            raise VNValueError(f"NormStats: every std must be > 0, got {self.std}")

    def to_dict(self) -> dict:
        return {"mean": list(self.mean), "std": list(self.std)}

    @classmethod
    def from_dict(cls, data: dict) -> "NormStats":
        return cls(
            tuple(float(x) for x in data["mean"]), tuple(float(x) for x in data["std"])
        )


def compute_stats(
    values: np.ndarray, names: Sequence[str] = INDICATOR_NAMES
) -> NormStats:
    """Mean and population std of each indicator (last axis).

    Raises:
        VNValidationError: If an indicator is constant; the message names it
    """
    flat = np.asarray(values, dtype=np.float64).reshape(-1, values.shape[-1])
    mean = flat.mean(axis=0)
    std = flat.std(axis=0)
    for k in range(flat.shape[1]):
        if std[k] <= _ZERO_STD * max(1.0, abs(mean[k])):
            name = names[k] if k < len(names) else str(k)
            raise VNValidationError(f"indicator {name} has zero variance")
    return NormStats(tuple(float(m) for m in mean), tuple(float(s) for s in std))


def normalize(
    values: np.ndarray,
    stats: Optional[NormStats] = None,
    names: Sequence[str] = INDICATOR_NAMES,
) -> Tuple[np.ndarray, NormStats]:
    """z-score ``values`` per indicator.

    Fresh statistics are computed when ``stats`` is None (training); pass the
    stored statistics at inference time.
    """
    values = np.asarray(values, dtype=np.float64)
    if stats is None:
        stats = compute_stats(values, names)
    if len(stats.mean) != values.shape[-1]:
        raise VNValueError(
            f"normalize: stats cover {len(stats.mean)} indicators, values have {values.shape[-1]}"
        )
    return (values - np.asarray(stats.mean)) / np.asarray(stats.std), stats


def denormalize(values: np.ndarray, stats: NormStats) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    return values * np.asarray(stats.std) + np.asarray(stats.mean)


def denormalize_std(std: np.ndarray, stats: NormStats) -> np.ndarray:
    """Map standard deviations from z-score units back to percent."""
    return np.asarray(std, dtype=np.float64) * np.asarray(stats.std)
