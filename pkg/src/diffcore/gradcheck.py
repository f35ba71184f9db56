from dataclasses import dataclass
from typing import Callable, List, Mapping, Optional, Tuple

import numpy as np

from utility.errors import VNValueError


@dataclass
class GradCheckReport:
    """Outcome of comparing analytic gradients with central differences."""

    checked: int
    max_rel_error: float
    worst_parameter: Optional[str]
    worst_index: Optional[Tuple[int, ...]]

    def passed(self, tolerance: float) -> bool:
        return self.max_rel_error < tolerance

    def to_dict(self) -> dict:
        return {
            "checked": self.checked,
            "max_rel_error": self.max_rel_error,
            "worst_parameter": self.worst_parameter,
            "worst_index": list(self.worst_index) if self.worst_index else None,
        }


def central_difference(
    loss_fn: Callable[[], float],
    array: np.ndarray,
    index: Tuple[int, ...],
    step: float,
) -> float:
    """Estimate d loss / d array[index]; ``array`` is restored afterwards."""
    original = float(array[index])
    try:
        array[index] = original + step
        plus = loss_fn()
        array[index] = original - step
        minus = loss_fn()
    finally:
        array[index] = original
    return (plus - minus) / (2.0 * step)


def relative_error(analytic: float, numeric: float, floor: float = 1e-5) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def check_gradients(
    loss_fn: Callable[[], float],
    arrays: Mapping[str, np.ndarray],
    analytic: Mapping[str, np.ndarray],
    coordinates: int,
    rng: np.random.Generator,
    step: float = 1e-4,
    floor: float = 1e-5,
) -> GradCheckReport:
    """Compare analytic gradients with central differences on sampled coordinates.

    Coordinates are drawn uniformly over all entries of all arrays, without
    replacement. ``loss_fn`` must re-evaluate the loss from the current array
    contents with every source of randomness held fixed.

    Args:
        loss_fn: Zero-argument loss evaluation
        arrays: Parameter arrays keyed by name (perturbed in place, then restored)
        analytic: Analytic gradients keyed by the same names
        coordinates: Number of coordinates to check (capped at the total count)
        rng: Generator used to pick coordinates
        step: Finite-difference step
        floor: Lower bound of the relative-error denominator

    Returns:
        GradCheckReport with the worst relative error found
    """
    names = sorted(arrays)
    if not names:
        raise VNValueError("check_gradients: no parameters given")
    sizes = np.array([arrays[n].size for n in names])
    total = int(sizes.sum())
    picks = rng.choice(total, size=min(coordinates, total), replace=False)
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    worst = 0.0
    worst_name: Optional[str] = None
    worst_index: Optional[Tuple[int, ...]] = None
    checked: List[int] = []
    for flat in np.sort(picks):
        slot = int(np.searchsorted(offsets, flat, side="right") - 1)
        name = names[slot]
        array = arrays[name]
        index = tuple(int(i) for i in np.unravel_index(flat - offsets[slot], array.shape))
        numeric = central_difference(loss_fn, array, index, step)
        err = relative_error(float(analytic[name][index]), numeric, floor)
        checked.append(int(flat))
        if err > worst or worst_name is None:
            worst, worst_name, worst_index = err, name, index
    return GradCheckReport(len(checked), worst, worst_name, worst_index)
