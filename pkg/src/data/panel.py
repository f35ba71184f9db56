"""Monthly panel synthesis from survey anchors.

Month 0 is January 2007 and month 167 is December 2020. The survey anchors sit
at months 0, 96 and 156 (January of 2007, 2015 and 2020). Each (district,
indicator) series is a Brownian bridge over months 0..96, a second bridge over
months 96..156 and a driftless random walk over months 157..167 that starts at
the last anchor. ``sigma`` is in percentage points per square-root month.
Values are clipped to [0, 100] after sampling.
"""

import concurrent.futures
import hashlib
from dataclasses import dataclass, field
from typing import List, Tuple, Union

import numpy as np
from tqdm import tqdm

from data.anchors import SURVEY_YEARS, AnchorTable
from model.dims import INDICATOR_NAMES
from stochastic.brownian import BridgeSegment, brownian_bridge
from stochastic.rng import PURPOSE_SYNTH, RngStream
from utility.errors import VNValueError

MONTHS = 168
MONTH0 = "2007-01"
ANCHOR_MONTHS: Tuple[int, ...] = (0, 96, 156)
DEFAULT_SIGMA = 1.5

# Stream index layout per (district, indicator): indicator * 4 + segment
_SEGMENTS_PER_INDICATOR = 4
_TAIL_SEGMENT = 2


@dataclass
class Panel:
    """District x month x indicator percentages.

    Attributes:
        values: Array of shape (D, MONTHS, N)
        districts: District names, position = district index
        seed: Synthesis seed
        sigma: Bridge volatility used for synthesis
        clip_count: Number of cells moved by clipping to [0, 100]
    """

    values: np.ndarray
    districts: List[str]
    seed: int = 0
    sigma: float = DEFAULT_SIGMA
    clip_count: int = 0
    month0: str = MONTH0
    indicators: List[str] = field(default_factory=lambda: list(INDICATOR_NAMES))

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        expected = (len(self.districts), MONTHS, len(self.indicators))
        if self.values.shape != expected:
            raise VNValueError(f"panel values must have shape {expected}, got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise VNValueError("panel values must be finite")

    @property
    def district_count(self) -> int:
        return len(self.districts)

    def panel_hash(self) -> str:
        """sha256 over district names and the raw float64 values."""
        digest = hashlib.sha256()
        digest.update("\n".join(self.districts).encode("utf-8"))
        digest.update(np.ascontiguousarray(self.values).tobytes())
        return digest.hexdigest()

    def district_index(self, key: Union[str, int]) -> int:
        return resolve_district(self.districts, key)


def resolve_district(districts: List[str], key: Union[str, int]) -> int:
    """Index of a district given its name (case-insensitive) or its index.

    Raises:
        VNValueError: If no district matches; the message lists the valid names
    """
    if isinstance(key, int) or (isinstance(key, str) and key.strip().isdigit()):
        index = int(key)
        if 0 <= index < len(districts):
            return index
    else:
        lowered = [name.lower() for name in districts]
        wanted = str(key).strip().lower()
        if wanted in lowered:
            return lowered.index(wanted)
    raise VNValueError(
        f"unknown district {key!r}; valid districts: {', '.join(districts)}"
    )


def _synthesize_series(
    anchors: np.ndarray, sigma: float, seed: int, district: int, indicator: int
) -> Tuple[int, int, np.ndarray, int]:
    """One (district, indicator) series; ``anchors`` holds the three survey values."""
    months = np.arange(MONTHS, dtype=np.float64)
    first, second, third = ANCHOR_MONTHS

    def stream(segment: int) -> RngStream:
        return RngStream.for_purpose(
            seed, PURPOSE_SYNTH, 0, district, indicator * _SEGMENTS_PER_INDICATOR + segment
        )

    early = brownian_bridge(
        BridgeSegment(first, second, anchors[0], anchors[1], sigma),
        months[first : second + 1],
        stream(0),
    )
    late = brownian_bridge(
        BridgeSegment(second, third, anchors[1], anchors[2], sigma),
        months[second : third + 1],
        stream(1),
    )
    tail_steps = MONTHS - 1 - third
    walk = sigma * stream(_TAIL_SEGMENT).generator().standard_normal(tail_steps)
    tail = anchors[2] + np.cumsum(walk)

    series = np.concatenate([early[:-1], late, tail])
    clipped = np.clip(series, 0.0, 100.0)
    return district, indicator, clipped, int(np.count_nonzero(clipped != series))


def synthesize(
    anchors: AnchorTable,
    sigma: float = DEFAULT_SIGMA,
    seed: int = 0,
    max_workers: int = 8,
    progress: bool = False,
) -> Panel:
    """Bridge-interpolate every (district, indicator) pair into a monthly panel.

    Args:
        anchors: Validated survey anchors
        sigma: Volatility in percentage points per sqrt(month), >= 0
        seed: Root seed; each pair and segment owns its own stream
        max_workers: Thread pool size
        progress: Show a tqdm bar

    Returns:
        Panel of shape (D, MONTHS, N); anchor months equal the anchors exactly
    """
    if not sigma >= 0 or not np.isfinite(sigma):
        raise VNValueError(f"sigma must be a finite number >= 0, got {sigma}")
    if len(ANCHOR_MONTHS) != len(SURVEY_YEARS):
        raise VNValueError("every survey year needs an anchor month")
    district_count, indicator_count, _ = anchors.values.shape
    values = np.zeros((district_count, MONTHS, indicator_count))
    clip_count = 0

    with concurrent.futures.ThreadPoolExecutor(max_workers=max_workers) as executor:
        futures = {}
        pbar = tqdm(
            total=district_count * indicator_count,
            desc="Synthesizing series",
            disable=not progress,
        )
        for d in range(district_count):
            for i in range(indicator_count):
                future = executor.submit(
                    _synthesize_series, anchors.values[d, i], sigma, seed, d, i
                )
                futures[future] = (d, i)
        for future in concurrent.futures.as_completed(futures):
            d, i, series, clipped = future.result()
            values[d, :, i] = series
            clip_count += clipped
            pbar.update(1)
        pbar.close()

    return Panel(values, list(anchors.districts), seed, float(sigma), clip_count)
