"""Deterministic random streams.

A stream is the pair (seed, stream id). The numpy ``SeedSequence`` built from
``entropy=seed`` and ``spawn_key=(stream id,)`` seeds a PCG64 generator, so the
pair fully determines the draws and distinct stream ids give independent
sequences.

Stream id layout (64 bits, most significant first)::

    purpose : 8 bits   what the draws are for (see the PURPOSE_* constants)
    epoch   : 24 bits  training epoch, or segment/sample counter
    district: 16 bits  district index
    index   : 16 bits  indicator, segment or Monte Carlo sample index
"""

from dataclasses import dataclass

import numpy as np

from diffcore.tensor import Tensor
from utility.errors import VNValueError

PURPOSE_SYNTH = 1
PURPOSE_POSTERIOR_EPS = 2
PURPOSE_INCREMENTS = 3
PURPOSE_PREDICT = 4
PURPOSE_VERIFY = 5
PURPOSE_SHUFFLE = 6
PURPOSE_INIT = 7
PURPOSE_EVAL = 8

# Most significant first; widths sum to 64
_FIELD_BITS = (("purpose", 8), ("epoch", 24), ("district", 16), ("index", 16))


def stream_id(purpose: int, epoch: int = 0, district: int = 0, index: int = 0) -> int:
    """Pack the stream fields into one 64-bit unsigned id."""
    packed = 0
    for (field_name, bits), value in zip(_FIELD_BITS, (purpose, epoch, district, index)):
        if not 0 <= value < (1 << bits):
            raise VNValueError(f"stream_id: {field_name}={value} does not fit in {bits} bits")
        # Earlier fields end up in the high bits
        packed = (packed << bits) | int(value)
    return packed


@dataclass(frozen=True)
class RngStream:
    """An immutable (seed, stream id) pair."""

    seed: int
    stream: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.seed < (1 << 64):
            raise VNValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if not 0 <= self.stream < (1 << 64):
            raise VNValueError(f"stream id must be a 64-bit unsigned integer, got {self.stream}")

    @classmethod
    def for_purpose(
        cls, seed: int, purpose: int, epoch: int = 0, district: int = 0, index: int = 0
    ) -> "RngStream":
        return cls(seed, stream_id(purpose, epoch, district, index))

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of the stream."""
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream,))
        return np.random.Generator(np.random.PCG64(seq))


def standard_normal(rng: RngStream, count: int) -> Tensor:
    """Draw ``count`` i.i.d. N(0, 1) values from the start of the stream."""
    if count < 0:
        raise VNValueError(f"standard_normal: count must be >= 0, got {count}")
    return Tensor.constant(rng.generator().standard_normal(count))
