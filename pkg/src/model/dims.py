from dataclasses import asdict, dataclass
from typing import Tuple

from utility.errors import VNValueError

# Indicator order of the anchor files and of the last axis of every panel
INDICATOR_NAMES: Tuple[str, ...] = (
    "electricity",
    "education_10plus",
    "pucca_house",
    "piped_water",
    "clean_fuel",
    "improved_sanitation",
)


@dataclass(frozen=True)
class Dims:
    """Sizes shared by every network of the model.

    Attributes:
        N: Observed indicators per month
        n: Latent state size
        m: District embedding size
        T: Months per series
        hidden: Width of both hidden layers in every network
    """

    N: int = 6
    n: int = 4
    m: int = 16
    T: int = 168
    hidden: int = 64

    def __post_init__(self) -> None:
        for key, value in asdict(self).items():
            if not isinstance(value, int) or value < 1:
                raise VNValueError(f"Dims.{key} must be a positive integer, got {value!r}")

    @property
    def encoder_sizes(self) -> Tuple[int, ...]:
        return (self.N + self.m, self.hidden, self.hidden, 2 * self.n)

    @property
    def drift_sizes(self) -> Tuple[int, ...]:
        return (self.n + self.m, self.hidden, self.hidden, self.n)

    @property
    def diffusion_sizes(self) -> Tuple[int, ...]:
        return (self.n + self.m, self.hidden, self.hidden, self.n)

    @property
    def decoder_sizes(self) -> Tuple[int, ...]:
        return (self.n + self.m, self.hidden, self.hidden, 2 * self.N)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "Dims":
        return cls(**{key: int(value) for key, value in data.items()})
