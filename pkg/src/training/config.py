import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Union

from model.dims import Dims
from objective.schedule import BETA_MODES, BetaSchedule
from utility.errors import VNValidationError, VNValueError

BACKWARD_MODES = ("direct", "replay")


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters, stored as a flat JSON document.

    ``batch_size`` 0 means full batch, ``segment_length`` 0 selects
    ceil(sqrt(T)) for replay, and ``grad_clip`` 0 disables clipping.
    """

    epochs: int = 1000
    lr: float = 0.001
    beta_final: float = 0.1
    warmup_epochs: int = 300
    beta_mode: str = "linear"
    seed: int = 0
    batch_size: int = 0
    backward_mode: str = "direct"
    segment_length: int = 0
    grad_clip: float = 10.0
    checkpoint_every: int = 100
    mc_samples: int = 1
    hidden: int = 64
    latent: int = 4
    embedding: int = 16

    def __post_init__(self) -> None:
        self._validate_parameters()

    def _validate_parameters(self) -> None:
        """Check ranges of every field.

        Raises:
            VNValueError: If any field is out of range
        """
        if self.epochs < 1:
            raise VNValueError(f"epochs must be >= 1, got {self.epochs}")
        # lr = 0 is accepted as a no-op diagnostic run
        if not self.lr >= 0:
            raise VNValueError(f"lr must be >= 0, got {self.lr}")
        if self.beta_mode not in BETA_MODES:
            raise VNValueError(f"beta_mode must be one of {BETA_MODES}, got {self.beta_mode!r}")
        if self.backward_mode not in BACKWARD_MODES:
            raise VNValueError(
                f"backward_mode must be one of {BACKWARD_MODES}, got {self.backward_mode!r}"
            )
        for key in ("seed", "batch_size", "segment_length", "warmup_epochs"):
            if getattr(self, key) < 0:
                raise VNValueError(f"{key} must be >= 0, got {getattr(self, key)}")
        for key in ("checkpoint_every", "mc_samples", "hidden", "latent", "embedding"):
            if getattr(self, key) < 1:
                raise VNValueError(f"{key} must be >= 1, got {getattr(self, key)}")
        if not self.grad_clip >= 0:
            raise VNValueError(f"grad_clip must be >= 0, got {self.grad_clip}")
        if not self.beta_final >= 0:
            raise VNValueError(f"beta_final must be >= 0, got {self.beta_final}")

    @property
    def schedule(self) -> BetaSchedule:
        return BetaSchedule(self.beta_final, self.warmup_epochs, self.beta_mode)

    def dims(self, indicators: int, months: int) -> Dims:
        return Dims(N=indicators, n=self.latent, m=self.embedding, T=months, hidden=self.hidden)

    def replace(self, **changes: Any) -> "TrainConfig":
        """Copy with the given fields changed; None values are ignored."""
        return dataclasses.replace(self, **{k: v for k, v in changes.items() if v is not None})

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        """Build a config from a flat dict; missing keys take their defaults.

        Raises:
            VNValidationError: On unknown keys or values of the wrong type
        """
        fields = {f.name: f for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - set(fields))
        if unknown:
            raise VNValidationError(f"unknown config keys: {unknown}")
        values = {}
        for key, raw in data.items():
            kind = type(fields[key].default)
            if kind is int and (isinstance(raw, bool) or not isinstance(raw, int)):
                raise VNValidationError(f"config key {key} must be an integer, got {raw!r}")
            if kind is float and (isinstance(raw, bool) or not isinstance(raw, (int, float))):
                raise VNValidationError(f"config key {key} must be a number, got {raw!r}")
            if kind is str and not isinstance(raw, str):
                raise VNValidationError(f"config key {key} must be a string, got {raw!r}")
            values[key] = float(raw) if kind is float else raw
        try:
            return cls(**values)
        except VNValueError as e:
            raise VNValidationError(str(e))

    @classmethod
    def load(cls, path: Union[str, Path]) -> "TrainConfig":
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except FileNotFoundError:
            raise VNValidationError("config file does not exist", str(path))
        except json.JSONDecodeError as e:
            raise VNValidationError(f"config is not valid JSON: {e}", str(path))
        if not isinstance(data, dict):
            raise VNValidationError("config must be a JSON object", str(path))
        try:
            return cls.from_dict(data)
        except VNValidationError as e:
            raise VNValidationError(str(e), str(path))
