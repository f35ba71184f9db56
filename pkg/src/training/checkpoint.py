import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Union

from diffcore.adam import AdamState
from model.params import ModelParams
from training.config import TrainConfig
from training.trainer import EpochLog
from utility.errors import VNCheckpointError, VNValidationError

CHECKPOINT_FORMAT = "vnsde-checkpoint/1"


@dataclass
class Checkpoint:
    """Everything needed to resume training or evaluate a trained model.

    Attributes:
        epoch: Number of completed epochs
        config: Training configuration of the run
        panel_hash: Hash of the panel the model was trained on
        districts: District names in embedding-row order
        params: Model parameters
        adam: Optimizer state
        history: EpochLog of every completed epoch
    """

    epoch: int
    config: TrainConfig
    panel_hash: str
    districts: List[str]
    params: ModelParams
    adam: AdamState
    history: List[EpochLog] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "epoch": self.epoch,
            "config": self.config.to_dict(),
            "config_hash": self.config.config_hash(),
            "panel_hash": self.panel_hash,
            "districts": self.districts,
            "params": self.params.to_dict(),
            "adam": self.adam.to_dict(),
            "history": [log.to_dict() for log in self.history],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Checkpoint":
        if data.get("format") != CHECKPOINT_FORMAT:
            raise VNCheckpointError(f"unsupported checkpoint format {data.get('format')!r}")
        config = TrainConfig.from_dict(data["config"])
        if config.config_hash() != data["config_hash"]:
            raise VNCheckpointError("stored config does not match its config_hash")
        params = ModelParams.from_dict(data["params"])
        districts = list(data["districts"])
        if len(districts) != params.district_count:
            raise VNCheckpointError(
                f"checkpoint names {len(districts)} districts but has "
                f"{params.district_count} embedding rows"
            )
        return cls(
            int(data["epoch"]),
            config,
            str(data["panel_hash"]),
            districts,
            params,
            AdamState.from_dict(data["adam"]),
            [EpochLog.from_dict(entry) for entry in data.get("history", [])],
        )

    def check_panel(self, panel_hash: str, districts: List[str]) -> None:
        """Refuse a panel the model was not trained on.

        Raises:
            VNCheckpointError: If the panel hash or district names differ
        """
        if districts != self.districts:
            raise VNCheckpointError(
                "panel districts differ from the checkpoint's districts; "
                "the model was trained on another panel"
            )
        if panel_hash != self.panel_hash:
            raise VNCheckpointError(
                f"panel hash {panel_hash[:12]} differs from the training panel "
                f"{self.panel_hash[:12]}; evaluate with the panel the model was trained on"
            )


def save_checkpoint(checkpoint: Checkpoint, path: Union[str, Path]) -> Path:
    """Write the checkpoint as JSON; floats keep their exact repr."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as f:
        json.dump(checkpoint.to_dict(), f, sort_keys=True)
        f.write("\n")
    # atomic on POSIX
    tmp.replace(path)
    return path


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    """Read a checkpoint written by ``save_checkpoint``.

    Raises:
        VNCheckpointError: If the file is missing, unreadable or inconsistent
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise VNCheckpointError(f"checkpoint {path} does not exist")
    except json.JSONDecodeError as e:
        raise VNCheckpointError(f"checkpoint {path} is not valid JSON: {e}")
    try:
        return Checkpoint.from_dict(data)
    except (KeyError, TypeError, ValueError, VNValidationError) as e:
        raise VNCheckpointError(f"checkpoint {path} is malformed: {e}")
