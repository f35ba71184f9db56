from dataclasses import dataclass

from utility.errors import VNValueError

BETA_MODES = ("linear", "constant")


@dataclass(frozen=True)
class BetaSchedule:
    """KL weight annealing: a linear ramp from 0 to ``beta_final``.

    ``constant`` mode uses ``beta_final`` from the first epoch.
    """

    beta_final: float = 0.1
    warmup_epochs: int = 300
    mode: str = "linear"

    def __post_init__(self) -> None:
        if self.beta_final < 0:
            raise VNValueError(f"beta_final must be >= 0, got {self.beta_final}")
        if self.warmup_epochs < 0:
            raise VNValueError(f"warmup_epochs must be >= 0, got {self.warmup_epochs}")
        if self.mode not in BETA_MODES:
            raise VNValueError(f"beta mode must be one of {BETA_MODES}, got {self.mode!r}")


def beta_at(schedule: BetaSchedule, epoch: int) -> float:
    if epoch < 0:
        raise VNValueError(f"epoch must be >= 0, got {epoch}")
    if schedule.mode == "constant" or epoch >= schedule.warmup_epochs:
        return schedule.beta_final
    return schedule.beta_final * (epoch / schedule.warmup_epochs)
