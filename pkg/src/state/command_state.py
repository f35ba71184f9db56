from typing import Dict, List, Optional

from state.state import State


class SynthState(State):
    """State of a panel synthesis run."""

    def __init__(self) -> None:
        self.districts: int = 0
        self.months: int = 0
        self.indicators: int = 0
        self.clip_count: int = 0
        self.panel_hash: str = ""

    def clip_fraction(self) -> float:
        cells = self.districts * self.months * self.indicators
        return self.clip_count / cells if cells else 0.0

    def to_dict(self) -> dict:
        return {
            "districts": self.districts,
            "months": self.months,
            "indicators": self.indicators,
            "clip_count": self.clip_count,
            "clip_fraction": self.clip_fraction(),
            "panel_hash": self.panel_hash,
        }


class TrainState(State):
    """State of a training run."""

    def __init__(self) -> None:
        self.start_epoch: int = 0
        self.epochs: int = 0
        self.final_nll: Optional[float] = None
        self.final_kl: Optional[float] = None
        self.final_total: Optional[float] = None
        self.checkpoints: List[str] = []
        self.config_hash: str = ""

    def update_final(self, nll: float, kl: float, total: float) -> None:
        self.final_nll = nll
        self.final_kl = kl
        self.final_total = total

    def to_dict(self) -> dict:
        return {
            "start_epoch": self.start_epoch,
            "epochs": self.epochs,
            "final_nll": self.final_nll,
            "final_kl": self.final_kl,
            "final_total": self.final_total,
            "checkpoints": self.checkpoints,
            "config_hash": self.config_hash,
        }


class EvalState(State):
    def __init__(self) -> None:
        self.districts: int = 0
        self.mean_nll: Optional[float] = None
        self.mean_kl: Optional[float] = None
        self.beta: Optional[float] = None
        self.total: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "districts": self.districts,
            "mean_nll": self.mean_nll,
            "mean_kl": self.mean_kl,
            "beta": self.beta,
            "total": self.total,
        }


class PredictState(State):
    def __init__(self) -> None:
        self.district: str = ""
        self.samples: int = 0
        self.coverage: Optional[float] = None
        self.coverage_by_indicator: Dict[str, float] = {}

    def to_dict(self) -> dict:
        return {
            "district": self.district,
            "samples": self.samples,
            "coverage": self.coverage,
            "coverage_by_indicator": self.coverage_by_indicator,
        }


class VerifyState(State):
    """State of an assumption and gradient verification run."""

    def __init__(self) -> None:
        self.source: str = ""
        self.assumptions: dict = {}
        self.gradcheck: dict = {}
        self.passed: bool = False

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "assumptions": self.assumptions,
            "gradcheck": self.gradcheck,
            "passed": self.passed,
        }
