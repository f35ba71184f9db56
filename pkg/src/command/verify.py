import argparse

import numpy as np

from command.command import Command
from data.normalize import normalize
from data.persist import read_panel
from model.dims import Dims
from model.params import ModelParams
from sdesolve.assumptions import verify_assumptions
from state.command_state import VerifyState
from training.checkpoint import load_checkpoint
from training.verify import GRADCHECK_TOLERANCE, model_gradient_check

FRESH_MODES = ("random", "zero")


class VerifyCommand(Command[VerifyState]):
    """Assumption estimates and a finite-difference gradient check of a model."""

    name = "verify"

    def __init__(self, args: argparse.Namespace) -> None:
        super().__init__(args, VerifyState())

    def load_params(self) -> ModelParams:
        if self.args.ckpt:
            params = load_checkpoint(self.args.ckpt).params
            self.manifest.add_input("checkpoint", self.args.ckpt)
            self.state.source = "checkpoint"
            return params
        mode = self.args.fresh or "random"
        self.state.source = f"fresh {mode}"
        dims = Dims()
        if mode == "zero":
            return ModelParams.zeros(dims, self.args.districts)
        return ModelParams.initialize(dims, self.args.districts, self.args.seed)

    def execute(self) -> None:
        params = self.load_params()
        self.manifest.seed = self.args.seed

        y0 = None
        if self.args.panel:
            panel, stats = read_panel(self.args.panel)
            self.add_panel_input(self.args.panel)
            y, _ = normalize(panel.values, stats, panel.indicators)
            if y.shape[0] == params.district_count:
                y0 = y[:, 0, :]
            else:
                self.logger.print_warning(
                    "panel and model district counts differ; skipping the initial-moment estimate"
                )

        report = verify_assumptions(
            params,
            np.arange(params.district_count),
            self.args.samples,
            seed=self.args.seed,
            y0=y0,
        )
        grad_report = model_gradient_check(params, seed=self.args.seed, coordinates=self.args.coordinates)

        self.state.assumptions = report.to_dict()
        self.state.gradcheck = grad_report.to_dict()
        self.state.passed = grad_report.passed(GRADCHECK_TOLERANCE)
        self.write_json(
            "verify.json",
            {
                "source": self.state.source,
                "assumptions": self.state.assumptions,
                "gradcheck": self.state.gradcheck,
                "gradcheck_tolerance": GRADCHECK_TOLERANCE,
                "passed": self.state.passed,
            },
        )
        self.logger.print_console(
            f"Lipschitz ~ {report.lipschitz_estimate:.4g}, growth ~ {report.growth_constant:.4g}, "
            f"diffusion growth ~ {report.diffusion_growth:.4g}, embedding bound {report.embedding_bound:.4g}"
        )
        self.logger.print_console(
            f"Gradient check: {grad_report.checked} coordinates, "
            f"max relative error {grad_report.max_rel_error:.3g}"
        )
