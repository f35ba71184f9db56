import argparse

import pandas as pd

from command.command import Command
from data.persist import read_panel
from state.command_state import PredictState
from training.checkpoint import load_checkpoint
from training.evaluate import predict_district

PREDICTION_COLUMNS = ["month", "observed", "mean", "lower", "upper"]


class PredictCommand(Command[PredictState]):
    """Mean trajectories with +-2 sigma bands for one district, in percent."""

    name = "predict"

    def __init__(self, args: argparse.Namespace) -> None:
        super().__init__(args, PredictState())

    def execute(self) -> None:
        checkpoint = load_checkpoint(self.args.ckpt)
        panel, stats = read_panel(self.args.panel)
        self.manifest.add_input("checkpoint", self.args.ckpt)
        self.add_panel_input(self.args.panel)
        checkpoint.check_panel(panel.panel_hash(), panel.districts)

        district = panel.district_index(self.args.district)
        name = panel.districts[district]
        seed = checkpoint.config.seed if self.args.seed is None else self.args.seed
        self.manifest.seed = seed
        bands = predict_district(
            checkpoint.params,
            panel.values[district],
            stats,
            district,
            seed,
            self.args.samples,
        )

        months = list(range(panel.values.shape[1]))
        for k, indicator in enumerate(panel.indicators):
            frame = pd.DataFrame(
                {
                    "month": months,
                    "observed": bands.observed[:, k],
                    "mean": bands.mean[:, k],
                    "lower": bands.lower[:, k],
                    "upper": bands.upper[:, k],
                },
                columns=PREDICTION_COLUMNS,
            )
            self.write_csv(f"{indicator}.csv", frame)

        by_indicator = {
            indicator: float(value)
            for indicator, value in zip(panel.indicators, bands.coverage_by_indicator())
        }
        self.write_json(
            "coverage.json",
            {
                "district": name,
                "district_id": district,
                "samples": self.args.samples,
                "seed": seed,
                "coverage": bands.coverage(),
                "coverage_by_indicator": by_indicator,
            },
        )
        self.state.district = name
        self.state.samples = self.args.samples
        self.state.coverage = bands.coverage()
        self.state.coverage_by_indicator = by_indicator
        self.logger.print_console(
            f"{name}: {100 * bands.coverage():.1f}% of observed points inside the bands"
        )
