import argparse

import pandas as pd

from command.command import Command
from data.normalize import normalize
from data.persist import read_panel
from objective.schedule import beta_at
from state.command_state import EvalState
from training.checkpoint import load_checkpoint
from training.evaluate import evaluate_districts

NLL_COLUMNS = ["district", "nll"]
TOTAL_ROW = "Total"


class EvalCommand(Command[EvalState]):
    """Per-district NLL table of a trained model plus the ELBO decomposition."""

    name = "eval"

    def __init__(self, args: argparse.Namespace) -> None:
        super().__init__(args, EvalState())

    def execute(self) -> None:
        checkpoint = load_checkpoint(self.args.ckpt)
        panel, stats = read_panel(self.args.panel)
        self.manifest.add_input("checkpoint", self.args.ckpt)
        self.add_panel_input(self.args.panel)
        checkpoint.check_panel(panel.panel_hash(), panel.districts)

        config = checkpoint.config
        seed = config.seed if self.args.seed is None else self.args.seed
        self.manifest.seed = seed
        # beta in effect during the last completed epoch
        beta = beta_at(config.schedule, max(checkpoint.epoch - 1, 0))
        y, _ = normalize(panel.values, stats, panel.indicators)
        scores = evaluate_districts(
            checkpoint.params, y, panel.districts, seed, beta, self.args.samples
        )
        breakdown = scores.breakdown()

        rows = scores.ranked() + [(TOTAL_ROW, breakdown.total)]
        self.write_csv("nll.csv", pd.DataFrame(rows, columns=NLL_COLUMNS))
        self.write_json(
            "elbo.json",
            {
                "epoch": checkpoint.epoch,
                "samples": self.args.samples,
                "seed": seed,
                "mean_nll": breakdown.nll,
                "mean_kl": breakdown.kl,
                "beta": breakdown.beta,
                "total": breakdown.total,
                "per_district": {
                    name: {"nll": float(nll), "kl": float(kl)}
                    for name, nll, kl in zip(scores.districts, scores.nll, scores.kl)
                },
            },
        )

        self.state.districts = len(scores.districts)
        self.state.mean_nll = breakdown.nll
        self.state.mean_kl = breakdown.kl
        self.state.beta = breakdown.beta
        self.state.total = breakdown.total
        self.logger.print_console(
            f"Total = mean NLL + beta * mean KL = {breakdown.nll:.6f} + "
            f"{breakdown.beta:g} * {breakdown.kl:.6f} = {breakdown.total:.6f}"
        )
