import argparse
from typing import List

import pandas as pd

from command.command import Command
from data.normalize import normalize
from data.persist import read_panel
from diffcore.adam import AdamState
from model.params import ModelParams
from state.command_state import TrainState
from training.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from training.config import TrainConfig
from training.trainer import EpochLog, fit
from utility.errors import VNCheckpointError

LOSS_CURVE_COLUMNS = ["epoch", "nll", "kl", "beta", "total"]
FINAL_CHECKPOINT = "checkpoint.json"


class TrainCommand(Command[TrainState]):
    """Train the model on a synthesized panel."""

    name = "train"

    def __init__(self, args: argparse.Namespace) -> None:
        super().__init__(args, TrainState())

    def resolve_config(self) -> TrainConfig:
        config = TrainConfig.load(self.args.config) if self.args.config else TrainConfig()
        return config.replace(
            epochs=self.args.epochs,
            seed=self.args.seed,
            backward_mode=self.args.backward_mode,
            lr=self.args.lr,
        )

    def execute(self) -> None:
        panel, stats = read_panel(self.args.panel)
        self.add_panel_input(self.args.panel)
        config = self.resolve_config()
        if self.args.config:
            self.manifest.add_input("config", self.args.config)
        self.manifest.seed = config.seed
        self.manifest.config = config.to_dict()
        self.state.config_hash = config.config_hash()
        self.write_json("config.json", config.to_dict())

        y, _ = normalize(panel.values, stats, panel.indicators)
        panel_hash = panel.panel_hash()

        history: List[EpochLog] = []
        adam = None
        if self.args.resume:
            resumed = load_checkpoint(self.args.resume)
            self.manifest.add_input("resume", self.args.resume)
            resumed.check_panel(panel_hash, panel.districts)
            if resumed.config.replace(epochs=config.epochs) != config:
                raise VNCheckpointError(
                    "resume checkpoint was trained with a different configuration "
                    "(only epochs may change)"
                )
            if resumed.epoch > config.epochs:
                raise VNCheckpointError(
                    f"checkpoint is at epoch {resumed.epoch}, beyond epochs={config.epochs}"
                )
            params = resumed.params
            adam = resumed.adam
            history = list(resumed.history)
            self.state.start_epoch = resumed.epoch
            self.logger.print_console(f"Resuming from epoch {resumed.epoch}")
        else:
            dims = config.dims(len(panel.indicators), panel.values.shape[1])
            params = ModelParams.initialize(dims, panel.district_count, config.seed)

        def on_checkpoint(
            done: int, params: ModelParams, adam: AdamState, history: List[EpochLog]
        ) -> None:
            checkpoint = Checkpoint(
                done, config, panel_hash, list(panel.districts), params, adam, list(history)
            )
            relative = FINAL_CHECKPOINT if done == config.epochs else f"checkpoints/epoch_{done:05d}.json"
            path = self.register_output(save_checkpoint(checkpoint, self.output_path(relative)))
            self.state.checkpoints.append(str(path))
            self.logger.print_log(f"Checkpoint written: {path}")

        self.logger.print_console(
            f"Training {panel.district_count} districts for epochs "
            f"{self.state.start_epoch}..{config.epochs - 1} ({config.backward_mode} backward)"
        )
        result = fit(
            params,
            y,
            config,
            adam=adam,
            start_epoch=self.state.start_epoch,
            history=history,
            logger=self.logger,
            on_checkpoint=on_checkpoint,
            progress=self.progress,
        )
        if self.out_dir / FINAL_CHECKPOINT not in self.outputs:
            # Resuming a finished run executes no epoch, so the hook never fired
            on_checkpoint(config.epochs, result.params, result.adam, result.history)

        frame = pd.DataFrame([log.to_dict() for log in result.history], columns=LOSS_CURVE_COLUMNS)
        self.write_csv("loss_curve.csv", frame)
        self.state.epochs = config.epochs
        if result.history:
            last = result.history[-1]
            self.state.update_final(last.nll, last.kl, last.total)
