import argparse

from command.command import Command
from data.anchors import load_anchors
from data.normalize import compute_stats
from data.panel import synthesize
from data.persist import write_panel
from state.command_state import SynthState


class SynthCommand(Command[SynthState]):
    """Bridge-interpolate survey anchors into a monthly panel."""

    name = "synth"

    def __init__(self, args: argparse.Namespace) -> None:
        super().__init__(args, SynthState())

    def execute(self) -> None:
        anchors = load_anchors(self.args.anchors)
        self.manifest.add_input("anchors", self.args.anchors)
        self.manifest.seed = self.args.seed
        self.logger.print_console(
            f"Loaded {anchors.record_count} anchor records for {anchors.district_count} districts"
        )

        panel = synthesize(
            anchors,
            sigma=self.args.sigma,
            seed=self.args.seed,
            max_workers=self.args.workers,
            progress=self.progress,
        )
        stats = compute_stats(panel.values, panel.indicators)
        for path in write_panel(panel, stats, self.out_dir):
            self.register_output(path)

        self.state.districts, self.state.months, self.state.indicators = panel.values.shape
        self.state.clip_count = panel.clip_count
        self.state.panel_hash = panel.panel_hash()
        self.logger.print_console(
            f"Panel: {self.state.districts} districts x {self.state.months} months x "
            f"{self.state.indicators} indicators, {panel.clip_count} cells clipped "
            f"({100 * self.state.clip_fraction():.3f}%)"
        )
