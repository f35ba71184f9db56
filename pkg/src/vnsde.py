import argparse
import sys
from pathlib import Path
from typing import Dict, List, Optional, Type

from command.command import Command
from command.evaluate import EvalCommand
from command.predict import PredictCommand
from command.synth import SynthCommand
from command.train import TrainCommand
from command.verify import FRESH_MODES, VerifyCommand
from data.panel import DEFAULT_SIGMA
from training.config import BACKWARD_MODES
from utility.errors import VNNumericalError, VNSDEError, VNValidationError
from utility.manifest import RunManifest, file_sha256

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

COMMANDS: Dict[str, Type[Command]] = {
    "synth": SynthCommand,
    "train": TrainCommand,
    "eval": EvalCommand,
    "predict": PredictCommand,
    "verify": VerifyCommand,
}

# Arguments holding input file paths; made absolute before a command runs
PATH_ARGUMENTS = ("anchors", "panel", "config", "ckpt", "resume")


class VNSDE:
    def __init__(self, args: argparse.Namespace) -> None:
        self.args = args
        for key in PATH_ARGUMENTS:
            value = getattr(args, key, None)
            if value:
                setattr(args, key, str(Path(value).resolve()))

    def run(self) -> None:
        if self.args.command == "rerun":
            self.rerun()
            return
        COMMANDS[self.args.command](self.args).run()

    def rerun(self) -> None:
        """Execute the command recorded in a manifest into a new output directory."""
        manifest = RunManifest.load(self.args.manifest)
        if manifest.command not in COMMANDS:
            raise VNValidationError(f"manifest records unknown command {manifest.command!r}")
        for name, entry in manifest.inputs.items():
            path = Path(entry["path"])
            if not path.is_file():
                raise VNValidationError(f"recorded input {name} is missing", str(path))
            if file_sha256(path) != entry["sha256"]:
                raise VNValidationError(f"recorded input {name} changed since the original run", str(path))

        namespace = argparse.Namespace(**manifest.arguments)
        namespace.command = manifest.command
        namespace.out = self.args.out
        namespace.log_dir = self.args.log_dir
        namespace.no_progress = self.args.no_progress
        COMMANDS[manifest.command](namespace).run()

        rerun_manifest = RunManifest.load(self.args.out)
        differing = sorted(
            name
            for name in set(manifest.outputs) | set(rerun_manifest.outputs)
            if manifest.outputs.get(name) != rerun_manifest.outputs.get(name)
        )
        if differing:
            raise VNValidationError(
                f"rerun outputs differ from the recorded run: {', '.join(differing)}",
                str(self.args.manifest),
            )
        print(f"Rerun reproduced all {len(manifest.outputs)} recorded outputs byte for byte")


def configure_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="vnsde",
        description="VNSDE: variational neural SDE for district-level indicator panels",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", required=True, help="Output directory")
    common.add_argument("--log-dir", default=None, help="Log root (default: <repo>/log)")
    common.add_argument("--no-progress", action="store_true", help="Hide progress bars")

    subparsers = parser.add_subparsers(dest="command", required=True)

    synth = subparsers.add_parser("synth", parents=[common], help="Synthesize a monthly panel")
    synth.add_argument("--anchors", required=True, help="Anchor CSV")
    synth.add_argument(
        "--sigma", type=float, default=DEFAULT_SIGMA, help="Bridge volatility (percent per sqrt month)"
    )
    synth.add_argument("--seed", type=int, default=0, help="Random seed")
    synth.add_argument("--workers", type=int, default=8, help="Synthesis threads")

    train = subparsers.add_parser("train", parents=[common], help="Train the model")
    train.add_argument("--panel", required=True, help="panel.csv or its directory")
    train.add_argument("--config", default=None, help="JSON training config")
    train.add_argument("--epochs", type=int, default=None, help="Override epochs")
    train.add_argument("--seed", type=int, default=None, help="Override seed")
    train.add_argument("--lr", type=float, default=None, help="Override learning rate")
    train.add_argument(
        "--backward-mode", choices=BACKWARD_MODES, default=None, help="Override backward mode"
    )
    train.add_argument("--resume", default=None, help="Checkpoint to resume from")

    evaluate = subparsers.add_parser("eval", parents=[common], help="Per-district NLL table")
    evaluate.add_argument("--ckpt", required=True, help="Checkpoint")
    evaluate.add_argument("--panel", required=True, help="panel.csv or its directory")
    evaluate.add_argument("--samples", type=int, default=1, help="Latent paths per district")
    evaluate.add_argument("--seed", type=int, default=None, help="Seed (default: training seed)")

    predict = subparsers.add_parser("predict", parents=[common], help="Trajectories with bands")
    predict.add_argument("--ckpt", required=True, help="Checkpoint")
    predict.add_argument("--panel", required=True, help="panel.csv or its directory")
    predict.add_argument("--district", required=True, help="District name or index")
    predict.add_argument("--samples", type=int, default=1, help="Latent paths to combine")
    predict.add_argument("--seed", type=int, default=None, help="Seed (default: training seed)")

    verify = subparsers.add_parser("verify", parents=[common], help="Assumption and gradient checks")
    source = verify.add_mutually_exclusive_group()
    source.add_argument("--ckpt", default=None, help="Checkpoint")
    source.add_argument("--fresh", choices=FRESH_MODES, default=None, help="Fresh model instead")
    verify.add_argument("--panel", default=None, help="Panel for the initial-moment estimate")
    verify.add_argument("--districts", type=int, default=30, help="Districts of a fresh model")
    verify.add_argument("--samples", type=int, default=1000, help="Sampled latent points")
    verify.add_argument("--coordinates", type=int, default=200, help="Gradient coordinates checked")
    verify.add_argument("--seed", type=int, default=0, help="Random seed")

    rerun = subparsers.add_parser("rerun", parents=[common], help="Re-execute a recorded run")
    rerun.add_argument("--manifest", required=True, help="manifest.json or its directory")

    return parser.parse_args(argv)


def exit_code(error: VNSDEError) -> int:
    """2 for bad inputs and contract violations, 3 for numerical aborts."""
    if isinstance(error, VNNumericalError):
        return EXIT_NUMERICAL
    return EXIT_VALIDATION


def main(argv: Optional[List[str]] = None) -> int:
    args = configure_args(argv)
    try:
        VNSDE(args).run()
    except VNSDEError as e:
        print(f"error: {e}", file=sys.stderr)
        return exit_code(e)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
