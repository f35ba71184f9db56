import argparse
import hashlib
import json
import os
import time
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Dict, Generic, List, Optional, TypeVar

import pandas as pd

from data.persist import panel_paths
from state.state import State
from utility.logger import Logger
from utility.manifest import RunManifest, code_version

BASE_PATH = Path(__file__).resolve().parents[2]

# Namespace entries that never go into a manifest
_RUNTIME_ARGUMENTS = {"out", "log_dir", "func", "command", "no_progress"}

S = TypeVar("S", bound=State)


class Command(ABC, Generic[S]):
    """Base class for the command-line verbs.

    A command reads its inputs, writes its artifacts into the output directory
    and leaves a ``manifest.json`` next to them. It keeps its own log file under
    ``<log root>/<CommandName>/<start time>-<hash>/command.log`` and records its
    results in a State.
    """

    name: str = ""

    def __init__(self, args: argparse.Namespace, state: S) -> None:
        """
        Initialize the command.

        Args:
            args: Parsed command-line arguments; must carry ``out`` and ``log_dir``
            state: State of the command
        """
        self.args = args
        self.state = state
        self.command_name = self.__class__.__name__
        self.out_dir = Path(args.out)
        self.progress = not getattr(args, "no_progress", False)
        self.outputs: List[Path] = []
        self.manifest = RunManifest(self.name, self.manifest_arguments())

        self.start_time_str = time.strftime("%Y-%m-%d-%H-%M-%S", time.localtime())
        self.hash_id = hashlib.sha256(f"{id(self)}".encode()).hexdigest()[0:6]
        log_root = Path(args.log_dir) if getattr(args, "log_dir", None) else BASE_PATH / "log"
        self.log_dir_path = log_root / self.command_name / f"{self.start_time_str}-{self.hash_id}"
        os.makedirs(self.log_dir_path, exist_ok=True)
        self.logger = Logger(str(self.log_dir_path / "command.log"))

    def manifest_arguments(self) -> Dict[str, object]:
        return {
            key: value
            for key, value in sorted(vars(self.args).items())
            if key not in _RUNTIME_ARGUMENTS
        }

    def run(self) -> S:
        """Run the command and write its manifest."""
        self.manifest.started = time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime())
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.logger.print_log(f"{self.command_name} started with {self.manifest_arguments()}")
        try:
            self.execute()
            self.finalize()
        finally:
            self.logger.close()
        return self.state

    @abstractmethod
    def execute(self) -> None:
        """Read inputs, compute and write the artifacts."""
        pass

    def finalize(self) -> None:
        """Hash the artifacts into the manifest and report the state."""
        self.manifest.code_version = code_version()
        self.manifest.finished = time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime())
        self.manifest.record_outputs(self.out_dir, self.outputs)
        self.manifest.save(self.out_dir)
        self.logger.print_console(
            f"{self.command_name} finished: {json.dumps(self.state.to_dict(), sort_keys=True)}"
        )
        self.logger.print_console(f"Outputs written to {self.out_dir}")

    def add_panel_input(self, path: str) -> None:
        csv_path, sidecar_path = panel_paths(path)
        self.manifest.add_input("panel", csv_path)
        self.manifest.add_input("panel_sidecar", sidecar_path)

    def output_path(self, relative: str) -> Path:
        path = self.out_dir / relative
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    def register_output(self, path: Path) -> Path:
        if path not in self.outputs:
            self.outputs.append(path)
        return path

    def write_json(self, relative: str, payload: dict) -> Path:
        path = self.output_path(relative)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")
        return self.register_output(path)

    def write_csv(
        self, relative: str, frame: pd.DataFrame, float_format: Optional[str] = "%.17g"
    ) -> Path:
        path = self.output_path(relative)
        frame.to_csv(path, index=False, float_format=float_format, lineterminator="\n")
        return self.register_output(path)
