import hashlib
import json
from pathlib import Path
from typing import Dict, List, Optional, Union

from utility.errors import VNValidationError

MANIFEST_NAME = "manifest.json"
MANIFEST_FORMAT = "vnsde-manifest/1"

SRC_PATH = Path(__file__).resolve().parents[1]


def file_sha256(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def code_version() -> str:
    """sha256 over every Python source file of the package, in path order."""
    digest = hashlib.sha256()
    for source in sorted(SRC_PATH.rglob("*.py")):
        digest.update(str(source.relative_to(SRC_PATH)).encode("utf-8"))
        digest.update(source.read_bytes())
    return digest.hexdigest()


class RunManifest:
    """Record of one command run: what was asked, what was read, what was written.

    ``arguments`` holds the parsed command-line arguments (input paths made
    absolute, output and log directories left out), which is what a rerun
    needs to reproduce the outputs.
    """

    def __init__(
        self,
        command: str,
        arguments: Dict[str, object],
        seed: Optional[int] = None,
        config: Optional[dict] = None,
        inputs: Optional[Dict[str, Dict[str, str]]] = None,
        outputs: Optional[Dict[str, str]] = None,
        code_version: str = "",
        started: str = "",
        finished: str = "",
    ) -> None:
        """Initialize a RunManifest object.

        Raises:
            VNValidationError: If the command name is empty or arguments is not a dict
        """
        self._validate_parameters(command, arguments)
        self.command = command
        self.arguments = dict(arguments)
        self.seed = seed
        self.config = config
        self.inputs = dict(inputs or {})
        self.outputs = dict(outputs or {})
        self.code_version = code_version
        self.started = started
        self.finished = finished

    def _validate_parameters(self, command: str, arguments: Dict[str, object]) -> None:
        if not isinstance(command, str) or not command.strip():
            raise VNValidationError("manifest command must be a non-empty string")
        if not isinstance(arguments, dict):
            raise VNValidationError("manifest arguments must be an object")

    def add_input(self, name: str, path: Union[str, Path]) -> None:
        resolved = Path(path).resolve()
        self.inputs[name] = {"path": str(resolved), "sha256": file_sha256(resolved)}

    def record_outputs(self, out_dir: Union[str, Path], paths: List[Path]) -> None:
        """Hash every output file, keyed by its path relative to ``out_dir``."""
        root = Path(out_dir).resolve()
        self.outputs = {
            str(Path(p).resolve().relative_to(root)): file_sha256(p) for p in sorted(paths)
        }

    def __str__(self) -> str:
        return (
            f"RunManifest(command='{self.command}', seed={self.seed}, "
            f"inputs={sorted(self.inputs)}, outputs={sorted(self.outputs)})"
        )

    def __repr__(self) -> str:
        return self.__str__()

    def to_dict(self) -> dict:
        return {
            "format": MANIFEST_FORMAT,
            "command": self.command,
            "arguments": self.arguments,
            "seed": self.seed,
            "config": self.config,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "code_version": self.code_version,
            "started": self.started,
            "finished": self.finished,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunManifest":
        """Create RunManifest from dictionary representation.

        Raises:
            VNValidationError: If required keys are missing or the format is unknown
        """
        required_keys = {"format", "command", "arguments"}
        missing_keys = required_keys - set(data.keys())
        if missing_keys:
            raise VNValidationError(f"Missing required manifest keys: {sorted(missing_keys)}")
        if data["format"] != MANIFEST_FORMAT:
            raise VNValidationError(f"unsupported manifest format {data['format']!r}")
        return cls(
            command=data["command"],
            arguments=data["arguments"],
            seed=data.get("seed"),
            config=data.get("config"),
            inputs=data.get("inputs"),
            outputs=data.get("outputs"),
            code_version=data.get("code_version", ""),
            started=data.get("started", ""),
            finished=data.get("finished", ""),
        )

    def save(self, out_dir: Union[str, Path]) -> Path:
        path = Path(out_dir) / MANIFEST_NAME
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RunManifest":
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_NAME
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except FileNotFoundError:
            raise VNValidationError("manifest does not exist", str(path))
        except json.JSONDecodeError as e:
            raise VNValidationError(f"manifest is not valid JSON: {e}", str(path))
        if not isinstance(data, dict):
            raise VNValidationError("manifest must be a JSON object", str(path))
        return cls.from_dict(data)
