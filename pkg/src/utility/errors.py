from typing import Optional, Tuple


class VNSDEError(Exception):
    """Base class for all errors related to VNSDE."""

    pass


class VNValueError(VNSDEError, ValueError):
    """Exception raised when a call violates an operation's contract."""

    pass


class VNShapeError(VNValueError):
    """Exception raised for tensor dimension mismatches."""

    def __init__(self, op_name: str, left: tuple, right: tuple) -> None:
        self.op_name = op_name
        self.left = tuple(left)
        self.right = tuple(right)
        super().__init__(
            f"{op_name}: incompatible shapes {self.left} and {self.right}"
        )


class VNValidationError(VNSDEError):
    """Exception raised for malformed input files (anchors, panels, configs)."""

    def __init__(
        self, message: str, path: Optional[str] = None, row: Optional[int] = None
    ) -> None:
        self.path = path
        self.row = row
        location = ""
        if path is not None:
            location = f"{path}"
            if row is not None:
                location += f":{row}"
            location += ": "
        super().__init__(location + message)


class VNCheckpointError(VNSDEError):
    """Exception raised when a checkpoint cannot be used with the given inputs."""

    pass


class VNNumericalError(VNSDEError):
    """Exception raised for non-finite values and numerical blow-up."""

    pass


class VNIntegrationError(VNNumericalError):
    """Exception raised when the latent SDE integration diverges.

    ``rows`` holds the failing positions along the leading batch axis, or None
    for an unbatched path.
    """

    def __init__(
        self, step: int, message: str, rows: Optional[Tuple[int, ...]] = None
    ) -> None:
        self.step = step
        self.rows = rows
        super().__init__(f"integration failed at step {step}: {message}")


class VNReplayError(VNNumericalError):
    """Exception raised when replayed Brownian increments differ from the forward pass."""

    pass


class VNTrainingError(VNNumericalError):
    """Exception raised when a training epoch produces a non-finite loss."""

    def __init__(self, epoch: int, district: Optional[int], message: str) -> None:
        self.epoch = epoch
        self.district = district
        where = f"epoch {epoch}"
        if district is not None:
            where += f", district {district}"
        super().__init__(f"training aborted at {where}: {message}")
