from abc import ABC, abstractmethod


class State(ABC):
    """Abstract base class for command results.

    Each command fills its own State while it runs; the summary printed at the
    end of a run and the manifest are built from ``to_dict``.
    """

    def __init__(self) -> None:
        """Initialize an empty state object."""
        pass

    @abstractmethod
    def to_dict(self) -> dict:
        """Convert state to dictionary representation."""
        pass
