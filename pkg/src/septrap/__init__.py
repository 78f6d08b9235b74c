"""Simulator of separately trapped ions coupled through their vibrations."""

from septrap.errors import (
    NoSolutionError,
    PhysicsError,
    PropagationError,
    ProtocolFailure,
    TruncationError,
)

__version__ = "0.1.0"

__all__ = [
    "NoSolutionError",
    "PhysicsError",
    "PropagationError",
    "ProtocolFailure",
    "TruncationError",
]
