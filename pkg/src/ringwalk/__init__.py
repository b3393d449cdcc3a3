"""Continuous-time quantum walks on ring lattices under measurement-induced dephasing."""

from .errors import (
    CapacityError,
    InfiniteBoundError,
    IntegrationError,
    ParameterError,
    UnsupportedCaseError,
)
from .network import NetworkSpec, adjacency, hamiltonian, laplacian, preset_hamiltonian

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "InfiniteBoundError",
    "IntegrationError",
    "NetworkSpec",
    "ParameterError",
    "UnsupportedCaseError",
    "adjacency",
    "hamiltonian",
    "laplacian",
    "preset_hamiltonian",
    "__version__",
]
