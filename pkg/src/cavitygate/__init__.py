"""Thermal-cavity-mediated Rydberg two-qubit gate simulator."""

from .model import SystemParams, lindblad_set, rotating_frame_hamiltonian
from .qspace import CompositeSpace, Operator, QuantumState, build_space

__all__ = [
    "CompositeSpace",
    "Operator",
    "QuantumState",
    "SystemParams",
    "build_space",
    "lindblad_set",
    "rotating_frame_hamiltonian",
]

__version__ = "0.1.0"
