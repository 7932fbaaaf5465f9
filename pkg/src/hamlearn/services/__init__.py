"""Service layer: dynamics, basis, data pipeline, learning and experiments."""

from .basis import TotalDegreeBasis
from .dynamics import builtin_system, integrate
from .experiment import ExperimentService
from .learner import HamiltonianModel, NonSPModel, fit_hamiltonian, fit_nonsp

__all__ = [
    "ExperimentService",
    "HamiltonianModel",
    "NonSPModel",
    "TotalDegreeBasis",
    "builtin_system",
    "fit_hamiltonian",
    "fit_nonsp",
    "integrate",
]
