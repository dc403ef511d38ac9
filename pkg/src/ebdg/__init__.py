from .EBDGSolver import EBDGSolver, Simulation
from .config_validation import validate_configuration

__version__ = "0.1.0"

__all__ = [
    "validate_configuration",
    "EBDGSolver",
    "Simulation",
]
