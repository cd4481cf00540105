"""Monte Carlo simulation of the repetition code under depolarizing noise and leakage."""

from leaksim.circuits import CodeParams, Schedule, build_experiment
from leaksim.core import GateKind, PauliLeak, StructuralError
from leaksim.dgraph import build_graph
from leaksim.engine import Cell, LogicalErrorEstimate, estimate
from leaksim.noise import NoiseParams

__version__ = "0.1.0"

__all__ = [
    "Cell",
    "CodeParams",
    "GateKind",
    "LogicalErrorEstimate",
    "NoiseParams",
    "PauliLeak",
    "Schedule",
    "StructuralError",
    "build_experiment",
    "build_graph",
    "estimate",
]
