"""Second-order response of Bell functionals along unitary orbits of quantum strategies."""

from .games import GAMES, GameRecord, get_game
from .qstrategy import QuantumStrategy, canonical_det_strategy, correlation_of, tsirelson_strategy
from .scenario import BellFunctional, Correlation, DeterministicStrategy, Scenario, classical_max, evaluate

__version__ = "0.1.0"

__all__ = [
    "GAMES",
    "GameRecord",
    "get_game",
    "QuantumStrategy",
    "canonical_det_strategy",
    "correlation_of",
    "tsirelson_strategy",
    "BellFunctional",
    "Correlation",
    "DeterministicStrategy",
    "Scenario",
    "classical_max",
    "evaluate",
]
