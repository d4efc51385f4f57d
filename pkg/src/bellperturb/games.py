"""Catalog of the four reference games, each cast as a Bell functional."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

from .scenario import BellFunctional, DeterministicStrategy, Scenario


@dataclass(frozen=True)
class GameRecord:
    name: str
    scenario: Scenario
    functional: BellFunctional
    classical_value: float
    quantum_value: Optional[float]  # None when unknown
    reference_strategy: DeterministicStrategy


def chsh() -> GameRecord:
    """CHSH: win iff ``a1 ⊕ a2 = x1 ∧ x2``, uniform inputs."""
    sc = Scenario(2, 2, 2)
    beta = BellFunctional.from_function(sc, lambda a, x: 0.25 * ((a[0] ^ a[1]) == (x[0] & x[1])))
    return GameRecord("chsh", sc, beta, 0.75, (2 + math.sqrt(2)) / 4, DeterministicStrategy.constant(sc, 0))


GHZ_INPUTS = ((0, 0, 0), (1, 1, 0), (1, 0, 1), (0, 1, 1))


def ghz() -> GameRecord:
    """GHZ/Mermin on the even-parity inputs; target parity ``⌊(x1+x2+x3)/2⌋``."""
    sc = Scenario(3, 2, 2)

    def coef(a, x):
        if tuple(x) not in GHZ_INPUTS:
            return 0.0
        return 0.25 * ((a[0] ^ a[1] ^ a[2]) == sum(x) // 2)

    beta = BellFunctional.from_function(sc, coef)
    ref = DeterministicStrategy.constant(sc, (0, 0, 1))
    return GameRecord("ghz", sc, beta, 0.75, 1.0, ref)


_I3322_S = {(0, 0): 1, (1, 0): 1, (0, 1): 1, (1, 1): 1, (2, 1): 1, (0, 2): 1, (1, 2): 1, (2, 2): -1, (2, 0): 0}
_I3322_C = (2, 1, 0)


def i3322() -> GameRecord:
    """The I3322 inequality in Collins-Gisin form.

    The joint term counts the ``a1 = a2 = 0`` event; marginals are spread over
    the other party's three inputs with weight 1/3 each.
    """
    sc = Scenario(2, 3, 2)

    def coef(a, x):
        joint = _I3322_S[tuple(x)] * (a[0] == 0 and a[1] == 0)
        return joint - _I3322_C[x[0]] / 3 * (a[0] == 0) - _I3322_C[x[1]] / 3 * (a[1] == 0)

    beta = BellFunctional.from_function(sc, coef)
    return GameRecord("i3322", sc, beta, 0.0, None, DeterministicStrategy.constant(sc, 1))


MAGIC_ROWS = ((0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 0))  # even parity, party 1
MAGIC_COLS = ((0, 0, 1), (0, 1, 0), (1, 0, 0), (1, 1, 1))  # odd parity, party 2


def magic_square() -> GameRecord:
    """Mermin-Peres magic square; ``x = (row, column)``, outputs index the triples."""
    sc = Scenario(2, 3, 4)
    beta = BellFunctional.from_function(sc, lambda a, x: (MAGIC_ROWS[a[0]][x[1]] == MAGIC_COLS[a[1]][x[0]]) / 9)
    ref = DeterministicStrategy(sc, ((0, 0, 1), (0, 0, 0)))
    return GameRecord("magic-square", sc, beta, 8 / 9, 1.0, ref)


GAMES: dict[str, Callable[[], GameRecord]] = {
    "chsh": chsh,
    "ghz": ghz,
    "i3322": i3322,
    "magic-square": magic_square,
}


def get_game(name: str) -> GameRecord:
    try:
        return GAMES[name]()
    except KeyError:
        raise KeyError(f"unknown game {name!r}; valid ids: {', '.join(GAMES)}") from None
