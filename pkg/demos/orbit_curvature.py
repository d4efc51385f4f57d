"""Score landscape around a classical optimum of CHSH.

Realizes the best deterministic strategy with qubits, perturbs it along
random unitary orbits and compares the measured curvature with the
closed-form value. Then climbs from a random qubit strategy to the
quantum maximum with orbit gradient ascent.

Run: python3 demos/orbit_curvature.py
"""

import math

import numpy as np

from bellperturb import games
from bellperturb.perturb import (
    deterministic_curvature,
    fd_second_derivative,
    gradient_ascent,
    sample_generators,
)
from bellperturb.qstrategy import canonical_det_strategy, random_pure_strategy
from bellperturb.scenario import classical_max

game = games.chsh()
rng = np.random.default_rng(1)
print(f"classical value {classical_max(game.functional).value:.6f}")

print("\nsecond derivative at the deterministic optimum (finite difference vs closed form)")
for k in range(5):
    s = canonical_det_strategy(game.reference_strategy, 2, rng)
    g = sample_generators(s, rng)
    fd = fd_second_derivative(game.functional, s, g)
    exact = 2 * deterministic_curvature(game.functional, s, g, game.reference_strategy)
    print(f"  orbit {k}: {fd: .8f}  {exact: .8f}")

res = gradient_ascent(game.functional, random_pure_strategy(game.scenario, 2, rng))
print(f"\nascent: {res.score:.10f} after {res.iterations} iterations ({res.reason})")
print(f"quantum maximum (2+sqrt 2)/4 = {(2 + math.sqrt(2)) / 4:.10f}")
