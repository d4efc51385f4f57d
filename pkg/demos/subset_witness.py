"""A one-flip optimum that is not a local optimum among quantum strategies.

The three-outcome functional below makes every single-party change worse,
yet its two-party subset game behaves like CHSH, so a quantum perturbation
beats the deterministic score.

Run: python3 demos/subset_witness.py
"""

import numpy as np

from bellperturb.scenario import classical_max, one_flip_status
from bellperturb.subsetgames import decompose_b2, embedded_chsh_witness, local_optimality_probe
from bellperturb.qstrategy import canonical_det_strategy

beta, det = embedded_chsh_witness()
cm = classical_max(beta)
print(f"classical value {cm.value:g}, unique maximizer: {cm.unique}")
print(f"one-flip maximum: {one_flip_status(beta, det).is_max}")

rng = np.random.default_rng(0)
s = canonical_det_strategy(det, 3, rng, per_input=True)
dec = decompose_b2(beta, s, det)
print(f"second-order operator splits over subsets {[t.subset for t in dec.terms]}, residual {dec.residual:.1e}")

report = local_optimality_probe(beta, det, 3, 10, rng)
print(f"largest subset-game value {report.max_value:.4f}: {report.verdict}")
