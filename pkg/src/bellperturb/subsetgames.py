"""Second-order structure of projective realizations of deterministic points.

At a projective realization of ``p_ã`` the curvature of the score splits into
a state term ``Tr(B₂ K_ρ ρ K_ρ†)``, built from output strings that deviate
from ``ã(x)`` on two or more sites, and a remainder ``R`` from single-site
deviations. ``B₂`` further decomposes into one block per party subset ``S``
(a *subset game*) acting on the parties of ``S`` while the others sit on their
winning projector.

Output relabeling for subset games: on site ``s_i`` the game digit
``k ∈ {1, …, d-1}`` stands for the output ``(ã_{s_i}(ξ_i) + k) mod d``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import linalg
from .linalg import TOL
from .perturb import PerturbationGenerators, input_generator
from .qstrategy import QuantumStrategy, canonical_det_strategy, verify_det_realization
from .scenario import (
    BellFunctional,
    DeterministicStrategy,
    OneFlipStatus,
    Scenario,
    one_flip_status,
    score,
)

VERDICT_REFUTED = "not a local optimum in Q_P(d)"
VERDICT_SUPPORTED = "criterion satisfied on samples"
VERDICT_INCONCLUSIVE = "inconclusive"


def _normalize_subset(subset: Sequence[int], n: int) -> tuple[int, ...]:
    s = tuple(sorted(set(int(i) for i in subset)))
    if not s:
        raise ValueError("subset must be non-empty")
    if s[0] < 0 or s[-1] >= n:
        raise ValueError(f"subset {s} out of range for {n} parties")
    return s


def _require_m2(beta: BellFunctional, what: str) -> None:
    if beta.scenario.m != 2:
        raise ValueError(f"{what} needs two inputs per party, got m = {beta.scenario.m}")


def deviation_support(a: Sequence[int], target: Sequence[int]) -> tuple[int, ...]:
    """Sites where ``a`` differs from ``target``."""
    return tuple(i for i, (u, v) in enumerate(zip(a, target)) if u != v)


def eligible_subsets(n: int, min_size: int = 2) -> list[tuple[int, ...]]:
    return [s for r in range(min_size, n + 1) for s in itertools.combinations(range(n), r)]


@dataclass(frozen=True, eq=False)
class SubsetFunctional:
    """Subset game of ``β`` around ``ã`` for the parties in ``subset`` (0-based).

    ``coefficients[ξ_1, …, ξ_r, k_1 - 1, …, k_r - 1]`` holds ``β^S`` for the
    relabeled outputs ``k_i ∈ {1, …, d-1}``.
    """

    subset: tuple[int, ...]
    base: DeterministicStrategy
    coefficients: np.ndarray
    d: int

    @property
    def size(self) -> int:
        return int(self.coefficients.size)

    def output(self, site: int, xi: int, k: int) -> int:
        """Actual output of party ``subset[site]`` for game digit ``k`` on input ``xi``."""
        party = self.subset[site]
        return (self.base.tables[party][xi] + k) % self.d

    def as_functional(self) -> BellFunctional:
        """The subset game as an ``(|S|, 2, d-1)`` functional; needs ``d >= 3``."""
        sc = Scenario(len(self.subset), 2, self.d - 1)
        return BellFunctional(sc, self.coefficients.reshape(-1))


def subset_functional(beta: BellFunctional, det: DeterministicStrategy, subset: Sequence[int]) -> SubsetFunctional:
    """``β^S_{k, ξ} = Σ_{x: x_S = ξ} β_{α^{x,S}, x} - β_{ã(x), x}``.

    ``α^{x,S}`` agrees with ``ã(x)`` off ``S`` and carries the relabeled
    digits ``k`` on ``S``.
    """
    _require_m2(beta, "subset_functional")
    sc = beta.scenario
    s = _normalize_subset(subset, sc.n)
    r, d = len(s), sc.d
    coef = np.zeros((2,) * r + (d - 1,) * r)
    t = beta.tensor
    for x in sc.inputs():
        xi = tuple(x[j] for j in s)
        base_out = det.outputs(x)
        base_val = t[tuple(x) + base_out]
        for ks in itertools.product(range(1, d), repeat=r):
            lifted = list(base_out)
            for j, k in zip(s, ks):
                lifted[j] = (base_out[j] + k) % d
            coef[xi + tuple(k - 1 for k in ks)] += t[tuple(x) + tuple(lifted)] - base_val
    return SubsetFunctional(s, det, coef, d)


def _checked_projective(beta: BellFunctional, strategy: QuantumStrategy, det: DeterministicStrategy) -> None:
    _require_m2(beta, "subset-game analysis")
    if not strategy.projective:
        raise ValueError("strategy must be projective")
    rep = verify_det_realization(strategy, det, beta)
    if not rep.ok:
        raise ValueError(f"strategy does not realize the deterministic point: {rep}")


def _joint_projector(strategy: QuantumStrategy, a: Sequence[int], x: Sequence[int]) -> np.ndarray:
    return linalg.kron_all([strategy.povms[i][x[i]][a[i]] for i in range(len(a))])


def b2_operator(beta: BellFunctional, strategy: QuantumStrategy, det: DeterministicStrategy) -> np.ndarray:
    """``Σ (β_{a,x} - β_{ã(x),x}) Π_{a|x}`` over strings deviating on at least two sites."""
    _checked_projective(beta, strategy, det)
    sc = beta.scenario
    t = beta.tensor
    out = np.zeros((strategy.dim, strategy.dim), dtype=complex)
    for x in sc.inputs():
        target = det.outputs(x)
        base_val = t[tuple(x) + target]
        for a in sc.outputs():
            c = t[tuple(x) + a] - base_val
            if c != 0 and len(deviation_support(a, target)) >= 2:
                out += c * _joint_projector(strategy, a, x)
    return out


def r_term(
    beta: BellFunctional, strategy: QuantumStrategy, gens: PerturbationGenerators, det: DeterministicStrategy
) -> float:
    """Single-deviation remainder of the curvature.

    ``Σ (β_{a,x} - β_{ã(x),x}) Tr(Π_{a|x} Z ρ Z†)`` over strings deviating on
    exactly one site ``j``, with ``Z = x_j K_j + K_ρ``.
    """
    _checked_projective(beta, strategy, det)
    sc = beta.scenario
    t = beta.tensor
    rho = strategy.rho
    total = 0.0
    for x in sc.inputs():
        target = det.outputs(x)
        base_val = t[tuple(x) + target]
        for a in sc.outputs():
            dev = deviation_support(a, target)
            if len(dev) != 1:
                continue
            c = t[tuple(x) + a] - base_val
            if c == 0:
                continue
            j = dev[0]
            only_j = tuple(x[j] if i == j else 0 for i in range(sc.n))
            z = gens.k_rho + input_generator(strategy, gens, only_j)
            total += c * np.trace(_joint_projector(strategy, a, x) @ z @ rho @ linalg.dagger(z)).real
    return float(total)


def state_term(beta: BellFunctional, strategy: QuantumStrategy, gens: PerturbationGenerators, det) -> float:
    """``Tr(B₂ K_ρ ρ K_ρ†)``."""
    b2 = b2_operator(beta, strategy, det)
    k = gens.k_rho
    return float(np.trace(b2 @ k @ strategy.rho @ linalg.dagger(k)).real)


def subset_operator(sf: SubsetFunctional, strategy: QuantumStrategy) -> np.ndarray:
    """``B^S(Π^S) = Σ β^S_{k,ξ} ⊗_i Π^{(s_i)}_{α_i|ξ_i}`` on the parties of ``S``."""
    r = len(sf.subset)
    dims = [strategy.local_dims[j] for j in sf.subset]
    out = np.zeros((int(np.prod(dims)),) * 2, dtype=complex)
    for xi in itertools.product((0, 1), repeat=r):
        for ks in itertools.product(range(1, sf.d), repeat=r):
            c = sf.coefficients[xi + tuple(k - 1 for k in ks)]
            if c == 0:
                continue
            mats = [strategy.povms[sf.subset[i]][xi[i]][sf.output(i, xi[i], ks[i])] for i in range(r)]
            out += c * linalg.kron_all(mats)
    return out


def inactive_projector(strategy: QuantumStrategy, det: DeterministicStrategy, subset: Sequence[int]) -> np.ndarray:
    """``⊗_{j∉S} Π^{(j)}_{ã_j(0)|0}``; the 1×1 identity when ``S`` covers every party."""
    rest = [j for j in range(strategy.scenario.n) if j not in subset]
    return linalg.kron_all([strategy.povms[j][0][det.tables[j][0]] for j in rest])


class DecompositionTerm(NamedTuple):
    subset: tuple[int, ...]
    inactive: np.ndarray
    operator: np.ndarray
    embedded: np.ndarray  # inactive ⊗ operator on the full space, factors in party order


class Decomposition(NamedTuple):
    terms: list[DecompositionTerm]
    residual: float


def embed_subset_operator(
    op: np.ndarray, inactive: np.ndarray, subset: Sequence[int], dims: Sequence[int]
) -> np.ndarray:
    n = len(dims)
    order = list(subset) + [j for j in range(n) if j not in subset]
    joint = linalg.kron(op, inactive)
    perm = [order.index(j) for j in range(n)]
    return linalg.permute_subsystems(joint, [dims[j] for j in order], perm)


def decompose_b2(beta: BellFunctional, strategy: QuantumStrategy, det: DeterministicStrategy) -> Decomposition:
    """Split ``B₂`` into one subset game per party subset of size ``>= 2``."""
    b2 = b2_operator(beta, strategy, det)
    terms = []
    total = np.zeros_like(b2)
    for s in eligible_subsets(beta.scenario.n):
        sf = subset_functional(beta, det, s)
        op = subset_operator(sf, strategy)
        inact = inactive_projector(strategy, det, s)
        emb = embed_subset_operator(op, inact, s, strategy.local_dims)
        terms.append(DecompositionTerm(s, inact, op, emb))
        total += emb
    return Decomposition(terms, float(np.linalg.norm(b2 - total)))


def active_basis(sf: SubsetFunctional, strategy: QuantumStrategy, threshold: float = TOL.active_rank) -> np.ndarray:
    """Orthonormal basis of the span of the images of every active ``Π_{α|ξ}`` on ``S``."""
    r = len(sf.subset)
    cols = []
    for xi in itertools.product((0, 1), repeat=r):
        for ks in itertools.product(range(1, sf.d), repeat=r):
            mats = [strategy.povms[sf.subset[i]][xi[i]][sf.output(i, xi[i], ks[i])] for i in range(r)]
            cols.append(linalg.kron_all(mats))
    return linalg.orthonormal_column_basis(np.hstack(cols), threshold)


def active_subspace_max(
    beta: BellFunctional, det: DeterministicStrategy, subset: Sequence[int], strategy: QuantumStrategy
) -> float:
    """Largest eigenvalue of the subset game compressed to its active subspace."""
    _checked_projective(beta, strategy, det)
    sf = subset_functional(beta, det, subset)
    basis = active_basis(sf, strategy)
    if basis.shape[1] == 0:
        raise ValueError("active subspace is trivial")
    op = subset_operator(sf, strategy)
    block = linalg.dagger(basis) @ op @ basis
    return float(linalg.hermitian_eig(block).eigenvalues[-1])


def n22_subset_scalar(beta: BellFunctional, det: DeterministicStrategy, subset: Sequence[int]) -> float:
    """Scalar value of a subset game when ``d = 2``.

    Equals the score change from ``ã`` to the strategy flipping every output
    of the parties in ``S``.
    """
    if beta.scenario.d != 2:
        raise ValueError(f"scalar subset games need d = 2, got d = {beta.scenario.d}")
    sf = subset_functional(beta, det, subset)
    return float(sf.coefficients.sum())


def flipped_strategy(det: DeterministicStrategy, subset: Sequence[int]) -> DeterministicStrategy:
    """Flip (``a -> a ⊕ 1``) every table entry of the parties in ``subset``."""
    out = det
    for j in subset:
        out = out.replace_party(j, [1 - v for v in det.tables[j]])
    return out


@dataclass
class ProbeReport:
    one_flip: OneFlipStatus
    local_dim: int
    samples: list[dict] = field(default_factory=list)
    verdict: Optional[str] = None

    @property
    def max_value(self) -> Optional[float]:
        vals = [v for s in self.samples for v in s["maxima"].values()]
        return max(vals) if vals else None

    def to_dict(self) -> dict:
        return {
            "one_flip": {"is_max": self.one_flip.is_max, "is_strict": self.one_flip.is_strict},
            "local_dim": self.local_dim,
            "samples": self.samples,
            "max_value": self.max_value,
            "verdict": self.verdict,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def local_optimality_probe(
    beta: BellFunctional,
    det: DeterministicStrategy,
    local_dim: int,
    samples: int,
    rng: np.random.Generator,
    tol: float = TOL.active_rank,
) -> ProbeReport:
    """Sample projective realizations of ``p_ã`` and test every subset game on its active subspace.

    A strictly positive value on any sample is a witness that ``p_ã`` is not a
    local optimum. Values all below ``-tol`` together with a strict one-flip
    maximum are only evidence for local optimality, since realizations are
    sampled and not exhausted.
    """
    _require_m2(beta, "local_optimality_probe")
    if samples < 0:
        raise ValueError("samples must be >= 0")
    report = ProbeReport(one_flip_status(beta, det), local_dim)
    if samples == 0:
        return report
    subsets = eligible_subsets(beta.scenario.n)
    for k in range(samples):
        strat = canonical_det_strategy(det, local_dim, rng, per_input=True)
        maxima = {",".join(str(j) for j in s): active_subspace_max(beta, det, s, strat) for s in subsets}
        report.samples.append({"sample": k, "maxima": maxima})
    best = report.max_value
    if best is not None and best > tol:
        report.verdict = VERDICT_REFUTED
    elif best is not None and best < -tol and report.one_flip.is_strict:
        report.verdict = VERDICT_SUPPORTED
    else:
        report.verdict = VERDICT_INCONCLUSIVE
    return report


def embedded_chsh_witness() -> tuple[BellFunctional, DeterministicStrategy]:
    """A ``(2, 2, 3)`` functional whose subset game is a shifted CHSH game.

    ``ã ≡ 0`` is its unique classical maximum (score 0): single deviations
    cost 1, and double deviations pay the ``±1`` CHSH correlator of the
    relabeled outputs minus 0.6. Classically the subset game peaks at
    ``2 - 2.4 < 0`` while qubit measurements on the complement of ``|0⟩``
    reach ``2√2 - 2.4 > 0``.
    """
    sc = Scenario(2, 2, 3)

    def coef(a, x):
        flips = sum(1 for v in a if v != 0)
        if flips == 0:
            return 0.0
        if flips == 1:
            return -1.0
        sign = (-1) ** ((a[0] != a[1]) + x[0] * x[1])
        return sign - 0.6

    return BellFunctional.from_function(sc, coef), DeterministicStrategy.constant(sc, 0)


def score_gap(beta: BellFunctional, det: DeterministicStrategy, other: DeterministicStrategy) -> float:
    return score(beta, other) - score(beta, det)
