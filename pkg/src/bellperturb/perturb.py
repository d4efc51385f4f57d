"""Unitary orbits of quantum strategies and the response of a Bell functional.

Conventions
-----------
A perturbation is a tuple of skew-Hermitian generators ``(K_ρ, K_i^{(x)})``.
Evolving by ``t`` maps::

    ρ           ->  e^{-t K_ρ} ρ e^{t K_ρ}
    M^{(i)}_{a|x} ->  e^{t K_i^{(x)}} M^{(i)}_{a|x} e^{-t K_i^{(x)}}   (x >= 1)

and leaves every input-0 measurement untouched. Any rotation of the input-0
measurements can be pushed into ``K_ρ`` (see :func:`gauge_fix`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import linalg
from .linalg import TOL, commutator, dagger
from .qstrategy import QuantumStrategy, require_valid, bell_operator, conditional_bell_operator, correlation_of
from .scenario import BellFunctional, evaluate


@dataclass(frozen=True, eq=False)
class PerturbationGenerators:
    """``k_local[i][x - 1]`` generates the rotation of party ``i``'s input ``x``."""

    k_rho: np.ndarray
    k_local: tuple[tuple[np.ndarray, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "k_rho", np.asarray(self.k_rho, dtype=complex))
        object.__setattr__(
            self, "k_local", tuple(tuple(np.asarray(k, dtype=complex) for k in row) for row in self.k_local)
        )

    def matrices(self) -> list[np.ndarray]:
        return [self.k_rho] + [k for row in self.k_local for k in row]

    def norm(self) -> float:
        """``sqrt(-Σ Tr(K_i²) - Tr(K_ρ²))``."""
        sq = -sum(np.trace(k @ k).real for k in self.matrices())
        return math.sqrt(max(sq, 0.0))

    def scaled(self, c: float) -> "PerturbationGenerators":
        return PerturbationGenerators(c * self.k_rho, tuple(tuple(c * k for k in row) for row in self.k_local))

    def __neg__(self) -> "PerturbationGenerators":
        return self.scaled(-1.0)

    def local(self, party: int, x: int) -> np.ndarray | None:
        return None if x == 0 else self.k_local[party][x - 1]

    def is_skew(self, tol: float = TOL.hermitian) -> bool:
        return all(linalg.is_skew_hermitian(k, tol) for k in self.matrices())

    @classmethod
    def zeros_like(cls, strategy: QuantumStrategy) -> "PerturbationGenerators":
        m = strategy.scenario.m
        return cls(
            np.zeros((strategy.dim, strategy.dim), dtype=complex),
            tuple(tuple(np.zeros((d, d), dtype=complex) for _ in range(m - 1)) for d in strategy.local_dims),
        )


def sample_generators(strategy: QuantumStrategy, rng: np.random.Generator) -> PerturbationGenerators:
    """Gaussian skew-Hermitian generators rescaled to unit norm.

    Draw order: ``K_ρ`` first, then party by party, input by input.
    """
    k_rho = linalg.random_skew_hermitian(strategy.dim, rng)
    k_local = tuple(
        tuple(linalg.random_skew_hermitian(d, rng) for _ in range(strategy.scenario.m - 1))
        for d in strategy.local_dims
    )
    g = PerturbationGenerators(k_rho, k_local)
    return g.scaled(1.0 / g.norm())


class OrbitFlow:
    """One-parameter group ``t -> U(tK) · Σ`` with cached spectral data."""

    def __init__(self, gens: PerturbationGenerators):
        self.gens = gens
        self._rho = linalg.skew_spectrum(gens.k_rho)
        self._local = [[linalg.skew_spectrum(k) for k in row] for row in gens.k_local]

    def apply(self, strategy: QuantumStrategy, t: float) -> QuantumStrategy:
        u = linalg.expm_skew_from_eig(self._rho, -t)
        rho = u @ strategy.rho @ dagger(u)
        povms = []
        for i, party in enumerate(strategy.povms):
            row = [party[0]]
            for x in range(1, len(party)):
                v = linalg.expm_skew_from_eig(self._local[i][x - 1], t)
                row.append(v @ party[x] @ dagger(v))
            povms.append(tuple(row))
        return strategy.replace(rho=rho, povms=tuple(povms))


def evolve(strategy: QuantumStrategy, gens: PerturbationGenerators, t: float, check: bool = True) -> QuantumStrategy:
    """Point ``t`` of the orbit through ``strategy``; validates the input unless ``check`` is false."""
    if check:
        require_valid(strategy)
    return OrbitFlow(gens).apply(strategy, t)


def strategy_score(beta: BellFunctional, strategy: QuantumStrategy) -> float:
    return evaluate(beta, correlation_of(strategy, check=False))


def score_trajectory(
    beta: BellFunctional, strategy: QuantumStrategy, gens: PerturbationGenerators, ts: Sequence[float]
) -> list[tuple[float, float]]:
    """Exact ``(t, β · P(U(t) · Σ))`` pairs."""
    flow = OrbitFlow(gens)
    return [(float(t), strategy_score(beta, flow.apply(strategy, t))) for t in ts]


def input_generator(strategy: QuantumStrategy, gens: PerturbationGenerators, x: Sequence[int]) -> np.ndarray:
    """``x · K = Σ_i K_i^{(x_i)}`` embedded on the full space (input 0 contributes nothing)."""
    out = np.zeros((strategy.dim, strategy.dim), dtype=complex)
    for i, xi in enumerate(x):
        if xi:
            out += linalg.embed(gens.local(i, xi), i, strategy.local_dims)
    return out


def _require_two_inputs(beta: BellFunctional, what: str) -> None:
    if beta.scenario.m != 2:
        raise ValueError(f"{what} is only available for two inputs per party (m = 2), got m = {beta.scenario.m}")


class ExpansionTerms(NamedTuple):
    zeroth: float
    first: float
    second: float

    def at(self, t: float) -> float:
        return self.zeroth + t * self.first + t * t * self.second


def second_order_terms(beta: BellFunctional, strategy: QuantumStrategy, gens: PerturbationGenerators) -> ExpansionTerms:
    """Coefficients of ``1, t, t²`` in the second-order expansion of the score.

    For each input ``x`` with ``Z = K_ρ + x·K``::

        first  = Tr(ρ [Z, B_x])
        second = ½ Tr(ρ ([Z, [Z, B_x]] + [[K_ρ, x·K], B_x]))

    The cross term ordering ``[K_ρ, x·K]`` comes from combining
    ``e^{tK_ρ} e^{t x·K}`` with the Baker-Campbell-Hausdorff formula.
    """
    _require_two_inputs(beta, "second_order_prediction")
    rho = strategy.rho
    first = 0.0
    second = 0.0
    for x in beta.scenario.inputs():
        bx = conditional_bell_operator(beta, strategy.povms, x)
        xk = input_generator(strategy, gens, x)
        z = gens.k_rho + xk
        c1 = commutator(z, bx)
        first += np.trace(rho @ c1).real
        second += 0.5 * np.trace(rho @ (commutator(z, c1) + commutator(commutator(gens.k_rho, xk), bx))).real
    zeroth = strategy_score(beta, strategy)
    return ExpansionTerms(zeroth, float(first), float(second))


def second_order_prediction(
    beta: BellFunctional, strategy: QuantumStrategy, gens: PerturbationGenerators, t: float
) -> float:
    return second_order_terms(beta, strategy, gens).at(t)


def deterministic_curvature(beta: BellFunctional, strategy: QuantumStrategy, gens: PerturbationGenerators, det) -> float:
    """Coefficient of ``t²`` in the score at a deterministic realization (half of ``f''(0)``).

    ``Σ_{x,a} (b_{a,x} - β_{ã(x),x}) Tr(Π_{a,x} Z ρ Z†)`` with ``Z = x·K + K_ρ``
    and ``Π_{a,x}`` the eigenprojectors of ``B_x(M)``. Computed from the
    Jacobi eigendecomposition of each conditional operator, so it does not
    share code with :func:`second_order_terms`.
    """
    rho = strategy.rho
    total = 0.0
    for x in beta.scenario.inputs():
        bx = conditional_bell_operator(beta, strategy.povms, x)
        target = beta.tensor[tuple(x) + det.outputs(x)]
        z = input_generator(strategy, gens, x) + gens.k_rho
        moved = z @ rho @ dagger(z)
        dec = linalg.hermitian_eig(bx)
        v = dec.eigenvectors
        weights = np.einsum("ij,ik,kj->j", v.conj(), moved, v).real
        total += float(np.sum((dec.eigenvalues - target) * weights))
    return total


class FirstOrderResiduals(NamedTuple):
    state_residual: float
    per_party_residuals: list[tuple[float, float]]


def first_order_residuals(beta: BellFunctional, strategy: QuantumStrategy) -> FirstOrderResiduals:
    """Norms of ``[B(M), ρ]`` and of ``Tr_{j≠i}[Σ_{x: x_i=b} B_x(M), ρ]`` for ``b = 0, 1``."""
    _require_two_inputs(beta, "first_order_residuals")
    rho = strategy.rho
    sc = beta.scenario
    comms = {x: commutator(conditional_bell_operator(beta, strategy.povms, x), rho) for x in sc.inputs()}
    state = float(np.linalg.norm(sum(comms.values())))
    parties = []
    for i in range(sc.n):
        res = []
        for b in (0, 1):
            c = sum(comms[x] for x in comms if x[i] == b)
            res.append(float(np.linalg.norm(linalg.partial_trace(c, strategy.local_dims, [i]))))
        parties.append(tuple(res))
    return FirstOrderResiduals(state, parties)


def orbit_gradient(beta: BellFunctional, strategy: QuantumStrategy) -> PerturbationGenerators:
    """Steepest-ascent generators for the score on the unitary orbit.

    The first-order change along ``K`` is ``Σ_x Tr([B_x, ρ](K_ρ + x·K))``;
    under ``⟨X, Y⟩ = -Tr(XY)`` this equals ``⟨G, K⟩`` with ``G_ρ = -[B, ρ]``
    and ``G_i^{(k)} = -Tr_{j≠i} Σ_{x: x_i = k} [B_x, ρ]``.
    """
    rho = strategy.rho
    sc = beta.scenario
    comms = {x: commutator(conditional_bell_operator(beta, strategy.povms, x), rho) for x in sc.inputs()}
    g_rho = -sum(comms.values())
    g_local = []
    for i in range(sc.n):
        row = []
        for k in range(1, sc.m):
            c = sum(comms[x] for x in comms if x[i] == k)
            row.append(-linalg.partial_trace(c, strategy.local_dims, [i]))
        g_local.append(tuple(row))
    return PerturbationGenerators(g_rho, tuple(g_local))


def directional_derivative(beta: BellFunctional, strategy: QuantumStrategy, gens: PerturbationGenerators) -> float:
    rho = strategy.rho
    total = 0.0
    for x in beta.scenario.inputs():
        bx = conditional_bell_operator(beta, strategy.povms, x)
        z = gens.k_rho + input_generator(strategy, gens, x)
        total += np.trace(commutator(bx, rho) @ z).real
    return float(total)


class SumRuleResult(NamedTuple):
    lhs: float
    rhs: float
    first_order: float


def sum_rule_check(a: np.ndarray, decomposition, rho: np.ndarray, x: np.ndarray, tol: float = 1e-8) -> SumRuleResult:
    """Both sides of the energy-weighted sum rule.

    ``lhs = Tr([X, [X, A]] ρ)``, ``rhs = 2 Σ_m (λ_m - λ) Tr(A_m X ρ X†)`` where
    ``λ`` is the eigenvalue carried by ``ρ``. ``first_order`` is
    ``Tr([X, A] ρ)``, which must vanish.
    """
    a, rho, x = (np.asarray(v, dtype=complex) for v in (a, rho, x))
    lam = np.trace(a @ rho).real / np.trace(rho).real
    if np.linalg.norm(a @ rho - lam * rho) > tol or np.linalg.norm(rho @ a - lam * rho) > tol:
        raise ValueError("rho is not supported on a single eigenspace of A")
    pieces = [(float(l), np.asarray(m, dtype=complex)) for l, m in decomposition]
    dim = a.shape[0]
    if np.linalg.norm(sum(m for _, m in pieces) - np.eye(dim)) > TOL.unitary:
        raise ValueError("decomposition does not resolve the identity")
    if np.linalg.norm(sum(l * m for l, m in pieces) - a) > tol:
        raise ValueError("decomposition does not reproduce A")
    if not linalg.is_skew_hermitian(x):
        raise ValueError("X must be skew-Hermitian")
    lhs = np.trace(linalg.commutator_power(x, a, 2) @ rho).real
    moved = x @ rho @ dagger(x)
    rhs = 2.0 * sum((l - lam) * np.trace(m @ moved).real for l, m in pieces)
    first = np.trace(commutator(x, a) @ rho)
    return SumRuleResult(float(lhs), float(rhs), float(abs(first)))


def fd_second_derivative(
    beta: BellFunctional,
    strategy: QuantumStrategy,
    gens: PerturbationGenerators,
    h: float = 1e-3,
    richardson: bool = True,
) -> float:
    """Central second difference of the exact score at ``t = 0``.

    With ``richardson`` the estimates at ``h`` and ``h/2`` are combined to
    cancel the ``O(h²)`` truncation term.
    """
    if h <= 0:
        raise ValueError("step must be positive")
    flow = OrbitFlow(gens)
    f0 = strategy_score(beta, strategy)

    def central(step):
        return (strategy_score(beta, flow.apply(strategy, step)) + strategy_score(beta, flow.apply(strategy, -step)) - 2 * f0) / step**2

    coarse = central(h)
    if not richardson:
        return coarse
    fine = central(h / 2)
    return fine + (fine - coarse) / 3


def fd_first_derivative(
    beta: BellFunctional,
    strategy: QuantumStrategy,
    gens: PerturbationGenerators,
    h: float = 1e-3,
    richardson: bool = True,
) -> float:
    if h <= 0:
        raise ValueError("step must be positive")
    flow = OrbitFlow(gens)

    def central(step):
        return (strategy_score(beta, flow.apply(strategy, step)) - strategy_score(beta, flow.apply(strategy, -step))) / (2 * step)

    coarse = central(h)
    if not richardson:
        return coarse
    fine = central(h / 2)
    return fine + (fine - coarse) / 3


# -- gauge ---------------------------------------------------------------------------


def orbit_action(strategy: QuantumStrategy, u_rho: np.ndarray, u_local) -> QuantumStrategy:
    """General orbit element: ``ρ -> U_ρ ρ U_ρ†`` and ``M_{·|x} -> U_{i,x} M U_{i,x}†`` for every input."""
    rho = u_rho @ strategy.rho @ dagger(u_rho)
    povms = tuple(
        tuple(u_local[i][x] @ meas @ dagger(u_local[i][x]) for x, meas in enumerate(party))
        for i, party in enumerate(strategy.povms)
    )
    return strategy.replace(rho=rho, povms=povms)


def gauge_fix(u_rho: np.ndarray, u_local) -> tuple[np.ndarray, list[list[np.ndarray]]]:
    """Equivalent orbit element whose input-0 unitaries are the identity."""
    v0 = linalg.kron_all([row[0] for row in u_local])
    new_rho = dagger(v0) @ u_rho
    new_local = [[dagger(row[0]) @ u for u in row] for row in u_local]
    return new_rho, new_local


# -- gradient ascent -------------------------------------------------------------------


@dataclass(frozen=True)
class AscentOptions:
    step: float = 0.5
    max_iters: int = 500
    tol: float = 1e-10
    max_halvings: int = 20

    def __post_init__(self):
        if not self.step > 0 or self.max_iters < 0 or not self.tol > 0 or self.max_halvings < 0:
            raise ValueError(f"invalid ascent options {self}")


@dataclass
class AscentResult:
    strategy: QuantumStrategy
    history: list[float] = field(default_factory=list)
    grad_norms: list[float] = field(default_factory=list)
    converged: bool = False
    reason: str = "max_iters"

    @property
    def score(self) -> float:
        return self.history[-1]

    @property
    def iterations(self) -> int:
        return len(self.history) - 1


def gradient_ascent(
    beta: BellFunctional, start: QuantumStrategy, opts: AscentOptions | None = None
) -> AscentResult:
    """Riemannian steepest ascent along the unitary orbit of ``start``.

    Each iteration moves along the orbit gradient by ``opts.step``, halving the
    step (at most ``opts.max_halvings`` times) until the score does not drop.
    Stops when the gradient norm falls below ``opts.tol``, when no step size
    is accepted, or after ``opts.max_iters`` iterations.
    """
    opts = opts or AscentOptions()
    current = start
    f = strategy_score(beta, current)
    out = AscentResult(current, [f])
    for _ in range(opts.max_iters):
        grad = orbit_gradient(beta, current)
        g = grad.norm()
        out.grad_norms.append(g)
        if g < opts.tol:
            out.converged = True
            out.reason = "gradient"
            break
        flow = OrbitFlow(grad)
        step = opts.step
        for _ in range(opts.max_halvings + 1):
            cand = flow.apply(current, step)
            fc = strategy_score(beta, cand)
            if fc >= f:
                break
            step /= 2
        else:
            out.reason = "no_ascent_step"
            break
        current, f = cand, fc
        out.history.append(f)
    out.strategy = current
    return out
