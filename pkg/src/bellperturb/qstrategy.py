"""Quantum strategies, Bell operators and realizations of deterministic points."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import linalg
from .linalg import TOL, dagger
from .scenario import BellFunctional, Correlation, DeterministicStrategy, Scenario

_LETTERS = "abcdefghijklmnopqrstuvwxyz"


@dataclass(frozen=True, eq=False)
class QuantumStrategy:
    """Shared state plus local measurements.

    ``povms[i][x]`` is an array of shape ``(d, D_i, D_i)`` holding the ``d``
    elements of party ``i``'s measurement for input ``x``.
    """

    scenario: Scenario
    local_dims: tuple[int, ...]
    rho: np.ndarray
    povms: tuple[tuple[np.ndarray, ...], ...]
    projective: bool = False

    def __post_init__(self):
        sc = self.scenario
        dims = tuple(int(d) for d in self.local_dims)
        if len(dims) != sc.n:
            raise ValueError(f"need {sc.n} local dimensions, got {dims}")
        rho = np.asarray(self.rho, dtype=complex)
        if rho.shape != (math.prod(dims),) * 2:
            raise ValueError(f"rho has shape {rho.shape}, expected dimension {math.prod(dims)}")
        if len(self.povms) != sc.n:
            raise ValueError("one measurement list per party is required")
        povms = []
        for i, party in enumerate(self.povms):
            if len(party) != sc.m:
                raise ValueError(f"party {i} needs {sc.m} measurements")
            row = []
            for meas in party:
                arr = np.asarray(meas, dtype=complex)
                if arr.shape != (sc.d, dims[i], dims[i]):
                    raise ValueError(f"party {i} measurement has shape {arr.shape}, expected {(sc.d, dims[i], dims[i])}")
                row.append(arr)
            povms.append(tuple(row))
        object.__setattr__(self, "local_dims", dims)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "povms", tuple(povms))

    @property
    def dim(self) -> int:
        return math.prod(self.local_dims)

    def replace(self, rho=None, povms=None) -> "QuantumStrategy":
        return QuantumStrategy(
            self.scenario,
            self.local_dims,
            self.rho if rho is None else rho,
            self.povms if povms is None else povms,
            self.projective,
        )


@dataclass
class ValidationReport:
    violations: list[tuple[str, float]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, name: str, residual: float) -> None:
        self.violations.append((name, float(residual)))

    def __str__(self) -> str:
        if self.ok:
            return "all checks pass"
        return "\n".join(f"{name}: residual {res:.3e}" for name, res in self.violations)


def _psd_residual(mat: np.ndarray) -> float:
    w = linalg.hermitian_eig(mat).eigenvalues
    return max(0.0, -float(w[0]))


def validate(strategy: QuantumStrategy, tol: float = TOL.psd) -> ValidationReport:
    """Check every structural constraint and report the failing ones with residuals."""
    rep = ValidationReport()
    rho = strategy.rho
    herm = float(np.max(np.abs(rho - dagger(rho)), initial=0.0))
    if herm > tol:
        rep.add("rho hermiticity", herm)
    else:
        neg = _psd_residual(rho)
        if neg > tol:
            rep.add("rho positivity", neg)
    tr = abs(np.trace(rho) - 1.0)
    if tr > tol:
        rep.add("rho trace", tr)
    for i, party in enumerate(strategy.povms):
        eye = np.eye(strategy.local_dims[i])
        for x, meas in enumerate(party):
            where = f"party {i} input {x}"
            comp = float(np.max(np.abs(meas.sum(axis=0) - eye)))
            if comp > tol:
                rep.add(f"{where} completeness", comp)
            for a, el in enumerate(meas):
                h = float(np.max(np.abs(el - dagger(el))))
                if h > tol:
                    rep.add(f"{where} outcome {a} hermiticity", h)
                    continue
                neg = _psd_residual(el)
                if neg > tol:
                    rep.add(f"{where} outcome {a} positivity", neg)
            if strategy.projective:
                for a, el in enumerate(meas):
                    idem = float(np.max(np.abs(el @ el - el)))
                    if idem > tol:
                        rep.add(f"{where} outcome {a} idempotency", idem)
                    for b in range(a + 1, len(meas)):
                        ortho = float(np.max(np.abs(el @ meas[b])))
                        if ortho > tol:
                            rep.add(f"{where} outcomes {a},{b} orthogonality", ortho)
    return rep


def require_valid(strategy: QuantumStrategy) -> None:
    rep = validate(strategy)
    if not rep.ok:
        raise ValueError(f"invalid quantum strategy:\n{rep}")


def _born_tensor(rho: np.ndarray, meas: Sequence[np.ndarray], dims: Sequence[int]) -> np.ndarray:
    """``out[a_1..a_n] = Tr(ρ M_{a_1} ⊗ … ⊗ M_{a_n})``."""
    n = len(dims)
    rows, cols, outs = _LETTERS[:n], _LETTERS[n : 2 * n], _LETTERS[2 * n : 3 * n]
    subs = [rows + cols] + [outs[k] + cols[k] + rows[k] for k in range(n)]
    t = rho.reshape(tuple(dims) * 2)
    return np.einsum(",".join(subs) + "->" + outs, t, *meas, optimize=True)


def correlation_of(strategy: QuantumStrategy, check: bool = True) -> Correlation:
    """Born-rule correlation ``p(a|x) = Tr(ρ M_{a_1|x_1} ⊗ … ⊗ M_{a_n|x_n})``."""
    if check:
        require_valid(strategy)
    sc = strategy.scenario
    vals = np.empty((sc.num_inputs, sc.num_outputs))
    for x in sc.inputs():
        meas = [strategy.povms[i][xi] for i, xi in enumerate(x)]
        vals[sc.input_index(x)] = _born_tensor(strategy.rho, meas, strategy.local_dims).real.reshape(-1)
    return Correlation(sc, vals.reshape(-1))


def _check_shapes(beta: BellFunctional, povms) -> None:
    sc = beta.scenario
    if len(povms) != sc.n or any(len(p) != sc.m for p in povms):
        raise ValueError("POVM layout does not match the functional's scenario")
    if any(np.shape(meas)[0] != sc.d for p in povms for meas in p):
        raise ValueError("POVM outcome count does not match the functional's scenario")


def _operator_from_coefficients(coefs: np.ndarray, meas: Sequence[np.ndarray]) -> np.ndarray:
    """``Σ_a c[a] M_{a_1} ⊗ … ⊗ M_{a_n}`` as a dense matrix."""
    n = len(meas)
    outs, rows, cols = _LETTERS[:n], _LETTERS[n : 2 * n], _LETTERS[2 * n : 3 * n]
    subs = [outs] + [outs[k] + rows[k] + cols[k] for k in range(n)]
    t = np.einsum(",".join(subs) + "->" + rows + cols, coefs.astype(complex), *meas, optimize=True)
    dim = math.prod(m.shape[1] for m in meas)
    return t.reshape(dim, dim)


def conditional_bell_operator(beta: BellFunctional, povms, x: Sequence[int]) -> np.ndarray:
    """``B_x(M) = Σ_a β_{a,x} M^{(1)}_{a_1|x_1} ⊗ … ⊗ M^{(n)}_{a_n|x_n}``."""
    _check_shapes(beta, povms)
    x = tuple(x)
    meas = [povms[i][xi] for i, xi in enumerate(x)]
    return _operator_from_coefficients(beta.tensor[x], meas)


def bell_operator(beta: BellFunctional, povms) -> np.ndarray:
    """``B(M) = Σ_x B_x(M)``."""
    return sum(conditional_bell_operator(beta, povms, x) for x in beta.scenario.inputs())


def quantum_score(beta: BellFunctional, strategy: QuantumStrategy) -> float:
    return float(np.trace(bell_operator(beta, strategy.povms) @ strategy.rho).real)


# -- canonical realizations ----------------------------------------------------


def _canonical_measurement(d: int, dim: int, winner: int, basis: np.ndarray) -> np.ndarray:
    """Winner gets ``|0⟩⟨0|``; losers get rank-1 projectors from ``basis``.

    ``basis`` holds ``dim - 1`` orthonormal columns spanning the complement of
    ``|0⟩``. Surplus columns (when ``dim > d``) go to the last losing outcome.
    """
    meas = np.zeros((d, dim, dim), dtype=complex)
    meas[winner, 0, 0] = 1.0
    losers = [a for a in range(d) if a != winner]
    for k, a in enumerate(losers):
        cols = basis[:, k:] if k == len(losers) - 1 else basis[:, k : k + 1]
        meas[a] = cols @ dagger(cols)
    return meas


def canonical_det_strategy(
    strategy: DeterministicStrategy,
    dim: int,
    rng: np.random.Generator,
    per_input: bool = False,
) -> QuantumStrategy:
    """Projective realization of ``p_ã`` on ``|0⟩^{⊗n}``.

    The winning projector is ``|0⟩⟨0|`` for every input; the losing ones are
    drawn from a Haar-random orthonormal basis of ``span(e_1, …, e_{D-1})``,
    shared by all inputs unless ``per_input`` is set.
    """
    sc = strategy.scenario
    if dim < sc.d:
        raise ValueError(f"local dimension {dim} is smaller than the output count {sc.d}")
    povms = []
    for i in range(sc.n):
        row = []
        shared = None
        for x in range(sc.m):
            if shared is None or per_input:
                u = linalg.haar_unitary(dim - 1, rng)
                basis = np.vstack([np.zeros((1, dim - 1)), u])
                shared = basis
            row.append(_canonical_measurement(sc.d, dim, strategy.tables[i][x], shared))
        povms.append(tuple(row))
    rho = np.zeros((dim**sc.n, dim**sc.n), dtype=complex)
    rho[0, 0] = 1.0
    return QuantumStrategy(sc, (dim,) * sc.n, rho, tuple(povms), projective=True)


@dataclass
class RealizationReport:
    support_size: int
    eigvec_residual: float
    operator_residual: float
    tol: float

    @property
    def ok(self) -> bool:
        return self.eigvec_residual <= self.tol and self.operator_residual <= self.tol


def winning_operator(strategy: QuantumStrategy, det: DeterministicStrategy, x: Sequence[int]) -> np.ndarray:
    return linalg.kron_all([strategy.povms[i][xi][det.tables[i][xi]] for i, xi in enumerate(x)])


def verify_det_realization(
    strategy: QuantumStrategy,
    det: DeterministicStrategy,
    beta: Optional[BellFunctional] = None,
    tol: float = TOL.realization,
) -> RealizationReport:
    """Check that ``strategy`` realizes the deterministic point ``p_ã``.

    Every eigenvector of ``ρ`` with weight above the support cutoff must be a
    fixed point of the winning product element ``M_{ã(x)|x}`` for all ``x``.
    With ``beta`` given, also checks ``B_x(M) ρ = β_{ã(x),x} ρ``; without it,
    checks ``M_{a|x} ρ = 0`` for every losing ``a``, which is the same relation
    for all functionals at once.
    """
    sc = strategy.scenario
    dec = linalg.hermitian_eig(strategy.rho)
    support = [j for j, w in enumerate(dec.eigenvalues) if w > TOL.support_weight]
    vecs = dec.eigenvectors[:, support]
    eig_res = 0.0
    op_res = 0.0
    rho = strategy.rho
    for x in sc.inputs():
        win = winning_operator(strategy, det, x)
        if vecs.shape[1]:
            eig_res = max(eig_res, float(np.max(np.linalg.norm(win @ vecs - vecs, axis=0))))
        if beta is not None:
            bx = conditional_bell_operator(beta, strategy.povms, x)
            target = beta.tensor[tuple(x) + det.outputs(x)]
            op_res = max(op_res, float(np.linalg.norm(bx @ rho - target * rho)))
        else:
            for a in sc.outputs():
                if a == det.outputs(x):
                    continue
                el = linalg.kron_all([strategy.povms[i][xi][a[i]] for i, xi in enumerate(x)])
                op_res = max(op_res, float(np.linalg.norm(el @ rho)))
    return RealizationReport(len(support), eig_res, op_res, tol)


# -- fixed reference strategies -------------------------------------------------

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def xz_measurement(angle: float) -> np.ndarray:
    """PVM of ``cos(α) σz + sin(α) σx``; outcome 0 is the ``+1`` eigenspace."""
    obs = math.cos(angle) * SIGMA_Z + math.sin(angle) * SIGMA_X
    eye = np.eye(2, dtype=complex)
    return np.stack([(eye + obs) / 2, (eye - obs) / 2])


def two_qubit_xz_strategy(theta: float, alice: Sequence[float], bob: Sequence[float]) -> QuantumStrategy:
    """``cos θ|00⟩ + sin θ|11⟩`` with XZ-plane projective measurements."""
    psi = np.zeros(4, dtype=complex)
    psi[0], psi[3] = math.cos(theta), math.sin(theta)
    povms = (tuple(xz_measurement(a) for a in alice), tuple(xz_measurement(b) for b in bob))
    return QuantumStrategy(Scenario(2, 2, 2), (2, 2), linalg.projector(psi), povms, projective=True)


TSIRELSON_ANGLES = (0.0, math.pi / 2, math.pi / 4, -math.pi / 4)


def tsirelson_strategy() -> QuantumStrategy:
    """Maximally entangled qubits with the CHSH-optimal angles (0, π/2 | π/4, -π/4)."""
    a0, a1, b0, b1 = TSIRELSON_ANGLES
    return two_qubit_xz_strategy(math.pi / 4, (a0, a1), (b0, b1))


def random_pure_strategy(scenario: Scenario, dim: int, rng: np.random.Generator) -> QuantumStrategy:
    """Haar-random pure state with Haar-rotated rank-balanced projective measurements."""
    if dim < scenario.d:
        raise ValueError("dim must be at least the output count")
    total = dim**scenario.n
    psi = linalg.haar_unitary(total, rng)[:, 0]
    blocks = np.array_split(np.arange(dim), scenario.d)
    povms = []
    for _ in range(scenario.n):
        row = []
        for _ in range(scenario.m):
            u = linalg.haar_unitary(dim, rng)
            meas = np.stack([u[:, b] @ dagger(u[:, b]) for b in blocks])
            row.append(meas)
        povms.append(tuple(row))
    return QuantumStrategy(scenario, (dim,) * scenario.n, linalg.projector(psi), tuple(povms), projective=True)


# -- JSON -------------------------------------------------------------------------


def _encode(mat: np.ndarray) -> list:
    mat = np.asarray(mat, dtype=complex)
    return np.stack([mat.real, mat.imag], axis=-1).tolist()


def _decode(obj) -> np.ndarray:
    arr = np.asarray(obj, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


def strategy_to_json(strategy: QuantumStrategy) -> str:
    return json.dumps(
        {
            "scenario": strategy.scenario.to_dict(),
            "local_dims": list(strategy.local_dims),
            "rho": _encode(strategy.rho),
            "povms": [[[_encode(el) for el in meas] for meas in party] for party in strategy.povms],
            "projective": strategy.projective,
        }
    )


def strategy_from_json(text: str) -> QuantumStrategy:
    obj = json.loads(text)
    s = obj["scenario"]
    sc = Scenario(int(s["n"]), int(s["m"]), int(s["d"]))
    povms = tuple(tuple(np.stack([_decode(el) for el in meas]) for meas in party) for party in obj["povms"])
    return QuantumStrategy(sc, tuple(obj["local_dims"]), _decode(obj["rho"]), povms, bool(obj["projective"]))
