"""Bell scenarios, correlations, functionals and deterministic strategies.

Indexing convention
-------------------
A correlation over the ``(n, m, d)`` scenario is a flat real vector of length
``m**n * d**n``. Entry ``p(a|x)`` sits at::

    index_m(x) * d**n + index_d(a)

where ``index_m`` and ``index_d`` are mixed-radix encodings with party 1 as
the most significant digit. Equivalently, ``values.reshape((m,)*n + (d,)*n)``
is the tensor ``p[x_1, ..., x_n, a_1, ..., a_n]``. Bell functionals use the
same layout for their coefficients.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence

import numpy as np

ENUMERATION_LIMIT = 10**7
_TIE_TOL = 1e-12


@dataclass(frozen=True)
class Scenario:
    """Party count ``n``, inputs per party ``m`` and outputs per party ``d``."""

    n: int
    m: int
    d: int

    def __post_init__(self):
        if self.n < 1 or self.m < 2 or self.d < 2:
            raise ValueError(f"invalid scenario (n={self.n}, m={self.m}, d={self.d}); need n>=1, m>=2, d>=2")

    @property
    def num_inputs(self) -> int:
        return self.m**self.n

    @property
    def num_outputs(self) -> int:
        return self.d**self.n

    @property
    def size(self) -> int:
        return self.num_inputs * self.num_outputs

    @property
    def tensor_shape(self) -> tuple[int, ...]:
        return (self.m,) * self.n + (self.d,) * self.n

    def inputs(self) -> Iterator[tuple[int, ...]]:
        return itertools.product(range(self.m), repeat=self.n)

    def outputs(self) -> Iterator[tuple[int, ...]]:
        return itertools.product(range(self.d), repeat=self.n)

    def input_index(self, x: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(x), (self.m,) * self.n))

    def output_index(self, a: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(a), (self.d,) * self.n))

    def flat_index(self, a: Sequence[int], x: Sequence[int]) -> int:
        return self.input_index(x) * self.num_outputs + self.output_index(a)

    def to_dict(self) -> dict:
        return {"n": self.n, "m": self.m, "d": self.d}


def _check_vector(scenario: Scenario, values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float).reshape(-1)
    if arr.size != scenario.size:
        raise ValueError(f"{name} has {arr.size} entries, scenario {scenario} needs {scenario.size}")
    return arr


@dataclass(frozen=True, eq=False)
class Correlation:
    scenario: Scenario
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _check_vector(self.scenario, self.values, "correlation"))

    @property
    def tensor(self) -> np.ndarray:
        return self.values.reshape(self.scenario.tensor_shape)

    @property
    def table(self) -> np.ndarray:
        """Rows indexed by input string, columns by output string."""
        return self.values.reshape(self.scenario.num_inputs, self.scenario.num_outputs)

    def prob(self, a: Sequence[int], x: Sequence[int]) -> float:
        return float(self.values[self.scenario.flat_index(a, x)])

    def violations(self, tol: float = 1e-10) -> list[str]:
        out = []
        if self.values.min(initial=0.0) < -tol or self.values.max(initial=0.0) > 1 + tol:
            out.append("entries outside [0, 1]")
        sums = self.table.sum(axis=1)
        bad = np.abs(sums - 1.0) > tol
        if bad.any():
            out.append(f"normalization broken for {int(bad.sum())} input strings")
        return out

    def is_valid(self, tol: float = 1e-10) -> bool:
        return not self.violations(tol)


@dataclass(frozen=True, eq=False)
class BellFunctional:
    scenario: Scenario
    coefficients: np.ndarray

    def __post_init__(self):
        arr = _check_vector(self.scenario, self.coefficients, "functional")
        if not np.all(np.isfinite(arr)):
            raise ValueError("functional coefficients must be finite")
        object.__setattr__(self, "coefficients", arr)

    @classmethod
    def from_function(cls, scenario: Scenario, fn) -> "BellFunctional":
        """Build coefficients from ``fn(a, x) -> float``."""
        coef = np.zeros(scenario.size)
        for x in scenario.inputs():
            for a in scenario.outputs():
                coef[scenario.flat_index(a, x)] = fn(a, x)
        return cls(scenario, coef)

    @classmethod
    def zeros(cls, scenario: Scenario) -> "BellFunctional":
        return cls(scenario, np.zeros(scenario.size))

    @property
    def tensor(self) -> np.ndarray:
        return self.coefficients.reshape(self.scenario.tensor_shape)

    def coef(self, a: Sequence[int], x: Sequence[int]) -> float:
        return float(self.coefficients[self.scenario.flat_index(a, x)])

    def __add__(self, other: "BellFunctional") -> "BellFunctional":
        _same(self.scenario, other.scenario)
        return BellFunctional(self.scenario, self.coefficients + other.coefficients)

    def __mul__(self, scalar: float) -> "BellFunctional":
        return BellFunctional(self.scenario, float(scalar) * self.coefficients)

    __rmul__ = __mul__


@dataclass(frozen=True)
class DeterministicStrategy:
    """Per-party lookup tables ``tables[i][x_i] = ã_i(x_i)``."""

    scenario: Scenario
    tables: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        tables = tuple(tuple(int(v) for v in t) for t in self.tables)
        sc = self.scenario
        if len(tables) != sc.n or any(len(t) != sc.m for t in tables):
            raise ValueError(f"need {sc.n} tables of length {sc.m}, got {tables}")
        if any(v < 0 or v >= sc.d for t in tables for v in t):
            raise ValueError(f"table entries must lie in [0, {sc.d})")
        object.__setattr__(self, "tables", tables)

    @classmethod
    def constant(cls, scenario: Scenario, outputs: Sequence[int] | int) -> "DeterministicStrategy":
        if isinstance(outputs, (int, np.integer)):
            outputs = [int(outputs)] * scenario.n
        return cls(scenario, tuple((o,) * scenario.m for o in outputs))

    def outputs(self, x: Sequence[int]) -> tuple[int, ...]:
        return tuple(t[xi] for t, xi in zip(self.tables, x))

    def replace_party(self, party: int, table: Sequence[int]) -> "DeterministicStrategy":
        tables = list(self.tables)
        tables[party] = tuple(table)
        return DeterministicStrategy(self.scenario, tuple(tables))


def _same(s1: Scenario, s2: Scenario) -> None:
    if s1 != s2:
        raise ValueError(f"scenario mismatch: {s1} vs {s2}")


def det_correlation(strategy: DeterministicStrategy) -> Correlation:
    sc = strategy.scenario
    vals = np.zeros(sc.size)
    for x in sc.inputs():
        vals[sc.flat_index(strategy.outputs(x), x)] = 1.0
    return Correlation(sc, vals)


def evaluate(beta: BellFunctional, p: Correlation) -> float:
    """``β · p``."""
    _same(beta.scenario, p.scenario)
    return float(beta.coefficients @ p.values)


def score(beta: BellFunctional, strategy: DeterministicStrategy) -> float:
    """Score of a deterministic strategy, ``Σ_x β_{ã(x), x}``."""
    _same(beta.scenario, strategy.scenario)
    t = beta.tensor
    return float(sum(t[x + strategy.outputs(x)] for x in strategy.scenario.inputs()))


def all_tables(scenario: Scenario) -> list[tuple[int, ...]]:
    return list(itertools.product(range(scenario.d), repeat=scenario.m))


class ClassicalMax(NamedTuple):
    value: float
    argmax: list[DeterministicStrategy]
    unique: bool


def _all_scores(beta: BellFunctional) -> tuple[np.ndarray, list[tuple[int, ...]]]:
    sc = beta.scenario
    tables = all_tables(sc)
    onehot = np.zeros((len(tables), sc.m, sc.d))
    for k, t in enumerate(tables):
        onehot[k, range(sc.m), t] = 1.0
    # contract β[x_1..x_n, a_1..a_n] with one one-hot factor per party
    letters = "abcdefghijklmnopqrstuvwxyz"
    xs, as_, ts = letters[: sc.n], letters[sc.n : 2 * sc.n], "ABCDEFGHIJKLMNOPQRSTUVWXYZ"[: sc.n]
    subs = [xs + as_] + [ts[i] + xs[i] + as_[i] for i in range(sc.n)]
    scores = np.einsum(",".join(subs) + "->" + ts, beta.tensor, *([onehot] * sc.n), optimize=True)
    return scores, tables


def classical_max(beta: BellFunctional, tol: float = _TIE_TOL) -> ClassicalMax:
    """Exhaustive maximum of ``β`` over all local deterministic strategies.

    Every strategy scoring within ``tol`` (relative to the largest magnitude
    involved) of the maximum is returned in ``argmax``.
    """
    sc = beta.scenario
    count = (sc.d**sc.m) ** sc.n
    if count > ENUMERATION_LIMIT:
        raise ValueError(f"{count} deterministic strategies exceed the enumeration limit {ENUMERATION_LIMIT}")
    scores, tables = _all_scores(beta)
    best = float(scores.max())
    cut = tol * max(1.0, abs(best))
    winners = np.argwhere(scores >= best - cut)
    argmax = [DeterministicStrategy(sc, tuple(tables[k] for k in idx)) for idx in winners]
    return ClassicalMax(best, argmax, len(argmax) == 1)


class OneFlipStatus(NamedTuple):
    is_max: bool
    is_strict: bool


def one_flip_status(beta: BellFunctional, strategy: DeterministicStrategy, tol: float = _TIE_TOL) -> OneFlipStatus:
    """Compare ``ã`` against every strategy that changes a single party's table.

    All ``d**m`` tables of the deviating party are tried, so several entries of
    that table may change at once. The strategy itself never counts against
    strictness.
    """
    base = score(beta, strategy)
    cut = tol * max(1.0, abs(base))
    is_max, is_strict = True, True
    for j in range(beta.scenario.n):
        for table in all_tables(beta.scenario):
            if table == strategy.tables[j]:
                continue
            s = score(beta, strategy.replace_party(j, table))
            if s > base + cut:
                is_max = False
            if s >= base - cut:
                is_strict = False
    return OneFlipStatus(is_max, is_strict)


def indicator_functional(strategy: DeterministicStrategy) -> BellFunctional:
    """Coefficient 1 on every ``(ã(x), x)`` cell, 0 elsewhere.

    Its value on ``p_ã`` is ``m**n``; on any other deterministic point it is
    the number of inputs where the two strategies agree, hence strictly less.
    """
    return BellFunctional(strategy.scenario, det_correlation(strategy).values)


def tilt(beta: BellFunctional, strategy: DeterministicStrategy, eps: float) -> BellFunctional:
    """``β + ε β_ã`` with the unnormalized indicator functional of ``p_ã``.

    Evaluated at ``p_ã`` the tilt adds exactly ``ε · m**n``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    return beta + eps * indicator_functional(strategy)


# -- JSON ---------------------------------------------------------------------


def _scenario_from(obj: dict) -> Scenario:
    s = obj["scenario"]
    return Scenario(int(s["n"]), int(s["m"]), int(s["d"]))


def functional_to_json(beta: BellFunctional) -> str:
    return json.dumps({"scenario": beta.scenario.to_dict(), "coefficients": beta.coefficients.tolist()})


def functional_from_json(text: str) -> BellFunctional:
    obj = json.loads(text)
    return BellFunctional(_scenario_from(obj), obj["coefficients"])


def correlation_to_json(p: Correlation) -> str:
    return json.dumps({"scenario": p.scenario.to_dict(), "values": p.values.tolist()})


def correlation_from_json(text: str) -> Correlation:
    obj = json.loads(text)
    return Correlation(_scenario_from(obj), obj["values"])
