"""Extremal points of the two-party, two-input, two-output quantum set.

Contains the steering-map extremality test for nonlocal points, the full
alternation test on realization angles, a family of extremal points that
accumulates at a deterministic vertex, and a three-dimensional convex hull
whose extremal points accumulate at the origin.

Correlators use the ``±1`` convention: output 0 counts as ``+1``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Optional

import numpy as np

from .qstrategy import QuantumStrategy, correlation_of, two_qubit_xz_strategy
from .scenario import Correlation, DeterministicStrategy, Scenario, det_correlation

SCENARIO_222 = Scenario(2, 2, 2)
ARCSIN_CLIP = 1e-12
EXTREMALITY_TOL = 1e-8
NONLOCAL_TOL = 1e-9
ALTERNATION_SLACK = 1e-10
HULL_TOL = 1e-9
HULL_MAX_N = 12


@dataclass(frozen=True)
class RealizationAngles:
    """State angle ``theta`` and XZ-plane measurement angles (Alice ``a0, a1``; Bob ``b0, b1``).

    The canonical range is ``0 <= a0 <= b0 <= b1 < π`` and ``a0 <= a1 < π``;
    other finite values are accepted.
    """

    theta: float
    a0: float
    a1: float
    b0: float
    b1: float

    def __post_init__(self):
        for name in ("theta", "a0", "a1", "b0", "b1"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"angle {name} must be finite")

    def in_canonical_range(self) -> bool:
        return 0 <= self.a0 <= self.b0 <= self.b1 < math.pi and self.a0 <= self.a1 < math.pi


def strategy_from_angles(r: RealizationAngles) -> QuantumStrategy:
    return two_qubit_xz_strategy(r.theta, (r.a0, r.a1), (r.b0, r.b1))


class Correlators(NamedTuple):
    alice: np.ndarray  # ⟨A_x⟩
    bob: np.ndarray  # ⟨B_y⟩
    joint: np.ndarray  # ⟨A_x B_y⟩


def correlators(p: Correlation) -> Correlators:
    """Marginal and joint ``±1`` correlators.

    Marginals are averaged over the other party's input, which is exact for
    no-signalling data.
    """
    if p.scenario != SCENARIO_222:
        raise ValueError("correlators need a (2,2,2) correlation")
    t = p.tensor  # [x, y, a, b]
    sa = np.array([1.0, -1.0])
    joint = np.einsum("xyab,a,b->xy", t, sa, sa)
    alice = np.einsum("xyab,a->x", t, sa) / 2
    bob = np.einsum("xyab,b->y", t, sa) / 2
    return Correlators(alice, bob, joint)


def closed_form_correlators(r: RealizationAngles) -> Correlators:
    """``⟨A_x⟩ = cos a_x cos 2θ``, ``⟨B_y⟩ = cos b_y cos 2θ``, ``⟨A_xB_y⟩ = cos a cos b + sin a sin b sin 2θ``."""
    a = np.array([r.a0, r.a1])
    b = np.array([r.b0, r.b1])
    c2, s2 = math.cos(2 * r.theta), math.sin(2 * r.theta)
    joint = np.outer(np.cos(a), np.cos(b)) + s2 * np.outer(np.sin(a), np.sin(b))
    return Correlators(np.cos(a) * c2, np.cos(b) * c2, joint)


def modified_angle(angle: float, theta: float, sign: int) -> float:
    """``2 arctan(tan(angle/2) · tan(θ)^sign)``."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    half = angle / 2
    if abs(math.cos(half)) < 1e-15:
        raise ValueError(f"tan({angle}/2) is singular")
    th = math.tan(half)
    if th == 0.0:
        return 0.0
    tt = math.tan(theta)
    if abs(math.cos(theta)) < 1e-15 or (sign == -1 and tt == 0.0):
        raise ValueError(f"tan(theta)^{sign} is singular at theta = {theta}")
    return 2 * math.atan(th * tt**sign)


def modified_correlator(p: Correlation, x: int, y: int, sign: int, corr: Optional[Correlators] = None) -> float:
    """``(⟨A_x B_y⟩ + sign ⟨B_y⟩) / (1 + sign ⟨A_x⟩)``."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    c = corr or correlators(p)
    den = 1 + sign * c.alice[x]
    if abs(den) <= 1e-12:
        raise ValueError(f"modified correlator undefined: 1 {'+' if sign > 0 else '-'} <A_{x}> vanishes")
    return float((c.joint[x, y] + sign * c.bob[y]) / den)


def chsh_values(corr: Correlators) -> list[float]:
    """All eight CHSH expressions ``±(E00 + E01 + E10 + E11 - 2 E_k)``; the local bound is 2."""
    e = corr.joint.reshape(-1)
    out = []
    for k in range(4):
        s = e.sum() - 2 * e[k]
        out += [s, -s]
    return out


def chsh_violation(p: Correlation) -> float:
    return max(chsh_values(correlators(p))) - 2.0


def _safe_arcsin(v: float) -> float:
    if abs(v) > 1 + ARCSIN_CLIP:
        raise ValueError(f"arcsin argument {v} outside [-1, 1]")
    return math.asin(max(-1.0, min(1.0, v)))


# all ε ∈ {±1}^4 (order 00, 01, 10, 11) with product -1
EPS_PATTERNS = [e for e in itertools.product((1, -1), repeat=4) if math.prod(e) == -1]


class ExtremalityReport(NamedTuple):
    is_extremal_candidate: bool
    details: dict  # u -> (best residual, best ε)
    max_residual: float


def extremality_check(p: Correlation, tol: float = EXTREMALITY_TOL) -> ExtremalityReport:
    """Steering-map test: for every ``u ∈ {±1}²`` some admissible sign pattern ``ε`` gives

    ``Σ_{x,y} ε_{xy} arcsin[Ã_x^{u_x} B_y] = π``.

    Raises ``ValueError`` on local points, where the test says nothing.
    """
    viol = chsh_violation(p)
    if viol <= NONLOCAL_TOL:
        raise ValueError(f"condition applies to nonlocal points (CHSH violation {viol:.3e})")
    corr = correlators(p)
    details = {}
    for u in itertools.product((1, -1), repeat=2):
        angles = [
            _safe_arcsin(modified_correlator(p, x, y, u[x], corr)) for x in (0, 1) for y in (0, 1)
        ]
        best = min(EPS_PATTERNS, key=lambda e: abs(np.dot(e, angles) - math.pi))
        details[u] = (abs(float(np.dot(best, angles)) - math.pi), best)
    worst = max(r for r, _ in details.values())
    return ExtremalityReport(worst <= tol, details, worst)


def _mod_pi(alpha: float, slack: float) -> float:
    v = alpha % math.pi
    return 0.0 if v > math.pi - slack else v  # values just below π are the class of 0


def alternation_check(r: RealizationAngles, slack: float = ALTERNATION_SLACK) -> bool:
    """``0 <= [ã_0^s]_π <= b0 <= [ã_1^t]_π <= b1 < π`` for all four sign pairs."""
    for s, t in itertools.product((1, -1), repeat=2):
        try:
            m0 = _mod_pi(modified_angle(r.a0, r.theta, s), slack)
            m1 = _mod_pi(modified_angle(r.a1, r.theta, t), slack)
        except ValueError:
            return False
        chain = [0.0, m0, r.b0, m1, r.b1]
        if any(lo > hi + slack for lo, hi in zip(chain, chain[1:])):
            return False
        if r.b1 >= math.pi - slack:
            return False
    return True


def sequence_angles(theta: float) -> RealizationAngles:
    """``a0 = 0, a1 = √θ, b0 = ã_1^+, b1 = ã_1^-``."""
    a1 = math.sqrt(theta)
    return RealizationAngles(theta, 0.0, a1, modified_angle(a1, theta, 1), modified_angle(a1, theta, -1))


# p0 after relabeling Bob's outcomes on his second input; the sequence converges here
LIMIT_VERTEX = DeterministicStrategy(SCENARIO_222, ((0, 0), (0, 1)))


class SequencePoint(NamedTuple):
    angles: RealizationAngles
    correlation: Correlation
    distance: float  # to LIMIT_VERTEX, i.e. to p0 up to outcome relabeling
    literal_distance: float  # to the all-zero deterministic point itself
    extremality: ExtremalityReport


def nearest_deterministic(p: Correlation) -> tuple[DeterministicStrategy, float]:
    """Closest of the sixteen deterministic points, with its Euclidean distance."""
    best = None
    for ta, tb in itertools.product(itertools.product((0, 1), repeat=2), repeat=2):
        det = DeterministicStrategy(p.scenario, (ta, tb))
        dist = float(np.linalg.norm(p.values - det_correlation(det).values))
        if best is None or dist < best[1]:
            best = (det, dist)
    return best


def extremal_sequence(theta: float) -> SequencePoint:
    """Extremal point of the sequence at entanglement angle ``theta ∈ (0, π/4)``.

    As ``theta -> 0`` Bob's second angle tends to ``π``, so the points approach
    the deterministic vertex in which Bob's second output is flipped. That
    vertex is the all-zero point after relabeling Bob's outcomes on input 1;
    ``distance`` measures the approach to it.

    The extremality residual grows as ``theta`` shrinks (about 1e-8 at 0.01) because
    ``1 - ⟨A_0⟩ = 2 sin²θ``; below ``theta ≈ 5e-4`` arcsin arguments leave
    ``[-1, 1]`` by more than the clip tolerance and ``ValueError`` is raised.
    """
    if not 0 < theta < math.pi / 4:
        raise ValueError("theta must lie in (0, π/4)")
    ang = sequence_angles(theta)
    p = correlation_of(strategy_from_angles(ang))
    limit = det_correlation(LIMIT_VERTEX)
    p0 = det_correlation(DeterministicStrategy.constant(SCENARIO_222, 0))
    dist = float(np.linalg.norm(p.values - limit.values))
    literal = float(np.linalg.norm(p.values - p0.values))
    return SequencePoint(ang, p, dist, literal, extremality_check(p))


# -- 3D hull ---------------------------------------------------------------------------


def hull_point(n: int) -> np.ndarray:
    if n < 1:
        raise ValueError("index must be >= 1")
    return np.array([1 / n, 1 / n**2, 1 / n**3])


def _exact_point(label) -> tuple[Fraction, Fraction, Fraction]:
    if label == "origin":
        return (Fraction(0),) * 3
    n = Fraction(1, label)
    return (n, n**2, n**3)


def _exact_coplanar(labels) -> bool:
    p = [_exact_point(l) for l in labels]
    rows = [[p[k][i] - p[0][i] for i in range(3)] for k in (1, 2, 3)]
    det = (
        rows[0][0] * (rows[1][1] * rows[2][2] - rows[1][2] * rows[2][1])
        - rows[0][1] * (rows[1][0] * rows[2][2] - rows[1][2] * rows[2][0])
        + rows[0][2] * (rows[1][0] * rows[2][1] - rows[1][1] * rows[2][0])
    )
    return det == 0


class Certificate(NamedTuple):
    """Plane ``normal · q = offset`` with the certified point strictly above it."""

    point: object
    normal: list[float]
    offset: float
    margin: float  # height of the certified point above the plane
    support: tuple  # labels of the points the plane passes through


@dataclass
class HullReport:
    max_n: int
    certificates: list[Certificate]
    uncertified: list
    max_coplanar: int
    min_fourth_point_distance: float

    @property
    def ok(self) -> bool:
        return not self.uncertified and self.max_coplanar <= 3

    def to_dict(self) -> dict:
        return {
            "max_n": self.max_n,
            "certificates": [
                {"point": c.point, "normal": c.normal, "offset": c.offset, "margin": c.margin, "support": list(c.support)}
                for c in self.certificates
            ],
            "uncertified": self.uncertified,
            "max_coplanar": self.max_coplanar,
            "min_fourth_point_distance": self.min_fourth_point_distance,
            "ok": self.ok,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _coords(label) -> np.ndarray:
    return np.zeros(3) if label == "origin" else hull_point(label)


def _plane(pts: list[np.ndarray]) -> Optional[tuple[np.ndarray, float]]:
    normal = np.cross(pts[1] - pts[0], pts[2] - pts[0])
    norm = np.linalg.norm(normal)
    if norm < 1e-15:
        return None
    normal = normal / norm
    return normal, float(normal @ pts[0])


def _certify(target, labels, tol: float) -> Optional[Certificate]:
    """Plane through three other points with the target strictly on one side and all others weakly on the other."""
    others = [l for l in labels if l != target]
    pt = _coords(target)
    best = None
    for trip in itertools.combinations(others, 3):
        plane = _plane([_coords(l) for l in trip])
        if plane is None:
            continue
        normal, off = plane
        h = float(normal @ pt - off)
        if h < 0:
            normal, off, h = -normal, -off, -h
        if h <= tol:
            continue
        if all(normal @ _coords(l) - off <= tol for l in others):
            if best is None or h > best.margin:
                best = Certificate(target, normal.tolist(), off, h, trip)
    return best


def hull_demo(max_n: int, tol: float = HULL_TOL) -> HullReport:
    """Certify that the origin and each ``p_n = (1/n, 1/n², 1/n³)``, ``n <= max_n``, are extreme.

    Each point gets a separating plane through three of the other points.
    Coplanarity of every four-point subset is decided in exact rational
    arithmetic; ``min_fourth_point_distance`` reports the smallest float
    distance from a fourth point to a plane through three others.
    """
    if not 2 <= max_n <= HULL_MAX_N:
        raise ValueError(f"max_n must lie in [2, {HULL_MAX_N}]")
    labels = ["origin"] + list(range(1, max_n + 1))
    certs, missing = [], []
    for lab in labels:
        c = _certify(lab, labels, tol)
        if c is None:
            missing.append(lab)
        else:
            certs.append(c)
    max_cop = 3
    for quad in itertools.combinations(labels, 4):
        if _exact_coplanar(quad):
            max_cop = 4
            break
    min_dist = math.inf
    for trip in itertools.combinations(labels, 3):
        plane = _plane([_coords(l) for l in trip])
        if plane is None:
            continue
        normal, off = plane
        for l in labels:
            if l not in trip:
                min_dist = min(min_dist, abs(float(normal @ _coords(l) - off)))
    return HullReport(max_n, certs, missing, max_cop, min_dist)


def plane_distances(through, others) -> list[float]:
    """Distances of ``others`` from the plane through the three labelled points ``through``."""
    plane = _plane([_coords(l) for l in through])
    if plane is None:
        raise ValueError("points are collinear")
    normal, off = plane
    return [abs(float(normal @ _coords(l) - off)) for l in others]
