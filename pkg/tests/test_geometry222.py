import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bellperturb import games
from bellperturb.geometry222 import (
    LIMIT_VERTEX,
    nearest_deterministic,
    RealizationAngles,
    alternation_check,
    chsh_violation,
    closed_form_correlators,
    correlators,
    extremal_sequence,
    extremality_check,
    hull_demo,
    hull_point,
    modified_angle,
    modified_correlator,
    plane_distances,
    sequence_angles,
    strategy_from_angles,
)
from bellperturb.qstrategy import SIGMA_X, SIGMA_Z, correlation_of, tsirelson_strategy
from bellperturb.scenario import BellFunctional, Correlation, DeterministicStrategy, Scenario, det_correlation, evaluate

SC = Scenario(2, 2, 2)
TSIRELSON = (2 + math.sqrt(2)) / 4
angle = st.floats(0, math.pi - 1e-3)


def corr_of(r):
    return correlation_of(strategy_from_angles(r))


def test_product_state_gives_all_zero_point():
    p = corr_of(RealizationAngles(0, 0, 0, 0, 0))
    np.testing.assert_allclose(p.values, det_correlation(DeterministicStrategy.constant(SC, 0)).values, atol=1e-15)


def test_tsirelson_angles():
    chsh = games.chsh().functional
    p = corr_of(RealizationAngles(math.pi / 4, 0, math.pi / 2, math.pi / 4, -math.pi / 4))
    assert abs(evaluate(chsh, p) - TSIRELSON) < 1e-10
    # b1 = 3π/4 is the same observable up to relabeling Bob's outcomes on y = 1
    q = corr_of(RealizationAngles(math.pi / 4, 0, math.pi / 2, math.pi / 4, 3 * math.pi / 4))
    relabeled = BellFunctional.from_function(SC, lambda a, x: chsh.coef((a[0], a[1] ^ x[1]), x))
    assert abs(evaluate(relabeled, q) - TSIRELSON) < 1e-10
    assert abs(evaluate(chsh, q) - 0.5) < 1e-10


def direct_expectations(r):
    psi = np.zeros(4)
    psi[0], psi[3] = math.cos(r.theta), math.sin(r.theta)

    def obs(t):
        return math.cos(t) * SIGMA_Z + math.sin(t) * SIGMA_X

    a = [obs(r.a0), obs(r.a1)]
    b = [obs(r.b0), obs(r.b1)]
    ev = lambda op: float(np.real(psi @ op @ psi))
    return (
        np.array([ev(np.kron(a[x], np.eye(2))) for x in (0, 1)]),
        np.array([ev(np.kron(np.eye(2), b[y])) for y in (0, 1)]),
        np.array([[ev(np.kron(a[x], b[y])) for y in (0, 1)] for x in (0, 1)]),
    )


@given(st.floats(0, math.pi / 2), angle, angle, angle, angle)
def test_correlators_match_closed_form_and_trace_oracle(theta, a0, a1, b0, b1):
    r = RealizationAngles(theta, a0, a1, b0, b1)
    c = correlators(corr_of(r))
    cf = closed_form_correlators(r)
    direct = direct_expectations(r)
    for got, want, oracle in zip(c, cf, direct):
        np.testing.assert_allclose(got, want, atol=1e-12)
        np.testing.assert_allclose(got, oracle, atol=1e-12)


def test_modified_angle_examples():
    assert modified_angle(0.0, 0.3, 1) == 0.0 and modified_angle(0.0, 0.0, -1) == 0.0
    for a in (0.2, 1.0, 2.5):
        for s in (1, -1):
            assert abs(modified_angle(a, math.pi / 4, s) - a) < 1e-12
    a = math.sqrt(0.1)
    assert modified_angle(a, 0.1, 1) == 2 * math.atan(math.tan(a / 2) * math.tan(0.1))
    assert modified_angle(a, 0.1, -1) == 2 * math.atan(math.tan(a / 2) / math.tan(0.1))


def test_modified_angle_singular_inputs():
    with pytest.raises(ValueError):
        modified_angle(math.pi, 0.3, 1)
    with pytest.raises(ValueError):
        modified_angle(0.5, 0.0, -1)
    with pytest.raises(ValueError):
        modified_angle(0.5, math.pi / 2, 1)
    with pytest.raises(ValueError):
        modified_angle(0.5, 0.3, 2)


def test_modified_correlator_examples():
    p0 = det_correlation(DeterministicStrategy.constant(SC, 0))
    assert modified_correlator(p0, 0, 1, 1) == 1.0
    with pytest.raises(ValueError):
        modified_correlator(p0, 0, 0, -1)
    pt = correlation_of(tsirelson_strategy())
    c = correlators(pt)
    np.testing.assert_allclose(c.alice, 0, atol=1e-12)
    for x in (0, 1):
        for y in (0, 1):
            v = modified_correlator(pt, x, y, 1)
            assert abs(v - c.joint[x, y]) < 1e-12
            assert abs(abs(v) - math.sqrt(2) / 2) < 1e-12


def test_extremality_tsirelson_and_local_rejection():
    rep = extremality_check(correlation_of(tsirelson_strategy()))
    assert rep.is_extremal_candidate and rep.max_residual <= 1e-8
    assert len(rep.details) == 4
    with pytest.raises(ValueError, match="nonlocal"):
        extremality_check(Correlation(SC, np.full(16, 0.25)))


def test_extremality_rejects_non_extremal_nonlocal_point():
    # mixing Tsirelson with white noise stays nonlocal but is not extremal
    pt = correlation_of(tsirelson_strategy())
    noisy = Correlation(SC, 0.9 * pt.values + 0.1 * 0.25)
    assert chsh_violation(noisy) > 0
    assert not extremality_check(noisy).is_extremal_candidate


@pytest.mark.parametrize("theta", [0.2, 0.1, 0.05])
def test_extremality_invariant_under_global_outcome_flip(theta):
    p = extremal_sequence(theta).correlation
    t = p.tensor
    flipped = Correlation(SC, t[:, :, ::-1, ::-1].reshape(-1))
    r1, r2 = extremality_check(p), extremality_check(flipped)
    for u, (res, _) in r1.details.items():
        assert abs(res - r2.details[(-u[0], -u[1])][0]) < 1e-10
    assert r1.is_extremal_candidate == r2.is_extremal_candidate


def test_alternation_examples():
    assert alternation_check(sequence_angles(0.1))
    assert alternation_check(RealizationAngles(0.3, 0, 0, 0, 0))
    assert not alternation_check(RealizationAngles(0.3, 0, 0.5, 1.0, 0.8))


def test_sequence_properties():
    pts = [extremal_sequence(t) for t in (0.2, 0.1, 0.05)]
    d = [p.distance for p in pts]
    assert d[0] > d[1] > d[2]
    for p in pts:
        assert p.extremality.is_extremal_candidate and p.extremality.max_residual <= 1e-8
        assert alternation_check(p.angles)
    a = sequence_angles(0.1)
    assert a.a0 == 0 and a.a1 == math.sqrt(0.1)
    assert a.b0 == modified_angle(math.sqrt(0.1), 0.1, 1) and a.b1 == modified_angle(math.sqrt(0.1), 0.1, -1)


def test_sequence_approaches_relabeled_vertex():
    pts = [extremal_sequence(t) for t in (0.2, 0.1, 0.05, 0.02)]
    # close to the limit, the nearest vertex is the one flipping Bob's output on his second input
    assert all(nearest_deterministic(p.correlation)[0] == LIMIT_VERTEX for p in pts)
    assert pts[-1].distance < 0.2
    # the literal all-zero point recedes because b1 tends to π
    assert pts[-1].literal_distance > pts[0].literal_distance


def test_sequence_distance_decreasing_on_grid():
    grid = np.linspace(math.pi / 4 - 1e-3, 0.01, 40)
    d = [extremal_sequence(float(t)).distance for t in grid]
    assert all(b < a for a, b in zip(d, d[1:]))


def test_sequence_conditioning_near_zero():
    assert extremal_sequence(0.02).extremality.max_residual <= 1e-8
    assert extremal_sequence(0.01).extremality.max_residual <= 1e-7
    assert extremal_sequence(3e-3).extremality.max_residual <= 1e-5


def test_sequence_range():
    for bad in (0.0, math.pi / 4, -0.1):
        with pytest.raises(ValueError):
            extremal_sequence(bad)


def test_hull_certificates_are_valid():
    rep = hull_demo(6)
    assert rep.ok and len(rep.certificates) == 7
    labels = {c.point for c in rep.certificates}
    assert labels == {"origin", 1, 2, 3, 4, 5, 6}
    pts = {"origin": np.zeros(3), **{n: hull_point(n) for n in range(1, 7)}}
    for c in rep.certificates:
        normal = np.array(c.normal)
        assert normal @ pts[c.point] - c.offset > 1e-9
        for lab, q in pts.items():
            if lab != c.point:
                assert normal @ q - c.offset <= 1e-9


def test_hull_coplanarity():
    rep = hull_demo(6)
    assert rep.max_coplanar == 3 and rep.min_fourth_point_distance > 1e-9
    assert min(plane_distances((1, 2, 3), (4, 5, 6))) > 1e-9


def test_hull_bounds_and_points():
    assert hull_demo(12).ok
    for bad in (1, 13):
        with pytest.raises(ValueError):
            hull_demo(bad)
    p = np.array([hull_point(n) for n in range(1, 6)])
    assert np.all(np.diff(p, axis=0) < 0)
    with pytest.raises(ValueError):
        hull_point(0)
