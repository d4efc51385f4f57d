import itertools
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bellperturb import games
from bellperturb.perturb import PerturbationGenerators, deterministic_curvature, sample_generators
from bellperturb.qstrategy import canonical_det_strategy, random_pure_strategy, tsirelson_strategy
from bellperturb.scenario import BellFunctional, DeterministicStrategy, Scenario, classical_max, score, tilt
from bellperturb.subsetgames import (
    VERDICT_REFUTED,
    VERDICT_SUPPORTED,
    active_subspace_max,
    b2_operator,
    decompose_b2,
    deviation_support,
    eligible_subsets,
    embedded_chsh_witness,
    flipped_strategy,
    local_optimality_probe,
    n22_subset_scalar,
    r_term,
    state_term,
    subset_functional,
)

CHSH, GHZ = games.chsh(), games.ghz()
SC222 = Scenario(2, 2, 2)


def realization(game, rng, dim=2, per_input=True):
    return canonical_det_strategy(game.reference_strategy, dim, rng, per_input=per_input)


def test_chsh_subset_coefficients_sum_to_flip_difference():
    sf = subset_functional(CHSH.functional, CHSH.reference_strategy, [0, 1])
    assert sf.coefficients.shape == (2, 2, 1, 1)
    assert abs(sf.coefficients.sum()) < 1e-15
    # brute force: flipping both parties on every input
    flipped = DeterministicStrategy.constant(SC222, 1)
    assert sf.coefficients.sum() == pytest.approx(score(CHSH.functional, flipped) - 0.75, abs=1e-15)


def test_subset_functional_counts_and_zero():
    sc = Scenario(2, 2, 4)
    det = DeterministicStrategy.constant(sc, 0)
    sf = subset_functional(BellFunctional.zeros(sc), det, [0, 1])
    assert sf.size == 36 and not sf.coefficients.any()
    with pytest.raises(ValueError):
        subset_functional(games.i3322().functional, games.i3322().reference_strategy, [0, 1])
    with pytest.raises(ValueError):
        subset_functional(BellFunctional.zeros(sc), det, [])


def test_subset_relabeling(rng):
    sc = Scenario(2, 2, 3)
    beta = BellFunctional(sc, rng.standard_normal(sc.size))
    det = DeterministicStrategy(sc, ((1, 2), (0, 1)))
    sf = subset_functional(beta, det, [0, 1])
    # direct evaluation of one coefficient: xi = (1, 0), digits k = (2, 1)
    a = ((det.tables[0][1] + 2) % 3, (det.tables[1][0] + 1) % 3)
    expect = beta.coef(a, (1, 0)) - beta.coef(det.outputs((1, 0)), (1, 0))
    assert sf.coefficients[1, 0, 1, 0] == pytest.approx(expect)
    assert sf.output(0, 1, 2) == a[0]
    assert sf.as_functional().scenario == Scenario(2, 2, 2)


def test_b2_for_chsh_is_supported_on_double_flip(rng):
    s = realization(CHSH, rng)
    b2 = b2_operator(CHSH.functional, s, CHSH.reference_strategy)
    assert np.linalg.matrix_rank(b2, tol=1e-10) <= 1
    flip = np.kron(s.povms[0][0][1], s.povms[1][0][1])
    # B2 lives inside the span of the flipped projectors on every input pair
    np.testing.assert_allclose(b2, b2 @ np.kron(np.diag([0, 1]), np.diag([0, 1])), atol=1e-12)
    assert np.linalg.norm(flip) > 0


def test_b2_zero_functional_and_ghz_expectation(rng):
    s = realization(GHZ, rng)
    zero = BellFunctional.zeros(GHZ.scenario)
    assert not b2_operator(zero, s, GHZ.reference_strategy).any()
    b2 = b2_operator(GHZ.functional, s, GHZ.reference_strategy)
    assert abs(np.trace(b2 @ s.rho)) < 1e-14


def test_b2_requires_realization(rng):
    with pytest.raises(ValueError):
        b2_operator(CHSH.functional, tsirelson_strategy(), CHSH.reference_strategy)
    s = realization(CHSH, rng)
    with pytest.raises(ValueError):
        b2_operator(CHSH.functional, s.replace(), DeterministicStrategy.constant(SC222, 1))


def test_r_term_zero_generators(rng):
    s = realization(GHZ, rng)
    zero = PerturbationGenerators.zeros_like(s)
    assert r_term(GHZ.functional, s, zero, GHZ.reference_strategy) == 0.0


@pytest.mark.parametrize("game", [CHSH, GHZ], ids=["chsh", "ghz"])
def test_state_term_plus_r_is_full_curvature(game):
    rng = np.random.default_rng(4)
    for _ in range(10):
        s = realization(game, rng)
        g = sample_generators(s, rng)
        total = state_term(game.functional, s, g, game.reference_strategy) + r_term(
            game.functional, s, g, game.reference_strategy
        )
        assert abs(total - deterministic_curvature(game.functional, s, g, game.reference_strategy)) < 1e-10


@pytest.mark.parametrize("game", [CHSH, GHZ], ids=["chsh", "ghz"])
def test_r_term_nonpositive_at_one_flip_maximum(game):
    rng = np.random.default_rng(8)
    for _ in range(50):
        s = realization(game, rng)
        g = sample_generators(s, rng)
        assert r_term(game.functional, s, g, game.reference_strategy) <= 1e-12


def test_decomposition_terms_and_orthogonality(rng):
    s = realization(GHZ, rng)
    dec = decompose_b2(GHZ.functional, s, GHZ.reference_strategy)
    assert dec.residual <= 1e-10
    assert [t.subset for t in dec.terms] == [(0, 1), (0, 2), (1, 2), (0, 1, 2)]
    for t1, t2 in itertools.combinations(dec.terms, 2):
        assert np.linalg.norm(t1.embedded @ t2.embedded) <= 1e-10
    chsh_dec = decompose_b2(CHSH.functional, realization(CHSH, rng), CHSH.reference_strategy)
    assert len(chsh_dec.terms) == 1 and chsh_dec.terms[0].subset == (0, 1)


def test_decomposition_with_qutrits(rng):
    sc = Scenario(3, 2, 3)
    beta = BellFunctional(sc, rng.standard_normal(sc.size))
    det = DeterministicStrategy(sc, ((0, 2), (1, 1), (2, 0)))
    s = canonical_det_strategy(det, 3, rng, per_input=True)
    assert decompose_b2(beta, s, det).residual <= 1e-10


def test_active_max_equals_scalar_for_two_outcomes(rng):
    for _ in range(5):
        beta = BellFunctional(GHZ.scenario, rng.standard_normal(GHZ.scenario.size))
        det = DeterministicStrategy(GHZ.scenario, tuple(tuple(rng.integers(0, 2, size=2)) for _ in range(3)))
        s = canonical_det_strategy(det, 2, rng, per_input=True)
        for sub in eligible_subsets(3):
            assert abs(active_subspace_max(beta, det, sub, s) - n22_subset_scalar(beta, det, sub)) <= 1e-12


def test_active_max_zero_functional(rng):
    s = realization(CHSH, rng)
    assert active_subspace_max(BellFunctional.zeros(SC222), CHSH.reference_strategy, [0, 1], s) == 0.0


def test_active_max_negative_on_tilted_chsh(rng):
    t = tilt(CHSH.functional, CHSH.reference_strategy, 0.1)
    for _ in range(10):
        s = realization(CHSH, rng)
        assert active_subspace_max(t, CHSH.reference_strategy, [0, 1], s) < 0


@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 3]))
def test_scalar_matches_flip_oracle(seed, n):
    rng = np.random.default_rng(seed)
    sc = Scenario(n, 2, 2)
    beta = BellFunctional(sc, rng.standard_normal(sc.size))
    det = DeterministicStrategy(sc, tuple(tuple(int(v) for v in rng.integers(0, 2, size=2)) for _ in range(n)))
    for sub in eligible_subsets(n, 1):
        oracle = score(beta, flipped_strategy(det, sub)) - score(beta, det)
        assert abs(n22_subset_scalar(beta, det, sub) - oracle) <= 1e-12


def test_scalar_flips_inside_the_subset_not_outside():
    # a functional that only rewards party 0 flipping tells the two sides apart
    sc = Scenario(3, 2, 2)
    beta = BellFunctional.from_function(sc, lambda a, x: float(a[0] == 1))
    det = DeterministicStrategy.constant(sc, 0)
    assert n22_subset_scalar(beta, det, [0, 1]) == 8.0
    assert n22_subset_scalar(beta, det, [1, 2]) == 0.0


def test_scalar_examples():
    assert n22_subset_scalar(CHSH.functional, CHSH.reference_strategy, [0, 1]) == 0
    t = tilt(GHZ.functional, GHZ.reference_strategy, 0.05)
    for sub in eligible_subsets(3):
        assert n22_subset_scalar(t, GHZ.reference_strategy, sub) < 0
    assert n22_subset_scalar(BellFunctional.zeros(SC222), CHSH.reference_strategy, [0, 1]) == 0
    with pytest.raises(ValueError):
        n22_subset_scalar(BellFunctional.zeros(Scenario(2, 2, 3)), DeterministicStrategy.constant(Scenario(2, 2, 3), 0), [0, 1])


def test_probe_tilted_chsh(rng):
    t = tilt(CHSH.functional, CHSH.reference_strategy, 0.1)
    rep = local_optimality_probe(t, CHSH.reference_strategy, 2, 10, rng)
    assert rep.verdict == VERDICT_SUPPORTED
    assert len(rep.samples) == 10
    data = json.loads(rep.to_json())
    assert data["verdict"] == VERDICT_SUPPORTED and data["one_flip"]["is_strict"]


def test_probe_empty_and_guards(rng):
    rep = local_optimality_probe(CHSH.functional, CHSH.reference_strategy, 2, 0, rng)
    assert rep.verdict is None and rep.samples == [] and rep.max_value is None
    with pytest.raises(ValueError):
        local_optimality_probe(games.i3322().functional, games.i3322().reference_strategy, 2, 1, rng)


def test_embedded_chsh_witness_is_refuted():
    beta, det = embedded_chsh_witness()
    cm = classical_max(beta)
    assert cm.unique and cm.argmax[0] == det and abs(cm.value) < 1e-15
    rep = local_optimality_probe(beta, det, 3, 30, np.random.default_rng(2))
    assert rep.one_flip.is_strict
    assert rep.verdict == VERDICT_REFUTED and rep.max_value > 0


def test_deviation_support():
    assert deviation_support((0, 2, 1), (0, 1, 1)) == (1,)
    assert eligible_subsets(2) == [(0, 1)]
