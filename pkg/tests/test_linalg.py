import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bellperturb import linalg


def random_complex(rng, n, m=None):
    m = n if m is None else m
    return rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))


@given(st.integers(1, 9), st.integers(0, 2**32 - 1))
def test_hermitian_eig_matches_lapack(dim, seed):
    rng = np.random.default_rng(seed)
    h = linalg.random_hermitian(dim, rng)
    dec = linalg.hermitian_eig(h)
    np.testing.assert_allclose(dec.eigenvalues, np.linalg.eigvalsh(h), atol=1e-10)
    np.testing.assert_allclose(dec.reconstruct(), h, atol=1e-10)
    v = dec.eigenvectors
    np.testing.assert_allclose(v.conj().T @ v, np.eye(dim), atol=1e-10)
    assert np.all(np.diff(dec.eigenvalues) >= 0)


def test_hermitian_eig_degenerate_and_diagonal():
    h = np.diag([3.0, 1.0, 1.0, -2.0]).astype(complex)
    dec = linalg.hermitian_eig(h)
    np.testing.assert_allclose(dec.eigenvalues, [-2, 1, 1, 3])
    proj = linalg.projector(np.ones(4) / 2)
    np.testing.assert_allclose(linalg.hermitian_eig(proj).eigenvalues, [0, 0, 0, 1], atol=1e-12)


def test_hermitian_eig_larger_matrix(rng):
    h = linalg.random_hermitian(32, rng)
    dec = linalg.hermitian_eig(h)
    assert np.linalg.norm(dec.reconstruct() - h) < 1e-10


def test_hermitian_eig_rejects_non_hermitian():
    with pytest.raises(ValueError):
        linalg.hermitian_eig(np.array([[0, 1], [0, 0]], dtype=complex))
    with pytest.raises(ValueError):
        linalg.hermitian_eig(np.ones((2, 3)))


def test_expm_skew_quarter_turn():
    k = np.array([[0, math.pi / 2], [-math.pi / 2, 0]], dtype=complex)
    np.testing.assert_allclose(linalg.expm_skew(k), [[0, 1], [-1, 0]], atol=1e-12)


@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_expm_skew_unitary_and_matches_eigh_oracle(dim, seed):
    rng = np.random.default_rng(seed)
    k = linalg.random_skew_hermitian(dim, rng)
    u = linalg.expm_skew(k)
    np.testing.assert_allclose(u @ u.conj().T, np.eye(dim), atol=1e-10)
    w, v = np.linalg.eigh(-1j * k)
    np.testing.assert_allclose(u, (v * np.exp(1j * w)) @ v.conj().T, atol=1e-10)


def test_expm_skew_group_law(rng):
    k = linalg.random_skew_hermitian(4, rng)
    dec = linalg.skew_spectrum(k)
    a = linalg.expm_skew_from_eig(dec, 0.3) @ linalg.expm_skew_from_eig(dec, 0.5)
    np.testing.assert_allclose(a, linalg.expm_skew_from_eig(dec, 0.8), atol=1e-12)


def test_expm_skew_rejects_hermitian():
    with pytest.raises(ValueError):
        linalg.expm_skew(np.eye(2))


def test_partial_trace_identity_example():
    np.testing.assert_allclose(linalg.partial_trace(np.eye(4), [2, 2], keep=[0]), 2 * np.eye(2))


@given(st.integers(0, 2**32 - 1))
def test_partial_trace_of_products(seed):
    rng = np.random.default_rng(seed)
    a, b, c = random_complex(rng, 2), random_complex(rng, 3), random_complex(rng, 2)
    op = np.kron(np.kron(a, b), c)
    np.testing.assert_allclose(linalg.partial_trace(op, [2, 3, 2], [1]), np.trace(a) * np.trace(c) * b, atol=1e-10)
    np.testing.assert_allclose(
        linalg.partial_trace(op, [2, 3, 2], [2, 0]), np.trace(b) * np.kron(a, c), atol=1e-10
    )


def test_partial_trace_full_trace_and_errors(rng):
    op = random_complex(rng, 6)
    np.testing.assert_allclose(linalg.partial_trace(op, [2, 3], []), [[np.trace(op)]])
    with pytest.raises(ValueError):
        linalg.partial_trace(op, [2, 2], [0])
    with pytest.raises(ValueError):
        linalg.partial_trace(op, [2, 3], [2])


def test_permute_subsystems_swaps_factors(rng):
    a, b, c = random_complex(rng, 2), random_complex(rng, 3), random_complex(rng, 4)
    op = linalg.kron_all([a, b, c])
    out = linalg.permute_subsystems(op, [2, 3, 4], [2, 0, 1])
    np.testing.assert_allclose(out, linalg.kron_all([c, a, b]), atol=1e-12)


def test_embed_places_local_operator(rng):
    a = random_complex(rng, 3)
    np.testing.assert_allclose(linalg.embed(a, 1, [2, 3]), np.kron(np.eye(2), a))


def test_commutator_power():
    x, z = np.array([[0, 1], [1, 0]]), np.array([[1, 0], [0, -1]])
    np.testing.assert_allclose(linalg.commutator_power(x, z, 1), x @ z - z @ x)
    np.testing.assert_allclose(linalg.commutator_power(x, z, 2), 4 * z)
    with pytest.raises(ValueError):
        linalg.commutator_power(x, z, 3)
    with pytest.raises(ValueError):
        linalg.commutator_power(x, np.eye(3), 1)


def test_haar_unitary_is_unitary_and_seeded():
    u = linalg.haar_unitary(5, np.random.default_rng(3))
    np.testing.assert_allclose(u @ u.conj().T, np.eye(5), atol=1e-12)
    np.testing.assert_array_equal(u, linalg.haar_unitary(5, np.random.default_rng(3)))
    with pytest.raises(ValueError):
        linalg.haar_unitary(0, np.random.default_rng(0))


def test_haar_unitary_first_moment():
    # E|U_00|^2 = 1/dim and E[U_00] = 0 under the Haar measure
    rng = np.random.default_rng(0)
    samples = np.array([linalg.haar_unitary(3, rng)[0, 0] for _ in range(4000)])
    assert abs(np.mean(np.abs(samples) ** 2) - 1 / 3) < 0.02
    assert abs(np.mean(samples)) < 0.03


def test_orthonormal_column_basis_rank():
    v = np.array([[1, 1, 0], [0, 0, 0], [0, 0, 1]], dtype=complex)
    q = linalg.orthonormal_column_basis(v)
    assert q.shape == (3, 2)
    np.testing.assert_allclose(q.conj().T @ q, np.eye(2), atol=1e-12)
    assert linalg.orthonormal_column_basis(np.zeros((3, 0))).shape == (3, 0)


def test_skew_and_hermitian_predicates(rng):
    assert linalg.is_hermitian(linalg.random_hermitian(3, rng))
    assert linalg.is_skew_hermitian(linalg.random_skew_hermitian(3, rng))
    assert not linalg.is_hermitian(np.ones((2, 3)))
