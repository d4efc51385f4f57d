"""Dense complex matrix kernel.

Everything here operates on plain ``numpy.ndarray`` objects of complex dtype.
Subsystem orderings follow the Kronecker convention: the left factor is the
most significant one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances shared across the package."""

    hermitian: float = 1e-10
    hermitian_flag: float = 1e-12
    jacobi_offdiag: float = 1e-13
    jacobi_max_sweeps: int = 100
    unitary: float = 1e-10
    psd: float = 1e-10
    trace: float = 1e-10
    projective: float = 1e-10
    support_weight: float = 1e-12
    realization: float = 1e-8
    active_rank: float = 1e-10


TOL = Tolerances()


class SpectralDecomposition(NamedTuple):
    """Eigenvalues in ascending order and the matching eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(a).T


def is_hermitian(a: np.ndarray, tol: float = TOL.hermitian) -> bool:
    a = np.asarray(a)
    return a.ndim == 2 and a.shape[0] == a.shape[1] and np.max(np.abs(a - dagger(a)), initial=0.0) <= tol


def is_skew_hermitian(a: np.ndarray, tol: float = TOL.hermitian) -> bool:
    a = np.asarray(a)
    return a.ndim == 2 and a.shape[0] == a.shape[1] and np.max(np.abs(a + dagger(a)), initial=0.0) <= tol


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product ``a ⊗ b``; ``a`` is the most significant factor."""
    return np.kron(np.asarray(a), np.asarray(b))


def kron_all(mats: Sequence[np.ndarray]) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def partial_trace(op: np.ndarray, dims: Sequence[int], keep) -> np.ndarray:
    """Trace out every subsystem whose (0-based) index is not in ``keep``.

    The kept factors appear in their original order.

    >>> partial_trace(np.eye(4), [2, 2], keep=[0]).real
    array([[2., 0.],
           [0., 2.]])
    """
    op = np.asarray(op)
    dims = [int(d) for d in dims]
    total = math.prod(dims)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise ValueError(f"partial_trace expects a square matrix, got shape {op.shape}")
    if op.shape[0] != total:
        raise ValueError(f"dims {dims} multiply to {total}, matrix has dimension {op.shape[0]}")
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise ValueError(f"keep indices {keep} out of range for {len(dims)} subsystems")
    n = len(dims)
    t = op.reshape(dims + dims)
    # build einsum subscripts: traced subsystems share their row/col label
    letters = iter("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ")
    rows, cols = [], []
    for k in range(n):
        r = next(letters)
        rows.append(r)
        cols.append(next(letters) if k in keep else r)
    out = "".join(rows[k] for k in keep) + "".join(cols[k] for k in keep)
    res = np.einsum("".join(rows) + "".join(cols) + "->" + out, t)
    kd = math.prod(dims[k] for k in keep)
    return res.reshape(kd, kd)


def permute_subsystems(op: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors so that new factor ``k`` is old factor ``perm[k]``."""
    dims = list(dims)
    n = len(dims)
    t = np.asarray(op).reshape(dims + dims)
    axes = list(perm) + [n + p for p in perm]
    nd = math.prod(dims)
    return t.transpose(axes).reshape(nd, nd)


def embed(local: np.ndarray, site: int, dims: Sequence[int]) -> np.ndarray:
    """Return ``I ⊗ … ⊗ local ⊗ … ⊗ I`` with ``local`` acting on ``site``."""
    mats = [np.eye(d, dtype=complex) for d in dims]
    mats[site] = local
    return kron_all(mats)


def _jacobi_sweeps(a: np.ndarray, tol: float, max_sweeps: int) -> tuple[np.ndarray, np.ndarray]:
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    scale = max(1.0, float(np.linalg.norm(a)))
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                r = abs(apq)
                if r <= 1e-6 * tol * scale:
                    # negligible, and dividing by a subnormal r overflows
                    a[p, q] = a[q, p] = 0.0
                    continue
                phase = apq / r
                theta = 0.5 * math.atan2(2.0 * r, a[q, q].real - a[p, p].real)
                c, s = math.cos(theta), math.sin(theta)
                # G = diag(1, conj(phase)) @ [[c, s], [-s, c]]
                g = np.array([[c, s], [-s * phase.conjugate(), c * phase.conjugate()]])
                idx = [p, q]
                a[:, idx] = a[:, idx] @ g
                a[idx, :] = g.conj().T @ a[idx, :]
                a[p, q] = a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                v[:, idx] = v[:, idx] @ g
    return np.real(np.diag(a)).copy(), v


def hermitian_eig(h: np.ndarray, tol: Tolerances = TOL) -> SpectralDecomposition:
    """Spectral decomposition of a Hermitian matrix by cyclic Jacobi rotations.

    Eigenvalues are returned in ascending order with eigenvectors as columns.
    Raises ``ValueError`` if ``h`` is not Hermitian within ``tol.hermitian``
    (scaled by the largest entry when that exceeds one).
    """
    h = np.array(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"hermitian_eig expects a square matrix, got shape {h.shape}")
    size = max(1.0, float(np.max(np.abs(h), initial=0.0)))
    if np.max(np.abs(h - dagger(h)), initial=0.0) > tol.hermitian * size:
        raise ValueError("hermitian_eig: input is not Hermitian")
    h = 0.5 * (h + dagger(h))
    w, v = _jacobi_sweeps(h, tol.jacobi_offdiag, tol.jacobi_max_sweeps)
    order = np.argsort(w, kind="stable")
    return SpectralDecomposition(w[order], v[:, order])


def expm_skew_from_eig(dec: SpectralDecomposition, t: float = 1.0) -> np.ndarray:
    """``exp(t K)`` given the spectral decomposition of ``H = -iK``."""
    v = dec.eigenvectors
    return (v * np.exp(1j * t * dec.eigenvalues)) @ v.conj().T


def skew_spectrum(k: np.ndarray, tol: Tolerances = TOL) -> SpectralDecomposition:
    """Decompose the Hermitian matrix ``-iK`` of a skew-Hermitian generator."""
    k = np.asarray(k, dtype=complex)
    size = max(1.0, float(np.max(np.abs(k), initial=0.0)))
    if k.ndim != 2 or k.shape[0] != k.shape[1] or np.max(np.abs(k + dagger(k)), initial=0.0) > tol.hermitian * size:
        raise ValueError("expected a skew-Hermitian matrix")
    return hermitian_eig(-1j * k, tol)


def expm_skew(k: np.ndarray) -> np.ndarray:
    """Matrix exponential of a skew-Hermitian ``K``.

    Uses ``e^K = V diag(e^{iλ}) V†`` where ``V diag(λ) V†`` decomposes ``-iK``,
    so the result is unitary to working precision.
    """
    return expm_skew_from_eig(skew_spectrum(k))


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def commutator_power(a: np.ndarray, b: np.ndarray, k: int = 1) -> np.ndarray:
    """``[A, B]`` for ``k=1`` and the nested ``[A, [A, B]]`` for ``k=2``."""
    a, b = np.asarray(a), np.asarray(b)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape != b.shape:
        raise ValueError(f"commutator needs equal square shapes, got {a.shape} and {b.shape}")
    if k not in (1, 2):
        raise ValueError("only k = 1 or k = 2 is supported")
    c = commutator(a, b)
    return c if k == 1 else commutator(a, c)


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Sample a ``dim × dim`` unitary from the Haar measure.

    QR of a complex Ginibre matrix, with the phases of ``R``'s diagonal pushed
    back into ``Q`` so the law is exactly Haar.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    ph = d / np.abs(d)
    return q * ph


def random_skew_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return 0.5 * (g - dagger(g))


def random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return 0.5 * (g + dagger(g))


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def projector(vec: np.ndarray) -> np.ndarray:
    vec = np.asarray(vec, dtype=complex)
    return np.outer(vec, vec.conj())


def orthonormal_column_basis(mat: np.ndarray, threshold: float = TOL.active_rank) -> np.ndarray:
    """Orthonormal basis for the column space, dropping singular values below ``threshold``."""
    if mat.shape[1] == 0:
        return np.zeros((mat.shape[0], 0), dtype=complex)
    u, s, _ = np.linalg.svd(mat, full_matrices=False)
    return u[:, s > threshold]
