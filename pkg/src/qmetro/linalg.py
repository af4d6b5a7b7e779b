"""Dense complex linear algebra for the 2x2 and 4x4 operators used here.

Matrices are plain ``complex128`` numpy arrays. Products and Kronecker
products go through numpy; the Hermitian eigensolver is a cyclic Jacobi
iteration, which is exact enough at these sizes and keeps the spectral
QFI independent of LAPACK.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

HERMITIAN_TOL = 1e-10
JACOBI_TOL = 1e-14
JACOBI_MAX_SWEEPS = 100


class LinalgError(ValueError):
    pass


class EigenDecomposition(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise LinalgError(f"expected a non-empty square matrix, got shape {m.shape}")
    return m


def identity(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=np.complex128)


def matmul(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    if a.shape != b.shape:
        raise LinalgError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    return a @ b


def adjoint(a) -> np.ndarray:
    return as_matrix(a).conj().T


def kron(a, b) -> np.ndarray:
    return np.kron(as_matrix(a), as_matrix(b))


def trace(a) -> complex:
    return complex(np.trace(as_matrix(a)))


def is_hermitian(a, tol: float = HERMITIAN_TOL) -> bool:
    m = as_matrix(a)
    return bool(np.max(np.abs(m - m.conj().T)) <= tol)


def _off_norm(a: np.ndarray) -> float:
    off = a - np.diag(np.diag(a))
    return float(np.sqrt(np.sum(np.abs(off) ** 2)))


def hermitian_eig(a) -> EigenDecomposition:
    """Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.

    Each rotation zeroes one off-diagonal pair ``(p, q)``: the complex phase of
    ``a[p, q]`` is absorbed into the rotation so the classical real-symmetric
    update applies. Returns eigenvalues ascending and the matching orthonormal
    eigenvectors as columns.
    """
    m = as_matrix(a)
    if not is_hermitian(m):
        raise LinalgError("matrix is not Hermitian within tolerance")
    m = 0.5 * (m + m.conj().T)
    n = m.shape[0]
    vecs = identity(n)
    scale = max(float(np.max(np.abs(m))), 1.0)

    for _ in range(JACOBI_MAX_SWEEPS):
        if _off_norm(m) <= JACOBI_TOL * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = m[p, q]
                g = abs(apq)
                if g <= 1e-300:
                    continue
                phase = apq / g
                tau = (m[q, q].real - m[p, p].real) / (2.0 * g)
                if tau == 0.0:
                    t = 1.0
                else:
                    t = np.sign(tau) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                rot = identity(n)
                rot[p, p] = c
                rot[q, q] = c
                rot[p, q] = s * phase
                rot[q, p] = -s * np.conj(phase)
                m = rot.conj().T @ m @ rot
                m[p, q] = m[q, p] = 0.0
                vecs = vecs @ rot
    else:
        if _off_norm(m) > JACOBI_TOL * scale:
            raise LinalgError("Jacobi iteration did not converge")

    vals = np.real(np.diag(m))
    order = np.argsort(vals, kind="stable")
    return EigenDecomposition(vals[order], vecs[:, order])
