"""Complex-matrix and manifold primitives.

Points on the Grassmann manifold G(T, M) are represented by T-by-M matrices
with orthonormal columns (Stiefel representatives).  All functions operate on
plain complex128 ndarrays.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateInputError, ShapeError

STIEFEL_TOL = 1e-10
UNITARY_TOL = 1e-12


def stiefel_residual(x: np.ndarray) -> float:
    """Frobenius norm of x^H x - I."""
    m = x.shape[-1]
    return float(np.linalg.norm(x.conj().T @ x - np.eye(m)))


def check_stiefel(x: np.ndarray, tol: float = STIEFEL_TOL) -> None:
    """Raise if x does not have orthonormal columns within tol."""
    if x.ndim != 2 or x.shape[0] < x.shape[1]:
        raise ShapeError(f"expected tall T x M matrix, got shape {x.shape}")
    r = stiefel_residual(x)
    if r > tol:
        raise DegenerateInputError(f"orthonormality residual {r:.3e} > {tol:.1e}")


def project_to_stiefel(a: np.ndarray) -> np.ndarray:
    """Orthonormalize the columns of a (QR-based retraction).

    The returned matrix spans the same column space as the input.  The R
    factor's diagonal is forced real-positive so the map is deterministic and
    idempotent on already-orthonormal input.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] < a.shape[1]:
        raise ShapeError(f"expected tall T x M matrix, got shape {a.shape}")
    q, r = np.linalg.qr(a)
    d = np.diagonal(r)
    if np.any(np.abs(d) < 1e-13 * max(1.0, float(np.linalg.norm(a)))):
        raise DegenerateInputError("input matrix is (numerically) rank deficient")
    phases = d / np.abs(d)
    return q * phases.conj()


def chordal_distance(xi: np.ndarray, xj: np.ndarray) -> float:
    """Chordal distance ||X_i X_i^H - X_j X_j^H||_F / sqrt(2) between subspaces.

    For one-dimensional subspaces this reduces to sqrt(1 - |x_i^H x_j|^2).
    """
    xi = np.asarray(xi)
    xj = np.asarray(xj)
    if xi.shape != xj.shape:
        raise ShapeError(f"dimension mismatch: {xi.shape} vs {xj.shape}")
    if xi.shape[1] == 1:
        ip = np.abs(np.vdot(xi[:, 0], xj[:, 0])) ** 2
        return float(np.sqrt(max(1.0 - ip, 0.0)))
    pi = xi @ xi.conj().T
    pj = xj @ xj.conj().T
    return float(np.linalg.norm(pi - pj) / np.sqrt(2.0))


def pairwise_chordal_distances(points: np.ndarray) -> np.ndarray:
    """All-pairs chordal distance matrix for stacked points of shape (K, T, M).

    Uses d^2 = M - ||X_i^H X_j||_F^2, which equals the projector-difference
    formula for orthonormal representatives.
    """
    gram = np.einsum("itm,jtn->ijmn", points.conj(), points)
    g2 = np.sum(np.abs(gram) ** 2, axis=(2, 3))
    m = points.shape[2]
    d2 = np.clip(m - g2, 0.0, None)
    return np.sqrt(d2)


def min_chordal_distance(points: np.ndarray) -> float:
    """Minimum chordal distance over all unordered pairs of stacked points."""
    points = np.asarray(points)
    k = points.shape[0]
    if k < 2:
        raise ShapeError("need at least 2 points")
    d = pairwise_chordal_distances(points)
    iu = np.triu_indices(k, 1)
    return float(d[iu].min())


def skew_block_exp(c: np.ndarray) -> np.ndarray:
    """exp of the skew-Hermitian block matrix [[0, C], [-C^H, 0]].

    c has shape (M, T-M); the result is a T x T unitary matrix.  Computed via
    eigendecomposition of the Hermitian matrix j*A.
    """
    c = np.asarray(c, dtype=complex)
    if c.ndim != 2:
        raise ShapeError(f"expected 2-D block, got shape {c.shape}")
    if not np.all(np.isfinite(c)):
        raise ValueError("non-finite entries in exponent block")
    m, tmm = c.shape
    t = m + tmm
    a = np.zeros((t, t), dtype=complex)
    a[:m, m:] = c
    a[m:, :m] = -c.conj().T
    # A is skew-Hermitian, so jA is Hermitian and exp(A) = U exp(-j lam) U^H.
    lam, u = np.linalg.eigh(1j * a)
    return (u * np.exp(-1j * lam)) @ u.conj().T


def random_stiefel(t: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """Orthonormalized i.i.d. complex-Gaussian draw, uniform on G(T, M)."""
    if t < m or m < 1:
        raise ShapeError(f"need t >= m >= 1, got t={t}, m={m}")
    g = rng.standard_normal((t, m)) + 1j * rng.standard_normal((t, m))
    return project_to_stiefel(g)
