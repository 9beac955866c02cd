"""Analytic channel-estimation-error machinery and the NMSE-minimizing
unitary rotation of a Grassmann codebook.

The pairwise error probabilities bound the symbol error ratio from above;
their weighted sum over mismatch norms predicts the DC-RS channel estimation
error and yields the rotation objective, which leaves the minimum chordal
distance and the union-bound SER untouched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .codebook import Codebook
from .errors import ShapeError, SingularPairError
from .optim import OptimizerOptions, minimize_on_manifold

SINGULAR_DEN = 1e-12


def _pair_denominators(points: np.ndarray) -> np.ndarray:
    """Re det(I - X_i^H X_j X_j^H X_i) for all ordered pairs, shape (K, K).

    For m <= 2 the determinant is expanded in closed form and evaluated in
    extended precision: highly correlated pairs cancel the leading terms
    almost exactly, and the cancellation error would otherwise dominate the
    tiny denominator.
    """
    k, _, m = points.shape
    if m <= 2:
        # The denominator depends on the pair's subspaces only.  Gram-Schmidt
        # in extended precision picks exactly orthonormal representatives, so
        # the ~1e-16 column-norm error of stored points (which scales the
        # principal correlations multiplicatively) cannot leak into nearly
        # cancelled denominators.
        pts = points.astype(np.clongdouble)
        pts[:, :, 0] /= np.sqrt(np.einsum(
            "it,it->i", pts[:, :, 0].conj(), pts[:, :, 0]).real)[:, None]
        if m == 2:
            proj = np.einsum("it,it->i", pts[:, :, 0].conj(), pts[:, :, 1])
            pts[:, :, 1] -= proj[:, None] * pts[:, :, 0]
            pts[:, :, 1] /= np.sqrt(np.einsum(
                "it,it->i", pts[:, :, 1].conj(), pts[:, :, 1]).real)[:, None]
        gram = np.einsum("itm,jtn->ijmn", pts.conj(), pts)
        if m == 1:
            den = 1.0 - np.abs(gram[:, :, 0, 0]) ** 2
        else:
            fro2 = np.einsum("ijmn,ijmn->ij", gram, gram.conj()).real
            detg = (gram[:, :, 0, 0] * gram[:, :, 1, 1]
                    - gram[:, :, 0, 1] * gram[:, :, 1, 0])
            den = 1.0 - fro2 + np.abs(detg) ** 2
        return den.astype(float)
    gram = np.einsum("itm,jtn->ijmn", points.conj(), points)
    inner = np.eye(m) - np.einsum("ijmn,ijpn->ijmp", gram, gram.conj())
    return np.real(np.linalg.det(inner))


def pairwise_error_prob(
    xi: np.ndarray, xj: np.ndarray, sigma_v2: float, n_rx: int
) -> float:
    """Chernoff-style pairwise error probability bound term.

    Not clamped to [0, 1]; it may exceed 1 at low SNR.
    """
    if xi.shape != xj.shape:
        raise ShapeError(f"dimension mismatch: {xi.shape} vs {xj.shape}")
    if sigma_v2 <= 0:
        raise ValueError("sigma_v2 must be positive")
    m = xi.shape[1]
    g = xi.conj().T @ xj
    den = float(np.real(np.linalg.det(np.eye(m) - g @ g.conj().T)))
    if den < SINGULAR_DEN:
        raise SingularPairError(f"pair denominator {den:.3e} below {SINGULAR_DEN:.0e}")
    mn = m * n_rx
    return sigma_v2**mn * math.comb(2 * mn - 1, mn) / den**n_rx


def pairwise_error_table(
    codebook: Codebook, sigma_v2: float, n_rx: int
) -> np.ndarray:
    """Symmetric matrix of pairwise error probabilities over codebook indices."""
    if sigma_v2 <= 0:
        raise ValueError("sigma_v2 must be positive")
    den = _pair_denominators(codebook.points)
    k = codebook.size
    off = ~np.eye(k, dtype=bool)
    if np.any(den[off] < SINGULAR_DEN):
        i, j = np.argwhere((den < SINGULAR_DEN) & off)[0]
        raise SingularPairError(f"codewords {i} and {j} span identical subspaces")
    mn = codebook.m * n_rx
    p = np.zeros((k, k))
    p[off] = sigma_v2**mn * math.comb(2 * mn - 1, mn) / den[off] ** n_rx
    return p


def union_bound_ser(codebook: Codebook, sigma_v2: float, n_rx: int) -> float:
    """Union bound (2/|X|) sum_{i<j} p_ij on the GLRT symbol error ratio."""
    if codebook.size < 2:
        raise ShapeError("need at least 2 codewords")
    p = pairwise_error_table(codebook, sigma_v2, n_rx)
    iu = np.triu_indices(codebook.size, 1)
    return float(2.0 / codebook.size * p[iu].sum())


@dataclass(frozen=True)
class NmsePrediction:
    """Predicted E||Hhat - H||_F^2 split into noise floor and error term.

    valid is False when kappa * union-bound SER >= 1, the low-SNR regime the
    error-event decomposition does not cover.
    """

    noise_term: float
    error_term: float
    kappa: float
    ser_bound: float

    @property
    def total(self) -> float:
        return self.noise_term + self.error_term

    @property
    def valid(self) -> bool:
        return self.kappa * self.ser_bound < 1.0


def predicted_channel_error(
    codebook: Codebook, sigma_v2: float, n_rx: int, kappa: float = 1.0
) -> NmsePrediction:
    """Analytic prediction of the DC-RS channel estimation error power.

    The mismatch term uses E||A H||_F^2 = N ||A||_F^2 for unit-variance H,
    with A = X_j^H X_i - I.
    """
    if not 0.0 < kappa <= 1.0:
        raise ValueError("kappa must be in (0, 1]")
    m, t, n = codebook.m, codebook.t, n_rx
    noise = sigma_v2 * m * m * n / t
    p = pairwise_error_table(codebook, sigma_v2, n_rx)
    gram = np.einsum(
        "itm,jtn->ijmn", codebook.points.conj(), codebook.points
    )
    dnorm2 = n_rx * np.sum(
        np.abs(gram - np.eye(m)[None, None]) ** 2, axis=(2, 3)
    )
    iu = np.triu_indices(codebook.size, 1)
    err = kappa * 2.0 / codebook.size * float((p[iu] * dnorm2[iu]).sum())
    ser = float(2.0 / codebook.size * p[iu].sum())
    return NmsePrediction(noise_term=noise, error_term=err, kappa=kappa,
                          ser_bound=ser)


def rotation_objective(points: np.ndarray):
    """Build the unitary-rotation objective for a fixed codebook.

    Returns (fun, n_pairs_excluded): fun maps a list of K unitary matrices to
    (value, gradients).  Near-identical pairs (denominator < 1e-12) raise.
    """
    k, _, m = points.shape
    gram = np.einsum("itm,jtn->ijmn", points.conj(), points)  # A_ij = X_i^H X_j
    den = _pair_denominators(points)
    off = ~np.eye(k, dtype=bool)
    if np.any(den[off] < SINGULAR_DEN):
        i, j = np.argwhere((den < SINGULAR_DEN) & off)[0]
        raise SingularPairError(f"codewords {i} and {j} span identical subspaces")
    inv_den = np.where(off, 1.0 / np.where(off, den, 1.0), 0.0)

    def fun(us):
        u = np.array(us)  # (K, M, M)
        # B_ij = U_i^H A_ij U_j
        b = np.einsum("imp,ijmn,jnq->ijpq", u.conj(), gram, u)
        r = np.eye(m)[None, None] - b
        h = np.sum(np.abs(r) ** 2, axis=(2, 3)) * inv_den
        f = 0.5 * float(h.sum())
        # grad wrt U_k: sum_{j != k} 2/den * A_kj U_j (B_kj - I)^H
        w = np.einsum("ijmn,jnq->ijmq", gram, u)  # A_ij U_j
        bmi = b - np.eye(m)[None, None]
        g = 2.0 * np.einsum(
            "ij,ijmq,ijpq->imp", inv_den, w, bmi.conj()
        )
        return f, [g[i] for i in range(k)]

    return fun


def optimize_unitary_rotations(
    codebook: Codebook,
    opts: OptimizerOptions | None = None,
) -> tuple[Codebook, dict]:
    """Rotate each codeword by a per-index unitary minimizing the predicted
    channel-error objective.

    Initialization is the identity, so the optimized objective never exceeds
    the unrotated constellation's value.  Chordal distances and pairwise
    error probabilities are invariant under the rotation.
    """
    k, m = codebook.size, codebook.m
    if k == 1:
        return codebook, {"objective_before": 0.0, "objective_after": 0.0,
                          "iterations": 0}
    opts = opts or OptimizerOptions(max_iter=2000)
    fun = rotation_objective(codebook.points)
    init = [np.eye(m, dtype=complex) for _ in range(k)]
    f0, _ = fun(init)
    res = minimize_on_manifold(fun, ["unitary"] * k, init, opts)
    rotated = np.einsum("itm,imn->itn", codebook.points, np.array(res.point))
    out = Codebook(
        t=codebook.t,
        m=codebook.m,
        points=rotated,
        method="manopt-nmse",
        params=dict(codebook.params),
        source_digest=codebook.digest(),
    )
    info = {
        "objective_before": f0,
        "objective_after": res.value,
        "iterations": res.iterations,
        "grad_norm": res.grad_norm,
    }
    return out, info
