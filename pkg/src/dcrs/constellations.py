"""Grassmann constellation construction: exp-map, cube-split, and manopt."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .codebook import Codebook
from .errors import ShapeError
from .linalg import min_chordal_distance, random_stiefel, skew_block_exp
from .optim import OptimizerOptions, minimize_on_manifold

# ---------------------------------------------------------------------------
# constituent symbol alphabets


def qam_symbols(order: int) -> np.ndarray:
    """Unit-average-power QAM alphabet.

    order=1 is the degenerate zero symbol, order=2 is BPSK, square orders
    (4, 16, 64, ...) are standard grid QAM.
    """
    if order == 1:
        return np.zeros(1, dtype=complex)
    if order == 2:
        return np.array([1.0, -1.0], dtype=complex)
    side = math.isqrt(order)
    if side * side != order:
        raise ShapeError(f"QAM order {order} is not a perfect square; use PSK")
    levels = np.arange(-(side - 1), side, 2, dtype=float)
    grid = levels[:, None] + 1j * levels[None, :]
    pts = grid.ravel()
    return pts / np.sqrt(np.mean(np.abs(pts) ** 2))


def psk_symbols(order: int) -> np.ndarray:
    """Unit-power PSK alphabet; order=1 is the zero symbol."""
    if order == 1:
        return np.zeros(1, dtype=complex)
    return np.exp(2j * np.pi * np.arange(order) / order)


def _alphabet(kind: str, order: int) -> np.ndarray:
    if kind == "QAM":
        return qam_symbols(order)
    if kind == "PSK":
        return psk_symbols(order)
    raise ShapeError(f"unknown alphabet kind {kind!r}")


# ---------------------------------------------------------------------------
# exp-map


@dataclass(frozen=True)
class ExpMapParams:
    """Parameters of the matrix-exponential construction.

    per_symbol_orders lists the modulation order of each of the M(T-M)
    constituent symbols; order 1 pins that symbol to zero.  The codebook
    cardinality is the product of the orders.
    """

    t: int
    m: int
    per_symbol_orders: tuple[int, ...]
    alphabet: str = "QAM"
    scale: float = 1.0

    def __post_init__(self):
        n_sym = self.m * (self.t - self.m)
        if len(self.per_symbol_orders) != n_sym:
            raise ShapeError(
                f"need {n_sym} symbol orders for (M,T)=({self.m},{self.t}), "
                f"got {len(self.per_symbol_orders)}"
            )

    @property
    def size(self) -> int:
        return int(np.prod(self.per_symbol_orders))


def expmap_orders_for_bits(t: int, m: int, bits: int) -> tuple[int, ...]:
    """Distribute 2^bits over M(T-M) constituent symbols as evenly as possible.

    When bits divides evenly all orders are equal; otherwise the leading
    symbols get one extra bit each.
    """
    n_sym = m * (t - m)
    base, extra = divmod(bits, n_sym)
    return tuple(2 ** (base + (1 if k < extra else 0)) for k in range(n_sym))


def _expmap_c_matrix(t: int, m: int, symbols: np.ndarray) -> np.ndarray:
    """Fill the M x (T-M) exponent block from constituent symbols."""
    if m == 1:
        return symbols.reshape(1, t - 1)
    if (m, t) == (2, 4):
        s1, s2, s3, s4 = symbols
        theta = np.exp(1j * np.pi / 4)
        phi = np.exp(1j * np.pi / 8)
        return np.array(
            [
                [s1 + theta * s2, phi * (s3 + theta * s4)],
                [phi * (s3 - theta * s4), s1 - theta * s2],
            ]
        )
    raise ShapeError(f"no exp-map symbol mapping for (M,T)=({m},{t})")


def build_expmap(params: ExpMapParams) -> Codebook:
    """Construct the exp-map codebook, ordered symbol-index lexicographically."""
    if params.t <= params.m:
        raise ShapeError("exp-map needs T > M")
    if params.m not in (1, 2) or (params.m == 2 and params.t != 4):
        raise ShapeError(
            f"unsupported exp-map shape (M,T)=({params.m},{params.t}); "
            "only M=1 (any T) and (M,T)=(2,4) are defined"
        )
    alphabets = [
        _alphabet(params.alphabet, order) * params.scale
        for order in params.per_symbol_orders
    ]
    i_tm = np.zeros((params.t, params.m), dtype=complex)
    i_tm[: params.m, : params.m] = np.eye(params.m)
    points = []
    for combo in itertools.product(*alphabets):
        c = _expmap_c_matrix(params.t, params.m, np.array(combo))
        points.append(skew_block_exp(c) @ i_tm)
    return Codebook(
        t=params.t,
        m=params.m,
        points=np.array(points),
        method="exp-map",
        params={
            "per_symbol_orders": list(params.per_symbol_orders),
            "alphabet": params.alphabet,
            "scale": params.scale,
        },
    )


def tune_expmap_scale(params: ExpMapParams, grid: Sequence[float]) -> float:
    """Grid-search the symbol scale maximizing the minimum chordal distance.

    Ties break toward the smaller scale; degenerate codebooks (duplicated
    points) score 0.
    """
    if len(grid) == 0:
        raise ShapeError("empty scale grid")
    best_scale, best_mcd = None, -1.0
    for s in sorted(grid):
        cb = build_expmap(
            ExpMapParams(params.t, params.m, params.per_symbol_orders,
                         params.alphabet, float(s))
        )
        mcd = cb.mcd() if cb.size >= 2 else 0.0
        if mcd > best_mcd + 1e-15:
            best_scale, best_mcd = float(s), mcd
    return best_scale


# ---------------------------------------------------------------------------
# cube-split


def inverse_normal_cdf(p: float) -> float:
    """Quantile function of the standard real Gaussian.

    Acklam's rational approximation refined by one Newton step on the CDF;
    |N(result) - p| < 1e-9 over p in [1e-12, 1 - 1e-12].
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must be in (0,1), got {p}")
    # Acklam coefficients.
    a = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
         1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
    b = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
         6.680131188771972e+01, -1.328068155288572e+01)
    c = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
         -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
    d = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
         3.754408661907416e+00)
    p_low, p_high = 0.02425, 1 - 0.02425
    if p < p_low:
        q = math.sqrt(-2 * math.log(p))
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1)
    elif p <= p_high:
        q = p - 0.5
        r = q * q
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / \
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1)
    else:
        q = math.sqrt(-2 * math.log(1 - p))
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1)
    # One Newton step: x -= (N(x) - p) / N'(x).
    cdf = 0.5 * math.erfc(-x / math.sqrt(2.0))
    pdf = math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    if pdf > 0.0:
        x -= (cdf - p) / pdf
    return x


@dataclass(frozen=True)
class CubeSplitParams:
    """Bit allocation of the cube-split construction on G(T, 1).

    bits_per_coord lists 2(T-1) nonnegative counts B_j, one per real/imaginary
    grid coordinate; the cardinality is T * 2^(sum B_j).
    """

    t: int
    bits_per_coord: tuple[int, ...]

    def __post_init__(self):
        if self.t < 2:
            raise ShapeError("cube-split needs T >= 2")
        if len(self.bits_per_coord) != 2 * (self.t - 1):
            raise ShapeError(
                f"need 2(T-1)={2 * (self.t - 1)} bit counts, "
                f"got {len(self.bits_per_coord)}"
            )
        if any(bj < 0 for bj in self.bits_per_coord):
            raise ShapeError("bit counts must be nonnegative")

    @property
    def size(self) -> int:
        return self.t * 2 ** sum(self.bits_per_coord)

    @property
    def rate(self) -> float:
        return (math.log2(self.t) + sum(self.bits_per_coord)) / self.t


def cubesplit_bits_for_rate(t: int, rate: float) -> tuple[int, ...]:
    """Even per-coordinate bit allocation meeting a target rate."""
    per = (rate * t - math.log2(t)) / (2 * (t - 1))
    b = int(round(per))
    if not math.isclose(per, b, abs_tol=1e-9):
        raise ShapeError(
            f"rate {rate} at T={t} does not admit an even integer allocation"
        )
    return (b,) * (2 * (t - 1))


def coordinate_grid(bits: int) -> np.ndarray:
    """Points (2k-1)/2^(B+1), k=1..2^B, dividing (0, 1); B=0 gives {1/2}."""
    n = 2**bits
    return (2 * np.arange(1, n + 1) - 1) / (2.0 * n)


def _xi1(a1: float, a2: float) -> complex:
    """Map one grid coordinate pair into the open unit disk."""
    w = inverse_normal_cdf(a1) + 1j * inverse_normal_cdf(a2)
    r = abs(w)
    if r == 0.0:
        # Continuous limit at the grid center (possible only when B_j = 0).
        return 0.0 + 0.0j
    e = math.exp(-0.5 * r * r)
    return math.sqrt((1.0 - e) / (1.0 + e)) * (w / r)


def build_cubesplit(params: CubeSplitParams) -> Codebook:
    """Construct the cube-split codebook on G(T, 1).

    Points are enumerated cell index first, then grid vectors in lexicographic
    order, so the file round-trip and rate sums are reproducible.
    """
    t = params.t
    grids = [coordinate_grid(bj) for bj in params.bits_per_coord]
    disk_maps = []
    for combo in itertools.product(*grids):
        tvec = np.array(
            [_xi1(combo[2 * k], combo[2 * k + 1]) for k in range(t - 1)]
        )
        disk_maps.append(tvec)
    points = np.empty((params.size, t, 1), dtype=complex)
    idx = 0
    for i in range(1, t + 1):
        for tvec in disk_maps:
            g = np.empty(t, dtype=complex)
            g[: i - 1] = tvec[: i - 1]
            g[i - 1] = 1.0
            g[i:] = tvec[i - 1 :]
            g /= np.sqrt(1.0 + np.sum(np.abs(tvec) ** 2))
            points[idx, :, 0] = g
            idx += 1
    return Codebook(
        t=t,
        m=1,
        points=points,
        method="cube-split",
        params={"bits_per_coord": list(params.bits_per_coord)},
    )


# ---------------------------------------------------------------------------
# manopt (max-min-distance numerical optimization)


def _lse_objective_general(points, eps):
    """Smoothed max-min objective log sum exp(-d_ij/eps) and its gradients.

    d_ij is the unnormalized projector-difference Frobenius distance
    sqrt(2(M - ||X_i^H X_j||_F^2)).
    """
    k, _, m = points.shape
    xs = np.array(points)
    gram = np.einsum("itm,jtn->ijmn", xs.conj(), xs)
    g2 = np.sum(np.abs(gram) ** 2, axis=(2, 3))
    d = np.sqrt(np.clip(2.0 * (m - g2), 1e-300, None))
    iu = np.triu_indices(k, 1)
    u = -d[iu] / eps
    umax = u.max()
    z = np.exp(u - umax)
    f = umax + np.log(z.sum())
    w = np.zeros((k, k))
    w[iu] = z / z.sum()
    w = w + w.T
    # grad wrt X_i: sum_j w_ij * (2/(eps*d_ij)) * X_j X_j^H X_i
    coef = w * (2.0 / eps) / np.maximum(d, 1e-300)
    # P_j X_i = X_j (X_j^H X_i);  X_j^H X_i = gram[j,i] = gram[i,j]^H
    inner = gram.conj().transpose(0, 1, 3, 2)  # inner[i,j] = X_j^H X_i
    weighted = coef[:, :, None, None] * np.einsum("jtm,ijmn->ijtn", xs, inner)
    grads = weighted.sum(axis=1)
    return float(f), [grads[i] for i in range(k)]


def _lse_objective_m1(points, eps):
    """M=1 smoothed objective log sum exp(|x_i^H x_j|/eps) and gradients."""
    k = points.shape[0]
    xs = np.array(points)[:, :, 0]  # (K, T)
    c = xs.conj() @ xs.T  # c[i,j] = x_i^H x_j
    mag = np.abs(c)
    iu = np.triu_indices(k, 1)
    u = mag[iu] / eps
    umax = u.max()
    z = np.exp(u - umax)
    f = umax + np.log(z.sum())
    w = np.zeros((k, k))
    w[iu] = z / z.sum()
    w = w + w.T
    # grad wrt x_i of |c_ij| is x_j * conj(c_ij)/|c_ij|
    phase = np.where(mag > 1e-300, c.conj() / np.maximum(mag, 1e-300), 0.0)
    coef = (w / eps) * phase
    grads = coef @ xs
    return float(f), [grads[i][:, None] for i in range(k)]


def build_manopt(
    size: int,
    t: int,
    m: int,
    rng: np.random.Generator,
    eps_schedule: Sequence[float] = (1e-1, 1e-2, 1e-3),
    opts: OptimizerOptions | None = None,
    seed_label: int | None = None,
) -> Codebook:
    """Numerically optimized max-MCD codebook on G(T, M).

    Anneals the log-sum-exp smoothing through eps_schedule, warm-starting each
    stage, and keeps the best iterate by true MCD so the result is never worse
    than the random initialization.
    """
    if size < 2:
        raise ShapeError("need at least 2 codewords")
    opts = opts or OptimizerOptions(max_iter=1500)
    xs = [random_stiefel(t, m, rng) for _ in range(size)]
    best = np.array(xs)
    best_mcd = min_chordal_distance(best)
    for eps in eps_schedule:
        if m == 1:
            fun = lambda pts, e=eps: _lse_objective_m1(np.array(pts), e)
        else:
            fun = lambda pts, e=eps: _lse_objective_general(np.array(pts), e)
        res = minimize_on_manifold(fun, ["grassmann"] * size, xs, opts)
        xs = res.point
        mcd = min_chordal_distance(np.array(xs))
        if mcd > best_mcd:
            best, best_mcd = np.array(xs), mcd
    params = {"eps_schedule": list(eps_schedule)}
    if seed_label is not None:
        params["seed"] = seed_label
    return Codebook(t=t, m=m, points=best, method="manopt", params=params)
