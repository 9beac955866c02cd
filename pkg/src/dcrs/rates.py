"""Monte Carlo achievable-rate estimators.

Noncoherent Grassmann rate with the Woodbury/Sylvester-simplified likelihood,
coherent spatial-multiplexing rate with perfect CSI, coherent rate under
Gauss-Markov CSI error, and the slot-aggregate total rate.  All estimators
share the channel draw across transmitted hypotheses and use max-subtracted
log-sum-exp for numerical stability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .channel import sigma_from_beta
from .codebook import Codebook
from .errors import ShapeError
from .rng import block_sizes, substream


@dataclass(frozen=True)
class RateEstimate:
    """Monte Carlo rate in bit/sym with standard error and trial count."""

    mean: float
    stderr: float
    trials: int
    params: dict[str, Any]


@dataclass(frozen=True)
class QamConstellation:
    """Unit-average-power square QAM alphabet for the coherent data phase."""

    order: int
    symbols: np.ndarray

    @property
    def bits(self) -> int:
        return int(math.log2(self.order))


def qam_constellation(order: int) -> QamConstellation:
    side = math.isqrt(order)
    if side * side != order or order < 4:
        raise ShapeError(f"QAM order must be a square >= 4, got {order}")
    levels = np.arange(-(side - 1), side, 2, dtype=float)
    pts = (levels[:, None] + 1j * levels[None, :]).ravel()
    pts = pts / np.sqrt(np.mean(np.abs(pts) ** 2))
    return QamConstellation(order=order, symbols=pts)


def eta(
    yi: np.ndarray, xi: np.ndarray, xj: np.ndarray, sigma_v2: float
) -> float:
    """Simplified log-likelihood ratio log p(Y_i|X_j) - log p(Y_i|X_i).

    eta(yi, xi, xi) is exactly zero.
    """
    if sigma_v2 <= 0:
        raise ValueError("sigma_v2 must be positive")
    t, m = xi.shape
    if yi.shape[0] != t or xj.shape != xi.shape:
        raise ShapeError("inconsistent shapes")
    if xi is xj or np.array_equal(xi, xj):
        return 0.0
    nj = np.linalg.norm(yi.conj().T @ xj) ** 2
    ni = np.linalg.norm(yi.conj().T @ xi) ** 2
    return float((nj - ni) / (sigma_v2 * (1.0 + sigma_v2 * m / t)))


def simplified_inverse_check(x: np.ndarray, sigma_v2: float) -> float:
    """Max deviation of the closed-form inverse/determinant from dense ones.

    Compares ((T/M) X X^H + sigma_v^2 I)^-1 against
    (1/sigma_v^2) I - (1/sigma_v^2) (1/(1 + sigma_v^2 M/T)) X X^H, and the
    determinant against sigma_v^(2T) (1 + T/(sigma_v^2 M))^M.
    """
    if sigma_v2 <= 0:
        raise ValueError("sigma_v2 must be positive")
    t, m = x.shape
    a = (t / m) * (x @ x.conj().T) + sigma_v2 * np.eye(t)
    direct = np.linalg.inv(a)
    closed = (np.eye(t) - (x @ x.conj().T) / (1.0 + sigma_v2 * m / t)) / sigma_v2
    dev = float(np.max(np.abs(direct - closed)))
    det_direct = float(np.real(np.linalg.det(a)))
    det_closed = sigma_v2**t * (1.0 + t / (sigma_v2 * m)) ** m
    dev_det = abs(det_direct - det_closed) / abs(det_closed)
    return max(dev, dev_det)


def _finalize(per_trial: np.ndarray, cap: float, params: dict) -> RateEstimate:
    n = per_trial.size
    mean = float(per_trial.mean())
    stderr = float(per_trial.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return RateEstimate(mean=mean, stderr=stderr, trials=n,
                        params=dict(params, cap=cap))


def grassmann_rate(
    codebook: Codebook,
    n_rx: int,
    sigma_v2: float,
    trials: int,
    master_seed: int,
    stderr_target: float | None = None,
) -> RateEstimate:
    """Noncoherent achievable rate of a Grassmann codebook, bit/sym.

    One channel draw evaluates all |X| transmitted hypotheses (common random
    numbers); trials counts channel draws.  Early-stops once the standard
    error falls below stderr_target, if given, at a trial-block boundary.
    """
    if sigma_v2 <= 0 or trials < 1:
        raise ValueError("need sigma_v2 > 0 and trials >= 1")
    k, t, m = codebook.size, codebook.t, codebook.m
    pts = codebook.points
    cap = codebook.rate
    scale = 1.0 / (sigma_v2 * (1.0 + sigma_v2 * m / t))
    per_trial = []
    done = 0
    for blk, size in block_sizes(trials):
        rng = substream(master_seed, blk)
        hs = (rng.standard_normal((size, m, n_rx))
              + 1j * rng.standard_normal((size, m, n_rx))) / np.sqrt(2.0)
        vs = (rng.standard_normal((size, t, n_rx))
              + 1j * rng.standard_normal((size, t, n_rx))) / np.sqrt(2.0)
        # Chunk the (trials, K, K) pairwise tensor to bound peak memory.
        chunk = max(1, int(2e7 / (k * k * n_rx * m)))
        for lo in range(0, size, chunk):
            h = hs[lo:lo + chunk]
            v = vs[lo:lo + chunk]
            # Y[b, i] = sqrt(T/M) X_i H_b + sigma_v V_b
            ys = (np.sqrt(t / m) * np.einsum("itm,bmn->bitn", pts, h)
                  + math.sqrt(sigma_v2) * v[:, None])
            # q[b, i, j] = ||Y_bi^H X_j||_F^2
            inner = np.einsum("bitn,jtm->bijnm", ys.conj(), pts)
            q = np.sum(np.abs(inner) ** 2, axis=(3, 4))
            etas = scale * (q - q[:, np.arange(k), np.arange(k)][:, :, None])
            emax = etas.max(axis=2, keepdims=True)
            lse = emax[:, :, 0] + np.log(np.exp(etas - emax).sum(axis=2))
            per_trial.append(cap - lse.sum(axis=1) / (t * k * math.log(2.0)))
        done += size
        if stderr_target is not None and done > 1:
            cat = np.concatenate(per_trial)
            if cat.std(ddof=1) / math.sqrt(done) < stderr_target:
                break
    return _finalize(
        np.concatenate(per_trial), cap,
        {"kind": "rg", "sigma_v2": sigma_v2, "n_rx": n_rx,
         "codebook_digest": codebook.digest(), "seed": master_seed},
    )


def _spatial_codewords(qam: QamConstellation, m: int) -> np.ndarray:
    """All order^M one-slot spatial-multiplexing codewords, shape (K, 1, M)."""
    grids = np.meshgrid(*([qam.symbols] * m), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)[:, None, :]


def _coherent_rate(
    qam: QamConstellation,
    m: int,
    n_rx: int,
    sigma_v2: float,
    beta: float,
    trials: int,
    master_seed: int,
    stderr_target: float | None,
    kind: str,
) -> RateEstimate:
    if sigma_v2 <= 0 or trials < 1:
        raise ValueError("need sigma_v2 > 0 and trials >= 1")
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must be in [0, 1]")
    s = _spatial_codewords(qam, m)[:, 0, :]  # (K, M)
    k = s.shape[0]
    cap = math.log2(k)  # T = 1 slot
    sigma_e2 = sigma_from_beta(beta)
    noise_var = sigma_v2 + beta**2
    den = sigma_v2 + sigma_e2
    shrink = math.sqrt(1.0 - beta**2)
    per_trial = []
    done = 0
    for blk, size in block_sizes(trials):
        rng = substream(master_seed, blk)
        hs = (rng.standard_normal((size, m, n_rx))
              + 1j * rng.standard_normal((size, m, n_rx))) / np.sqrt(2.0)
        vs = (rng.standard_normal((size, 1, n_rx))
              + 1j * rng.standard_normal((size, 1, n_rx))) / np.sqrt(2.0)
        chunk = max(1, int(2e7 / (k * k)))
        for lo in range(0, size, chunk):
            sh = np.einsum("km,bmn->bkn", s, hs[lo:lo + chunk])
            ys = sh + math.sqrt(noise_var) * vs[lo:lo + chunk]
            ref = shrink * sh  # S_j Hbar rows up to the shared error term
            # z[b, i, j] = ||Y_bi - shrink * S_j H_b||^2
            yn = np.sum(np.abs(ys) ** 2, axis=2)
            rn = np.sum(np.abs(ref) ** 2, axis=2)
            cross = np.real(np.einsum("bin,bjn->bij", ys, ref.conj()))
            z = yn[:, :, None] + rn[:, None, :] - 2.0 * cross
            etas = (z[:, np.arange(k), np.arange(k)][:, :, None] - z) / den
            emax = etas.max(axis=2, keepdims=True)
            lse = emax[:, :, 0] + np.log(np.exp(etas - emax).sum(axis=2))
            per_trial.append(cap - lse.sum(axis=1) / (k * math.log(2.0)))
        done += size
        if stderr_target is not None and done > 1:
            cat = np.concatenate(per_trial)
            if cat.std(ddof=1) / math.sqrt(done) < stderr_target:
                break
    return _finalize(
        np.concatenate(per_trial), cap,
        {"kind": kind, "sigma_v2": sigma_v2, "n_rx": n_rx, "beta": beta,
         "qam_order": qam.order, "m": m, "seed": master_seed},
    )


def coherent_rate_pcsi(
    qam: QamConstellation,
    m: int,
    n_rx: int,
    sigma_v2: float,
    trials: int,
    master_seed: int,
    stderr_target: float | None = None,
) -> RateEstimate:
    """Coherent spatial-multiplexing rate with perfect CSI, bit/sym."""
    return _coherent_rate(qam, m, n_rx, sigma_v2, 0.0, trials, master_seed,
                          stderr_target, "re_pcsi")


def coherent_rate_csi_error(
    qam: QamConstellation,
    m: int,
    n_rx: int,
    sigma_v2: float,
    beta: float,
    trials: int,
    master_seed: int,
    stderr_target: float | None = None,
) -> RateEstimate:
    """Coherent rate under Gauss-Markov CSI error of uncertainty beta.

    The estimation-error contribution is folded into a single effective noise
    of variance sigma_v^2 + beta^2 in the received block, with likelihood
    denominator sigma_v^2 + sigma_e^2.
    """
    return _coherent_rate(qam, m, n_rx, sigma_v2, beta, trials, master_seed,
                          stderr_target, "re_err")


def total_slot_rate(
    rg: RateEstimate | None,
    re: RateEstimate,
    n_rs_slots: int = 4,
    n_data_slots: int = 10,
) -> RateEstimate:
    """Frame-aggregate rate n_rs * R_g + n_data * R_e in bits per frame.

    rg=None models the non-data-carrying training pilot (R_g := 0).
    Independent-run variances add with squared slot coefficients.
    """
    rg_mean = rg.mean if rg is not None else 0.0
    rg_err = rg.stderr if rg is not None else 0.0
    mean = n_rs_slots * rg_mean + n_data_slots * re.mean
    stderr = math.sqrt((n_rs_slots * rg_err) ** 2
                       + (n_data_slots * re.stderr) ** 2)
    return RateEstimate(
        mean=mean,
        stderr=stderr,
        trials=min(rg.trials if rg is not None else re.trials, re.trials),
        params={"kind": "total", "n_rs_slots": n_rs_slots,
                "n_data_slots": n_data_slots,
                "rg": rg.params if rg is not None else None,
                "re": re.params},
    )
