"""Riemannian gradient descent over products of Grassmann and unitary factors.

Objectives return (value, grads) where grads are Euclidean gradients G_k
such that the directional derivative along a perturbation D_k equals
sum_k Re tr(G_k^H D_k).  The optimizer projects them to the tangent space,
takes Armijo-backtracked steps along the negative gradient, and retracts
via QR.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import OptimizerAbort
from .linalg import project_to_stiefel


@dataclass(frozen=True)
class OptimizerOptions:
    max_iter: int = 5000
    grad_tol: float = 1e-6
    initial_step: float = 1.0
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 40
    min_step: float = 1e-14


def _tangent_project(kind: str, x: np.ndarray, g: np.ndarray) -> np.ndarray:
    xhg = x.conj().T @ g
    if kind == "grassmann":
        # Horizontal space of the quotient: X^H D = 0.
        return g - x @ xhg
    if kind == "stiefel":
        return g - x @ ((xhg + xhg.conj().T) / 2.0)
    if kind == "unitary":
        return x @ ((xhg - xhg.conj().T) / 2.0)
    raise ValueError(f"unknown manifold factor kind: {kind}")


def _retract(kind: str, x: np.ndarray, d: np.ndarray) -> np.ndarray:
    return project_to_stiefel(x + d)


def _inner(a: Sequence[np.ndarray], b: Sequence[np.ndarray]) -> float:
    return float(sum(np.real(np.vdot(ak, bk)) for ak, bk in zip(a, b)))


@dataclass
class OptimizeResult:
    point: list[np.ndarray]
    value: float
    grad_norm: float
    iterations: int
    converged: bool


def minimize_on_manifold(
    objective: Callable[[list[np.ndarray]], tuple[float, list[np.ndarray]]],
    kinds: Sequence[str],
    init: Sequence[np.ndarray],
    opts: OptimizerOptions | None = None,
) -> OptimizeResult:
    """Minimize a smooth objective over a product of manifold factors.

    The objective sequence is non-increasing: steps are taken only when the
    Armijo decrease condition holds.  Stops when the Riemannian gradient norm
    falls below opts.grad_tol or the iteration budget is exhausted.
    """
    opts = opts or OptimizerOptions()
    xs = [np.array(x, dtype=complex) for x in init]
    f, egrads = objective(xs)
    _check_finite(f, egrads)
    step = opts.initial_step
    it = 0
    gnorm = np.inf
    for it in range(1, opts.max_iter + 1):
        rgrads = [_tangent_project(k, x, g) for k, x, g in zip(kinds, xs, egrads)]
        gnorm = np.sqrt(_inner(rgrads, rgrads))
        if gnorm < opts.grad_tol:
            return OptimizeResult(xs, f, gnorm, it - 1, True)
        accepted = False
        s = step
        for _ in range(opts.max_backtracks):
            trial = [
                _retract(k, x, -s * g) for k, x, g in zip(kinds, xs, rgrads)
            ]
            f_trial, egrads_trial = objective(trial)
            _check_finite(f_trial, egrads_trial)
            if f_trial <= f - opts.armijo_c * s * gnorm**2:
                xs, f, egrads = trial, f_trial, egrads_trial
                # Allow the step to grow again after an easy acceptance.
                step = min(s * 2.0, opts.initial_step)
                accepted = True
                break
            s *= opts.backtrack
            if s < opts.min_step:
                break
        if not accepted:
            return OptimizeResult(xs, f, gnorm, it, False)
    return OptimizeResult(xs, f, gnorm, it, False)


def _check_finite(f: float, grads: Sequence[np.ndarray]) -> None:
    if not np.isfinite(f):
        raise OptimizerAbort(f"non-finite objective value: {f}")
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise OptimizerAbort("non-finite gradient encountered")
