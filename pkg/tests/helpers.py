"""Shared test utilities: finite-difference checks and tangent sampling."""

import numpy as np

from dcrs.optim import _tangent_project


def directional_derivative(fun, xs, deltas, h=1e-6):
    """Central finite difference of fun along the perturbation tuple."""
    plus = [x + h * d for x, d in zip(xs, deltas)]
    minus = [x - h * d for x, d in zip(xs, deltas)]
    fp, _ = fun(plus)
    fm, _ = fun(minus)
    return (fp - fm) / (2 * h)


def random_tangent(kind, x, rng):
    d = rng.standard_normal(x.shape) + 1j * rng.standard_normal(x.shape)
    d = _tangent_project(kind, x, d)
    return d / np.linalg.norm(d)


def check_gradient(fun, kinds, xs, rng, n_dirs=5, rtol=1e-5):
    """Compare analytic directional derivatives with finite differences
    along random tangent directions; returns the worst relative error."""
    _, grads = fun(xs)
    rgrads = [_tangent_project(k, x, g) for k, x, g in zip(kinds, xs, grads)]
    worst = 0.0
    for _ in range(n_dirs):
        deltas = [random_tangent(k, x, rng) for k, x in zip(kinds, xs)]
        analytic = sum(
            float(np.real(np.vdot(g, d))) for g, d in zip(rgrads, deltas)
        )
        numeric = directional_derivative(fun, xs, deltas)
        scale = max(abs(numeric), abs(analytic), 1e-12)
        worst = max(worst, abs(analytic - numeric) / scale)
    assert worst < rtol, f"gradient mismatch: relative error {worst:.3e}"
    return worst
