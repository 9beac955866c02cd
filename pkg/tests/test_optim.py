import numpy as np
import pytest

from dcrs.constellations import _lse_objective_general, _lse_objective_m1
from dcrs.errors import OptimizerAbort
from dcrs.linalg import min_chordal_distance, random_stiefel, stiefel_residual
from dcrs.optim import OptimizerOptions, minimize_on_manifold

from helpers import check_gradient


def test_constant_objective_returns_init():
    x0 = random_stiefel(3, 1, np.random.default_rng(0))

    def fun(xs):
        return 1.0, [np.zeros_like(xs[0])]

    res = minimize_on_manifold(fun, ["grassmann"], [x0])
    assert res.converged
    assert np.allclose(res.point[0], x0)


def test_two_point_packing_reaches_orthogonal():
    rng = np.random.default_rng(1)
    init = [random_stiefel(2, 1, rng) for _ in range(2)]

    def fun(xs):
        return _lse_objective_m1(np.array(xs), 0.05)

    res = minimize_on_manifold(
        fun, ["grassmann"] * 2, init, OptimizerOptions(max_iter=3000)
    )
    pts = np.array(res.point)
    assert min_chordal_distance(pts) == pytest.approx(1.0, abs=1e-6)
    ip = abs(np.vdot(pts[0][:, 0], pts[1][:, 0]))
    assert ip < 1e-6


def test_feasibility_preserved():
    rng = np.random.default_rng(2)
    init = [random_stiefel(4, 2, rng) for _ in range(3)]

    def fun(xs):
        return _lse_objective_general(np.array(xs), 0.1)

    res = minimize_on_manifold(fun, ["grassmann"] * 3, init,
                               OptimizerOptions(max_iter=200))
    for x in res.point:
        assert stiefel_residual(x) < 1e-10


def test_monotone_decrease():
    rng = np.random.default_rng(3)
    init = [random_stiefel(3, 1, rng) for _ in range(4)]

    def fun(xs):
        return _lse_objective_m1(np.array(xs), 0.1)

    f0, _ = fun(init)
    values = [f0]
    for budget in (1, 2, 5, 10, 25, 50, 100):
        res = minimize_on_manifold(fun, ["grassmann"] * 4, init,
                                   OptimizerOptions(max_iter=budget))
        values.append(res.value)
    assert all(b <= a + 1e-15 for a, b in zip(values, values[1:]))


def test_gradient_vs_finite_differences_m1():
    rng = np.random.default_rng(4)
    xs = [random_stiefel(4, 1, rng) for _ in range(5)]

    def fun(pts):
        return _lse_objective_m1(np.array(pts), 0.3)

    check_gradient(fun, ["grassmann"] * 5, xs, rng, rtol=1e-5)


def test_gradient_vs_finite_differences_general():
    rng = np.random.default_rng(5)
    xs = [random_stiefel(4, 2, rng) for _ in range(4)]

    def fun(pts):
        return _lse_objective_general(np.array(pts), 0.3)

    check_gradient(fun, ["grassmann"] * 4, xs, rng, rtol=1e-5)


def test_nonfinite_objective_aborts():
    x0 = random_stiefel(3, 1, np.random.default_rng(6))

    def fun(xs):
        return float("nan"), [np.zeros_like(xs[0])]

    with pytest.raises(OptimizerAbort):
        minimize_on_manifold(fun, ["grassmann"], [x0])
