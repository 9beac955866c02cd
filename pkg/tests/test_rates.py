import math

import numpy as np
import pytest

from dcrs.codebook import Codebook
from dcrs.constellations import (
    ExpMapParams,
    build_expmap,
    expmap_orders_for_bits,
)
from dcrs.linalg import random_stiefel
from dcrs.rates import (
    coherent_rate_csi_error,
    coherent_rate_pcsi,
    eta,
    grassmann_rate,
    qam_constellation,
    simplified_inverse_check,
    total_slot_rate,
)


def eta_oracle(yi, xi, xj, sigma_v2):
    """Log-likelihood ratio from dense T x T inverses, no simplification."""
    t = xi.shape[0]
    m = xi.shape[1]

    def neg_quad(x):
        cov = (t / m) * (x @ x.conj().T) + sigma_v2 * np.eye(t)
        return -float(np.real(np.trace(yi.conj().T @ np.linalg.solve(cov, yi))))

    # Determinants are equal for equal (T, M), so they cancel in the ratio.
    return neg_quad(xj) - neg_quad(xi)


class TestEta:
    def test_zero_for_identical(self):
        rng = np.random.default_rng(0)
        x = random_stiefel(4, 1, rng)
        y = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
        assert eta(y, x, x, 0.3) == 0.0

    @pytest.mark.parametrize("t,m", [(2, 1), (4, 1), (4, 2)])
    def test_matches_dense_oracle(self, t, m):
        rng = np.random.default_rng(hash((t, m)) % 2**32)
        for trial in range(100):
            sigma_v2 = float(rng.uniform(0.01, 2.0))
            xi = random_stiefel(t, m, rng)
            xj = random_stiefel(t, m, rng)
            n = int(rng.integers(1, 4))
            yi = rng.standard_normal((t, n)) + 1j * rng.standard_normal((t, n))
            got = eta(yi, xi, xj, sigma_v2)
            want = eta_oracle(yi, xi, xj, sigma_v2)
            assert got == pytest.approx(want, rel=1e-8, abs=1e-10)

    def test_rejects_nonpositive_noise(self):
        rng = np.random.default_rng(1)
        x = random_stiefel(4, 1, rng)
        y = rng.standard_normal((4, 1)) + 0j
        with pytest.raises(ValueError):
            eta(y, x, x, 0.0)


class TestSimplifiedInverse:
    def test_hand_value_diag(self):
        # T=2, M=1, x=e_1, sigma^2=1: cov = diag(3, 1); inverse diag(1/3, 1),
        # determinant 3.
        x = np.array([[1.0], [0.0]], dtype=complex)
        assert simplified_inverse_check(x, 1.0) < 1e-14
        cov = 2.0 * (x @ x.conj().T) + np.eye(2)
        assert np.allclose(np.linalg.inv(cov), np.diag([1 / 3, 1.0]))
        assert np.linalg.det(cov) == pytest.approx(3.0)

    def test_random_instances(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            t = int(rng.choice([2, 4]))
            m = int(rng.choice([1, 2]))
            if m > t:
                continue
            x = random_stiefel(t, m, rng)
            sigma_v2 = float(rng.uniform(0.01, 10.0))
            assert simplified_inverse_check(x, sigma_v2) < 1e-10


@pytest.fixture(scope="module")
def expmap_cb():
    params = ExpMapParams(
        t=4, m=1, per_symbol_orders=expmap_orders_for_bits(4, 1, 6),
        scale=0.6,
    )
    return build_expmap(params)


class TestGrassmannRate:
    def test_saturates_at_cap(self, expmap_cb):
        est = grassmann_rate(expmap_cb, 1, 1e-4, trials=500, master_seed=3)
        assert est.mean == pytest.approx(expmap_cb.rate, abs=0.02)

    def test_monotone_in_snr(self, expmap_cb):
        means = [
            grassmann_rate(expmap_cb, 1, 10 ** (-s / 10), trials=2000,
                           master_seed=4).mean
            for s in (-10, 0, 10, 20)
        ]
        assert all(b > a for a, b in zip(means, means[1:]))

    def test_rate_bounded_by_cap(self, expmap_cb):
        est = grassmann_rate(expmap_cb, 1, 0.5, trials=2000, master_seed=5)
        assert 0.0 < est.mean < expmap_cb.rate

    def test_seed_determinism_and_stderr_stop(self, expmap_cb):
        a = grassmann_rate(expmap_cb, 1, 0.1, trials=1000, master_seed=6)
        b = grassmann_rate(expmap_cb, 1, 0.1, trials=1000, master_seed=6)
        assert a.mean == b.mean and a.stderr == b.stderr
        c = grassmann_rate(expmap_cb, 1, 0.1, trials=50_000, master_seed=6,
                           stderr_target=1e-2)
        assert c.trials < 50_000
        assert c.stderr < 1e-2

    def test_lse_stable_at_large_codebook_low_noise(self):
        # 256 points, sigma_v^2 = 1e-6: etas are huge; must not overflow.
        rng = np.random.default_rng(7)
        pts = np.array([random_stiefel(4, 1, rng) for _ in range(256)])
        cb = Codebook(t=4, m=1, points=pts, method="external")
        est = grassmann_rate(cb, 1, 1e-6, trials=100, master_seed=8)
        assert np.isfinite(est.mean)
        assert est.mean == pytest.approx(2.0, abs=0.02)


class TestCoherentRates:
    def test_pcsi_saturation_16qam(self):
        qam = qam_constellation(16)
        est = coherent_rate_pcsi(qam, 1, 1, 1e-5, trials=2000, master_seed=9)
        assert est.mean == pytest.approx(4.0, abs=0.02)

    def test_pcsi_saturation_256qam(self):
        qam = qam_constellation(256)
        est = coherent_rate_pcsi(qam, 1, 1, 1e-6, trials=300, master_seed=10)
        assert est.mean == pytest.approx(8.0, abs=0.02)

    def test_full_uncertainty_kills_rate(self):
        qam = qam_constellation(16)
        est = coherent_rate_csi_error(qam, 1, 1, 0.01, 1.0, trials=3000,
                                      master_seed=11)
        assert est.mean < 0.05

    def test_beta_ordering(self):
        qam = qam_constellation(16)
        means = [
            coherent_rate_csi_error(qam, 1, 1, 0.01, beta, trials=3000,
                                    master_seed=12).mean
            for beta in (0.0, 0.2, 0.6, 1.0)
        ]
        assert all(b < a for a, b in zip(means, means[1:]))

    def test_beta_zero_matches_pcsi(self):
        qam = qam_constellation(16)
        a = coherent_rate_pcsi(qam, 1, 1, 0.1, trials=2000, master_seed=13)
        b = coherent_rate_csi_error(qam, 1, 1, 0.1, 0.0, trials=2000,
                                    master_seed=13)
        assert a.mean == b.mean

    def test_spatial_multiplexing_cap_m2(self):
        qam = qam_constellation(4)
        est = coherent_rate_pcsi(qam, 2, 2, 1e-5, trials=500, master_seed=14)
        assert est.params["cap"] == pytest.approx(4.0)
        assert est.mean == pytest.approx(4.0, abs=0.02)

    def test_moderate_csi_error_256qam(self):
        # beta = 0.2 costs roughly half the PCSI rate at this order.
        qam = qam_constellation(256)
        est = coherent_rate_csi_error(qam, 1, 1, 1e-4, 0.2, trials=2000,
                                      master_seed=15)
        assert est.mean == pytest.approx(4.0, abs=0.5)

    def test_invalid_qam_order(self):
        with pytest.raises(Exception):
            qam_constellation(8)


class TestTotalSlotRate:
    def _estimate(self, mean, stderr):
        from dcrs.rates import RateEstimate

        return RateEstimate(mean=mean, stderr=stderr, trials=100, params={})

    def test_arithmetic(self):
        total = total_slot_rate(self._estimate(2.0, 0.0),
                                self._estimate(4.0, 0.0))
        assert total.mean == pytest.approx(4 * 2.0 + 10 * 4.0)

    def test_error_propagation(self):
        total = total_slot_rate(self._estimate(2.0, 0.1),
                                self._estimate(4.0, 0.2))
        assert total.stderr == pytest.approx(math.hypot(0.4, 2.0))

    def test_training_baseline(self):
        total = total_slot_rate(None, self._estimate(4.0, 0.2))
        assert total.mean == pytest.approx(40.0)
        assert total.stderr == pytest.approx(2.0)

    def test_custom_slot_split(self):
        total = total_slot_rate(self._estimate(1.0, 0.0),
                                self._estimate(1.0, 0.0),
                                n_rs_slots=2, n_data_slots=12)
        assert total.mean == pytest.approx(14.0)
