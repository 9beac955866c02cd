import numpy as np
import pytest

from dcrs.channel import (
    apply_gauss_markov,
    beta_from_sigma,
    dcrs_estimate,
    dmrs_pilot,
    glrt_detect,
    glrt_detect_batch,
    measure_nmse,
    nmse_lower_bound,
    rayleigh_channel,
    sigma_from_beta,
    snr_db_to_sigma_v2,
    training_estimate,
    transmit_block,
)
from dcrs.codebook import Codebook
from dcrs.constellations import CubeSplitParams, build_cubesplit
from dcrs.linalg import random_stiefel


class TestTransmit:
    def test_noiseless_hand_value(self):
        # T=4, M=1, x = e_1, h = [2]: y = sqrt(4) * x * h = [4, 0, 0, 0]? No:
        # sqrt(T/M) = 2, so y = [2*2, 0, 0, 0]^T... with h = sqrt(2):
        x = np.zeros((4, 1), dtype=complex)
        x[0, 0] = 1.0
        h = np.array([[np.sqrt(2)]], dtype=complex)
        y = transmit_block(x, h, 0.0, np.random.default_rng(0))
        assert y[0, 0] == pytest.approx(2 * np.sqrt(2))
        assert np.allclose(y[1:], 0)

    def test_received_power_accounting(self):
        # E||Y||^2 = T*N*(1 + sigma_v^2) for Stiefel X scaled by sqrt(T/M).
        rng = np.random.default_rng(1)
        t, m, n = 4, 2, 2
        x = random_stiefel(t, m, rng)
        sigma_v2 = 0.5
        total = 0.0
        trials = 20_000
        for _ in range(trials):
            h = rayleigh_channel(m, n, rng)
            y = transmit_block(x, h, np.sqrt(sigma_v2), rng)
            total += np.linalg.norm(y) ** 2
        expected = t * n * (1 + sigma_v2)
        assert total / trials == pytest.approx(expected, rel=0.02)

    def test_snr_conversion(self):
        assert snr_db_to_sigma_v2(0.0) == pytest.approx(1.0)
        assert snr_db_to_sigma_v2(10.0) == pytest.approx(0.1)
        assert snr_db_to_sigma_v2(-3.0) == pytest.approx(10 ** 0.3)


class TestTrainingEstimate:
    def test_unitary_pilot_noiseless_exact(self):
        rng = np.random.default_rng(2)
        t, m, n = 4, 2, 3
        p = np.sqrt(t / m) * random_stiefel(t, m, rng)
        h = rayleigh_channel(m, n, rng)
        y = transmit_block(np.sqrt(m / t) * p, h, 0.0, rng)
        hhat = training_estimate(p, y, 0.0, mode="ZF")
        assert np.allclose(hhat, h, atol=1e-12)

    def test_mmse_reduces_to_zf_at_zero_noise(self):
        rng = np.random.default_rng(3)
        t, m, n = 4, 2, 2
        p = np.sqrt(t / m) * random_stiefel(t, m, rng)
        y = rng.standard_normal((t, n)) + 1j * rng.standard_normal((t, n))
        zf = training_estimate(p, y, 0.0, mode="ZF")
        mmse = training_estimate(p, y, 1e-14, mode="MMSE")
        assert np.allclose(zf, mmse, atol=1e-10)

    def test_pilot_power_and_shape(self):
        rng = np.random.default_rng(4)
        p1 = dmrs_pilot(4, 1, rng)
        assert p1.shape == (4, 1)
        assert np.allclose(np.abs(p1), 1.0)
        p2 = dmrs_pilot(4, 2, rng)
        assert p2.shape == (4, 2)
        # Columns orthogonal with squared norm T/M.
        g = p2.conj().T @ p2
        assert np.allclose(g, 2.0 * np.eye(2), atol=1e-10)


class TestGlrt:
    def _codebook(self, k, t, m, seed):
        rng = np.random.default_rng(seed)
        pts = np.array([random_stiefel(t, m, rng) for _ in range(k)])
        return Codebook(t=t, m=m, points=pts, method="external")

    def test_noiseless_detection_exact(self):
        rng = np.random.default_rng(5)
        cb = self._codebook(16, 4, 1, 6)
        for i in range(cb.size):
            h = rayleigh_channel(1, 1, rng)
            y = transmit_block(cb.points[i], h, 0.0, rng)
            assert glrt_detect(y, cb) == i

    def test_batch_matches_loop(self):
        rng = np.random.default_rng(7)
        cb = self._codebook(8, 4, 2, 8)
        ys = rng.standard_normal((50, 4, 2)) + 1j * rng.standard_normal((50, 4, 2))
        batch = glrt_detect_batch(ys, cb)
        loop = np.array([glrt_detect(y, cb) for y in ys])
        assert np.array_equal(batch, loop)

    def test_metric_matches_projector_trace(self):
        # ||Y^H X||_F^2 == tr[Y Y^H X X^H] for every candidate.
        rng = np.random.default_rng(9)
        cb = self._codebook(6, 4, 2, 10)
        y = rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))
        for x in cb.points:
            lhs = np.linalg.norm(y.conj().T @ x) ** 2
            rhs = np.real(np.trace(y @ y.conj().T @ x @ x.conj().T))
            assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_scale_invariance(self):
        rng = np.random.default_rng(11)
        cb = self._codebook(8, 4, 1, 12)
        y = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
        assert glrt_detect(y, cb) == glrt_detect(3.7 * y, cb)


class TestDcrsEstimate:
    def test_zf_noiseless_exact(self):
        rng = np.random.default_rng(13)
        t, m, n = 4, 2, 2
        x = random_stiefel(t, m, rng)
        h = rayleigh_channel(m, n, rng)
        y = transmit_block(x, h, 0.0, rng)
        hhat = dcrs_estimate(y, x, 0.0, mode="ZF")
        assert np.allclose(hhat, h, atol=1e-12)

    def test_mmse_limit(self):
        rng = np.random.default_rng(14)
        x = random_stiefel(4, 1, rng)
        y = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
        assert np.allclose(
            dcrs_estimate(y, x, 0.0, mode="ZF"),
            dcrs_estimate(y, x, 1e-14, mode="MMSE"),
            atol=1e-10,
        )

    def test_projected_noise_power(self):
        # E||sqrt(M/T) X^H V||^2 * sigma_v^2 -> sigma_v^2 M^2 N / T.
        rng = np.random.default_rng(15)
        t, m, n = 4, 2, 2
        x = random_stiefel(t, m, rng)
        sigma_v2 = 0.3
        trials = 50_000
        v = (rng.standard_normal((trials, t, n))
             + 1j * rng.standard_normal((trials, t, n))) / np.sqrt(2)
        proj = np.sqrt(m / t) * np.sqrt(sigma_v2) * np.einsum(
            "tm,btn->bmn", x.conj(), v
        )
        power = np.sum(np.abs(proj) ** 2, axis=(1, 2)).mean()
        assert power == pytest.approx(sigma_v2 * m * m * n / t, rel=0.02)

    def test_wrong_detection_bias_identity(self):
        # Noiseless ZF with wrong codeword j: Hhat = X_j^H X_i H,
        # so Hhat - H = (X_j^H X_i - I) H.
        rng = np.random.default_rng(16)
        t, m = 4, 2
        xi = random_stiefel(t, m, rng)
        xj = random_stiefel(t, m, rng)
        h = rayleigh_channel(m, 2, rng)
        y = transmit_block(xi, h, 0.0, rng)
        hhat = dcrs_estimate(y, xj, 0.0, mode="ZF")
        expected = (xj.conj().T @ xi - np.eye(m)) @ h
        assert np.allclose(hhat - h, expected, atol=1e-12)


class TestNmseBoundsAndFading:
    def test_lower_bound_check_value(self):
        # sigma_v^2 = 1, M = 1, T = 4 -> 0.21115 (about -6.75 dB)
        val = nmse_lower_bound(1.0, 1, 4)
        assert val == pytest.approx(0.21115, abs=5e-5)
        assert 10 * np.log10(val) == pytest.approx(-6.75, abs=0.01)

    def test_beta_sigma_inverses(self):
        for s in (0.01, 0.2, 0.5, 1.0, 1.9):
            assert sigma_from_beta(beta_from_sigma(s)) == pytest.approx(s, rel=1e-12)
        assert beta_from_sigma(0.2) == pytest.approx(0.43589, abs=1e-5)
        assert beta_from_sigma(0.0) == 0.0
        assert beta_from_sigma(2.0) == pytest.approx(1.0)

    def test_gauss_markov_statistics(self):
        rng = np.random.default_rng(17)
        beta = 0.6
        h = rayleigh_channel(2, 100_000, rng)
        hbar = apply_gauss_markov(h, beta, rng)
        # Unit per-entry variance preserved.
        assert np.mean(np.abs(hbar) ** 2) == pytest.approx(1.0, rel=0.02)
        # Cross-correlation sqrt(1 - beta^2).
        corr = np.mean(np.real(hbar * h.conj()))
        assert corr == pytest.approx(np.sqrt(1 - beta**2), rel=0.02)
        # Realized estimation error 2(1 - sqrt(1 - beta^2)).
        err = np.mean(np.abs(hbar - h) ** 2)
        assert err == pytest.approx(sigma_from_beta(beta), rel=0.02)

    def test_gauss_markov_zero_beta_identity(self):
        rng = np.random.default_rng(18)
        h = rayleigh_channel(2, 4, rng)
        assert np.array_equal(apply_gauss_markov(h, 0.0, rng), h)


@pytest.fixture(scope="module")
def codebook():
    return build_cubesplit(CubeSplitParams(t=4, bits_per_coord=(1, 1, 1, 1, 1, 1)))


class TestMeasureNmse:
    def test_training_tracks_lower_bound(self, codebook):
        grid = [-10.0, 0.0, 10.0, 20.0]
        rep = measure_nmse(
            grid, trials=200_000, master_seed=100, codebook=None,
            n_rx=1, t=4, m=1, estimator="training", mode="ZF",
        )
        for snr, nmse_db in zip(rep.snr_db, rep.nmse_db):
            bound_db = 10 * np.log10(nmse_lower_bound(
                snr_db_to_sigma_v2(snr), 1, 4))
            assert nmse_db == pytest.approx(bound_db, abs=0.1)

    def test_dcrs_high_snr_approaches_bound(self, codebook):
        rep = measure_nmse(
            [20.0, 25.0, 30.0], trials=100_000, master_seed=101,
            codebook=codebook, n_rx=1, estimator="dcrs", mode="ZF",
        )
        gaps = [
            db - 10 * np.log10(nmse_lower_bound(snr_db_to_sigma_v2(s), 1, 4))
            for s, db in zip(rep.snr_db, rep.nmse_db)
        ]
        # Residual detection errors vanish with SNR, closing the gap.
        assert all(g > 0 for g in gaps)
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[2] < 0.5

    def test_low_snr_saturation(self, codebook):
        rep = measure_nmse(
            [-20.0], trials=20_000, master_seed=102, codebook=codebook,
            n_rx=1, estimator="dcrs", mode="ZF",
        )
        assert rep.sigma_e2[0] <= 2.0 + 1e-9

    def test_seed_determinism(self, codebook):
        kw = dict(trials=5_000, codebook=codebook, n_rx=1,
                  estimator="dcrs", mode="MMSE")
        a = measure_nmse([5.0], master_seed=7, **kw)
        b = measure_nmse([5.0], master_seed=7, **kw)
        c = measure_nmse([5.0], master_seed=8, **kw)
        assert a.sigma_e2 == b.sigma_e2
        assert a.sigma_e2 != c.sigma_e2

    def test_csv_roundtrip(self, codebook, tmp_path):
        rep = measure_nmse(
            [0.0, 10.0], trials=2_000, master_seed=9, codebook=codebook,
            n_rx=1, estimator="dcrs", mode="ZF",
        )
        path = tmp_path / "nmse.csv"
        rep.save_csv(path, {"seed": 9})
        text = path.read_text()
        assert text.startswith("# seed=9")
        rows = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        assert len(rows) == 3  # header + 2 points
        assert rows[0].split(",")[0] == "snr_db"
