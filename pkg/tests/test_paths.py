import numpy as np
import pytest

from mfy.paths import (TimeGrid, SamplePath, gen_noise, holder_seminorm,
                       local_to_global_check, LocalBoundError, _pairwise_sup,
                       dyadic_holder_seminorm)


def fbm_cov(s, t, H):
    return 0.5 * (s ** (2 * H) + t ** (2 * H) - abs(t - s) ** (2 * H))


class TestTimeGrid:
    def test_basic(self):
        g = TimeGrid(2.0, 8)
        assert g.times[0] == 0.0
        assert g.times[-1] == 2.0
        assert np.allclose(np.diff(g.times), g.dt)

    def test_power_of_two_required(self):
        with pytest.raises(ValueError):
            TimeGrid(1.0, 100)

    def test_index_of(self):
        g = TimeGrid(1.0, 16)
        assert g.index_of(0.5) == 8
        with pytest.raises(ValueError):
            g.index_of(0.51)


class TestGenNoise:
    def test_zero_path(self):
        g = TimeGrid(1.0, 64)
        z = gen_noise("zero", 3, g, 123)
        assert np.all(z.values == 0.0)

    def test_fbm_starts_at_zero(self):
        g = TimeGrid(1.0, 256)
        p = gen_noise("fbm", 2, g, 5, hurst=0.3)
        assert np.all(p.values[0] == 0.0)

    def test_determinism(self):
        g = TimeGrid(1.0, 256)
        a = gen_noise("fbm", 2, g, 99, hurst=0.7)
        b = gen_noise("fbm", 2, g, 99, hurst=0.7)
        assert np.array_equal(a.values, b.values)
        c = gen_noise("fbm", 2, g, 100, hurst=0.7)
        assert not np.array_equal(a.values, c.values)

    def test_fbm_variance_at_one(self):
        # Monte Carlo Var(Z_1) against the closed form, H = 1/2
        g = TimeGrid(1.0, 2 ** 10)
        p = gen_noise("fbm", 10 ** 4, g, 11, hurst=0.5)
        v = p.values[-1].var()
        se = np.sqrt(2.0 / (10 ** 4 - 1))
        assert abs(v - 1.0) <= 3 * se

    @pytest.mark.parametrize("H", [0.1, 0.3, 0.5, 0.8])
    def test_fbm_covariance(self, H):
        # empirical covariance at 8 grid times within 4 standard errors
        n, m = 2 ** 7, 10 ** 4
        g = TimeGrid(1.0, n)
        p = gen_noise("fbm", m, g, 21, hurst=H)
        idx = np.arange(n // 8, n + 1, n // 8)
        x = p.values[idx]  # (8, m)
        emp = (x @ x.T) / m
        for a in range(8):
            for b in range(8):
                s, t = g.times[idx[a]], g.times[idx[b]]
                exact = fbm_cov(s, t, H)
                se = np.sqrt((exact ** 2 + fbm_cov(s, s, H) * fbm_cov(t, t, H)) / m)
                assert abs(emp[a, b] - exact) <= 4 * se

    def test_cholesky_matches_spectrum(self):
        g = TimeGrid(1.0, 2 ** 6)
        p = gen_noise("fbm", 2000, g, 3, hurst=0.3, method="cholesky")
        v = p.values[-1].var()
        se = np.sqrt(2.0 / 1999)
        assert abs(v - 1.0) <= 4 * se

    def test_cholesky_size_cap(self):
        g = TimeGrid(1.0, 2 ** 13)
        with pytest.raises(ValueError):
            gen_noise("fbm", 1, g, 0, hurst=0.5, method="cholesky")

    def test_bad_hurst(self):
        g = TimeGrid(1.0, 64)
        with pytest.raises(ValueError):
            gen_noise("fbm", 1, g, 0, hurst=1.5)


class TestHolderSeminorm:
    def test_linear_path(self):
        g = TimeGrid(1.0, 256)
        p = SamplePath(g, g.times.copy())
        est = holder_seminorm(p, 0.5)
        assert est.seminorm == pytest.approx(1.0, abs=1e-12)

    def test_constant_path(self):
        g = TimeGrid(1.0, 64)
        p = SamplePath(g, np.full(65, 3.0))
        assert holder_seminorm(p, 0.3).seminorm == 0.0

    def test_fbm_fitted_exponent(self):
        # median over 100 seeds of the dyadic-lag sup fit, H = 0.3
        g = TimeGrid(1.0, 2 ** 10)
        fits = []
        for seed in range(100):
            p = gen_noise("fbm", 1, g, seed, hurst=0.3)
            est = holder_seminorm(p, 0.3, fit_lag_range=(2 ** -10, 2 ** -3))
            fits.append(est.fitted_exponent)
        assert abs(np.median(fits) - 0.3) <= 0.05

    def test_monotonicity_in_beta(self):
        # [X]_{b'} <= T^{b-b'} [X]_b on the same pair set
        g = TimeGrid(2.0, 128)
        p = gen_noise("bm", 1, g, 17)
        hi = holder_seminorm(p, 0.45).seminorm
        lo = holder_seminorm(p, 0.30).seminorm
        assert lo <= 2.0 ** (0.45 - 0.30) * hi + 1e-12

    def test_large_n_budget_path(self):
        g = TimeGrid(1.0, 2 ** 12)
        p = gen_noise("bm", 1, g, 1)
        est = holder_seminorm(p, 0.4, pair_budget=512)
        assert est.seminorm > 0
        est2 = holder_seminorm(p, 0.4, pair_budget=512)
        assert est.seminorm == est2.seminorm  # reproducible pair set


class TestLocalToGlobal:
    def test_linear_exact(self):
        g = TimeGrid(1.0, 128)
        p = SamplePath(g, g.times.copy())
        w = 32
        M = _pairwise_sup(p.values[:w + 1], g.times[:w + 1], 0.5)
        assert local_to_global_check(p, 0.5, 0.25, M)

    def test_zero_path(self):
        g = TimeGrid(1.0, 64)
        p = gen_noise("zero", 1, g, 0)
        assert local_to_global_check(p, 0.5, 0.25, 0.0)

    def test_fbm_window_hypothesis(self):
        g = TimeGrid(1.0, 2 ** 9)
        p = gen_noise("fbm", 1, g, 4, hurst=0.4)
        alpha, h = 0.35, 2 ** -5
        w = int(h * g.n_steps)
        M = max(_pairwise_sup(p.values[s:s + w + 1], g.times[:w + 1], alpha)
                for s in range(g.n_steps - w + 1))
        assert local_to_global_check(p, alpha, h, M)

    def test_violating_window_reported(self):
        g = TimeGrid(1.0, 64)
        p = gen_noise("bm", 1, g, 9)
        with pytest.raises(LocalBoundError):
            local_to_global_check(p, 0.4, 0.25, 1e-9)


class TestBatchedSeminorms:
    def test_batch_matches_single(self):
        g = TimeGrid(1.0, 64)
        vals = np.stack([gen_noise("bm", 2, g, s).values for s in range(5)])
        batch = dyadic_holder_seminorm(vals, g.times, 0.4)
        for i in range(5):
            single = dyadic_holder_seminorm(vals[i], g.times, 0.4)
            assert batch[i] == pytest.approx(float(single))
