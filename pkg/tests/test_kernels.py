import math

import numpy as np
import pytest

from mfy.kernels import (Kernel, SpatialGrid, GriddedField, evaluate_on_grid,
                         hurst_threshold, besov_block_norms, block_scaling_constants,
                         UnderResolvedGridError)


class TestHurstThreshold:
    def test_values(self):
        assert hurst_threshold(0.0) == pytest.approx(0.25)
        assert hurst_threshold(-1.0) == pytest.approx(1.0 / 6.0)
        assert hurst_threshold(-2.0) == pytest.approx(0.125)

    def test_rejects_positive(self):
        with pytest.raises(ValueError):
            hurst_threshold(0.5)


class TestKernelEvaluation:
    def test_zero(self):
        k = Kernel.zero(2)
        assert np.all(k(np.random.randn(10, 2)) == 0.0)

    def test_power_law_magnitude(self):
        k = Kernel.power_law(-1.0, 2, epsilon=0.1)
        v = k(np.array([[2.0, 0.0]]))
        assert np.linalg.norm(v) == pytest.approx(0.5, abs=1e-12)

    def test_biot_savart_direction(self):
        k = Kernel.biot_savart(epsilon=0.1)
        v = k(np.array([[1.0, 0.0]]))
        assert v[0, 0] == pytest.approx(0.0, abs=1e-15)
        assert v[0, 1] == pytest.approx(1.0 / (2 * math.pi), abs=1e-12)

    def test_biot_savart_needs_d2(self):
        with pytest.raises(ValueError):
            Kernel("biot_savart", 3, sigma=-1.0, epsilon=0.1)

    def test_singular_needs_epsilon(self):
        with pytest.raises(ValueError):
            Kernel.power_law(-1.0, 1, epsilon=0.0)

    def test_oddness(self):
        pts = np.array([[0.5, 0.25], [1.0, -2.0], [0.03, 0.01]])
        for k in [Kernel.power_law(-1.5, 2, epsilon=0.05),
                  Kernel.biot_savart(epsilon=0.05)]:
            assert np.allclose(k(pts), -k(-pts), atol=1e-14)

    @pytest.mark.parametrize("lam", [2.0, 4.0])
    def test_homogeneity_outside_epsilon(self, lam):
        k = Kernel.power_law(-1.2, 2, epsilon=0.05)
        pts = np.array([[0.3, 0.1], [0.2, -0.4], [1.0, 0.7]])
        v1 = k(pts)
        v2 = k(lam * pts)
        assert np.allclose(v2, lam ** -1.2 * v1, rtol=1e-12)

    def test_mollification_finite_and_continuous(self):
        eps = 0.2
        k = Kernel.power_law(-1.0, 1, epsilon=eps)
        r = np.linspace(-2 * eps, 2 * eps, 4001)[:, None]
        v = k(r)
        assert np.all(np.isfinite(v))
        # continuity across |x| = eps within the sampling resolution
        jumps = np.abs(np.diff(v[:, 0]))
        interior = np.abs(np.diff(v[np.abs(r[:, 0]) > 1.5 * eps, 0])).max()
        assert jumps.max() <= 50 * interior

    def test_mollification_bounded_by_qmax(self):
        for sigma in (-0.5, -1.0, -2.0):
            k = Kernel.power_law(sigma, 1, epsilon=0.1)
            r = np.linspace(-0.1, 0.1, 2001)[:, None]
            v = np.abs(k(r)).max()
            k_eps = abs(k(np.array([[0.1]]))[0, 0])
            assert v <= k.q_max * k_eps * (1 + 1e-9)
            assert k.q_max < 1.5

    def test_blend_matches_value_and_slope_at_eps(self):
        eps = 0.25
        k = Kernel.power_law(-1.0, 1, epsilon=eps)
        delta = 1e-6
        inside = k(np.array([[eps - delta]]))[0, 0]
        outside = k(np.array([[eps + delta]]))[0, 0]
        # value continuous, one-sided slopes agree to O(delta)
        assert inside == pytest.approx(outside, rel=1e-4)
        d_in = (k(np.array([[eps - delta]]))[0, 0] - k(np.array([[eps - 2 * delta]]))[0, 0]) / delta
        d_out = (k(np.array([[eps + 2 * delta]]))[0, 0] - k(np.array([[eps + delta]]))[0, 0]) / delta
        assert d_in == pytest.approx(d_out, rel=1e-3)

    def test_dirac_unit_mass(self):
        eps = 0.05
        k = Kernel.mollified_dirac(eps, 1)
        g = SpatialGrid(2.0, 2 ** 10, 1)
        vals = k(g.nodes())
        assert vals.sum() * g.cell_volume == pytest.approx(1.0, abs=1e-8)

    def test_lennard_jones_profile(self):
        k = Kernel.lennard_jones(1.0, 1, epsilon=0.3, mode="radial")
        r = 1.7
        expect = r ** -2 - 2 / r
        assert k(np.array([[r]]))[0, 0] == pytest.approx(expect, rel=1e-12)
        assert k.sigma == -2.0

    def test_linear(self):
        k = Kernel.linear(-2.0, 2)
        pts = np.array([[1.0, 0.5]])
        assert np.allclose(k(pts), [[-2.0, -1.0]])


class TestEvaluateOnGrid:
    def test_zero_field(self):
        g = SpatialGrid(1.0, 32, 2)
        fld = evaluate_on_grid(Kernel.zero(2), g)
        assert np.all(fld.values == 0.0)
        assert fld.channels == 2

    def test_under_resolved(self):
        g = SpatialGrid(1.0, 32, 1)  # h = 1/16
        with pytest.raises(UnderResolvedGridError):
            evaluate_on_grid(Kernel.power_law(-1.0, 1, epsilon=0.05), g)

    def test_odd_at_grid_points(self):
        g = SpatialGrid(1.0, 64, 1)
        fld = evaluate_on_grid(Kernel.power_law(-1.0, 1, epsilon=0.1), g)
        v = fld.values[:, 0]
        # nodes i=1..n-1 mirror around the origin node n/2
        assert np.allclose(v[1:], -v[1:][::-1], atol=1e-14)


class TestBesovBlocks:
    def test_zero_field(self):
        g = SpatialGrid(8.0, 256, 1)
        fld = GriddedField(g, np.zeros(g.shape))
        assert np.all(besov_block_norms(fld, 2, 3) == 0.0)

    def test_gaussian_decay(self):
        g = SpatialGrid(8.0, 1024, 1)
        x = g.axis()
        sigma_w = 0.42  # width 1 at half maximum
        fld = GriddedField(g, np.exp(-0.5 * (x / sigma_w) ** 2))
        norms = besov_block_norms(fld, 2, 6)
        floor = 1e-13 * norms.max()
        for k in range(5, len(norms) - 1):  # blocks k >= 4
            assert norms[k + 1] <= norms[k] / 10 or norms[k + 1] <= floor

    def test_nyquist_guard(self):
        g = SpatialGrid(8.0, 256, 1)
        fld = GriddedField(g, np.zeros(g.shape))
        with pytest.raises(ValueError):
            besov_block_norms(fld, 2, 12)

    def test_bad_p(self):
        g = SpatialGrid(8.0, 256, 1)
        fld = GriddedField(g, np.zeros(g.shape))
        with pytest.raises(ValueError):
            besov_block_norms(fld, 3, 2)

    @pytest.mark.parametrize("sigma", [-0.5, -1.0, -1.5])
    def test_block_scaling(self, sigma):
        # 2^{(sigma+d)k} ||Delta_k K||_{L1} constant within a factor 3 mid-range
        g = SpatialGrid(16.0, 2 ** 13, 1)
        k = Kernel.power_law(sigma, 1, epsilon=2 * g.h)
        k_max = 8
        consts = block_scaling_constants(k, g, k_max)
        mid = consts[2:k_max - 1]  # k in [2, k_max-2]
        assert mid.max() / mid.min() < 3.0
