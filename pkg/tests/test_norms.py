import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zklab import norms as nm
from zklab import spectrum as sp
from zklab.spectrum import FrequencyGrid, SpectralField


def random_real(grid, rng):
    c = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
    return SpectralField(grid, sp.realify(c), True)


def naive_sobolev(field, s, gamma=0.0):
    g = field.grid
    total = 0.0
    for j, xi in enumerate(g.xi):
        for l, n in enumerate(g.n2):
            w = (1 + xi * xi + n * n) ** s
            if gamma:
                w *= (math.sqrt(1 + xi * xi) / max(abs(xi), g.h_xi / 2)) ** (2 * gamma)
            total += abs(field.coeffs[j, l]) ** 2 * w * g.h_xi * g.h_n
    return math.sqrt(total)


G = FrequencyGrid(3.0, 24, 4)


class TestParams:
    def test_rejects_bad_gamma(self):
        with pytest.raises(ValueError):
            nm.NormParams(0.5, 0.5, gamma=0.25)

    def test_rejects_large_delta(self):
        with pytest.raises(ValueError):
            nm.NormParams(0.5, 0.5, delta=0.3)


class TestSobolev:
    def test_l2_is_parseval(self):
        u = random_real(G, np.random.default_rng(0))
        assert nm.sobolev_norm(u, 0.0) == pytest.approx(sp.l2_norm_physical(sp.to_physical(u), G), rel=1e-10)

    def test_single_mode(self):
        u = sp.single_mode(G, 1.5, 2, 3.0)
        expected = 3.0 * (1 + 1.5**2 + 4) ** (0.7 / 2) * math.sqrt(G.h_xi)
        assert nm.sobolev_norm(u, 0.7) == pytest.approx(expected, rel=1e-14)

    @pytest.mark.parametrize("s", [-1.0, 0.0, 0.55, 2.0])
    def test_against_naive_loop(self, s):
        u = random_real(G, np.random.default_rng(1))
        assert nm.sobolev_norm(u, s) == pytest.approx(naive_sobolev(u, s), rel=1e-10)
        assert nm.tilde_sobolev_norm(u, s) == pytest.approx(naive_sobolev(u, s, 0.5), rel=1e-10)


class TestTildeSobolev:
    def test_per_cell_ratio(self):
        u = sp.single_mode(G, -2.0, 1)
        ratio = nm.tilde_sobolev_norm(u, 0.3) / nm.sobolev_norm(u, 0.3)
        assert ratio == pytest.approx(math.sqrt(math.sqrt(5) / 2), rel=1e-14)

    def test_ratio_range_away_from_origin(self):
        rng = np.random.default_rng(2)
        c = rng.normal(size=G.shape).astype(complex)
        c[np.abs(G.xi) < 1] = 0
        u = SpectralField(G, c)
        ratio = nm.tilde_sobolev_norm(u, 0.5) / nm.sobolev_norm(u, 0.5)
        assert 1.0 <= ratio <= 2 ** 0.25

    def test_floor_at_origin(self):
        u = sp.single_mode(G, 0.0, 0)
        expected = math.sqrt(G.h_xi * 1.0 / (G.h_xi / 2))
        assert nm.tilde_sobolev_norm(u, 1.0) == pytest.approx(expected)

    def test_odd_compact_function_refines(self):
        def tilde(n_x1):
            g = FrequencyGrid(16.0, n_x1, 2)
            x1, x2 = g.physical_points()
            bump = np.where(np.abs(x1) < 1, x1 * (1 - x1**2) ** 4, 0.0)
            f = sp.from_physical(bump[:, None] * (1 + 0.5 * np.cos(x2))[None, :], g)
            return nm.tilde_sobolev_norm(f, 0.5)

        coarse, fine = tilde(128), tilde(256)
        assert math.isfinite(coarse)
        assert fine == pytest.approx(coarse, rel=1e-2)


class TestSpaceTime:
    def setup_method(self):
        self.grid = FrequencyGrid(2.0, 16, 2)
        self.u0 = random_real(self.grid, np.random.default_rng(3))
        self.times = np.linspace(0.0, 2.0, 401)

    def test_b0_is_time_aggregate(self):
        rng = np.random.default_rng(4)
        states = rng.normal(size=(401,) + self.grid.shape) + 0j
        stf = sp.space_time_transform(states, self.times, self.grid, pad=2)
        w = stf.window(self.times)
        dt = self.times[1] - self.times[0]
        aggregate = 0.0
        for m in range(self.times.size):
            aggregate += dt * w[m] ** 2 * nm.sobolev_norm(SpectralField(self.grid, states[m]), 0.8) ** 2
        p = nm.NormParams(s=0.8, b=0.0)
        assert nm.xsb_norm(stf, p) == pytest.approx(math.sqrt(aggregate), rel=1e-12)

    @pytest.mark.parametrize("b", [0, 1])
    def test_linear_solution_window_factor(self, b):
        stf = sp.linear_space_time(self.u0, self.times, pad=8)
        factor = nm.hann_window_factor(2.0, b)
        expected = nm.sobolev_norm(self.u0, 0.5) * math.sqrt(factor)
        got = nm.xsb_norm(stf, nm.NormParams(s=0.5, b=float(b)))
        assert got == pytest.approx(expected, rel=1e-4)

    def test_single_space_time_mode(self):
        g = self.grid
        tau = sp.symmetric_tau_grid(10.0, 0.5)
        c = np.zeros(g.shape + (tau.size,), complex)
        j, l, q = g.xi_index(1.5), g.mode_index(1), 25
        c[j, l, q] = 2.0
        stf = sp.SpaceTimeField(g, tau, c)
        p = nm.NormParams(s=0.5, b=0.6)
        phi = sp.dispersion(1.5, 1.0)
        expected = 2.0 * (1 + (tau[q] - phi) ** 2) ** 0.3 * (1 + 1.5**2 + 1) ** 0.25
        expected *= math.sqrt(g.h_xi * 0.5)
        assert nm.xsb_norm(stf, p) == pytest.approx(expected, rel=1e-13)
        ratio = nm.ysb_norm(stf, p) / nm.xsb_norm(stf, p)
        assert ratio == pytest.approx((math.sqrt(1 + 1.5**2) / 1.5) ** 0.5, rel=1e-13)


class TestZNorm:
    def test_single_column_sup(self):
        g = FrequencyGrid(2.0, 16, 2)
        u0 = sp.single_mode(g, 0.75, -1, 1.0 - 0.5j)
        stf = sp.linear_space_time(u0, np.linspace(0, 1, 201), pad=4)
        p = nm.NormParams(s=2.0, b=0.6, gamma=0.5)
        z = nm.zsb_norm(stf, p)
        col = nm.column_sums(stf, 0.6)[g.xi_index(0.75), g.mode_index(-1)]
        weight = math.sqrt(1 + 0.75**2) / 0.75
        assert z.sup_part == pytest.approx(weight * math.sqrt(col), rel=1e-13)
        assert z.argmax == (0.75, -1.0)
        assert z.value == pytest.approx(math.hypot(z.y_part, z.sup_part))

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10**6))
    def test_z_dominates_y(self, seed):
        g = FrequencyGrid(2.0, 8, 1)
        u0 = random_real(g, np.random.default_rng(seed))
        stf = sp.linear_space_time(u0, np.linspace(0, 1, 21), pad=2)
        p = nm.NormParams(s=0.6, b=0.55, gamma=0.5)
        assert nm.zsb_norm(stf, p).value >= nm.ysb_norm(stf, p)

    def test_mass_concentration(self):
        # equal Y norm; shrinking the frequency support raises the sup part like |support|^{-1/2}
        g = FrequencyGrid(4.0, 64, 0)
        times = np.linspace(0, 1, 65)
        p = nm.NormParams(s=0.6, b=0.55, gamma=0.5)
        ratios = []
        sizes = [32, 8, 2]
        for size in sizes:
            c = np.zeros(g.shape, complex)
            c[40:40 + size, 0] = 1.0
            stf = sp.linear_space_time(SpectralField(g, c), times, pad=2)
            scale = 1.0 / nm.ysb_norm(stf, p)
            ratios.append(nm.zsb_norm(stf, p).sup_part * scale)
        slopes = np.diff(np.log(ratios)) / -np.diff(np.log(sizes))
        assert np.all(np.abs(slopes - 0.5) < 0.1)


class TestProperties:
    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10**6), st.floats(-1, 2), st.floats(0.05, 1.0), st.floats(0, 1))
    def test_monotone_in_s_and_b(self, seed, s, ds, b):
        g = FrequencyGrid(2.0, 8, 1)
        u0 = random_real(g, np.random.default_rng(seed))
        stf = sp.linear_space_time(u0, np.linspace(0, 1, 17), pad=2)
        base = nm.xsb_norm(stf, nm.NormParams(s, b))
        assert nm.xsb_norm(stf, nm.NormParams(s + ds, b)) >= base
        assert nm.xsb_norm(stf, nm.NormParams(s, b + ds)) >= base

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10**6), st.one_of(st.just(0j), st.complex_numbers(min_magnitude=1e-100, max_magnitude=1e3, allow_nan=False, allow_infinity=False)))
    def test_absolute_homogeneity(self, seed, c):
        g = FrequencyGrid(2.0, 8, 1)
        u = random_real(g, np.random.default_rng(seed))
        cu = SpectralField(g, u.coeffs * c)
        for norm in (nm.sobolev_norm, nm.tilde_sobolev_norm, nm.homogeneous_sobolev_norm):
            assert norm(cu, 0.4) == pytest.approx(abs(c) * norm(u, 0.4), rel=1e-12, abs=1e-300)
        stf = sp.linear_space_time(u, np.linspace(0, 1, 9), pad=1)
        cstf = sp.SpaceTimeField(g, stf.tau, stf.coeffs * c, stf.window)
        p = nm.NormParams(0.4, 0.6, gamma=0.5)
        assert nm.zsb_norm(cstf, p).value == pytest.approx(abs(c) * nm.zsb_norm(stf, p).value, rel=1e-12, abs=1e-300)


def test_report_csv(tmp_path):
    path = tmp_path / "r.csv"
    nm.write_norm_report(path, [dict(norm_name="xsb", s=0.5, b=0.6, gamma=0.0, value=1.25)])
    assert path.read_text().splitlines() == ["norm_name,s,b,gamma,value", "xsb,0.5,0.6,0.0,1.25"]
