import math

import numpy as np
import pytest

from zklab import measure as ms
from zklab import resonance as rs
from zklab.resonance import FrequencyTriple, TimeTriple


def near_triangle_case(N, seed):
    rng = np.random.default_rng(seed)
    while True:
        k, m = (int(v) for v in rng.integers(-2 * N, 2 * N, 2))
        sol = rs.rotated_triangle(k, m)
        if sol is None:
            continue
        e = 10 ** rng.uniform(-4, 0)
        t = FrequencyTriple.from_pairs(sol[0] + e * rng.normal(), k, sol[1] + e * rng.normal(), m)
        try:
            prof = rs.dyadic_profile(t, TimeTriple.on_shell(t))
        except ValueError:
            continue
        if prof.N_max != N or (prof.M3 <= prof.M_min(3) and prof.Nstar3 == 1):
            continue
        return t, prof


def log_dyadic(x):
    ax = np.abs(x)
    with np.errstate(divide="ignore"):
        return np.where(ax < 2, 1.0, 2.0 ** np.floor(np.log2(ax)))


def fixed_of(t):
    return {"xi": t.xi, "n2": t.n2, "m2": t.m2}


class TestLevelSet:
    def test_excluded_case(self):
        t = FrequencyTriple.from_pairs(-0.25, 100, -0.25, 100)
        prof = rs.dyadic_profile(t, TimeTriple.on_shell(t))
        assert prof.Nstar3 == 1 and prof.M3 == prof.M_min(3)
        with pytest.raises(rs.PreconditionError):
            ms.level_set_integral(0.0, prof, fixed_of(t), 0.1)

    def test_empty_interval(self):
        t, prof = near_triangle_case(128, 0)
        fixed = dict(fixed_of(t), xi=t.xi + 3000.0)
        assert ms.consistent_intervals(prof, fixed["xi"], fixed["n2"], fixed["m2"]) == []
        assert ms.level_set_integral(0.0, prof, fixed, 0.1) == 0.0

    def test_reference_point_is_inside(self):
        t, prof = near_triangle_case(256, 1)
        ints = ms.consistent_intervals(prof, t.xi, t.n2, t.m2)
        assert any(a <= t.zeta <= b for a, b in ints)

    def test_bounded_kernel_integral_oracle(self):
        # with delta large the kernel is close to an indicator of |Delta - lam| < 1
        t, prof = near_triangle_case(128, 2)
        fixed = fixed_of(t)
        lam = float(rs.triple_delta(t))
        got = ms.level_set_integral(lam, prof, fixed, 0.5)
        # trapezoid on a very fine mesh as an independent check
        total = 0.0
        for a, b in ms.consistent_intervals(prof, t.xi, t.n2, t.m2):
            zz = np.linspace(a, b, 2_000_001)
            r = lam - (-(t.xi + zz)) * ((t.xi + zz) ** 2 + t.k2**2) - zz * (zz**2 + t.m2**2) - t.xi * (t.xi**2 + t.n2**2)
            total += np.trapezoid((1 + r * r) ** -0.75, zz)
        assert got == pytest.approx(total, rel=1e-3)

    def test_swapped_is_relabeled(self):
        t, prof = near_triangle_case(128, 3)
        fixed = {"zeta": t.zeta, "n2": t.n2, "m2": t.m2}
        rel = prof.relabel(ms.SWAP_23)
        if rel.M3 <= rel.M_min(3) and rel.Nstar3 == 1:
            pytest.skip("relabeled profile is in the excluded case")
        a = ms.level_set_integral_swapped(5.0, prof, fixed, 0.1)
        b = ms.level_set_integral(5.0, rel, {"xi": t.zeta, "n2": t.m2, "m2": t.n2}, 0.1)
        assert a == b

    def test_unit_variant_excluded_case(self):
        t = FrequencyTriple.from_pairs(-0.25, 100, -0.25, 100)
        prof = rs.dyadic_profile(t, TimeTriple.on_shell(t))
        lam = float(rs.triple_delta(t))
        val = ms.level_set_integral_unit(lam, prof, fixed_of(t), 0.1, math.floor(t.zeta))
        assert 0 < val <= 1.0
        assert val * prof.N_max * prof.M3 <= 4.0

    def test_constant_is_lambda_independent_and_uniform_in_N(self):
        per_N = []
        for N, seed in ((128, 4), (256, 5), (512, 6)):
            t, prof = near_triangle_case(N, seed)
            fixed = fixed_of(t)
            lo, hi = ms.delta_range(prof, fixed)
            lams = np.linspace(lo - 5, hi + 5, 12)
            c1, _ = ms.level_set_constant(prof, fixed, 0.1, lams)
            c2, _ = ms.level_set_constant(prof, fixed, 0.1, lams + (lams[1] - lams[0]) / 2)
            assert max(c1, c2) <= 2 * min(c1, c2)
            per_N.append(max(c1, c2))
        assert max(per_N) <= 10.0

    def test_mesh_halving(self):
        t, prof = near_triangle_case(256, 7)
        fixed = fixed_of(t)
        lam = float(rs.triple_delta(t))
        coarse = ms._integrate_kernel(ms._delta_in_zeta(t.xi, t.n2, t.m2), lam, 0.1,
                                      ms.consistent_intervals(prof, t.xi, t.n2, t.m2, 2**13), 1e-2)
        fine = ms._integrate_kernel(ms._delta_in_zeta(t.xi, t.n2, t.m2), lam, 0.1,
                                    ms.consistent_intervals(prof, t.xi, t.n2, t.m2, 2**14), 1e-2)
        assert fine == pytest.approx(coarse, rel=1e-2)


class TestASet:
    def profile_case(self, N1, N2, seed):
        rng = np.random.default_rng(seed)
        nu, k, ze, m, xi, n = ms.sample_reference((N1, N2, N1), rng)
        t = FrequencyTriple.from_pairs(nu, k, ze, m)
        tt = TimeTriple.on_shell(t, 3.0, -20.0)
        return t, tt, rs.dyadic_profile(t, tt)

    def test_matches_brute_force(self):
        t, tt, prof = self.profile_case(64, 64, 0)
        got = ms.a_set_measure(t.xi, t.n2, tt.tau, prof, n_points=400_000, rng=np.random.default_rng(1))
        # independent oracle: midpoint rule in nu near the band and in mu over the L1 shell
        L1, L2 = prof.L1, prof.L2
        band = 2 * (L1 + L2)
        h_mu = 1e-3 * L1
        mu = np.arange(-2 * L1, 2 * L1, h_mu) + h_mu / 2
        mu = mu[log_dyadic(mu) == L1]
        total = 0.0
        coarse, h = 1e-2, 1e-5
        cells = np.arange(-128, 128, coarse)
        offsets = (np.arange(round(coarse / h)) + 0.5) * h
        for k2 in range(-127, 128):
            m2 = -t.n2 - k2

            def shift_of(nu):
                ze = -t.xi - nu
                return -tt.tau - nu * (nu**2 + k2**2) - ze * (ze**2 + m2**2)

            a, b = shift_of(cells), shift_of(cells + coarse)
            slack = 4 * np.abs(b - a) + 1.0
            keep = (np.minimum(a, b) - slack <= band) & (np.maximum(a, b) + slack >= -band)
            if not keep.any():
                continue
            nu = (cells[keep][:, None] + offsets[None, :]).ravel()
            nu = nu[ms.a_set_indicator(nu, float(k2), t.xi, t.n2, prof)]
            shift = shift_of(nu)
            shift = shift[np.abs(shift) <= band]
            for chunk in np.array_split(shift, max(1, shift.size // 2000)):
                good = log_dyadic(chunk[:, None] - mu[None, :]) == L2
                total += good.sum() * h_mu * h
        assert total > 0
        assert got == pytest.approx(total, rel=0.03)

    def test_trivial_bound_by_counting(self):
        for seed in range(5):
            t, tt, prof = self.profile_case(128, 128, seed)
            meas = ms.a_set_measure(t.xi, t.n2, tt.tau, prof, n_points=50_000)
            assert meas <= 80 * ms.a_bounds(prof)["trivial"]

    def test_relaxed_set_contains_strict(self):
        t, tt, prof = self.profile_case(128, 16, 3)
        strict = ms.a_set_measure(t.xi, t.n2, tt.tau, prof, n_points=100_000)
        relaxed = ms.a_set_measure(t.xi, t.n2, tt.tau, prof, n_points=100_000, relaxed=True)
        assert relaxed >= 0.0 and strict >= 0.0
        assert relaxed <= ms.A_CONSTANT * ms.a_bounds(prof)["third"]

    def test_second_bound_uniform_in_N(self):
        worst = []
        for N in (128, 256, 512, 1024):
            w = 0.0
            for seed in range(4):
                t, tt, prof = self.profile_case(N, N // 8, seed)
                meas = ms.a_set_measure(t.xi, t.n2, tt.tau, prof, n_points=50_000)
                w = max(w, meas / ms.a_bounds(prof)["second"])
            worst.append(w)
        assert max(worst) <= ms.A_CONSTANT
        assert not ms.grows_monotonically(worst)


class TestBilinear:
    def squares(self, N, c):
        M = N / 128
        side = c * M
        r1 = ms.Square(0.3, 1.5 * N - side / 2, side)
        # shifting the second square by N/64 opens a theta gap of about 3M
        r2 = ms.Square(0.75 * N + N / 64, -0.75 * N - side / 2, side)
        return M, r1, r2

    def test_single_cells(self):
        R = ms.Square(0.0, 99.5, 1.0)
        nu = np.array([0.25, 0.75])
        u = ms.BoxField(R, nu, np.array([100]), 0.0, 0.5, np.zeros((2, 1, 3), complex))
        v = ms.BoxField(R, nu, np.array([100]), 0.0, 0.5, np.zeros((2, 1, 3), complex))
        u.coeffs[1, 0, 2] = 2.0
        v.coeffs[0, 0, 1] = 1j
        expected = abs(2.0 * 1j) * (0.5 * 0.5) * math.sqrt(0.5 * 0.5) / (2 * math.pi) ** 1.5
        assert ms.product_l2(u, v) == pytest.approx(expected, rel=1e-12)

    def test_geometry_checks(self):
        with pytest.raises(ValueError):
            ms.bilinear_constant(ms.Square(0.0, 0.0, 0.5), ms.Square(0.0, 0.0, 0.5), 64, 64, N=128, M=1)
        M, R1, R2 = self.squares(128, 1 / 64)
        with pytest.raises(ValueError):
            ms.bilinear_constant(R1, R1, 64, 64, "separated", N=128, M=M, c=1 / 64)

    def test_general_uniform(self):
        consts = []
        for N in (128, 256, 512, 1024):
            M, R1, R2 = self.squares(N, 1 / 64)
            L = N * N / 8
            rep = ms.bilinear_constant(R1, R2, L, L, "general", N=N, M=M, c=1 / 64, draws=10)
            consts.append(rep.empirical_constant)
        assert not ms.grows_monotonically(consts)

    def test_separated_uniform(self):
        consts = []
        for N in (128, 256, 512, 1024):
            M, R1, R2 = self.squares(N, 1 / 64)
            assert ms.theta_witness(R1, R2, M)
            # with L ~ N^2 the squares are wider than the nu-window L/(N M), the regime the estimate addresses
            L = N * N / 8
            rep = ms.bilinear_constant(R1, R2, L, L, "separated", N=N, M=M, c=1 / 64, draws=10)
            consts.append(rep.empirical_constant)
        assert not ms.grows_monotonically(consts)


def test_report_csv(tmp_path):
    rep = ms.BoundReport("x", 1.5, 3, "draw 0", 128.0, 1.0, 64.0, 64.0)
    path = tmp_path / "b.csv"
    ms.write_reports(path, [rep])
    assert path.read_text().splitlines() == ["bound_name,N,M,L1,L2,empirical_constant",
                                              "x,128.0,1.0,64.0,64.0,1.5"]
    with pytest.raises(ValueError):
        ms.BoundReport("x", float("nan"), 3, "")
