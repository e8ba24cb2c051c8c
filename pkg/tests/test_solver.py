import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zklab import norms
from zklab import solver as sv
from zklab.spectrum import FrequencyGrid, GridError, SpectralField, propagate_linear, read_dump, realify


SMALL = FrequencyGrid(8.0, 64, 7)


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def test_zero_data_stays_zero():
    tr = sv.picard_solve(SpectralField.zeros(SMALL), 0.01, 1e-4)
    assert np.all(tr.states == 0)
    assert tr.meta["converged"]


def test_zero_iterations_is_linear_flow():
    u0 = sv.gaussian_bump(SMALL)
    tr = sv.picard_solve(u0, 0.01, 1e-4, max_iter=0)
    for t, s in zip(tr.times, tr.states):
        assert np.allclose(s, propagate_linear(u0, t).coeffs, atol=1e-15)


def test_matches_rk4():
    u0 = sv.gaussian_bump(SMALL, amplitude=5e-2)
    tr = sv.picard_solve(u0, 0.05, 2e-4)
    ref = sv.rk4_solve(u0, 0.05, 1e-4)
    assert rel(tr.endpoint.coeffs, ref.coeffs) < 1e-6
    # the nonlinear part is visible at this tolerance
    assert rel(propagate_linear(u0, 0.05).coeffs, ref.coeffs) > 1e-4


def test_linear_flow_is_isometry():
    tr = sv.picard_solve(sv.gaussian_bump(SMALL), 0.02, 1e-4, max_iter=0)
    assert sv.conserved_report(tr)["mass_drift"] < 1e-12


def test_conservation_and_contraction():
    tr = sv.picard_solve(sv.gaussian_bump(SMALL, amplitude=5e-2), 0.05, 2e-4)
    rep = sv.conserved_report(tr)
    assert rep["mass_drift"] < 1e-6
    assert rep["energy_drift"] < 1e-6
    assert rep["line_mass_drift"] < 1e-8
    assert max(sv.contraction_ratios(tr)) <= 0.7


def test_energy_cubic_coefficient():
    # only the 1/6 weighting of the cubic term is conserved by this flow
    u0 = sv.gaussian_bump(SMALL, amplitude=2.0)
    tr = sv.picard_solve(u0, 0.005, 2e-4, max_iter=60, tol=1e-11)
    good = sv.conserved_report(tr)["energy_drift"]
    bad = sv.conserved_report(tr, cubic=1 / 3)["energy_drift"]
    assert good < 1e-6 < bad


def test_non_convergence_raises():
    u0 = sv.gaussian_bump(SMALL, amplitude=2.0)
    with pytest.raises(sv.ConvergenceError):
        sv.picard_solve(u0, 0.05, 2e-4, max_iter=2)
    tr = sv.picard_solve(u0, 0.05, 2e-4, max_iter=2, strict=False)
    assert not tr.meta["converged"] and tr.meta["iterations"] == 2


def test_preconditions():
    u0 = sv.gaussian_bump(SMALL)
    with pytest.raises(ValueError):
        sv.picard_solve(u0, 0.1, 1e-2)
    with pytest.raises(ValueError):
        sv.picard_solve(SpectralField(SMALL, u0.coeffs), 0.01, 1e-4)


def test_time_reversal():
    u0 = sv.gaussian_bump(SMALL, amplitude=5e-2)
    fwd = sv.picard_solve(u0, 0.02, 2e-4)
    back = sv.picard_solve(fwd.endpoint, -0.02, 2e-4)
    assert rel(back.endpoint.coeffs, u0.coeffs) < 1e-9


class TestRescale:
    def test_critical_norm_is_invariant(self):
        u = sv.gaussian_bump(SMALL)
        for lam in (2, 4):
            a = norms.homogeneous_sobolev_norm(sv.rescale(u, lam), -1)
            assert a == pytest.approx(norms.homogeneous_sobolev_norm(u, -1), rel=2e-2)

    def test_l2_ratio_from_lattice(self):
        u = sv.gaussian_bump(SMALL)
        for lam in (2, 4):
            v = sv.rescale(u, lam)
            # the coefficient array is unchanged, only the cell area grows
            cell = math.sqrt(v.grid.h_xi * v.grid.h_n / (u.grid.h_xi * u.grid.h_n))
            assert sv.mass(v.coeffs, v.grid) ** 0.5 / sv.mass(u.coeffs, u.grid) ** 0.5 == pytest.approx(cell)
            assert cell == pytest.approx(lam)

    def test_composition(self):
        u = sv.gaussian_bump(SMALL)
        a, b = sv.rescale(sv.rescale(u, 2), 2), sv.rescale(u, 4)
        assert a.grid == b.grid and np.array_equal(a.coeffs, b.coeffs)

    def test_bad_factor(self):
        with pytest.raises(GridError):
            sv.rescale(sv.gaussian_bump(SMALL), 3)

    def test_flow_commutes_with_scaling(self):
        u0 = sv.gaussian_bump(SMALL, amplitude=5e-2)
        T, n = 0.02, 100
        lhs = sv.rescale(sv.picard_solve(u0, T, T / n).endpoint, 2)
        rhs = sv.picard_solve(sv.rescale(u0, 2), T / 8, T / 8 / n).endpoint
        assert rhs.grid == lhs.grid
        assert rel(rhs.coeffs, lhs.coeffs) < 1e-4


def test_dump_roundtrip(tmp_path):
    tr = sv.picard_solve(sv.gaussian_bump(SMALL), 0.01, 1e-4, store_every=25)
    assert len(tr) == 5
    tr.dump(tmp_path / "t.zk")
    d = read_dump(tmp_path / "t.zk")
    assert np.allclose(d.times, tr.times)
    assert np.allclose(d.coeffs, tr.states, atol=1e-8)


def test_conserved_csv(tmp_path):
    tr = sv.picard_solve(sv.gaussian_bump(SMALL), 0.01, 1e-4, store_every=50)
    sv.write_conserved_csv(tmp_path / "c.csv", tr)
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "t,mass,energy" and len(lines) == 4


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_mass_conserved_for_random_small_data(seed):
    grid = FrequencyGrid(4.0, 32, 4)
    rng = np.random.default_rng(seed)
    raw = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
    xi, n2 = grid.mesh()
    u0 = SpectralField(grid, realify(1e-2 * raw * np.exp(-(xi**2 + n2**2) / 4)), real=True)
    tr = sv.picard_solve(u0, 0.01, 5e-4)
    assert sv.conserved_report(tr)["mass_drift"] < 1e-9
