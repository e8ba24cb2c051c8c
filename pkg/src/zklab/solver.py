"""Local-in-time solutions by Picard iteration on the Duhamel formula.

The iteration runs in the interaction picture W(t) = S(-t) u(t), where

    W(t) = u0 + (1/2) int_0^t S(-s) d_x1( (S(s) W(s))^2 ) ds

and the s-integral uses the trapezoid rule on a uniform time grid.  A classical RK4
stepper in the original variables serves as an independent check.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .spectrum import (
    FrequencyGrid,
    GridError,
    SpectralField,
    dispersion_on_grid,
    product_coeffs,
    realify,
    write_trajectory_dump,
)

ENERGY_CUBIC = 1.0 / 6.0
PHASE_LIMIT = 0.5
BATCH = 32


class ConvergenceError(RuntimeError):
    """Picard iteration did not reach the tolerance."""


@dataclass
class Trajectory:
    grid: FrequencyGrid
    times: np.ndarray
    states: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, float)
        self.states = np.asarray(self.states, complex)
        if self.states.shape != (self.times.size,) + self.grid.shape:
            raise GridError("states must have shape (n_times,) + grid.shape")

    def __len__(self):
        return self.times.size

    def state(self, i) -> SpectralField:
        return SpectralField(self.grid, self.states[i], real=True)

    @property
    def endpoint(self) -> SpectralField:
        return self.state(-1)

    def dump(self, path):
        write_trajectory_dump(path, self.grid, self.times, self.states)


# --- building blocks -------------------------------------------------------------------

def _cell(grid):
    return grid.h_xi * grid.h_n


def h1_norm(coeffs, grid) -> np.ndarray:
    """H^1 norm over the last two axes."""
    xi, n2 = grid.mesh()
    w = 1.0 + xi * xi + n2 * n2
    return np.sqrt(np.sum(np.abs(coeffs) ** 2 * w, axis=(-2, -1)) * _cell(grid))


def nonlinearity(coeffs, grid) -> np.ndarray:
    """Spectral d_x1(u^2) for real u, batched over leading axes."""
    sq = product_coeffs(coeffs, coeffs, grid)
    return realify(1j * grid.xi[:, None] * sq)


def interaction_integrand(W, times, grid, phi=None) -> np.ndarray:
    """S(-t) d_x1((S(t) W)^2) for each time; W has shape (n_t,) + grid.shape or grid.shape."""
    phi = dispersion_on_grid(grid) if phi is None else phi
    times = np.asarray(times, float)
    W = np.broadcast_to(W, times.shape + grid.shape)
    out = np.empty(times.shape + grid.shape, complex)
    for a in range(0, times.size, BATCH):
        t = times[a:a + BATCH, None, None]
        rot = np.exp(1j * t * phi)
        out[a:a + BATCH] = nonlinearity(W[a:a + BATCH] * rot, grid) * np.conj(rot)
    return out


def time_grid(T, dt):
    if dt == 0 or not math.isfinite(dt):
        raise ValueError("dt must be finite and non-zero")
    steps = max(1, int(math.ceil(abs(T) / abs(dt) - 1e-9)))
    return np.linspace(0.0, T, steps + 1)


def check_phase_resolution(grid, dt):
    limit = PHASE_LIMIT / float(np.max(np.abs(dispersion_on_grid(grid))))
    if abs(dt) > limit * (1 + 1e-12):
        raise ValueError(f"dt = {abs(dt):.3e} exceeds the phase limit {limit:.3e} for this grid")


def propagate_states(W, times, grid):
    phi = dispersion_on_grid(grid)
    return W * np.exp(1j * times[:, None, None] * phi)


# --- Picard ---------------------------------------------------------------------------

def picard_solve(u0: SpectralField, T: float, dt: float, max_iter: int = 30, tol: float = 1e-12,
                 strict: bool = True, store_every: int = 1) -> Trajectory:
    """Fixed-point iteration for the Duhamel formula on [0, T] (T may be negative).

    ``max_iter = 0`` returns the linear flow.  When the H^1 increment does not fall below
    ``tol`` within ``max_iter`` sweeps a ConvergenceError is raised unless ``strict`` is off.
    """
    if not u0.real:
        raise ValueError("initial data must be real-flagged")
    if max_iter < 0:
        raise ValueError("max_iter must be non-negative")
    grid = u0.grid
    times = time_grid(T, dt)
    h = times[1] - times[0]
    check_phase_resolution(grid, h)
    W = np.broadcast_to(u0.coeffs, times.shape + grid.shape).copy()
    increments = []
    converged = max_iter == 0
    for _ in range(max_iter):
        G = interaction_integrand(W, times, grid)
        W_new = u0.coeffs + 0.5 * cumulative_trapezoid(G, dx=h, axis=0, initial=0)
        inc = float(np.max(h1_norm(W_new - W, grid)))
        increments.append(inc)
        W = W_new
        if inc < tol:
            converged = True
            break
    meta = {"method": "picard-interaction-trapezoid", "iterations": len(increments),
            "increments": increments, "tol": tol, "dt": h, "converged": converged}
    if not converged and strict:
        raise ConvergenceError(f"no convergence in {max_iter} iterations (last increment {increments[-1]:.3e})")
    keep = np.arange(0, times.size, store_every)
    if keep[-1] != times.size - 1:
        keep = np.append(keep, times.size - 1)
    states = realify(propagate_states(W[keep], times[keep], grid))
    return Trajectory(grid, times[keep], states, meta)


def contraction_ratios(traj: Trajectory) -> list:
    inc = traj.meta.get("increments", [])
    return [b / a for a, b in zip(inc, inc[1:]) if a > 0]


# --- independent stepper ----------------------------------------------------------------

def rk4_solve(u0: SpectralField, T: float, dt: float) -> SpectralField:
    """Classical explicit RK4 for u_t = i phi u + (1/2) d_x1(u^2) in spectral variables."""
    grid = u0.grid
    iphi = 1j * dispersion_on_grid(grid)
    steps = max(1, int(math.ceil(abs(T) / abs(dt) - 1e-9)))
    h = T / steps

    def rhs(u):
        return iphi * u + 0.5 * nonlinearity(u, grid)

    u = u0.coeffs.copy()
    for _ in range(steps):
        k1 = rhs(u)
        k2 = rhs(u + 0.5 * h * k1)
        k3 = rhs(u + 0.5 * h * k2)
        k4 = rhs(u + h * k3)
        u = u + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return SpectralField(grid, realify(u), real=True)


# --- conserved quantities --------------------------------------------------------------

def mass(coeffs, grid) -> float:
    return float(np.sum(np.abs(coeffs) ** 2) * _cell(grid))


def energy(coeffs, grid, cubic=ENERGY_CUBIC) -> float:
    """(1/2) int |grad u|^2 + cubic * int u^3, the cubic term by Parseval against the exact band product."""
    xi, n2 = grid.mesh()
    grad = 0.5 * float(np.sum((xi * xi + n2 * n2) * np.abs(coeffs) ** 2)) * _cell(grid)
    sq = product_coeffs(coeffs, coeffs, grid)
    cube = float(np.real(np.sum(sq * np.conj(coeffs)))) * _cell(grid)
    return grad + cubic * cube


def conserved_series(traj: Trajectory, cubic=ENERGY_CUBIC):
    g = traj.grid
    return [(float(t), mass(s, g), energy(s, g, cubic)) for t, s in zip(traj.times, traj.states)]


def conserved_report(traj: Trajectory, cubic=ENERGY_CUBIC) -> dict:
    series = conserved_series(traj, cubic)
    m0, e0 = series[0][1], series[0][2]
    col = traj.states[:, :, :][:, traj.grid.zero_xi_index, :]

    def rel(x, x0):
        return abs(x - x0) / abs(x0) if x0 else abs(x - x0)

    return {
        "mass_drift": max(rel(m, m0) for _, m, _ in series),
        "energy_drift": max(rel(e, e0) for _, _, e in series),
        "line_mass_drift": float(np.max(np.abs(col - col[0]))),
    }


def write_conserved_csv(path, traj: Trajectory, cubic=ENERGY_CUBIC):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "mass", "energy"])
        for t, m, e in conserved_series(traj, cubic):
            w.writerow([repr(t), repr(m), repr(e)])


# --- scaling ----------------------------------------------------------------------------

def rescale(u: SpectralField, lam: int) -> SpectralField:
    """u_lam(x) = lam^2 u(lam x): same coefficient array on a grid with frequencies scaled by lam."""
    if lam not in (2, 4):
        raise GridError("lam must be 2 or 4")
    g = u.grid
    grid = FrequencyGrid(g.xi_max * lam, g.n_x1, g.k_max, g.period_x2 / lam)
    return SpectralField(grid, u.coeffs, u.real)


def gaussian_bump(grid: FrequencyGrid, amplitude=1e-2, width=1.0) -> SpectralField:
    """amplitude * exp(-x1^2/width^2) * exp(2(cos x2 - 1)), periodized in x2 with the grid period."""
    from .spectrum import from_physical

    x1, x2 = grid.physical_points()
    k2 = 2 * math.pi / grid.period_x2
    vals = amplitude * np.exp(-(x1[:, None] / width) ** 2) * np.exp(2 * (np.cos(k2 * x2[None, :]) - 1))
    return from_physical(vals, grid, real=True)
