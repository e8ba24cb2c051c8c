"""Gaussian randomization of initial data and the first Picard remainder.

Data are cut into unit pieces P_k u0 along segments of the first frequency axis,
each piece gets an independent complex Gaussian, and the real part is kept.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.special import sici

from .norms import sobolev_norm
from .solver import check_phase_resolution, interaction_integrand, time_grid
from .spectrum import (
    FrequencyGrid,
    GridError,
    SpaceTimeField,
    SpectralField,
    dispersion_on_grid,
    realify,
    space_time_transform,
)

STORED_TIMES = 65


@dataclass(frozen=True)
class RandomizationParams:
    alpha: float
    seed: int
    K_trunc: int

    def __post_init__(self):
        if not 0.5 < self.alpha < 2:
            raise ValueError("alpha must lie in (1/2, 2)")
        if int(self.K_trunc) != self.K_trunc or self.K_trunc < 4:
            raise ValueError("K_trunc must be an integer >= 4")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def _g(y):
    y = np.asarray(y, float)
    out = np.zeros_like(y)
    pos = y > 0
    out[pos] = np.exp(-1.0 / y[pos])
    return out


def _h(y):
    a, b = _g(y), _g(1.0 - y)
    return a / (a + b)


def chi0(x):
    """Smooth even bump on [-1, 1] with chi0(x) + chi0(x - 1) = 1 on [0, 1]."""
    x = np.asarray(x, float)
    ax = np.abs(x)
    out = np.zeros_like(ax)
    inside = ax < 1
    out[inside] = _h(1.0 - ax[inside])
    return out if out.ndim else float(out)


def lattice(grid: FrequencyGrid, K_trunc: int | None = None):
    """Lattice points k with P_k representable on the grid, optionally cut to |k| <= K_trunc."""
    top = int(math.floor(grid.xi_max)) - 1
    k1 = np.arange(-top, top + 1)
    k2 = grid.modes
    K1, K2 = np.meshgrid(k1, k2, indexing="ij")
    K1, K2 = K1.ravel(), K2.ravel()
    if K_trunc is not None:
        keep = K1 * K1 + K2 * K2 <= K_trunc * K_trunc
        K1, K2 = K1[keep], K2[keep]
    return list(zip(K1.tolist(), K2.tolist()))


def _check_k(grid, k):
    k1, k2 = k
    if abs(k1) > grid.xi_max - 1 or abs(k2) > grid.k_max:
        raise GridError(f"lattice point {k} outside the grid")


def project_pk(f: SpectralField, k) -> SpectralField:
    _check_k(f.grid, k)
    out = np.zeros_like(f.coeffs)
    l = f.grid.mode_index(k[1])
    out[:, l] = f.coeffs[:, l] * chi0(f.grid.xi - k[0])
    return SpectralField(f.grid, out, real=False)


def gaussian_for(seed: int, k) -> complex:
    """Standard complex Gaussian keyed by (seed, k) through a Philox counter."""
    counter = np.array([int(k[0]) % 2**64, int(k[1]) % 2**64, 0, 0], dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(counter=counter, key=int(seed)))
    re, im = rng.standard_normal(2)
    return complex(re, im) / math.sqrt(2.0)


def _chi_rows(grid, ks):
    """chi0(xi - k1) columns for every lattice point, keyed by k1."""
    return {k1: chi0(grid.xi - k1) for k1 in {k[0] for k in ks}}


def randomize_data(u0: SpectralField, p: RandomizationParams) -> SpectralField:
    grid = u0.grid
    ks = lattice(grid, p.K_trunc)
    chis = _chi_rows(grid, ks)
    acc = np.zeros(grid.shape, complex)
    for k in ks:
        l = grid.mode_index(k[1])
        acc[:, l] += gaussian_for(p.seed, k) * chis[k[0]] * u0.coeffs[:, l]
    return SpectralField(grid, realify(acc), real=True)


def expected_norm_sq(u0: SpectralField, s: float, K_trunc: int) -> float:
    """E ||Re(sum_k g_k P_k u0)||_{H^s}^2 computed exactly from the projections."""
    grid = u0.grid
    ks = lattice(grid, K_trunc)
    chis = _chi_rows(grid, ks)
    power = np.zeros(grid.shape)
    for k in ks:
        l = grid.mode_index(k[1])
        power[:, l] += np.abs(chis[k[0]] * u0.coeffs[:, l]) ** 2
    # |Re w_hat(p)|^2 has mean (S(p) + S(-p)) / 4 since E g^2 = 0
    mirrored = np.roll(power[::-1, ::-1], 1, axis=0)
    mean = 0.25 * (power + mirrored)
    mean[0] = 0.0
    xi, n2 = grid.mesh()
    w = (1 + xi * xi + n2 * n2) ** s
    return float(np.sum(mean * w) * grid.h_xi * grid.h_n)


def generic_constant(u0: SpectralField, alpha: float) -> float:
    grid = u0.grid
    best = 0.0
    for k1, k2 in lattice(grid):
        l = grid.mode_index(k2)
        peak = float(np.max(np.abs(chi0(grid.xi - k1) * u0.coeffs[:, l])))
        best = max(best, (1 + k1 * k1 + k2 * k2) ** (alpha / 2) * peak)
    return best


def power_law_data(grid: FrequencyGrid, alpha: float) -> SpectralField:
    """u_hat = <(xi, n)>^{-alpha}, real, Nyquist column removed."""
    xi, n2 = grid.mesh()
    c = (1 + xi * xi + n2 * n2) ** (-alpha / 2)
    c[0] = 0.0
    return SpectralField(grid, c.astype(complex), real=True)


def census_grid(K_trunc: int, h_xi: float = 0.5) -> FrequencyGrid:
    """Grid holding the data band |k| <= K and its square band |k| <= 2K."""
    xi_max = 2 * K_trunc + 2
    return FrequencyGrid(float(xi_max), int(round(2 * xi_max / h_xi)), 2 * K_trunc)


# --- first Picard remainder --------------------------------------------------------------

def first_picard_remainder(u0w: SpectralField, T: float, n_t: int, stored: int = STORED_TIMES,
                           check_phase: bool = True):
    """v1(t) = (1/2) int_0^t S(t - s) d_x1((S(s) u0w)^2) ds by the trapezoid rule on n_t nodes.

    Returns the Hann-windowed space-time transform of v1 sampled on ``stored`` evenly
    spaced nodes, and v1(T).  Only the stored nodes are kept in memory.
    """
    if not 0 < T <= 1:
        raise ValueError("T must lie in (0, 1]")
    if n_t < 3:
        raise ValueError("need at least three time nodes")
    grid = u0w.grid
    times = time_grid(T, T / (n_t - 1))
    h = times[1] - times[0]
    if check_phase:
        check_phase_resolution(grid, h)
    phi = dispersion_on_grid(grid)
    stored = min(stored, times.size)
    stride = (times.size - 1) // (stored - 1)
    keep = set(range(0, times.size, stride)) | {times.size - 1}
    snap_t, snap_v = [], []
    running = np.zeros(grid.shape, complex)
    prev = None
    for a in range(0, times.size, 64):
        tb = times[a:a + 64]
        G = interaction_integrand(u0w.coeffs, tb, grid, phi)
        for i, g in enumerate(G):
            m = a + i
            if prev is not None:
                running = running + 0.5 * h * (prev + g)
            prev = g
            if m in keep:
                snap_t.append(times[m])
                snap_v.append(0.5 * running * np.exp(1j * times[m] * phi))
    endpoint = SpectralField(grid, realify(snap_v[-1]), real=True)
    snap_t = np.array(snap_t)
    if np.allclose(np.diff(snap_t), snap_t[1] - snap_t[0], rtol=1e-9, atol=0):
        st = space_time_transform(np.array(snap_v), snap_t, grid)
    else:
        # drop the irregular tail so the stored grid stays uniform
        st = space_time_transform(np.array(snap_v[:-1]), snap_t[:-1], grid)
    return st, endpoint


# --- census -----------------------------------------------------------------------------

@dataclass
class CensusRow:
    seed: int
    K_trunc: int
    alpha: float
    s: float
    norm_u0: float
    norm_v1: float


def census_steps(grid: FrequencyGrid, T: float) -> int:
    """Fewest trapezoid nodes meeting the phase resolution limit."""
    from .solver import PHASE_LIMIT

    top = float(np.max(np.abs(dispersion_on_grid(grid))))
    return int(math.ceil(T * top / PHASE_LIMIT)) + 1


PAIR_CHUNK = 2**18
_EULER_GAMMA = 0.5772156649015329


def _log_sine_integral(x):
    """int_0^x (e^{iu} - 1)/u du."""
    ax = np.abs(x)
    si, ci = sici(ax)
    with np.errstate(divide="ignore", invalid="ignore"):
        re = ci - _EULER_GAMMA - np.log(ax)
    re = np.where(ax == 0, 0.0, re)
    return re + 1j * np.sign(x) * si


def duhamel_kernel(D, T):
    """int_0^T e^{isD} ds."""
    small = np.abs(D) * T < 1e-8
    Ds = np.where(small, 1.0, D)
    return np.where(small, T + 0.5j * D * T * T, (np.exp(1j * T * Ds) - 1) / (1j * Ds))


def cell_kernel(D, slope, width, T):
    """Mean over eta in [-width/2, width/2] of int_0^T e^{is(D + slope eta)} ds, in closed form."""
    a = 0.5 * slope * width
    small = np.abs(a) * T < 1e-3
    asafe = np.where(small, 1.0, a)
    cell = (_log_sine_integral(T * (D + asafe)) - _log_sine_integral(T * (D - asafe))) / (2j * asafe)
    return np.where(small, duhamel_kernel(D, T), cell)


def _pair_blocks(grid, j, l):
    """Chunks of unordered support pairs (i1 <= i2) with their output flat index."""
    m = j.size
    i1, i2 = np.triu_indices(m)
    half = grid.n_x1 // 2
    for a in range(0, i1.size, PAIR_CHUNK):
        b1, b2 = i1[a:a + PAIR_CHUNK], i2[a:a + PAIR_CHUNK]
        jo = j[b1] + j[b2] - half
        lo = l[b1] + l[b2] - grid.k_max
        ok = (jo >= 0) & (jo < grid.n_x1) & (lo >= 0) & (lo < grid.n_modes)
        yield b1[ok], b2[ok], (jo * grid.n_modes + lo)[ok]


def remainder_endpoints(fields, T: float, cells: bool = True, n_sub: int = 2):
    """v1(T) for several real fields on one grid, with the time integral done exactly.

    v1_hat(p) = (i xi / 2) kappa e^{iT phi(p)} sum_{p1 + p2 = p} a(p1) a(p2) int_0^T e^{isD} ds,
    D = phi(p1) + phi(p2) - phi(p), kappa = h_xi h_n / 2pi.

    With ``cells`` off this is the n_t -> infinity limit of first_picard_remainder, i.e. the
    problem with x1 periodized at period 2pi/h_xi.  With ``cells`` on, the data are read as
    constant on xi-cells of width h_xi and the xi1-integral over each cell is done in closed
    form (D linearized on n_sub sub-cells), which is the line problem for such data.  Only
    the second removes the exact lattice resonances (e.g. xi1 = 0, n1 = -2 n2) that the
    periodized problem weights by T.
    """
    fields = list(fields)
    grid = fields[0].grid
    A = np.array([f.coeffs for f in fields])
    j, l = np.nonzero(np.any(A != 0, axis=0))
    amp = A[:, j, l]
    xi, n2 = grid.xi[j], grid.n2[l]
    out = np.zeros((len(fields), grid.n_x1 * grid.n_modes), complex)
    for b1, b2, idx in _pair_blocks(grid, j, l):
        xo, no = xi[b1] + xi[b2], n2[b1] + n2[b2]
        phi_o = xo * (xo * xo + no * no)
        if cells:
            h = grid.h_xi / n_sub
            kern = 0.0
            for q in range(n_sub):
                eta = -grid.h_xi / 2 + (q + 0.5) * h
                x1, x2 = xi[b1] + eta, xi[b2] - eta
                D = x1 * (x1 * x1 + n2[b1] ** 2) + x2 * (x2 * x2 + n2[b2] ** 2) - phi_o
                slope = (3 * x1 * x1 + n2[b1] ** 2) - (3 * x2 * x2 + n2[b2] ** 2)
                kern = kern + cell_kernel(D, slope, h, T) / n_sub
        else:
            D = xi[b1] * (xi[b1] ** 2 + n2[b1] ** 2) + xi[b2] * (xi[b2] ** 2 + n2[b2] ** 2) - phi_o
            kern = duhamel_kernel(D, T)
        kern = np.where(b1 == b2, 1.0, 2.0) * kern
        scatter = sparse.csr_matrix((kern, (np.arange(idx.size), idx)), shape=(idx.size, out.shape[1]))
        out += (scatter.T @ (amp[:, b1] * amp[:, b2]).T).T
    out = out.reshape((len(fields),) + grid.shape)
    kappa = grid.h_xi * grid.h_n / (2 * math.pi)
    out *= 0.5j * grid.xi[:, None] * kappa * np.exp(1j * T * dispersion_on_grid(grid))
    return [SpectralField(grid, realify(o), real=True) for o in out]


def smoothing_census(seeds, K_values, alpha=0.97, s=0.55, T=0.1, h_xi=0.5):
    """Data and remainder H^s norms per seed and truncation (statistical evidence only)."""
    rows = []
    for K in K_values:
        grid = census_grid(K, h_xi)
        u0 = power_law_data(grid, alpha)
        data = [randomize_data(u0, RandomizationParams(alpha, seed, K)) for seed in seeds]
        for seed, uw, v1 in zip(seeds, data, remainder_endpoints(data, T)):
            rows.append(CensusRow(int(seed), K, alpha, s, sobolev_norm(uw, s), sobolev_norm(v1, s)))
    return rows


def census_medians(rows):
    out = {}
    for K in sorted({r.K_trunc for r in rows}):
        sel = [r for r in rows if r.K_trunc == K]
        out[K] = (float(np.median([r.norm_u0 for r in sel])), float(np.median([r.norm_v1 for r in sel])))
    return out


def write_census(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["seed", "K_trunc", "alpha", "s", "norm_u0", "norm_v1"])
        for r in rows:
            w.writerow([r.seed, r.K_trunc, repr(r.alpha), repr(r.s), repr(r.norm_u0), repr(r.norm_v1)])
