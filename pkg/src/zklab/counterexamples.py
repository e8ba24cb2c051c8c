"""Near-resonant pairs that break the bilinear estimate, and their growth exponents.

Both inputs are indicator profiles in frequency: u at row k2 = N over nu in R1, v at
row m2 = -N/2 over zeta = -N/2 + omega with omega in R2, each with modulation
|tau - phi| <= C.  The product lives on the single row n = N/2.  For fixed output
frequency xi_o = -N/2 + sigma its time profile is

    F(t) = int_{nu + omega = sigma} tent(t - D(nu, omega)) dnu,   tent(x) = max(0, 2C - |x|),

with t the output modulation and D the resonance function.  F is piecewise linear after
Gauss-Legendre in nu, so every weighted tau-integral is done in closed form.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import hyp2f1

from .spectrum import FrequencyGrid, GridError, SpaceTimeField, dispersion

C_MOD_DEFAULT = 8.0
DELTA_DEFAULT = 0.01
GL_NODES = 48
SLOPE_TARGETS = {"X": lambda s: 0.75 - s, "Y": lambda s: 0.5 - s}
_NORM = (2 * math.pi) ** -1.5


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    @property
    def length(self):
        return self.hi - self.lo


@dataclass(frozen=True)
class CounterexamplePair:
    case: str
    N: int
    C_mod: float
    R1: Interval
    R2: Interval
    amp_u: float = 1.0
    amp_v: float = 1.0

    @property
    def k2(self):
        return self.N

    @property
    def m2(self):
        return -self.N // 2

    @property
    def gamma(self):
        return 0.5 if self.case == "Y" else 0.0

    def scaled(self, a, b) -> "CounterexamplePair":
        return CounterexamplePair(self.case, self.N, self.C_mod, self.R1, self.R2, self.amp_u * a, self.amp_v * b)


def supports(case: str, N: int):
    if case == "X":
        r = N**-0.5
        return Interval(-r, r), Interval(-r, r)
    if case == "Y":
        return Interval(0.5 - 0.5 / N, 0.5 + 0.5 / N), Interval(-0.25 - 1.0 / N, -0.25 + 1.0 / N)
    raise ValueError(f"unknown case {case!r}")


def build_pair(case: str, N: int, C_mod: float = C_MOD_DEFAULT) -> CounterexamplePair:
    if N < 64 or N % 2:
        raise ValueError("N must be an even integer >= 64")
    if C_mod <= 0:
        raise ValueError("C_mod must be positive")
    R1, R2 = supports(case, N)
    return CounterexamplePair(case, int(N), float(C_mod), R1, R2)


def resonance_bad(nu, omega, N):
    """Delta for (nu, N), (-N/2 + omega, -N/2), (N/2 - nu - omega, -N/2)."""
    return 1.5 * N * nu * nu + 3 * N * nu * omega - 3 * nu * nu * omega - 3 * nu * omega * omega


# --- closed-form tau integrals ----------------------------------------------------

def _moment_antiderivs(x, p):
    """Antiderivatives of (1+x^2)^p, x (1+x^2)^p and x^2 (1+x^2)^p."""
    x = np.asarray(x, float)
    a0 = x * hyp2f1(-p, 0.5, 1.5, -x * x)
    if p == -1:
        a1 = 0.5 * np.log1p(x * x)
    else:
        a1 = (1 + x * x) ** (p + 1) / (2 * (p + 1))
    a2 = x**3 / 3 * hyp2f1(-p, 1.5, 2.5, -x * x)
    return a0, a1, a2


def weighted_square_integral(knots, values, p):
    """int (1+x^2)^p F(x)^2 dx for F piecewise linear through (knots, values), zero outside."""
    x0, x1 = knots[:-1], knots[1:]
    f0, f1 = values[:-1], values[1:]
    keep = x1 > x0
    x0, x1, f0, f1 = x0[keep], x1[keep], f0[keep], f1[keep]
    slope = (f1 - f0) / (x1 - x0)
    icpt = f0 - slope * x0
    A0, A1, A2 = _moment_antiderivs(x1, p)
    B0, B1, B2 = _moment_antiderivs(x0, p)
    return float(np.sum(icpt**2 * (A0 - B0) + 2 * icpt * slope * (A1 - B1) + slope**2 * (A2 - B2)))


def window_mass(C, b):
    """int_{-C}^{C} (1+x^2)^b dx."""
    return 2 * C * float(hyp2f1(-b, 0.5, 1.5, -C * C))


def tent_profile(D, weights, C):
    """Knots and values of sum_i w_i max(0, 2C - |t - D_i|)."""
    width = 2 * C
    knots = np.unique(np.concatenate([D - width, D, D + width]))
    vals = np.sum(weights[None, :] * np.clip(width - np.abs(knots[:, None] - D[None, :]), 0, None), axis=1)
    return knots, vals


# --- norms ----------------------------------------------------------------------

def _gauss(lo, hi, n):
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1), half * w


def _spatial_weight(first, second, s, gamma):
    w = (1 + first * first + second * second) ** s
    if gamma:
        w = w * (np.sqrt(1 + first * first) / np.abs(first)) ** (2 * gamma)
    return w


def input_norms(pair: CounterexamplePair, s, b, n_nodes=GL_NODES):
    """X^{s,b} (or Y^{s,b}) norms of u and v."""
    G = window_mass(pair.C_mod, b)
    out = []
    for R, row, amp, shift in ((pair.R1, pair.k2, pair.amp_u, 0.0), (pair.R2, pair.m2, pair.amp_v, -pair.N / 2)):
        x, w = _gauss(R.lo, R.hi, n_nodes)
        first = x + shift
        total = np.sum(w * _spatial_weight(first, row, s, pair.gamma))
        out.append(abs(amp) * math.sqrt(G * total))
    return tuple(out)


def _sigma_pieces(pair: CounterexamplePair):
    a, b = pair.R1, pair.R2
    pts = sorted({a.lo + b.lo, a.lo + b.hi, a.hi + b.lo, a.hi + b.hi})
    return list(zip(pts, pts[1:]))


def _nu_range(pair, sigma):
    return max(pair.R1.lo, sigma - pair.R2.hi), min(pair.R1.hi, sigma - pair.R2.lo)


def output_columns(pair: CounterexamplePair, p, n_nodes=GL_NODES, window=None):
    """(sigma nodes, sigma weights, tau-integral per column) for the product's time profiles.

    With ``window`` the tau-integral is restricted to |t| <= window.
    """
    sig_all, wsig_all, col_all = [], [], []
    for lo, hi in _sigma_pieces(pair):
        sig, wsig = _gauss(lo, hi, n_nodes)
        for s_, ws in zip(sig, wsig):
            a, b = _nu_range(pair, s_)
            if b <= a:
                continue
            nu, wnu = _gauss(a, b, n_nodes)
            D = resonance_bad(nu, s_ - nu, pair.N)
            knots, vals = tent_profile(D, wnu, pair.C_mod)
            if window is not None:
                knots, vals = _clip_profile(knots, vals, -window, window)
            sig_all.append(s_)
            wsig_all.append(ws)
            col_all.append(weighted_square_integral(knots, vals, p))
    return np.array(sig_all), np.array(wsig_all), np.array(col_all)


def _clip_profile(knots, vals, lo, hi):
    inner = knots[(knots > lo) & (knots < hi)]
    x = np.concatenate([[lo], inner, [hi]])
    y = np.interp(x, knots, vals, left=0.0, right=0.0)
    return x, y


def output_norm(pair: CounterexamplePair, s, b, delta, n_nodes=GL_NODES, columns=None, output_gamma=None):
    """Norm of d/dx1 (u v) with modulation exponent b - 1 + delta.

    The output carries the same singular weight as the inputs unless ``output_gamma`` is
    given (-0.5 selects the dual weight |xi|/<xi>).
    """
    p = b - 1 + delta
    sig, wsig, cols = columns if columns is not None else output_columns(pair, p, n_nodes)
    xi_o = -pair.N / 2 + sig
    n_o = pair.N / 2
    g = pair.gamma if output_gamma is None else output_gamma
    weight = _spatial_weight(xi_o, n_o, s, g) * xi_o**2
    amp = abs(pair.amp_u * pair.amp_v) * _NORM
    return amp * math.sqrt(float(np.sum(wsig * weight * cols)))


def ratio(pair: CounterexamplePair, s, b, delta, n_nodes=GL_NODES, columns=None, output_gamma=None) -> float:
    nu_norm, nv_norm = input_norms(pair, s, b, n_nodes)
    return output_norm(pair, s, b, delta, n_nodes, columns, output_gamma) / (nu_norm * nv_norm)


def mass_fraction(pair: CounterexamplePair, n_nodes=GL_NODES) -> float:
    """Share of the product's squared L2 mass with output modulation |t| <= C_mod."""
    sig, wsig, full = output_columns(pair, 0.0, n_nodes)
    _, _, inner = output_columns(pair, 0.0, n_nodes, window=pair.C_mod)
    xi2 = (-pair.N / 2 + sig) ** 2
    return float(np.sum(wsig * xi2 * inner) / np.sum(wsig * xi2 * full))


@dataclass
class ScanResult:
    case: str
    s: float
    b: float
    delta: float
    N: list
    ratios: list
    slope: float
    intercept: float
    residuals: list

    @property
    def target(self):
        return SLOPE_TARGETS[self.case](self.s)


def fit_slope(Ns, values):
    if len(Ns) < 3:
        raise ValueError("need at least 3 points for a slope fit")
    x = np.log2(np.asarray(Ns, float))
    y = np.log2(np.asarray(values, float))
    slope, icpt = np.polyfit(x, y, 1)
    return float(slope), float(icpt), (y - (slope * x + icpt)).tolist()


def ratio_scan(case, N_list, s, b=None, delta=DELTA_DEFAULT, C_mod=C_MOD_DEFAULT, n_nodes=GL_NODES) -> ScanResult:
    b = 0.5 + delta if b is None else b
    rs = [ratio(build_pair(case, N, C_mod), s, b, delta, n_nodes) for N in N_list]
    slope, icpt, res = fit_slope(N_list, rs)
    return ScanResult(case, s, b, delta, list(N_list), rs, slope, icpt, res)


def write_scan(path, scans):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["case", "N", "s", "b", "delta", "ratio"])
        for sc in scans:
            for N, r in zip(sc.N, sc.ratios):
                w.writerow([sc.case, N, repr(sc.s), repr(sc.b), repr(sc.delta), repr(r)])
        for sc in scans:
            fh.write(f"# slope case={sc.case} s={sc.s!r} slope={sc.slope!r} target={sc.target!r}\n")


# --- materialization on explicit grids ------------------------------------------------

def materialize(pair: CounterexamplePair, which: str, grid: FrequencyGrid, tau: np.ndarray) -> SpaceTimeField:
    """Sample u or v onto a space-time grid; the grid must resolve the frequency support."""
    if which == "u":
        R, row, shift, amp = pair.R1, pair.k2, 0.0, pair.amp_u
    elif which == "v":
        R, row, shift, amp = pair.R2, pair.m2, -pair.N / 2, pair.amp_v
    else:
        raise ValueError("which must be 'u' or 'v'")
    need = R.length / 8
    if grid.h_xi > need:
        raise GridError(f"h_xi = {grid.h_xi} does not resolve the support (need <= {need})")
    if abs(row) > grid.k_max:
        raise GridError("integer row outside the grid")
    xi = grid.xi
    sel = (xi >= R.lo + shift) & (xi <= R.hi + shift)
    if not sel.any():
        raise GridError("support is empty on this grid")
    coeffs = np.zeros(grid.shape + (tau.size,), complex)
    l = grid.mode_index(row)
    phi = dispersion(xi[sel], float(row))
    coeffs[sel, l, :] = amp * (np.abs(tau[None, :] - phi[:, None]) <= pair.C_mod)
    return SpaceTimeField(grid, tau, coeffs)
