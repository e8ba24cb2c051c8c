"""Numerical checks of the level-set, A-set and bilinear estimates.

Measures on R x Z count the integer coordinate with weight one and integrate the
real coordinate.  Every routine returns plain numbers; sweeps collect them into
``BoundReport`` rows.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial
from scipy import fft as sfft
from scipy import integrate

from .resonance import DyadicProfile, PreconditionError, m_min

GRID_POINTS = 2**15
# absolute constant in front of the A-set bounds (counting argument gives at most 640)
A_CONSTANT = 64.0


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class BoundReport:
    bound_name: str
    empirical_constant: float
    samples: int
    worst_case: str
    N: float = 0.0
    M: float = 0.0
    L1: float = 0.0
    L2: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.empirical_constant):
            raise ValueError("empirical constant must be finite")
        if self.samples <= 0:
            raise ValueError("samples must be positive")


REPORT_HEADER = ["bound_name", "N", "M", "L1", "L2", "empirical_constant"]


def write_reports(path, reports):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for r in reports:
            w.writerow([r.bound_name, repr(float(r.N)), repr(float(r.M)), repr(float(r.L1)),
                        repr(float(r.L2)), repr(float(r.empirical_constant))])


def grows_monotonically(values, factor=2.0) -> bool:
    """True when a sweep is nondecreasing and grows by more than ``factor`` overall."""
    v = list(values)
    return all(b >= a for a, b in zip(v, v[1:])) and v[-1] > factor * v[0]


# --- vectorized dyadic helpers ---------------------------------------------------

def dyadic_arr(x):
    ax = np.abs(np.asarray(x, float))
    _, e = np.frexp(ax)
    return np.where(ax < 2, 1.0, np.ldexp(1.0, e - 1))


def dyadic_floor_arr(x):
    ax = np.abs(np.asarray(x, float))
    _, e = np.frexp(ax)
    return np.where(ax == 0, 0.0, np.ldexp(1.0, e - 1))


def m_min_arr(n_star, n_max):
    e_star = np.frexp(n_star)[1] - 1
    e_max = np.frexp(n_max)[1] - 1
    return np.ldexp(1.0, -((-e_star) // 2) - e_max)


def profile_mask(nu, k2, zeta, m2, xi, n2, profile: DyadicProfile, *, use_L=False):
    """Elementwise consistency of triples with the N, N*, M entries of ``profile``."""
    nu, zeta, xi = (np.asarray(a, float) for a in (nu, zeta, xi))
    k2, m2, n2 = (np.asarray(a, float) for a in (k2, m2, n2))
    Ns = [dyadic_arr(np.hypot(a, b)) for a, b in ((nu, k2), (zeta, m2), (xi, n2))]
    Nst = [dyadic_arr(a) for a in (nu, zeta, xi)]
    ok = np.ones(np.broadcast(nu, zeta, xi, k2, m2, n2).shape, bool)
    for i in range(3):
        ok &= Ns[i] == getattr(profile, f"N{i + 1}")
        ok &= Nst[i] == getattr(profile, f"Nstar{i + 1}")
    n_max = np.maximum(np.maximum(Ns[0], Ns[1]), Ns[2])
    th = [np.sqrt(3 * a * a + b * b) for a, b in ((nu, k2), (zeta, m2), (xi, n2))]
    gaps = (th[1] - th[2], th[0] - th[2], th[0] - th[1])
    for i in range(3):
        Mi = np.maximum(dyadic_floor_arr(gaps[i]), m_min_arr(Nst[i], n_max))
        ok &= Mi == getattr(profile, f"M{i + 1}")
    return ok


# --- level-set integrals ----------------------------------------------------------

def _phi_poly(first: Polynomial, second: float) -> Polynomial:
    return first**3 + second * second * first


def _delta_in_zeta(xi, n2, m2) -> Polynomial:
    zeta = Polynomial([0.0, 1.0])
    nu = Polynomial([-xi, -1.0])
    k2 = -n2 - m2
    return _phi_poly(nu, k2) + _phi_poly(zeta, m2) + Polynomial([xi**3 + xi * n2 * n2])


def _segments(n_star):
    if n_star == 1:
        return [(-2.0, 2.0)]
    return [(-2.0 * n_star, -n_star), (n_star, 2.0 * n_star)]


def consistent_intervals(profile: DyadicProfile, xi, n2, m2, n_grid: int = GRID_POINTS):
    """Maximal zeta-intervals on which (nu, k2; zeta, m2; xi, n2) matches the profile."""
    k2 = -n2 - m2

    def mask(z):
        return profile_mask(-xi - z, k2, z, m2, xi, n2, profile)

    out = []
    for lo, hi in _segments(profile.Nstar2):
        z = np.linspace(lo, hi, n_grid)
        z[-1] = np.nextafter(hi, lo)
        m = mask(z)
        if not m.any():
            continue
        edges = np.flatnonzero(np.diff(m.astype(np.int8)))
        starts = [0] if m[0] else []
        ends = []
        for e in edges:
            if m[e]:
                ends.append(e)
            else:
                starts.append(e + 1)
        if m[-1]:
            ends.append(z.size - 1)
        for s, e in zip(starts, ends):
            a = z[s] if s == 0 else _bisect(mask, z[s - 1], z[s])
            b = z[e] if e == z.size - 1 else _bisect(mask, z[e + 1], z[e])
            out.append((float(a), float(b)))
    return out


def _bisect(mask, outside, inside, iters=80):
    for _ in range(iters):
        mid = 0.5 * (outside + inside)
        if mid in (outside, inside):
            break
        if mask(np.array([mid]))[0]:
            inside = mid
        else:
            outside = mid
    return inside


def _real_roots(p: Polynomial):
    out = []
    for r in p.roots():
        if abs(r.imag) > 1e-7 * max(1.0, abs(r.real)):
            continue
        x = r.real
        d = p.deriv()
        for _ in range(3):
            slope = d(x)
            if slope == 0:
                break
            x -= p(x) / slope
        out.append(float(x))
    return out


def _integrate_kernel(poly: Polynomial, lam, delta, intervals, rtol):
    if not intervals:
        return 0.0
    dpoly = poly.deriv()
    power = -(1.0 + delta) / 2.0

    def f(z):
        r = lam - poly(z)
        return (1.0 + r * r) ** power

    crit = _real_roots(dpoly)
    # level crossings |lam - Delta| = 10^j split the peak into pieces of bounded dynamic range
    for j in range(0, 13):
        for sgn in (-1.0, 1.0):
            crit += _real_roots(poly - (lam + sgn * 10.0**j))
    crit += _real_roots(poly - lam)

    def run(split):
        total = 0.0
        # accuracy is judged by the split comparison below, not by quad's own estimate
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for a, b in intervals:
            pts = sorted({a, b, *[c for c in crit if a < c < b]})
            if split:
                pts = sorted(set(pts) | {0.5 * (x + y) for x, y in zip(pts, pts[1:])})
            for x, y in zip(pts, pts[1:]):
                val, _ = integrate.quad(f, x, y, limit=400, epsabs=0.0, epsrel=1e-10)
                total += val
        return total

    with warnings.catch_warnings():
        coarse, fine = run(False), run(True)
    if abs(coarse - fine) > rtol * max(abs(fine), 1e-300):
        raise QuadratureError(f"refinement changed the integral from {coarse} to {fine}")
    return fine


def _require_hypothesis(profile: DyadicProfile, i: int):
    if getattr(profile, f"M{i}") <= profile.M_min(i) and getattr(profile, f"Nstar{i}") == 1:
        raise PreconditionError(f"excluded case M{i} = M{i},min with N*{i} = 1")


def level_set_integral(lam, profile: DyadicProfile, fixed, delta, rtol=1e-2) -> float:
    """Integral over zeta of <lam - Delta>^(-1-delta) with xi, n2, m2 fixed."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    _require_hypothesis(profile, 3)
    xi, n2, m2 = fixed["xi"], fixed["n2"], fixed["m2"]
    ints = consistent_intervals(profile, xi, n2, m2)
    return _integrate_kernel(_delta_in_zeta(xi, n2, m2), lam, delta, ints, rtol)


SWAP_23 = (0, 2, 1)


def level_set_integral_swapped(lam, profile: DyadicProfile, fixed, delta, rtol=1e-2) -> float:
    """Integral over xi with zeta, n2, m2 fixed; target scale 1/(N M2)."""
    relabeled = profile.relabel(SWAP_23)
    return level_set_integral(lam, relabeled,
                              {"xi": fixed["zeta"], "n2": fixed["m2"], "m2": fixed["n2"]}, delta, rtol)


def level_set_integral_unit(lam, profile: DyadicProfile, fixed, delta, start, rtol=1e-2) -> float:
    """Variant over zeta in [start, start + 1) with no hypothesis on (M3, N*3)."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    xi, n2, m2 = fixed["xi"], fixed["n2"], fixed["m2"]
    ints = []
    for a, b in consistent_intervals(profile, xi, n2, m2):
        lo, hi = max(a, start), min(b, start + 1.0)
        if lo < hi:
            ints.append((lo, hi))
    return _integrate_kernel(_delta_in_zeta(xi, n2, m2), lam, delta, ints, rtol)


def delta_range(profile: DyadicProfile, fixed):
    poly = _delta_in_zeta(fixed["xi"], fixed["n2"], fixed["m2"])
    ints = consistent_intervals(profile, fixed["xi"], fixed["n2"], fixed["m2"])
    vals = []
    for a, b in ints:
        z = np.linspace(a, b, 257)
        vals += [float(poly(z).min()), float(poly(z).max())]
    return (min(vals), max(vals)) if vals else None


def level_set_constant(profile: DyadicProfile, fixed, delta, lambdas, which="direct", start=None):
    """max over lambda of integral * N_max * M, with M = M3 (direct, unit) or M2 (swapped)."""
    if which == "direct":
        vals = [level_set_integral(l, profile, fixed, delta) for l in lambdas]
        M = profile.M3
    elif which == "swapped":
        vals = [level_set_integral_swapped(l, profile, fixed, delta) for l in lambdas]
        M = profile.M2
    elif which == "unit":
        vals = [level_set_integral_unit(l, profile, fixed, delta, start) for l in lambdas]
        M = profile.M3
    else:
        raise ValueError(which)
    scaled = np.asarray(vals) * profile.N_max * M
    j = int(np.argmax(scaled))
    return float(scaled[j]), float(lambdas[j])


# --- A-set measure ----------------------------------------------------------------

def _shell(L):
    """Union of intervals with d(x) = L, as a list of (lo, hi)."""
    if L == 1:
        return [(-2.0, 2.0)]
    return [(-2.0 * L, -float(L)), (float(L), 2.0 * L)]


def _shell_overlap(L1, L2, shift):
    """|{x : d(x) = L1 and d(shift - x) = L2}| elementwise in ``shift``."""
    shift = np.asarray(shift, float)
    total = np.zeros_like(shift)
    for a, b in _shell(L1):
        for c, d in _shell(L2):
            # shift - x in [c, d)  <=>  x in (shift - d, shift - c]
            lo = np.maximum(a, shift - d)
            hi = np.minimum(b, shift - c)
            total += np.clip(hi - lo, 0.0, None)
    return total


def _phi(x, k):
    return x * (x * x + k * k)


def a_set_indicator(nu, k2, xi, n2, profile: DyadicProfile, relaxed=False):
    zeta = -xi - nu
    m2 = -n2 - k2
    ok = dyadic_arr(np.hypot(nu, k2)) == profile.N1
    ok &= dyadic_arr(np.hypot(zeta, m2)) == profile.N2
    ok &= dyadic_arr(math.hypot(xi, n2)) == profile.N3
    n_max = profile.N_max
    th1 = np.sqrt(3 * nu * nu + k2 * k2)
    th2 = np.sqrt(3 * zeta * zeta + m2 * m2)
    gap = th1 - th2
    if relaxed:
        ok &= np.abs(gap) <= profile.M3
    else:
        M3 = np.maximum(dyadic_floor_arr(gap), m_min_arr(dyadic_arr(xi), n_max))
        ok &= M3 == profile.M3
    return ok


def _row_windows(xi, n2, tau, rows, bound, R):
    """nu-intervals in [-R, R] where |tau + phi_1 + phi_2| <= bound, for each integer row.

    Returns flat arrays (row, lo, hi).  The sum phi_1 + phi_2 is quadratic in nu
    because the cubic terms cancel.
    """
    rows = np.asarray(rows, float)
    m2 = -n2 - rows
    a = -3.0 * xi
    b = rows * rows - 3.0 * xi * xi - m2 * m2
    c = -xi**3 - xi * m2 * m2 + tau
    cols = [np.full(rows.shape, -R), np.full(rows.shape, R)]
    for level in (-bound, bound):
        if a != 0:
            disc = b * b - 4 * a * (c - level)
            sq = np.sqrt(np.where(disc >= 0, disc, np.nan))
            cols += [(-b - sq) / (2 * a), (-b + sq) / (2 * a)]
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                cols.append(np.where(b != 0, (level - c) / b, np.nan))
    pts = np.stack(cols, axis=1)
    pts = np.where((pts >= -R) & (pts <= R), pts, np.nan)
    pts = np.sort(pts, axis=1)
    lo, hi = pts[:, :-1], pts[:, 1:]
    mid = 0.5 * (lo + hi)
    q = a * mid * mid + b[:, None] * mid + c[:, None]
    keep = (hi > lo) & (np.abs(q) <= bound)
    idx = np.nonzero(keep)
    return rows[idx[0]], lo[idx], hi[idx]


def a_set_measure(xi, n2, tau, profile: DyadicProfile, *, n_points=10**6, rng=None, relaxed=False):
    """Monte-Carlo measure of the (nu, k2, mu) set consistent with the profile at (xi, n2, tau).

    The mu direction is exact: for fixed (nu, k2) the admissible mu form the set with
    d(mu - phi_1) = L1 and d(-tau - mu - phi_2) = L2, which is empty unless
    |tau + phi_1 + phi_2| <= 2 (L1 + L2).  That condition cuts each integer row down to
    at most three nu-windows, found exactly; points are sampled uniformly on their union.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    R = 2.0 * profile.N1
    bound = 2.0 * (profile.L1 + profile.L2)
    rows, lo, hi = _row_windows(xi, n2, tau, np.arange(-int(R) + 1, int(R)), bound, R)
    if rows.size == 0:
        return 0.0
    length = hi - lo
    total_len = float(length.sum())
    cum = np.cumsum(length) / total_len
    acc = 0.0
    done = 0
    chunk = 2**18
    while done < n_points:
        size = min(chunk, n_points - done)
        pick = np.minimum(np.searchsorted(cum, rng.random(size), side="right"), rows.size - 1)
        nu = lo[pick] + length[pick] * rng.random(size)
        k2 = rows[pick]
        ok = a_set_indicator(nu, k2, xi, n2, profile, relaxed)
        zeta, m2 = -xi - nu, -n2 - k2
        shift = -tau - _phi(nu, k2) - _phi(zeta, m2)
        acc += float(np.sum(np.where(ok, _shell_overlap(profile.L1, profile.L2, shift), 0.0)))
        done += size
    return acc / n_points * total_len


def a_bounds(profile: DyadicProfile):
    """The four right-hand sides; the second is only defined for separated N1, N2."""
    N1, N2, N3 = profile.N1, profile.N2, profile.N3
    L1, L2, M3 = profile.L1, profile.L2, profile.M3
    nmax = profile.N_max
    lo_n, lo_l = min(N1, N2), min(L1, L2)
    out = {
        "first": L1 * L2 * lo_n / (nmax * M3),
        "trivial": lo_l * lo_n**2,
        "third": lo_l * M3 / N3 * nmax**2,
    }
    if N1 >= 4 * N2 or N2 >= 4 * N1:
        out["second"] = L1 * L2 * lo_n / nmax**2
    return out


def sample_reference(profile_N, rng, max_tries=100_000):
    """A random triple (nu, k2, zeta, m2, xi, n2) with prescribed N1, N2, N3 values."""
    N1, N2, N3 = profile_N
    for _ in range(max_tries):
        r1 = rng.uniform(N1, 2 * N1)
        a1 = rng.uniform(0, 2 * math.pi)
        k2 = round(r1 * math.sin(a1))
        nu = r1 * math.cos(a1)
        r3 = rng.uniform(N3, 2 * N3)
        a3 = rng.uniform(0, 2 * math.pi)
        n2 = round(r3 * math.sin(a3))
        xi = r3 * math.cos(a3)
        zeta, m2 = -xi - nu, -n2 - k2
        got = [dyadic_arr(math.hypot(a, b)) for a, b in ((nu, k2), (zeta, m2), (xi, n2))]
        if tuple(float(g) for g in got) == (N1, N2, N3):
            return nu, k2, zeta, m2, xi, n2
    raise RuntimeError("no reference triple found for the requested N values")


# --- bilinear estimates ------------------------------------------------------------

@dataclass(frozen=True)
class Square:
    x0: float
    y0: float
    side: float

    def rows(self):
        lo = math.ceil(self.y0)
        hi = math.ceil(self.y0 + self.side) - 1
        return np.arange(lo, hi + 1)

    def corners(self):
        s = self.side
        return [(self.x0, self.y0), (self.x0 + s, self.y0), (self.x0, self.y0 + s), (self.x0 + s, self.y0 + s)]


@dataclass
class BoxField:
    """Space-time Fourier data on a square, stored against the shifted time frequency."""
    square: Square
    nu: np.ndarray
    rows: np.ndarray
    mu0: float
    h_mu: float
    coeffs: np.ndarray  # (nu, row, mu) with mu = mu0 + index * h_mu

    @property
    def h_nu(self):
        return self.nu[1] - self.nu[0] if self.nu.size > 1 else self.square.side

    def l2(self):
        return math.sqrt(float(np.sum(np.abs(self.coeffs) ** 2)) * self.h_nu * self.h_mu)


def _check_geometry(R: Square, N, M, c):
    if R.side > c * M * (1 + 1e-12):
        raise ValueError(f"square side {R.side} exceeds c*M = {c * M}")
    rows = R.rows()
    if rows.size == 0:
        raise ValueError("square contains no integer row")
    for x, y in R.corners():
        r = math.hypot(x, y)
        if not 0.9 * N <= r <= (10 / 9) * 8 * N:
            raise ValueError("square leaves the annulus [9N/10, 80N/9]")


def box_mu_range(R: Square, n_nu: int):
    nu = R.x0 + (np.arange(n_nu) + 0.5) * R.side / n_nu
    rows = R.rows()
    phi = _phi(nu[:, None], rows[None, :].astype(float))
    return nu, rows, float(phi.min()), float(phi.max())


def random_box_field(R: Square, L, h_mu, rng, n_nu=16, mu0=None, n_mu=None) -> BoxField:
    nu, rows, pmin, pmax = box_mu_range(R, n_nu)
    if mu0 is None:
        mu0 = pmin - 2.0 * L
        n_mu = int(math.ceil((pmax - pmin + 4.0 * L) / h_mu)) + 1
    mu = mu0 + np.arange(n_mu) * h_mu
    phi = _phi(nu[:, None], rows[None, :].astype(float))
    mod = mu[None, None, :] - phi[..., None]
    support = dyadic_arr(mod) == L
    c = (rng.normal(size=support.shape) + 1j * rng.normal(size=support.shape)) * support
    field = BoxField(R, nu, rows, mu0, h_mu, c)
    norm = field.l2()
    if norm == 0:
        raise ValueError("modulation shell not resolved on the grid")
    field.coeffs /= norm
    return field


def product_l2(u: BoxField, v: BoxField) -> float:
    """L2 norm of the product, from the Fourier-side convolution with unitary normalization."""
    if not math.isclose(u.h_nu, v.h_nu, rel_tol=1e-12) or u.h_mu != v.h_mu:
        raise ValueError("fields must share grid steps")
    shape = [a + b - 1 for a, b in zip(u.coeffs.shape, v.coeffs.shape)]
    fshape = [sfft.next_fast_len(s) for s in shape]
    conv = sfft.ifftn(sfft.fftn(u.coeffs, fshape) * sfft.fftn(v.coeffs, fshape), fshape)
    conv = conv[tuple(slice(0, s) for s in shape)] * (u.h_nu * u.h_mu)
    sq = float(np.sum(np.abs(conv) ** 2)) * u.h_nu * u.h_mu
    return math.sqrt(sq) / (2 * math.pi) ** 1.5


def theta_witness(R1: Square, R2: Square, M) -> bool:
    """Whether some corner pair of the squares has |theta_1 - theta_2| >= M."""
    def th(p):
        return math.sqrt(3 * p[0] ** 2 + p[1] ** 2)
    return any(abs(th(p) - th(q)) >= M for p in R1.corners() for q in R2.corners())


def bilinear_rhs(variant, N, M, L1, L2, N1=None, N2=None):
    if variant == "general":
        return M * min(L1, L2) ** 0.5
    if variant == "separated":
        return (L1 * L2) ** 0.5 / math.sqrt(N)
    if variant == "molinet":
        return math.sqrt(min(N1, N2)) / max(N1, N2) * (L1 * L2) ** 0.5
    raise ValueError(variant)


def bilinear_constant(R1: Square, R2: Square, L1, L2, variant="general", *, N, M, c=1.0 / 1024,
                      draws=100, n_nu=16, h_mu=None, rng=None, max_mu_points=2**16) -> BoundReport:
    """Largest ratio ||u v|| / (rhs ||u|| ||v||) over random unit fields on the squares."""
    rng = np.random.default_rng(0) if rng is None else rng
    _check_geometry(R1, N, M, c)
    _check_geometry(R2, N, M, c)
    if variant == "separated" and not theta_witness(R1, R2, M):
        raise ValueError("separated variant needs a theta witness with gap >= M")
    h_mu = min(L1, L2) / 4.0 if h_mu is None else h_mu
    for R, L in ((R1, L1), (R2, L2)):
        _, _, pmin, pmax = box_mu_range(R, n_nu)
        if (pmax - pmin + 4 * L) / h_mu > max_mu_points:
            raise ValueError("time-frequency grid too large; raise L or shrink the squares")
    if not math.isclose(R1.side, R2.side):
        raise ValueError("squares must share a side length")
    rhs = bilinear_rhs(variant, N, M, L1, L2)
    worst, worst_draw = 0.0, -1
    for d in range(draws):
        u = random_box_field(R1, L1, h_mu, rng, n_nu)
        v = random_box_field(R2, L2, h_mu, rng, n_nu)
        ratio = product_l2(u, v) / rhs
        if ratio > worst:
            worst, worst_draw = ratio, d
    return BoundReport(f"bilinear_{variant}", worst, draws, f"draw {worst_draw}", N, M, L1, L2)
