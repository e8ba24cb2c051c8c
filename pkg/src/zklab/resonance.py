"""Resonance geometry of zero-sum frequency triples on R x Z.

A triple is three frequency pairs (nu, k2), (zeta, m2), (xi, n2) summing to
zero.  The resonance function is Delta = phi_1 + phi_2 + phi_3 and the
anisotropic radii are theta_i = sqrt(3 * first_i^2 + second_i^2).
"""

from __future__ import annotations

import csv
import itertools
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .spectrum import dispersion

C_DEFAULT = 2**12
C2_FACTOR = 512
BETA_DEFAULT = 2.0**-17
BOX_C_DEFAULT = 1.0 / 1024
N_MIN_FLOOR = 64
BAD_RADIUS = Fraction(1, 10)
BAD_MODULATION = 2048

# order in which rearrangements are tried; first match wins
PERMUTATIONS = tuple(itertools.permutations(range(3)))


class PreconditionError(ValueError):
    """A lemma check was called on data outside the lemma's hypotheses."""


@dataclass(frozen=True)
class FrequencyTriple:
    nu: float
    zeta: float
    xi: float
    k2: int
    m2: int
    n2: int

    def __post_init__(self):
        if int(self.k2) != self.k2 or int(self.m2) != self.m2 or int(self.n2) != self.n2:
            raise ValueError("second components must be integers")
        if self.k2 + self.m2 + self.n2 != 0:
            raise ValueError("integer components must sum to zero")
        total = self.nu + self.zeta + self.xi
        scale = max(abs(self.nu), abs(self.zeta), abs(self.xi), 1.0)
        if abs(total) > 4 * 2.2e-16 * scale:
            raise ValueError("continuous components must sum to zero")

    @classmethod
    def from_pairs(cls, nu, k2, zeta, m2) -> "FrequencyTriple":
        return cls(nu, zeta, -(nu + zeta), int(k2), int(m2), -int(k2) - int(m2))

    def pairs(self):
        return ((self.nu, self.k2), (self.zeta, self.m2), (self.xi, self.n2))

    def permuted(self, order) -> "FrequencyTriple":
        p = self.pairs()
        (a, ka), (b, kb), (c, kc) = (p[i] for i in order)
        return FrequencyTriple(a, b, c, ka, kb, kc)


@dataclass(frozen=True)
class TimeTriple:
    mu: float
    eta: float
    tau: float

    def __post_init__(self):
        scale = max(abs(self.mu), abs(self.eta), abs(self.tau), 1.0)
        if abs(self.mu + self.eta + self.tau) > 4 * 2.2e-16 * scale:
            raise ValueError("time frequencies must sum to zero")

    @classmethod
    def from_pair(cls, mu, eta) -> "TimeTriple":
        return cls(mu, eta, -(mu + eta))

    @classmethod
    def on_shell(cls, t: FrequencyTriple, mu_mod=0.0, eta_mod=0.0) -> "TimeTriple":
        """Time frequencies with prescribed modulations of the first two entries."""
        return cls.from_pair(dispersion(t.nu, t.k2) + mu_mod, dispersion(t.zeta, t.m2) + eta_mod)

    def values(self):
        return (self.mu, self.eta, self.tau)


def triple_delta(t: FrequencyTriple):
    """phi(nu,k2) + phi(zeta,m2) + phi(xi,n2); exact for rational inputs."""
    return dispersion(t.nu, t.k2) + dispersion(t.zeta, t.m2) + dispersion(t.xi, t.n2)


def theta_squares(t: FrequencyTriple):
    return tuple(3 * x * x + k * k for x, k in t.pairs())


def thetas(t: FrequencyTriple) -> tuple[float, float, float]:
    return tuple(math.sqrt(v) for v in theta_squares(t))


def modulations(t: FrequencyTriple, tt: TimeTriple):
    return tuple(w - dispersion(x, k) for w, (x, k) in zip(tt.values(), t.pairs()))


def max_theta_gap(t: FrequencyTriple) -> float:
    a, b, c = thetas(t)
    return max(abs(a - b), abs(a - c), abs(b - c))


def min_first_component(t: FrequencyTriple) -> float:
    return float(min(abs(t.nu), abs(t.zeta), abs(t.xi)))


def pair_norms(t: FrequencyTriple) -> tuple[float, float, float]:
    return tuple(math.hypot(float(x), float(k)) for x, k in t.pairs())


# --- dyadic bookkeeping -------------------------------------------------------

def dyadic(x) -> float:
    """Power of two with d <= |x| < 2d, and 1 whenever |x| < 2."""
    ax = abs(float(x))
    if ax < 2:
        return 1.0
    _, e = math.frexp(ax)
    return math.ldexp(1.0, e - 1)


def dyadic_floor(x) -> float:
    """Largest power of two (any integer exponent) not exceeding |x|; 0 at 0."""
    ax = abs(float(x))
    if ax == 0:
        return 0.0
    _, e = math.frexp(ax)
    return math.ldexp(1.0, e - 1)


def exponent(d: float) -> int:
    m, e = math.frexp(d)
    if m != 0.5:
        raise ValueError(f"{d} is not a power of two")
    return e - 1


def m_min(n_star: float, n_max: float) -> float:
    """Smallest power of two that is >= sqrt(n_star) / n_max."""
    e_star, e_max = exponent(n_star), exponent(n_max)
    return math.ldexp(1.0, -(-e_star // 2) - e_max)


@dataclass(frozen=True)
class DyadicProfile:
    N1: float
    N2: float
    N3: float
    Nstar1: float
    Nstar2: float
    Nstar3: float
    L1: float
    L2: float
    L3: float
    M1: float
    M2: float
    M3: float

    def __post_init__(self):
        for name in ("N1", "N2", "N3", "Nstar1", "Nstar2", "Nstar3", "L1", "L2", "L3"):
            v = getattr(self, name)
            if v < 1:
                raise ValueError(f"{name} must be >= 1")
            exponent(v)
        for name in ("M1", "M2", "M3"):
            exponent(getattr(self, name))
        if self.N_med < self.N_max / 4:
            raise ValueError("N_med must be at least N_max / 4")
        for i in (1, 2, 3):
            if getattr(self, f"M{i}") < self.M_min(i):
                raise ValueError(f"M{i} below its floor {self.M_min(i)}")

    @property
    def Ns(self):
        return (self.N1, self.N2, self.N3)

    @property
    def N_max(self) -> float:
        return max(self.Ns)

    @property
    def N_min(self) -> float:
        return min(self.Ns)

    @property
    def N_med(self) -> float:
        return sorted(self.Ns)[1]

    def M_min(self, i: int) -> float:
        return m_min(getattr(self, f"Nstar{i}"), self.N_max)

    def relabel(self, order) -> "DyadicProfile":
        """Profile for the triple with its entries permuted by ``order``."""
        vals = {}
        for group in ("N", "Nstar", "L"):
            src = [getattr(self, f"{group}{i + 1}") for i in order]
            for i, v in enumerate(src):
                vals[f"{group}{i + 1}"] = v
        # M_i is attached to the pair of the other two entries, so it follows index i
        for i, j in enumerate(order):
            vals[f"M{i + 1}"] = getattr(self, f"M{j + 1}")
        return DyadicProfile(**vals)


def dyadic_profile(t: FrequencyTriple, tt: TimeTriple) -> DyadicProfile:
    norms = pair_norms(t)
    Ns = [dyadic(v) for v in norms]
    Nstars = [dyadic(x) for x, _ in t.pairs()]
    Ls = [dyadic(m) for m in modulations(t, tt)]
    th = thetas(t)
    n_max = max(Ns)
    gaps = (th[1] - th[2], th[0] - th[2], th[0] - th[1])
    Ms = [max(dyadic_floor(g), m_min(ns, n_max)) for g, ns in zip(gaps, Nstars)]
    return DyadicProfile(*Ns, *Nstars, *Ls, *Ms)


# --- bad set and classification -------------------------------------------------

def _box_conditions(t: FrequencyTriple, order) -> bool:
    (a, ka), (b, kb), (c, kc) = (t.pairs()[i] for i in order)
    if ka % 2:
        return False
    half = ka // 2
    if kb != -half or kc != -half:
        return False
    r = float(BAD_RADIUS)
    return abs(a) <= r and abs(b + ka / 2) <= r and abs(c - ka / 2) <= r


def box_conditions(t: FrequencyTriple) -> bool:
    """Triangle-box conditions up to rearrangement (no modulation clause)."""
    return any(_box_conditions(t, order) for order in PERMUTATIONS)


def is_bad(t: FrequencyTriple, tt: TimeTriple) -> bool:
    mods = modulations(t, tt)
    for order in PERMUTATIONS:
        if not _box_conditions(t, order):
            continue
        k = t.pairs()[order[0]][1]
        bound = BAD_MODULATION * abs(k) ** 3
        if all(abs(mods[i]) <= bound for i in order):
            return True
    return False


@dataclass(frozen=True)
class Classification:
    tag: str  # "M", "bad" or "out_of_range"
    M: float | None = None
    kind: int | None = None
    N_min: float | None = None
    beta: float = BETA_DEFAULT

    def __str__(self):
        if self.tag == "M":
            return f"M={self.M:g} kind={self.kind}"
        return self.tag


def annulus_scale(t: FrequencyTriple) -> float | None:
    """Dyadic N_min if the triple lies in the S0 annulus with N_min >= 64, else None."""
    norms = pair_norms(t)
    n_min = dyadic(min(norms))
    if min(norms) < N_MIN_FLOOR or max(norms) > 8 * n_min:
        return None
    return n_min


def classify(t: FrequencyTriple, beta: float = BETA_DEFAULT, C: float = C_DEFAULT,
             C2: float | None = None) -> Classification:
    C2 = C2_FACTOR * C if C2 is None else C2
    n_min = annulus_scale(t)
    if n_min is None:
        return Classification("out_of_range", beta=beta)
    if box_conditions(t):
        return Classification("bad", N_min=n_min, beta=beta)
    gap = max_theta_gap(t)
    low = min_first_component(t)
    M = n_min / C2
    if gap > n_min / 1000:
        return Classification("M", M, 2, n_min, beta)
    # the top scale only needs the stopping test; below it, failing to stop at 2M
    # is exactly the "did not stop before M" clause
    while M >= beta:
        if low >= 2 * C * M:
            return Classification("M", M, 1, n_min, beta)
        if gap >= M:
            return Classification("M", M, 2, n_min, beta)
        M /= 2
    return Classification("bad", N_min=n_min, beta=beta)


# --- lemma checks ----------------------------------------------------------------

def rotate(w, angle):
    c, s = math.cos(angle), math.sin(angle)
    return (c * w[0] - s * w[1], s * w[0] + c * w[1])


def localization_check(w1, w2, w3, eps: float) -> bool:
    """Containment of w2, w3 in the 5*eps balls around the +-2pi/3 rotations of w1."""
    ws = [np.asarray(w, float) for w in (w1, w2, w3)]
    r1 = float(np.hypot(*ws[0]))
    slack = 1e-12 * max(r1, 1.0)
    if np.hypot(*(ws[0] + ws[1] + ws[2])) > slack:
        raise PreconditionError("vectors must sum to zero")
    if not 0 <= eps < r1 / 100:
        raise PreconditionError("need 0 <= eps < |w1|/100")
    for w in ws[1:]:
        if abs(np.hypot(*w) - r1) > eps + slack:
            raise PreconditionError("norms differ from |w1| by more than eps")
    radius = 5 * eps + slack
    for sign in (1, -1):
        a = np.array(rotate(ws[0], sign * 2 * math.pi / 3))
        b = np.array(rotate(ws[0], -sign * 2 * math.pi / 3))
        if np.hypot(*(ws[1] - a)) <= radius and np.hypot(*(ws[2] - b)) <= radius:
            return True
    return False


def in_s1(t: FrequencyTriple) -> bool:
    n_min = annulus_scale(t)
    return n_min is not None and max_theta_gap(t) <= n_min / 1000


def exact_delta(t: FrequencyTriple) -> Fraction:
    q = FrequencyTriple(Fraction(t.nu), Fraction(t.zeta), -(Fraction(t.nu) + Fraction(t.zeta)),
                        t.k2, t.m2, t.n2)
    return triple_delta(q)


def coro_lower_bound_check(t: FrequencyTriple, C: float = C_DEFAULT) -> bool:
    """|Delta| >= N_min^2/100 * min(|nu|,|zeta|,|xi|) under the lemma's hypotheses."""
    if not in_s1(t):
        raise PreconditionError("triple is not in S1")
    low = min_first_component(t)
    if low < C * max_theta_gap(t):
        raise PreconditionError("min first component below C * max theta gap")
    n_min = annulus_scale(t)
    delta = abs(exact_delta(t))
    return delta >= Fraction(n_min) ** 2 / 100 * Fraction(low)


def delta_bad_expansion(nu, omega, k):
    """Leading expansion of Delta on the bad set versus its exact value.

    The triple is (nu, k), (-k/2 + omega, -k/2), (k/2 - nu - omega, -k/2).
    Returns (approx, exact, err_bound) with err_bound = 3 (|nu|^3 + |omega|^3),
    which dominates exact - approx = -3 nu omega (nu + omega).
    """
    if abs(nu) > 0.1 or abs(omega) > 0.1:
        raise PreconditionError("need |nu|, |omega| <= 1/10")
    fn, fo, fk = Fraction(nu), Fraction(omega), Fraction(k)
    zeta = -fk / 2 + fo
    xi = -fn - zeta
    exact = dispersion(fn, fk) + dispersion(zeta, -fk / 2) + dispersion(xi, -fk / 2)
    approx = 3 * fn * fo * fk + Fraction(3, 2) * fk * fn * fn
    bound = 3 * (abs(fn) ** 3 + abs(fo) ** 3)
    return float(approx), float(exact), float(bound)


def bad_expansion_constant(samples) -> float:
    """Largest |exact - approx| / (|nu|^3 + |omega|^3) over (nu, omega, k) samples."""
    worst = 0.0
    for nu, omega, k in samples:
        fn, fo, fk = Fraction(nu), Fraction(omega), Fraction(k)
        denom = abs(fn) ** 3 + abs(fo) ** 3
        if denom == 0:
            continue
        zeta = -fk / 2 + fo
        exact = dispersion(fn, fk) + dispersion(zeta, -fk / 2) + dispersion(-fn - zeta, -fk / 2)
        approx = 3 * fn * fo * fk + Fraction(3, 2) * fk * fn * fn
        worst = max(worst, float(abs(exact - approx) / denom))
    return worst


def dnu_delta_central(t: FrequencyTriple, h: float) -> float:
    """Central difference of Delta in nu with zeta, k2, m2 held fixed."""
    plus = FrequencyTriple.from_pairs(t.nu + h, t.k2, t.zeta, t.m2)
    minus = FrequencyTriple.from_pairs(t.nu - h, t.k2, t.zeta, t.m2)
    return (triple_delta(plus) - triple_delta(minus)) / (2 * h)


def dnu_delta_exact(t: FrequencyTriple) -> float:
    a, _, c = theta_squares(t)
    return a - c


# --- samplers ---------------------------------------------------------------------

def rotated_triangle(k: int, m: int, sign: int = 1):
    """First components (nu, zeta) making theta_1 = theta_2 = theta_3 for integers k, m."""
    n = -k - m
    P = (m * m - k * k) / 3.0
    Q = (n * n - m * m) / 3.0
    lin = 2 * Q + 4 * P
    y = (lin + math.sqrt(lin * lin + 12 * Q * Q)) / 6.0
    if y <= 0:
        return None
    a = sign * math.sqrt(y)
    return a, -(y + Q) / (2 * a)


def sample_localization(rng: np.random.Generator, count: int, batch: int = 200_000):
    """Uniform rejection samples (w1, w2, w3, eps) satisfying the localization hypotheses."""
    out = []
    got = 0
    while got < count:
        r1 = np.exp(rng.uniform(0.0, np.log(1e4), batch))
        a1 = rng.uniform(0, 2 * np.pi, batch)
        eps = rng.uniform(0, 1, batch) * r1 / 100
        r2 = r1 + rng.uniform(-1, 1, batch) * eps
        # every admissible w2 lies within 0.1 rad of a +-2pi/3 rotation
        sgn = np.where(rng.random(batch) < 0.5, 1.0, -1.0)
        a2 = a1 + sgn * 2 * np.pi / 3 + rng.uniform(-0.1, 0.1, batch)
        w1 = np.stack([r1 * np.cos(a1), r1 * np.sin(a1)], -1)
        w2 = np.stack([r2 * np.cos(a2), r2 * np.sin(a2)], -1)
        w3 = -w1 - w2
        ok = np.abs(np.hypot(w3[:, 0], w3[:, 1]) - r1) <= eps
        idx = np.nonzero(ok)[0][: count - got]
        out.append((w1[idx], w2[idx], w3[idx], eps[idx]))
        got += idx.size
    return tuple(np.concatenate([o[i] for o in out]) for i in range(4))


def sample_coro(rng: np.random.Generator, count: int, k_range: int = 4096, C: float = C_DEFAULT):
    """Perturbed rotated-triangle triples satisfying the hypotheses of the lower-bound lemma."""
    samples = []
    while len(samples) < count:
        k, m = (int(v) for v in rng.integers(-k_range, k_range + 1, 2))
        sol = rotated_triangle(k, m, 1 if rng.random() < 0.5 else -1)
        if sol is None:
            continue
        nu, zeta = sol
        low = min(abs(nu), abs(zeta), abs(nu + zeta))
        scale = low / (8 * C) * math.exp(rng.uniform(math.log(1e-6), 0.0))
        nu += scale * rng.uniform(-1, 1)
        zeta += scale * rng.uniform(-1, 1)
        t = FrequencyTriple.from_pairs(nu, k, zeta, m)
        if in_s1(t) and min_first_component(t) >= C * max_theta_gap(t):
            samples.append(t)
    return samples


def sample_annulus_triples(rng: np.random.Generator, count: int, n_max_exp: int = 10):
    """Mixture of generic annulus triples, near-triangle triples and near-rotated triangles."""
    out = []
    while len(out) < count:
        branch = rng.random()
        N = 2.0 ** rng.integers(6, n_max_exp + 1)
        if branch < 0.4:
            k, m = (int(v) for v in rng.integers(-8 * N, 8 * N + 1, 2))
            nu, zeta = rng.uniform(-8 * N, 8 * N, 2)
        elif branch < 0.75:
            k = 2 * int(rng.integers(N // 2, 4 * N + 1)) * (1 if rng.random() < 0.5 else -1)
            radius = 10 ** rng.uniform(-7, 0.5)
            nu = radius * rng.uniform(-1, 1)
            zeta = -k / 2 + radius * rng.uniform(-1, 1)
            m = -k // 2 + int(rng.choice([0, 0, 0, 1, -1]))
        else:
            k, m = (int(v) for v in rng.integers(-4 * N, 4 * N + 1, 2))
            sol = rotated_triangle(k, m, 1 if rng.random() < 0.5 else -1)
            if sol is None:
                continue
            eps = 10 ** rng.uniform(-8, 0)
            nu, zeta = sol[0] + eps * rng.uniform(-1, 1), sol[1] + eps * rng.uniform(-1, 1)
        t = FrequencyTriple.from_pairs(float(nu), k, float(zeta), m)
        if annulus_scale(t) is not None:
            out.append(t)
    return out


# --- covering of S_M by boxes ------------------------------------------------------

@dataclass(frozen=True)
class Box:
    i: int
    j: int
    side: float

    @property
    def x_range(self):
        return (self.i * self.side, (self.i + 1) * self.side)

    @property
    def rows(self):
        lo = math.ceil(self.j * self.side - 1e-12)
        hi = math.ceil((self.j + 1) * self.side - 1e-12) - 1
        return (lo, hi)

    @property
    def center(self):
        return ((self.i + 0.5) * self.side, (self.j + 0.5) * self.side)


@dataclass
class Covering:
    M: float
    N_min: float
    side: float
    triples: list  # (Box, Box, Box, kind)
    line_box_counts: tuple

    def box_multiplicity(self) -> Counter:
        counts = Counter()
        for b1, b2, b3, _ in self.triples:
            for b in {b1, b2, b3}:
                counts[b] += 1
        return counts

    def index(self):
        return {(b1.i, b1.j, b2.i, b2.j, b3.i, b3.j) for b1, b2, b3, _ in self.triples}

    def contains(self, t: FrequencyTriple) -> bool:
        """Whether some rearrangement of t (minimal first component first) lies in a triple."""
        idx = self.index()
        pts = t.pairs()
        first = min(range(3), key=lambda i: abs(pts[i][0]))
        rest = [i for i in range(3) if i != first]
        for a, b in (rest, rest[::-1]):
            key = []
            for p in (pts[first], pts[a], pts[b]):
                key += [math.floor(p[0] / self.side), math.floor(p[1] / self.side)]
            if tuple(key) in idx:
                return True
        return False


def _theta_interval(x0, x1, y0, y1):
    dx = 0.0 if x0 <= 0 <= x1 else min(abs(x0), abs(x1))
    dy = 0.0 if y0 <= 0 <= y1 else min(abs(y0), abs(y1))
    lo = math.sqrt(3 * dx * dx + dy * dy)
    hi = math.sqrt(3 * max(x0 * x0, x1 * x1) + max(y0 * y0, y1 * y1))
    return lo, hi


def _line_distance(x, y):
    """Distances from (x, y) to the lines (0,t), (-t/2,-t/2), (t/2,-t/2)."""
    s2 = math.sqrt(2.0)
    return (abs(x), abs(x - y) / s2, abs(x + y) / s2)


def cover_SM(M: float, N_min: float, c: float = BOX_C_DEFAULT, *, C: float = C_DEFAULT,
             C2: float | None = None, beta: float = BETA_DEFAULT, samples_per_triple: int = 64,
             theta_window: tuple[float, float] | None = None,
             rng: np.random.Generator | None = None) -> Covering:
    """Cover the non-extremal M-interactions at scale N_min by triples of cM-boxes.

    Boxes tile R x Z with side cM and are kept when they meet the region R_M: points
    within (4 sqrt(3) C + 10) M of the three lines and with norm in [N_min, 8 N_min].
    A triple (B1, B2, B3) is kept when a zero-sum point with pairwise theta gaps below
    2M and |first component| < 4CM in B1 may exist; the rotation lemma confines B2
    to a ball of radius 10M around the +-2pi/3 image of B1.  Kind 2 is assigned when a
    sampled zero-sum point of the triple has some theta gap >= M.

    ``theta_window`` restricts the cover to triples whose first radius theta_1 lies in
    the window; the full cover is the union over windows.
    """
    C2 = C2_FACTOR * C if C2 is None else C2
    top = N_min / C2
    if not (beta <= M < top):
        raise ValueError(f"M={M} outside [beta, N_min/C2) = [{beta}, {top})")
    if M > N_min / 200:
        raise ValueError("M too large for the rotation lemma (need 2M < N_min/100)")
    rng = np.random.default_rng(0) if rng is None else rng
    s = c * M
    width = (4 * math.sqrt(3) * C + 10) * M
    diag = s * math.sqrt(2)
    r_lo, r_hi = N_min, 8 * N_min

    def in_region(i, j):
        b = Box(i, j, s)
        lo_row, hi_row = b.rows
        if lo_row > hi_row:
            return None
        cx, cy = b.center
        r = math.hypot(cx, cy)
        if r + diag < r_lo or r - diag > r_hi:
            return None
        d = _line_distance(cx, cy)
        near = [q for q in range(3) if d[q] <= width + diag]
        if near and theta_window is not None:
            x0, x1 = b.x_range
            th = _theta_interval(x0, x1, lo_row, hi_row)
            if th[1] < theta_window[0] - 2 * M or th[0] > theta_window[1] + 2 * M:
                return None
        return near or None

    extent = int(math.ceil((r_hi + diag) / s)) + 1
    line_counts = [0, 0, 0]
    region = {}
    for i in range(-extent, extent + 1):
        cx = (i + 0.5) * s
        if abs(cx) > r_hi + diag:
            continue
        for j in range(-extent, extent + 1):
            near = in_region(i, j)
            if near:
                region[(i, j)] = Box(i, j, s)
                for q in near:
                    line_counts[q] += 1

    x_cut = 4 * C * M
    rot_radius = 10 * M + 2 * diag
    triples = []
    for (i1, j1), b1 in region.items():
        x0, x1 = b1.x_range
        if min(abs(x0), abs(x1)) >= x_cut and not x0 <= 0 <= x1:
            continue
        r0, r1 = b1.rows
        th1 = _theta_interval(x0, x1, r0, r1)
        if theta_window is not None and (th1[1] < theta_window[0] or th1[0] > theta_window[1]):
            continue
        cx, cy = b1.center
        for sign in (1, -1):
            # rotation acts on (sqrt(3) x, y)
            rx, ry = rotate((math.sqrt(3) * cx, cy), sign * 2 * math.pi / 3)
            tx, ty = rx / math.sqrt(3), ry
            di = int(math.ceil(rot_radius / math.sqrt(3) / s)) + 1
            dj = int(math.ceil(rot_radius / s)) + 1
            ci, cj = math.floor(tx / s), math.floor(ty / s)
            for i2 in range(ci - di, ci + di + 1):
                for j2 in range(cj - dj, cj + dj + 1):
                    b2 = region.get((i2, j2))
                    if b2 is None:
                        continue
                    y0, y1 = b2.x_range
                    q0, q1 = b2.rows
                    th2 = _theta_interval(y0, y1, q0, q1)
                    if th2[0] > th1[1] + 2 * M or th1[0] > th2[1] + 2 * M:
                        continue
                    # third box must meet -(B1 + B2)
                    lo_x, hi_x = -(x1 + y1), -(x0 + y0)
                    lo_n, hi_n = -(r1 + q1), -(r0 + q0)
                    for i3 in range(math.floor(lo_x / s), math.floor(hi_x / s) + 1):
                        for j3 in range(math.floor(lo_n / s) - 1, math.floor(hi_n / s) + 2):
                            b3 = region.get((i3, j3))
                            if b3 is None:
                                continue
                            z0, z1 = b3.x_range
                            p0, p1 = b3.rows
                            if p1 < lo_n or p0 > hi_n or z1 < lo_x or z0 > hi_x:
                                continue
                            th3 = _theta_interval(z0, z1, p0, p1)
                            if th3[0] > max(th1[1], th2[1]) + 2 * M or min(th1[0], th2[0]) > th3[1] + 2 * M:
                                continue
                            kind = _box_triple_kind(b1, b2, b3, M, samples_per_triple, rng)
                            if kind is not None:
                                triples.append((b1, b2, b3, kind))
    return Covering(M, N_min, s, triples, tuple(line_counts))


def _box_triple_kind(b1, b2, b3, M, n_samples, rng):
    """2 if a sampled zero-sum point of the boxes has a theta gap >= M, else 1.

    Returns None if no zero-sum point is realizable with integer rows.
    """
    r0, r1 = b1.rows
    q0, q1 = b2.rows
    p0, p1 = b3.rows
    ks = np.arange(r0, r1 + 1)
    ms = np.arange(q0, q1 + 1)
    kk, mm = np.meshgrid(ks, ms, indexing="ij")
    nn = -kk - mm
    ok = (nn >= p0) & (nn <= p1)
    if not np.any(ok):
        return None
    kk, mm, nn = kk[ok], mm[ok], nn[ok]
    x0, x1 = b1.x_range
    y0, y1 = b2.x_range
    z0, z1 = b3.x_range
    pick = rng.integers(0, kk.size, n_samples)
    nu = rng.uniform(x0, x1, n_samples)
    lo = np.maximum(y0, -z1 - nu)
    hi = np.minimum(y1, -z0 - nu)
    good = lo <= hi
    if not np.any(good):
        # the x-constraint is feasible by construction; fall back to the box corners
        return 1
    nu, lo, hi, pick = nu[good], lo[good], hi[good], pick[good]
    zeta = lo + (hi - lo) * rng.random(nu.size)
    xi = -nu - zeta
    k, m, n = kk[pick], mm[pick], nn[pick]
    t1 = np.sqrt(3 * nu**2 + k**2)
    t2 = np.sqrt(3 * zeta**2 + m**2)
    t3 = np.sqrt(3 * xi**2 + n**2)
    gap = np.maximum(np.maximum(abs(t1 - t2), abs(t1 - t3)), abs(t2 - t3))
    return 2 if np.any(gap >= M) else 1


def c3_constant(C: float, c: float) -> int:
    return int(math.ceil(2 * C / c + 1)) ** 4


# --- CSV writers -----------------------------------------------------------------

def census_rows(classifications):
    counts = Counter()
    for cl in classifications:
        kind = {"M": None, "bad": "bad", "out_of_range": "out_of_range"}[cl.tag] or str(cl.kind)
        counts[(cl.N_min if cl.N_min is not None else "", cl.M if cl.M is not None else "", kind)] += 1

    def key(item):
        (n, m, kind), _ = item
        return (n == "", n if n != "" else 0, m == "", m if m != "" else 0, kind)

    return [(n, m, kind, cnt) for (n, m, kind), cnt in sorted(counts.items(), key=key)]


def write_census(path, classifications):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["N_min", "M", "kind", "count"])
        for n, m, kind, cnt in census_rows(classifications):
            w.writerow([_fmt(n), _fmt(m), kind, cnt])


def write_covering(path, cov: Covering):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["M", "box_index", "center_x", "center_y", "kind"])
        for t_idx, (b1, b2, b3, kind) in enumerate(cov.triples):
            for pos, b in enumerate((b1, b2, b3)):
                cx, cy = b.center
                w.writerow([_fmt(cov.M), 3 * t_idx + pos, repr(cx), repr(cy), kind])


def _fmt(v):
    if v == "" or v is None:
        return ""
    return repr(float(v))
