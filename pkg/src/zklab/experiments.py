"""Sweeps shared by the command line runner and the acceptance suite.

Each sweep is deterministic given its seed and returns plain summaries plus the
rows the runner writes to CSV.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import counterexamples as ce
from . import measure as ms
from . import randomize as rz
from . import resonance as rs
from .resonance import FrequencyTriple, PreconditionError, TimeTriple


@dataclass
class SweepResult:
    name: str
    samples: int
    failures: int
    worst: float = 0.0
    rows: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.failures == 0


def _pmap(fn, items, threads=1):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _child_rngs(seed, n):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


# --- resonance lemmas -------------------------------------------------------------

def localization_sweep(count, seed=0) -> SweepResult:
    w1, w2, w3, eps = rs.sample_localization(np.random.default_rng(seed), count)
    failures = 0
    for a, b, c, e in zip(w1, w2, w3, eps):
        if not rs.localization_check(a, b, c, e):
            failures += 1
    return SweepResult("localization", int(w1.shape[0]), failures)


def coro_sweep(count, seed=0, C=rs.C_DEFAULT, k_range=4096) -> SweepResult:
    failures = 0
    worst = math.inf
    samples = rs.sample_coro(np.random.default_rng(seed), count, k_range, C)
    for t in samples:
        if not rs.coro_lower_bound_check(t, C):
            failures += 1
        low = rs.min_first_component(t)
        if low > 0:
            margin = abs(float(rs.exact_delta(t))) / (rs.annulus_scale(t) ** 2 / 100 * low)
            worst = min(worst, margin)
    return SweepResult("coro", len(samples), failures, worst)


def partition_sweep(count, seed=0, beta=rs.BETA_DEFAULT, C=rs.C_DEFAULT, C2=None,
                    n_max_exp=10) -> SweepResult:
    """Classify annulus triples; a failure is a missing tag or a Bad verdict outside the box."""
    triples = rs.sample_annulus_triples(np.random.default_rng(seed), count, n_max_exp)
    verdicts = []
    failures = 0
    for t in triples:
        c = rs.classify(t, beta, C, C2)
        verdicts.append(c)
        if c.tag not in ("M", "bad"):
            failures += 1
        elif c.tag == "bad" and not rs.box_conditions(t):
            failures += 1
        elif c.tag == "M" and c.kind not in (1, 2):
            failures += 1
    res = SweepResult("partition", len(triples), failures)
    res.rows = verdicts
    return res


# --- delta calculus ---------------------------------------------------------------

def derivative_sweep(count, seed=0, rel_floor=1e-3) -> SweepResult:
    """Central difference in nu against theta_1^2 - theta_3^2.

    Triples where the exact derivative is below ``rel_floor * N^2`` are redrawn, since
    a relative error is meaningless at a zero of the derivative.
    """
    rng = np.random.default_rng(seed)
    worst, got = 0.0, 0
    while got < count:
        N = 2.0 ** rng.integers(6, 12)
        k, m = (int(v) for v in rng.integers(-4 * N, 4 * N, 2))
        nu, zeta = rng.uniform(-4 * N, 4 * N, 2)
        t = FrequencyTriple.from_pairs(nu, k, zeta, m)
        exact = rs.dnu_delta_exact(t)
        if abs(exact) < rel_floor * N * N:
            continue
        approx = rs.dnu_delta_central(t, 1e-4 * N)
        worst = max(worst, abs(approx - exact) / abs(exact))
        got += 1
    return SweepResult("dnu_delta", got, int(worst > 1e-6), worst)


def triangle_sweep(p_values) -> SweepResult:
    """Exact Delta and thetas at the triangle vertices (0,p), (-p/2,-p/2), (p/2,-p/2)."""
    failures = 0
    for p in p_values:
        half = Fraction(p, 2)
        t = FrequencyTriple.from_pairs(Fraction(0), p, -half, -p // 2) if p % 2 == 0 else None
        if t is None:
            # odd p: the second coordinates are not integers, check the polynomial directly
            vals = [(Fraction(0), Fraction(p)), (-half, -half), (half, -half)]
            delta = sum(x * (x * x + k * k) for x, k in vals)
            ok = delta == 0
        else:
            th = rs.theta_squares(t)
            ok = rs.triple_delta(t) == 0 and th[0] == th[1] == th[2]
        failures += not ok
    return SweepResult("triangle", len(list(p_values)), failures)


def expansion_sweep(count, seed=0, k_max=2**10, limit=10.0) -> SweepResult:
    rng = np.random.default_rng(seed)
    samples = [(float(rng.uniform(-0.1, 0.1)), float(rng.uniform(-0.1, 0.1)), int(rng.integers(-k_max, k_max + 1)))
               for _ in range(count)]
    c = rs.bad_expansion_constant(samples)
    return SweepResult("bad_expansion", count, int(c > limit), c)


# --- measure bounds ---------------------------------------------------------------

def near_triangle_profile(N, rng, max_tries=100_000):
    """A perturbed rotated triangle whose profile has N_max = N and avoids the excluded case."""
    for _ in range(max_tries):
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
    raise RuntimeError(f"no admissible profile found at N = {N}")


def level_set_sweep(N_values=(128, 256, 512, 1024), per_N=5, n_lambda=50, delta=0.1, seed=0,
                    threads=1) -> SweepResult:
    """Scaled level-set integrals; the constant at each N is the worst over its profiles and lambdas.

    ``worst`` is the spread max/min of the per-N constants and a failure is a spread above 2.
    """
    rngs = _child_rngs(seed, len(N_values))

    def one(job):
        N, rng = job
        out = []
        for j in range(per_N):
            t, prof = near_triangle_profile(N, rng)
            fixed = {"xi": t.xi, "n2": t.n2, "m2": t.m2}
            lo, hi = ms.delta_range(prof, fixed)
            lams = np.linspace(lo - 5, hi + 5, n_lambda)
            c, lam = ms.level_set_constant(prof, fixed, delta, lams)
            out.append(ms.BoundReport("level_set", c, n_lambda, f"N={N} profile={j} lambda={lam!r}",
                                      N, prof.M3, prof.L1, prof.L2))
        return out

    reports = [r for chunk in _pmap(one, zip(N_values, rngs), threads) for r in chunk]
    per = [max(r.empirical_constant for r in reports if r.N == N) for N in N_values]
    spread = max(per) / min(per)
    return SweepResult("level_set", len(reports) * n_lambda, int(spread > 2.0), spread, reports)


def _a_config(rng):
    while True:
        N1 = 2.0 ** rng.integers(6, 10)
        a = int(rng.integers(0, 5))
        N2 = N1 / 2**a
        N3 = N1 if a >= 2 else N1 / 2 ** int(rng.integers(0, 3))
        try:
            nu, k, ze, m, _, _ = ms.sample_reference((N1, N2, N3), rng, max_tries=20_000)
        except RuntimeError:
            continue
        t = FrequencyTriple.from_pairs(nu, k, ze, m)
        mods = [float(s * 10 ** rng.uniform(0, 3 * math.log10(N1))) for s in rng.choice([-1, 1], 2)]
        tt = TimeTriple.on_shell(t, *mods)
        try:
            return t, tt, rs.dyadic_profile(t, tt)
        except ValueError:
            continue


def a_bounds_sweep(count, seed=0, n_points=10**6, constant=ms.A_CONSTANT, threads=1) -> SweepResult:
    """A-set measures against constant * min of the available bounds; ``worst`` is the largest ratio."""
    rngs = _child_rngs(seed, count)

    def one(rng):
        t, tt, prof = _a_config(rng)
        meas = ms.a_set_measure(t.xi, t.n2, tt.tau, prof, n_points=n_points, rng=rng)
        bounds = ms.a_bounds(prof)
        name = min(bounds, key=bounds.get)
        return ms.BoundReport(f"a_set_{name}", meas / bounds[name], n_points,
                              f"N=({prof.N1},{prof.N2},{prof.N3})", prof.N_max, prof.M3, prof.L1, prof.L2)

    reports = _pmap(one, rngs, threads)
    worst = max(r.empirical_constant for r in reports)
    fails = sum(r.empirical_constant > constant for r in reports)
    return SweepResult("a_bounds", count, fails, worst, reports)


def bilinear_sweep(N_values=(128, 256, 512, 1024), variant="general", draws=10, c=1 / 64,
                   seed=0, threads=1) -> SweepResult:
    """Empirical bilinear constants on two squares a theta gap apart; failure is monotone growth by more than 2."""
    rngs = _child_rngs(seed, len(N_values))

    def one(job):
        N, rng = job
        M = N / 128
        side = c * M
        r1 = ms.Square(0.3, 1.5 * N - side / 2, side)
        r2 = ms.Square(0.75 * N + N / 64, -0.75 * N - side / 2, side)
        L = N * N / 8
        return ms.bilinear_constant(r1, r2, L, L, variant, N=N, M=M, c=c, draws=draws, rng=rng)

    reports = _pmap(one, zip(N_values, rngs), threads)
    consts = [r.empirical_constant for r in reports]
    return SweepResult(f"bilinear_{variant}", draws * len(reports), int(ms.grows_monotonically(consts)),
                       max(consts), reports)


# --- counterexamples and randomization --------------------------------------------

def counterexample_scans(case, s_values, N_list, b=None, delta=ce.DELTA_DEFAULT,
                         C_mod=ce.C_MOD_DEFAULT, n_nodes=ce.GL_NODES, threads=1):
    return _pmap(lambda s: ce.ratio_scan(case, N_list, s, b, delta, C_mod, n_nodes), s_values, threads)


def variance_check(alpha=0.9, K_trunc=16, seeds=200, s=None, seed0=0):
    """Sample mean of ||u^omega||^2_{H^s} against the analytic sum; returns (mean, expected)."""
    from .norms import sobolev_norm

    s = alpha - 1 - 0.1 if s is None else s
    grid = rz.census_grid(K_trunc)
    u0 = rz.power_law_data(grid, alpha)
    vals = [sobolev_norm(rz.randomize_data(u0, rz.RandomizationParams(alpha, seed0 + j, K_trunc)), s) ** 2
            for j in range(seeds)]
    return float(np.mean(vals)), rz.expected_norm_sq(u0, s, K_trunc)
