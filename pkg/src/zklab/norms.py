"""Sobolev and Bourgain-type norms of discretized fields.

All norms are Riemann sums over the frequency lattice with cell volume
``h_xi * h_n`` (times ``h_tau`` for space-time data).  The singular factor
``<xi>/|xi|`` is regularized by flooring ``|xi|`` at half a grid cell.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .spectrum import FrequencyGrid, SpaceTimeField, SpectralField, dispersion_on_grid

ALLOWED_GAMMAS = (0.0, 0.5)


def bracket(x):
    return np.sqrt(1.0 + np.square(x))


@dataclass(frozen=True)
class NormParams:
    s: float
    b: float
    delta: float = 0.0
    gamma: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.delta < 0.25:
            raise ValueError(f"delta must lie in [0, 1/4), got {self.delta}")
        if self.gamma not in ALLOWED_GAMMAS:
            raise ValueError(f"gamma must be 0 or 1/2, got {self.gamma}")


def singular_ratio(grid: FrequencyGrid) -> np.ndarray:
    """<xi> / max(|xi|, h_xi/2) per xi sample."""
    xi = grid.xi
    return bracket(xi) / np.maximum(np.abs(xi), grid.h_xi / 2)


def spatial_weight_sq(grid: FrequencyGrid, s: float, gamma: float = 0.0) -> np.ndarray:
    """<(xi,n)>^{2s} * (<xi>/|xi|)^{2 gamma}; gamma = -1/2 gives the dual-type weight."""
    xi, n2 = grid.mesh()
    w = (1.0 + xi * xi + n2 * n2) ** s
    if gamma:
        w = w * singular_ratio(grid)[:, None] ** (2 * gamma)
    return w


def _cell(grid: FrequencyGrid) -> float:
    return grid.h_xi * grid.h_n


def sobolev_norm(field: SpectralField, s: float) -> float:
    w = spatial_weight_sq(field.grid, s)
    return math.sqrt(float(np.sum(np.abs(field.coeffs) ** 2 * w)) * _cell(field.grid))


def tilde_sobolev_norm(field: SpectralField, s: float) -> float:
    w = spatial_weight_sq(field.grid, s, gamma=0.5)
    return math.sqrt(float(np.sum(np.abs(field.coeffs) ** 2 * w)) * _cell(field.grid))


def homogeneous_sobolev_norm(field: SpectralField, s: float) -> float:
    """|(xi, n)|^{s}-weighted norm; the modulus is floored at h_xi/2 so the origin stays finite."""
    g = field.grid
    xi, n2 = g.mesh()
    mod = np.maximum(np.hypot(xi, n2), g.h_xi / 2)
    w = mod ** (2 * s)
    return math.sqrt(float(np.sum(np.abs(field.coeffs) ** 2 * w)) * _cell(g))


def _modulation_weight_sq(st: SpaceTimeField, b: float) -> np.ndarray:
    phi = dispersion_on_grid(st.grid)
    return (1.0 + (st.tau[None, None, :] - phi[..., None]) ** 2) ** b


def column_sums(st: SpaceTimeField, b: float) -> np.ndarray:
    """sum_tau <tau - phi>^{2b} |u_hat|^2 h_tau for every (xi, n) column."""
    return np.sum(np.abs(st.coeffs) ** 2 * _modulation_weight_sq(st, b), axis=-1) * st.h_tau


def weighted_xsb_norm(st: SpaceTimeField, s: float, b: float, gamma: float = 0.0) -> float:
    cols = column_sums(st, b)
    total = np.sum(cols * spatial_weight_sq(st.grid, s, gamma)) * _cell(st.grid)
    return math.sqrt(float(total))


def xsb_norm(st: SpaceTimeField, p: NormParams) -> float:
    return weighted_xsb_norm(st, p.s, p.b, p.gamma)


def ysb_norm(st: SpaceTimeField, p: NormParams) -> float:
    return weighted_xsb_norm(st, p.s, p.b, 0.5)


@dataclass(frozen=True)
class ZNorm:
    value: float
    y_part: float
    sup_part: float
    argmax: tuple[float, float]


def zsb_norm(st: SpaceTimeField, p: NormParams) -> ZNorm:
    """Y-norm plus the frequency supremum of the singular-weighted L2_tau column norms."""
    y = ysb_norm(st, p)
    cols = column_sums(st, p.b) * singular_ratio(st.grid)[:, None] ** 2
    flat = int(np.argmax(cols))
    j, l = np.unravel_index(flat, cols.shape)
    sup = math.sqrt(float(cols[j, l]))
    where = (float(st.grid.xi[j]), float(st.grid.n2[l]))
    return ZNorm(math.sqrt(y * y + sup * sup), y, sup, where)


def hann_window_factor(duration: float, b: float) -> float:
    """int <sigma>^{2b} |w_hat(sigma)|^2 d sigma for the Hann window, b in {0, 1}."""
    l2 = 3.0 * duration / 8.0
    if b == 0:
        return l2
    if b == 1:
        return l2 + math.pi**2 / (2.0 * duration)
    raise ValueError("closed form available for b = 0 and b = 1 only")


NORM_REPORT_HEADER = ["norm_name", "s", "b", "gamma", "value"]


def write_norm_report(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(NORM_REPORT_HEADER)
        for row in rows:
            w.writerow([row["norm_name"], repr(float(row["s"])), repr(float(row["b"])),
                        repr(float(row["gamma"])), repr(float(row["value"]))])
