"""Discretized cylinder, spectral fields and spectral calculus.

Conventions
-----------
Spectral coefficients use ``u_hat(xi, n) = (1/2pi) * int u(x) exp(-i(xi x1 + n x2)) dx``.
The continuous direction is periodized with period ``L = 2pi / h_xi`` and the
samples are ``xi_j = -Xi + j h_xi``.  The periodic direction has period ``P2``
(``2pi`` unless a rescaled field asks otherwise), so integer mode ``q`` has
physical frequency ``q * 2pi / P2``.  With these choices

    ||u||_{L2}^2 = sum_{j, q} h_xi * h_n * |u_hat|^2,   h_n = 2pi / P2.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field as dc_field
from typing import Iterable

import numpy as np

TWO_PI = 2.0 * math.pi
SYMMETRY_TOL = 1e-12


class GridError(ValueError):
    """Raised when grids are inconsistent or cannot be built."""


@dataclass(frozen=True)
class FrequencyGrid:
    xi_max: float
    n_x1: int
    k_max: int
    period_x2: float = TWO_PI

    def __post_init__(self):
        if int(self.n_x1) != self.n_x1 or self.n_x1 < 2 or self.n_x1 % 2:
            raise GridError(f"n_x1 must be a positive even integer, got {self.n_x1}")
        if int(self.k_max) != self.k_max or self.k_max < 0:
            raise GridError(f"k_max must be a non-negative integer, got {self.k_max}")
        if not (self.xi_max >= 1.0) or not math.isfinite(self.xi_max):
            raise GridError(f"xi_max must be >= 1, got {self.xi_max}")
        if not (self.period_x2 > 0):
            raise GridError("period_x2 must be positive")

    @property
    def h_xi(self) -> float:
        return 2.0 * self.xi_max / self.n_x1

    @property
    def period_x1(self) -> float:
        return TWO_PI / self.h_xi

    @property
    def h_n(self) -> float:
        """Spacing (and quadrature weight) of the integer-mode lattice."""
        return TWO_PI / self.period_x2

    @property
    def n_modes(self) -> int:
        return 2 * self.k_max + 1

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_x1, self.n_modes)

    @property
    def xi(self) -> np.ndarray:
        return -self.xi_max + self.h_xi * np.arange(self.n_x1)

    @property
    def modes(self) -> np.ndarray:
        """Integer mode labels -K..K."""
        return np.arange(-self.k_max, self.k_max + 1)

    @property
    def n2(self) -> np.ndarray:
        """Physical frequencies of the periodic direction."""
        return self.modes * self.h_n

    @property
    def zero_xi_index(self) -> int:
        return self.n_x1 // 2

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.xi, self.n2, indexing="ij")

    def xi_index(self, xi: float, tol: float = 1e-9) -> int:
        j = (xi + self.xi_max) / self.h_xi
        jr = int(round(j))
        if abs(j - jr) > tol or not 0 <= jr < self.n_x1:
            raise GridError(f"xi={xi} is not a grid sample")
        return jr

    def mode_index(self, mode: int) -> int:
        if abs(mode) > self.k_max:
            raise GridError(f"mode {mode} outside |n2| <= {self.k_max}")
        return int(mode) + self.k_max

    def physical_points(self, n_x2: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        n_x2 = self.default_n_x2() if n_x2 is None else n_x2
        x1 = -self.period_x1 / 2 + self.period_x1 / self.n_x1 * np.arange(self.n_x1)
        x2 = self.period_x2 / n_x2 * np.arange(n_x2)
        return x1, x2

    def default_n_x2(self) -> int:
        return 2 * self.k_max + 2


@dataclass(frozen=True, eq=False)
class SpectralField:
    grid: FrequencyGrid
    coeffs: np.ndarray
    real: bool = False

    def __post_init__(self):
        arr = np.array(self.coeffs, dtype=np.complex128, copy=True)
        if arr.shape != self.grid.shape:
            raise GridError(f"coefficient shape {arr.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("spectral coefficients must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)
        if self.real:
            err = conjugate_symmetry_error(arr)
            scale = max(1.0, float(np.max(np.abs(arr), initial=0.0)))
            if err > SYMMETRY_TOL * scale:
                raise ValueError(f"field flagged real violates conjugate symmetry by {err:.3e}")

    @classmethod
    def zeros(cls, grid: FrequencyGrid, real: bool = True) -> "SpectralField":
        return cls(grid, np.zeros(grid.shape, complex), real)

    def with_coeffs(self, coeffs: np.ndarray, real: bool | None = None) -> "SpectralField":
        return SpectralField(self.grid, coeffs, self.real if real is None else real)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self, other)
        return SpectralField(self.grid, self.coeffs + other.coeffs, self.real and other.real)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self, other)
        return SpectralField(self.grid, self.coeffs - other.coeffs, self.real and other.real)

    def scale(self, c: complex) -> "SpectralField":
        keeps_real = self.real and complex(c).imag == 0
        return SpectralField(self.grid, self.coeffs * c, keeps_real)


@dataclass(frozen=True)
class HannWindow:
    """Temporal window sin^2(pi t / T) on [0, T]."""

    duration: float
    kind: str = "hann"

    def __call__(self, t):
        t = np.asarray(t, float)
        inside = (t >= 0) & (t <= self.duration)
        return np.where(inside, np.sin(np.pi * t / self.duration) ** 2, 0.0)

    def l2_squared(self) -> float:
        return 3.0 * self.duration / 8.0

    def derivative_l2_squared(self) -> float:
        return np.pi**2 / (2.0 * self.duration)


@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    grid: FrequencyGrid
    tau: np.ndarray
    coeffs: np.ndarray
    window: HannWindow | None = None

    def __post_init__(self):
        tau = np.array(self.tau, float, copy=True)
        if tau.ndim != 1 or tau.size % 2 == 0:
            raise GridError("tau grid must be one-dimensional with an odd number of samples")
        if tau.size > 1:
            h = np.diff(tau)
            if not np.allclose(h, h[0], rtol=1e-9, atol=0) or h[0] <= 0:
                raise GridError("tau grid must be uniform and increasing")
            if not np.allclose(tau, -tau[::-1], atol=1e-9 * max(1.0, abs(tau[-1]))):
                raise GridError("tau grid must be symmetric about 0")
        arr = np.array(self.coeffs, np.complex128, copy=True)
        if arr.shape != self.grid.shape + (tau.size,):
            raise GridError(f"coefficient shape {arr.shape} does not match grid and tau")
        if not np.all(np.isfinite(arr)):
            raise ValueError("space-time coefficients must be finite")
        tau.setflags(write=False)
        arr.setflags(write=False)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "coeffs", arr)

    @property
    def h_tau(self) -> float:
        return float(self.tau[1] - self.tau[0]) if self.tau.size > 1 else 1.0


def symmetric_tau_grid(tau_max: float, h_tau: float) -> np.ndarray:
    half = int(math.ceil(tau_max / h_tau))
    return h_tau * np.arange(-half, half + 1)


def _check_same_grid(a: SpectralField, b: SpectralField):
    if a.grid != b.grid:
        raise GridError("fields live on different grids")


def conjugate_symmetry_error(coeffs: np.ndarray) -> float:
    """Max deviation from u_hat(-xi, -n) = conj(u_hat(xi, n)), Nyquist column required zero."""
    mirrored = np.roll(coeffs[::-1, ::-1], 1, axis=0)
    err = float(np.max(np.abs(coeffs - np.conj(mirrored)), initial=0.0))
    return max(err, float(np.max(np.abs(coeffs[0]), initial=0.0)))


def realify(coeffs: np.ndarray) -> np.ndarray:
    """Spectral image of the real part: (u_hat(p) + conj u_hat(-p)) / 2."""
    mirrored = np.roll(coeffs[..., ::-1, ::-1], 1, axis=-2)
    out = 0.5 * (coeffs + np.conj(mirrored))
    out[..., 0, :] = 0.0
    return out


def dispersion(xi, n):
    """phi(xi, n) = xi (xi^2 + n^2)."""
    xi = np.asarray(xi, float) if not np.isscalar(xi) else xi
    return xi * (xi * xi + n * n)


def dispersion_on_grid(grid: FrequencyGrid) -> np.ndarray:
    xi, n2 = grid.mesh()
    return dispersion(xi, n2)


def propagate_linear(field: SpectralField, t: float) -> SpectralField:
    phase = np.exp(1j * t * dispersion_on_grid(field.grid))
    return SpectralField(field.grid, field.coeffs * phase, field.real)


def derivative_x1(field: SpectralField) -> SpectralField:
    mult = 1j * field.grid.xi[:, None]
    return SpectralField(field.grid, field.coeffs * mult, field.real)


# --- physical <-> spectral -------------------------------------------------

def _x1_phase(grid: FrequencyGrid) -> np.ndarray:
    # origin of x1 at -L/2 contributes exp(i xi L/2) = (-1)^(j - n_x1/2)
    q = np.arange(grid.n_x1) - grid.n_x1 // 2
    return np.where(q % 2 == 0, 1.0, -1.0)


def _to_fft_layout(coeffs: np.ndarray, grid: FrequencyGrid, m1: int, m2: int) -> np.ndarray:
    """Scatter band coefficients (..., n_x1, 2K+1) into an (..., m1, m2) FFT array."""
    lead = coeffs.shape[:-2]
    out = np.zeros(lead + (m1, m2), np.complex128)
    q1 = (np.arange(grid.n_x1) - grid.n_x1 // 2) % m1
    q2 = grid.modes % m2
    out[..., q1[:, None], q2[None, :]] = coeffs
    return out


def _from_fft_layout(arr: np.ndarray, grid: FrequencyGrid) -> np.ndarray:
    m1, m2 = arr.shape[-2:]
    q1 = (np.arange(grid.n_x1) - grid.n_x1 // 2) % m1
    q2 = grid.modes % m2
    return arr[..., q1[:, None], q2[None, :]]


def to_physical(field: SpectralField, n_x2: int | None = None) -> np.ndarray:
    """Samples of u on the grid returned by ``grid.physical_points(n_x2)``."""
    grid = field.grid
    n_x2 = grid.default_n_x2() if n_x2 is None else n_x2
    if n_x2 < grid.n_modes:
        raise GridError("n_x2 must be at least 2*k_max + 1")
    arr = _to_fft_layout(field.coeffs * _x1_phase(grid)[:, None], grid, grid.n_x1, n_x2)
    scale = grid.h_xi * grid.h_n / TWO_PI * grid.n_x1 * n_x2
    u = scale * np.fft.ifft2(arr)
    return u.real if field.real else u


def from_physical(values: np.ndarray, grid: FrequencyGrid, real: bool | None = None) -> SpectralField:
    values = np.asarray(values)
    if values.ndim != 2 or values.shape[0] != grid.n_x1:
        raise GridError("physical samples must have shape (n_x1, n_x2)")
    n_x2 = values.shape[1]
    if n_x2 < grid.n_modes:
        raise GridError("need at least 2*k_max + 1 samples in x2")
    if real is None:
        real = not np.iscomplexobj(values)
    dx1 = grid.period_x1 / grid.n_x1
    dx2 = grid.period_x2 / n_x2
    spec = dx1 * dx2 / TWO_PI * np.fft.fft2(values)
    coeffs = _from_fft_layout(spec, grid) * _x1_phase(grid)[:, None]
    if real:
        coeffs = realify(coeffs)
    return SpectralField(grid, coeffs, real)


def l2_norm_physical(values: np.ndarray, grid: FrequencyGrid) -> float:
    dx1 = grid.period_x1 / grid.n_x1
    dx2 = grid.period_x2 / values.shape[1]
    return float(np.sqrt(np.sum(np.abs(values) ** 2) * dx1 * dx2))


# --- products ---------------------------------------------------------------

def padded_sizes(grid: FrequencyGrid) -> tuple[int, int]:
    m1 = 3 * grid.n_x1 // 2
    m2 = 3 * grid.k_max + 1
    m2 += m2 % 2
    return m1, m2


def product_coeffs(a: np.ndarray, b: np.ndarray, grid: FrequencyGrid) -> np.ndarray:
    """Dealiased spectral product of coefficient arrays shaped (..., n_x1, 2K+1).

    Exact on the retained band: aliases of the padded transform land outside it.
    """
    m1, m2 = padded_sizes(grid)
    pa = np.fft.ifft2(_to_fft_layout(a, grid, m1, m2))
    if b is a:
        prod = pa * pa
    else:
        prod = pa * np.fft.ifft2(_to_fft_layout(b, grid, m1, m2))
    spec = np.fft.fft2(prod)
    return grid.h_xi * grid.h_n * m1 * m2 / TWO_PI * _from_fft_layout(spec, grid)


def multiply_fields(a: SpectralField, b: SpectralField) -> SpectralField:
    _check_same_grid(a, b)
    out = product_coeffs(a.coeffs, b.coeffs, a.grid)
    real = a.real and b.real
    if real:
        out = realify(out)
    return SpectralField(a.grid, out, real)


def direct_convolution(a: np.ndarray, b: np.ndarray, grid: FrequencyGrid) -> np.ndarray:
    """O(N^2) reference product: (h_xi h_n / 2pi) * sum a(p) b(q - p) over the band."""
    n1, n2 = grid.shape
    out = np.zeros(grid.shape, complex)
    for j in range(n1):
        for l in range(n2):
            total = 0j
            for jp in range(n1):
                jq = j - jp + n1 // 2
                if not 0 <= jq < n1:
                    continue
                for lp in range(n2):
                    lq = l - lp + grid.k_max
                    if 0 <= lq < n2:
                        total += a[jp, lp] * b[jq, lq]
            out[j, l] = total
    return grid.h_xi * grid.h_n / TWO_PI * out


def single_mode(grid: FrequencyGrid, xi: float, mode: int, amplitude: complex = 1.0) -> SpectralField:
    coeffs = np.zeros(grid.shape, complex)
    coeffs[grid.xi_index(xi), grid.mode_index(mode)] = amplitude
    return SpectralField(grid, coeffs, real=False)


def constant_field(grid: FrequencyGrid, value: float = 1.0) -> SpectralField:
    """Spectral representation of a constant: the band-limited delta at the origin."""
    coeffs = np.zeros(grid.shape, complex)
    coeffs[grid.zero_xi_index, grid.k_max] = TWO_PI * value / (grid.h_xi * grid.h_n)
    return SpectralField(grid, coeffs, real=True)


# --- space-time transform -----------------------------------------------------

def space_time_transform(states: np.ndarray, times: np.ndarray, grid: FrequencyGrid,
                         pad: int = 8) -> SpaceTimeField:
    """Hann-windowed time transform of states (n_t, n_x1, 2K+1) on a uniform time grid.

    u_hat(tau) = (2pi)^{-1/2} sum_m dt w(t_m) u(t_m) exp(-i tau t_m), evaluated by a
    zero-padded FFT so that the tau grid is uniform, symmetric and Parseval is exact.
    """
    times = np.asarray(times, float)
    states = np.asarray(states)
    n_t = times.size
    if states.shape != (n_t,) + grid.shape:
        raise GridError("states must have shape (n_times, n_x1, 2K+1)")
    if n_t < 3:
        raise GridError("need at least three time samples")
    dt = float(times[1] - times[0])
    if not np.allclose(np.diff(times), dt, rtol=1e-9, atol=0):
        raise GridError("time grid must be uniform")
    duration = float(times[-1] - times[0])
    window = HannWindow(duration)
    weights = window(times - times[0])
    n_tau = max(pad, 1) * n_t
    n_tau += 1 - n_tau % 2
    centre = (n_tau - 1) // 2
    h_tau = TWO_PI / (n_tau * dt)
    signal = np.moveaxis(states * weights[:, None, None], 0, -1)
    spec = np.fft.fft(signal, n=n_tau, axis=-1)
    idx = (np.arange(n_tau) - centre) % n_tau
    tau = h_tau * (np.arange(n_tau) - centre)
    # shift time origin back to times[0]
    coeffs = dt / math.sqrt(TWO_PI) * spec[..., idx] * np.exp(-1j * tau * times[0])
    return SpaceTimeField(grid, tau, coeffs, window)


# --- file formats ---------------------------------------------------------------

MAGIC = b"ZKCF"
_HEADER = struct.Struct("<4sIdII")
_TIME_HEADER = struct.Struct("<I")


def write_field(path, field: SpectralField):
    g = field.grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, 1, g.xi_max, g.n_x1, g.k_max))
        fh.write(np.ascontiguousarray(field.coeffs, dtype="<c8").tobytes())


def write_trajectory_dump(path, grid: FrequencyGrid, times: Iterable[float], states: np.ndarray):
    """Version-2 dump: header, u32 n_times, f64 times, then states row-major."""
    times = np.asarray(list(times), "<f8")
    states = np.asarray(states)
    if states.shape != (times.size,) + grid.shape:
        raise GridError("states do not match grid and times")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, 2, grid.xi_max, grid.n_x1, grid.k_max))
        fh.write(_TIME_HEADER.pack(times.size))
        fh.write(times.tobytes())
        fh.write(np.ascontiguousarray(states, dtype="<c8").tobytes())


@dataclass
class FieldDump:
    grid: FrequencyGrid
    times: np.ndarray | None
    coeffs: np.ndarray
    version: int = 1
    extra: dict = dc_field(default_factory=dict)


def read_dump(path) -> FieldDump:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise ValueError("file too short for a field dump")
    magic, version, xi_max, n_x1, k_max = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise ValueError("bad magic; not a ZKCF dump")
    grid = FrequencyGrid(xi_max, n_x1, k_max)
    off = _HEADER.size
    times = None
    shape = grid.shape
    if version == 2:
        (n_times,) = _TIME_HEADER.unpack_from(data, off)
        off += _TIME_HEADER.size
        times = np.frombuffer(data, "<f8", n_times, off).copy()
        off += 8 * n_times
        shape = (n_times,) + shape
    elif version != 1:
        raise ValueError(f"unsupported dump version {version}")
    count = int(np.prod(shape))
    if len(data) - off != 8 * count:
        raise ValueError("payload size does not match header")
    coeffs = np.frombuffer(data, "<c8", count, off).astype(np.complex128).reshape(shape)
    return FieldDump(grid, times, coeffs, version)


def read_field(path, real: bool = False) -> SpectralField:
    dump = read_dump(path)
    if dump.times is not None:
        raise ValueError("dump holds a trajectory; use read_dump")
    return SpectralField(dump.grid, dump.coeffs, real=real)


def write_field_csv(path, field: SpectralField):
    g = field.grid
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["xi", "n2", "re", "im"])
        for j, xi in enumerate(g.xi):
            for l, mode in enumerate(g.modes):
                c = field.coeffs[j, l]
                w.writerow([repr(float(xi)), int(mode), repr(float(c.real)), repr(float(c.imag))])


def linear_space_time(u0: SpectralField, times: np.ndarray, pad: int = 8) -> SpaceTimeField:
    """Windowed space-time transform of the linear evolution S(t) u0."""
    times = np.asarray(times, float)
    phi = dispersion_on_grid(u0.grid)
    states = u0.coeffs[None] * np.exp(1j * times[:, None, None] * phi[None])
    return space_time_transform(states, times, u0.grid, pad)
