"""Periodic grids, Fourier multipliers and Littlewood-Paley blocks on the torus.

Everything lives on [0, 2*pi)^d with d in {1, 2} and integer wavenumbers in
[-N/2, N/2).  Spectra are stored as Fourier coefficients, so that
``u(x) = sum_k uhat[k] exp(i k.x)`` and the mean-square of ``u`` equals the
sum of ``|uhat|^2``.
"""
from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Sequence, Union

import numpy as np

Multiplier = Union[np.ndarray, Callable[[tuple], np.ndarray]]


# ---------------------------------------------------------------------------
# smooth profiles
# ---------------------------------------------------------------------------

def smooth_step(t: np.ndarray | float) -> np.ndarray:
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        left = np.where(t > 0.0, np.exp(-1.0 / np.where(t > 0.0, t, 1.0)), 0.0)
        right = np.where(t < 1.0, np.exp(-1.0 / np.where(t < 1.0, 1.0 - t, 1.0)), 0.0)
    return left / (left + right)


def low_pass_profile(r: np.ndarray | float) -> np.ndarray:
    """Radial low-pass: 1 for r <= 1/2, 0 for r >= 1."""
    return 1.0 - smooth_step(2.0 * np.asarray(r, dtype=float) - 1.0)


def annulus_profile(r: np.ndarray | float) -> np.ndarray:
    """Annular bump psi(r/2) - psi(r), supported in 1/2 <= r <= 2."""
    r = np.asarray(r, dtype=float)
    return low_pass_profile(r / 2.0) - low_pass_profile(r)


def window_profile(r: np.ndarray | float, inner: float, outer: float,
                   inner_flat: float, outer_flat: float) -> np.ndarray:
    """Smooth radial window: 1 on [inner_flat, outer_flat], 0 outside (inner, outer)."""
    r = np.asarray(r, dtype=float)
    rise = smooth_step((r - inner) / (inner_flat - inner))
    fall = 1.0 - smooth_step((r - outer_flat) / (outer - outer_flat))
    return rise * fall


# ---------------------------------------------------------------------------
# grid and grid functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PeriodicGrid:
    dim: int
    points_per_axis: int

    def __post_init__(self) -> None:
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        n = self.points_per_axis
        if n < 8 or n & (n - 1):
            raise ValueError(f"points_per_axis must be a power of two >= 8, got {n}")

    @property
    def period(self) -> float:
        return 2.0 * math.pi

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.dim

    @property
    def size(self) -> int:
        return self.points_per_axis ** self.dim

    @property
    def spacing(self) -> float:
        return self.period / self.points_per_axis

    @property
    def nyquist(self) -> int:
        return self.points_per_axis // 2

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    @property
    def volume(self) -> float:
        return self.period ** self.dim

    @cached_property
    def axis(self) -> np.ndarray:
        return self.spacing * np.arange(self.points_per_axis)

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.axis] * self.dim), indexing="ij"))

    @cached_property
    def axis_wavenumbers(self) -> np.ndarray:
        return np.fft.fftfreq(self.points_per_axis, 1.0 / self.points_per_axis)

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.axis_wavenumbers] * self.dim), indexing="ij"))

    @cached_property
    def abs_wavenumber(self) -> np.ndarray:
        return np.sqrt(sum(k * k for k in self.wavenumbers))

    @cached_property
    def lattice(self) -> np.ndarray:
        """All wavevectors as an array of shape (size, dim), in flattened grid order."""
        return np.stack([k.ravel() for k in self.wavenumbers], axis=1)

    @cached_property
    def points(self) -> np.ndarray:
        """All grid points as an array of shape (size, dim)."""
        return np.stack([c.ravel() for c in self.coords], axis=1)

    @property
    def max_wavenumber(self) -> float:
        return float(self.abs_wavenumber.max())

    @property
    def j_max(self) -> int:
        """Largest block index needed so that the blocks -1..j_max sum to the identity."""
        return int(math.ceil(math.log2(self.max_wavenumber)))

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """Two-thirds rule mask (per axis)."""
        keep = np.abs(self.axis_wavenumbers) < self.points_per_axis / 3.0
        mask = keep
        for _ in range(self.dim - 1):
            mask = np.multiply.outer(mask, keep)
        return mask

    def multiplier_values(self, m: Multiplier) -> np.ndarray:
        values = m(self.wavenumbers) if callable(m) else np.asarray(m)
        values = np.broadcast_to(values, self.shape)
        if not np.all(np.isfinite(values)):
            raise ValueError("multiplier is not finite on the frequency lattice")
        return values


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: PeriodicGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values)
        if vals.shape != self.grid.shape:
            raise ValueError(f"values shape {vals.shape} does not match grid {self.grid.shape}")
        if not np.iscomplexobj(vals):
            vals = vals.astype(float)
        object.__setattr__(self, "values", _freeze(vals))

    # construction ---------------------------------------------------------
    @classmethod
    def from_spectrum(cls, grid: PeriodicGrid, spectrum: np.ndarray,
                      real: bool = False) -> "GridFunction":
        vals = np.fft.ifftn(np.asarray(spectrum) * grid.size)
        if real:
            vals = vals.real
        out = cls(grid, vals)
        if not real:
            object.__setattr__(out, "_spectrum_cache", _freeze(np.asarray(spectrum, dtype=complex)))
        return out

    @classmethod
    def from_callable(cls, grid: PeriodicGrid, f: Callable[..., np.ndarray]) -> "GridFunction":
        return cls(grid, f(*grid.coords))

    @classmethod
    def zeros(cls, grid: PeriodicGrid) -> "GridFunction":
        return cls(grid, np.zeros(grid.shape))

    # spectral access -------------------------------------------------------
    @property
    def spectrum(self) -> np.ndarray:
        cached = self.__dict__.get("_spectrum_cache")
        if cached is None:
            cached = _freeze(np.fft.fftn(self.values) / self.grid.size)
            object.__setattr__(self, "_spectrum_cache", cached)
        return cached

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.values)

    @property
    def real(self) -> "GridFunction":
        return GridFunction(self.grid, self.values.real)

    @property
    def imag(self) -> "GridFunction":
        return GridFunction(self.grid, self.values.imag)

    def conj(self) -> "GridFunction":
        return GridFunction(self.grid, np.conj(self.values))

    # arithmetic ------------------------------------------------------------
    def _other(self, other):
        if isinstance(other, GridFunction):
            if other.grid != self.grid:
                raise ValueError("grid mismatch")
            return other.values
        return other

    def __add__(self, other):
        return GridFunction(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return GridFunction(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return GridFunction(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return GridFunction(self.grid, self.values / self._other(other))

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    # calculus and norms ----------------------------------------------------
    def derivative(self, axis: int, order: int = 1) -> "GridFunction":
        """Spectral derivative along one axis (Nyquist mode dropped for odd orders)."""
        k = self.grid.wavenumbers[axis]
        factor = (1j * k) ** order
        if order % 2 == 1:
            factor = np.where(np.abs(k) == self.grid.nyquist, 0.0, factor)
        return apply_multiplier(self, factor)

    def gradient(self) -> tuple["GridFunction", ...]:
        return tuple(self.derivative(i) for i in range(self.grid.dim))

    def mean(self) -> complex | float:
        return self.values.mean()

    def integral(self) -> complex | float:
        return self.values.mean() * self.grid.volume

    def sup_norm(self, oversample: int = 1) -> float:
        if oversample == 1:
            return float(np.abs(self.values).max())
        return float(np.abs(upsample(self, oversample)).max())

    def l2_norm(self) -> float:
        """Root-mean-square norm (the grid's Parseval normalization)."""
        return float(np.sqrt(np.mean(np.abs(self.values) ** 2)))

    def l1_norm(self) -> float:
        return float(np.abs(self.values).mean() * self.grid.volume)

    def evaluate_at(self, points: np.ndarray) -> np.ndarray:
        """Trigonometric interpolation at arbitrary points of shape (P, d)."""
        return trig_eval(self.grid, self.spectrum, points)


def trig_eval(grid: PeriodicGrid, spectrum: np.ndarray, points: np.ndarray,
              chunk: int = 4096) -> np.ndarray:
    """Evaluate sum_k c_k exp(i k.x) at points of shape (P, d) (coefficients may carry a leading batch axis)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    coeffs = np.asarray(spectrum).reshape(-1)
    lattice = grid.lattice
    out = np.empty(points.shape[0], dtype=complex)
    for start in range(0, points.shape[0], chunk):
        block = points[start:start + chunk]
        phase = np.exp(1j * block @ lattice.T)
        out[start:start + chunk] = phase @ coeffs
    return out


def upsample(u: GridFunction, factor: int) -> np.ndarray:
    """Band-limited interpolation of u onto a grid refined by an integer factor."""
    n = u.grid.points_per_axis
    m = n * factor
    spec = np.fft.fftshift(u.spectrum)
    pad = [((m - n) // 2, (m - n) // 2)] * u.grid.dim
    big = np.pad(spec, pad)
    vals = np.fft.ifftn(np.fft.ifftshift(big)) * m ** u.grid.dim
    return vals.real if u.is_real else vals


# ---------------------------------------------------------------------------
# multipliers and dyadic blocks
# ---------------------------------------------------------------------------

def _is_hermitian_on_lattice(grid: PeriodicGrid, values: np.ndarray) -> bool:
    flipped = values
    for ax in range(grid.dim):
        flipped = np.roll(np.flip(flipped, axis=ax), 1, axis=ax)
    return bool(np.allclose(flipped, np.conj(values), rtol=0.0, atol=1e-14 * (1.0 + np.abs(values).max())))


def apply_multiplier(u: GridFunction, m: Multiplier) -> GridFunction:
    """Return the function whose spectrum is m(xi) * spectrum(u)."""
    values = u.grid.multiplier_values(m)
    spec = values * u.spectrum
    real = u.is_real and _is_hermitian_on_lattice(u.grid, values)
    return GridFunction.from_spectrum(u.grid, spec, real=real)


def bessel_potential(u: GridFunction, s: float) -> GridFunction:
    """<D>^s u."""
    return apply_multiplier(u, (1.0 + u.grid.abs_wavenumber ** 2) ** (s / 2.0))


@dataclass(frozen=True)
class DyadicPartition:
    grid: PeriodicGrid

    @property
    def j_max(self) -> int:
        return self.grid.j_max

    def psi(self, r: np.ndarray | float) -> np.ndarray:
        return low_pass_profile(r)

    def phi(self, r: np.ndarray | float) -> np.ndarray:
        return annulus_profile(r)

    def block_weights(self, j: int) -> np.ndarray:
        if j < -1 or j > self.j_max:
            raise ValueError(f"block index {j} outside [-1, {self.j_max}] for this grid")
        k = self.grid.abs_wavenumber
        if j == -1:
            return self.psi(k)
        return self.phi(k / 2.0 ** j)

    def low_weights(self, log2_radius: float) -> np.ndarray:
        return self.psi(self.grid.abs_wavenumber / 2.0 ** log2_radius)

    def telescoping_residual(self, n_blocks: int) -> float:
        """max |psi + sum_{k<n} phi(2^-k xi) - psi(2^-n xi)| on the lattice."""
        k = self.grid.abs_wavenumber
        lhs = self.psi(k) + sum(self.phi(k / 2.0 ** i) for i in range(n_blocks))
        return float(np.abs(lhs - self.psi(k / 2.0 ** n_blocks)).max())


def dyadic_block(u: GridFunction, j: int, kind: str = "delta") -> GridFunction:
    """Delta_j u (kind='delta', Delta_{-1} = psi(D)) or S_j u = psi(2^-j D) u (kind='s_low')."""
    part = DyadicPartition(u.grid)
    if kind == "delta":
        return apply_multiplier(u, part.block_weights(j))
    if kind == "s_low":
        if j < 0:
            raise ValueError("S_j is defined for j >= 0")
        if j > part.j_max + 1:
            return GridFunction(u.grid, u.values)
        return apply_multiplier(u, part.low_weights(j))
    raise ValueError(f"unknown block kind {kind!r}")


def low_pass(u: GridFunction, log2_radius: float) -> GridFunction:
    """psi(2^{-a} D) u for a real scale exponent a (used for S_{j delta})."""
    return apply_multiplier(u, DyadicPartition(u.grid).low_weights(log2_radius))


def all_blocks(u: GridFunction) -> list[np.ndarray]:
    """Values of Delta_{-1} u, Delta_0 u, ..., Delta_{j_max} u."""
    part = DyadicPartition(u.grid)
    spec = u.spectrum * u.grid.size
    blocks = []
    for j in range(-1, part.j_max + 1):
        vals = np.fft.ifftn(part.block_weights(j) * spec)
        blocks.append(vals.real if u.is_real else vals)
    return blocks


def _check_holder_exponent(r: float) -> None:
    if r <= 0 or float(r).is_integer():
        raise ValueError(f"Hölder exponent must be positive and non-integer, got {r}")


def dyadic_holder_norm(u: GridFunction, r: float) -> float:
    """||Delta_{-1} u||_inf + max_j 2^{j r} ||Delta_j u||_inf."""
    _check_holder_exponent(r)
    blocks = all_blocks(u)
    low = float(np.abs(blocks[0]).max())
    high = max(2.0 ** (j * r) * float(np.abs(b).max()) for j, b in enumerate(blocks[1:]))
    return low + high


def sobolev_norm(u: GridFunction, s: float) -> float:
    weight = (1.0 + u.grid.abs_wavenumber ** 2) ** s
    return float(np.sqrt(np.sum(weight * np.abs(u.spectrum) ** 2)))


def spectral_radius(u: GridFunction, rel_tol: float = 1e-12) -> float:
    """Largest |xi| carrying a coefficient above rel_tol times the largest one."""
    mag = np.abs(u.spectrum)
    top = mag.max()
    if top == 0:
        return 0.0
    return float(u.grid.abs_wavenumber[mag > rel_tol * top].max())


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

_MAGIC = b"PWGF"
_VERSION = 1


def write_container(path: str | Path, array: np.ndarray) -> None:
    """Flat binary container: magic, version, ndim, complex flag, shape, row-major doubles."""
    array = np.ascontiguousarray(array)
    is_complex = np.iscomplexobj(array)
    header = _MAGIC + struct.pack("<BBB", _VERSION, array.ndim, int(is_complex))
    header += struct.pack(f"<{array.ndim}I", *array.shape)
    payload = array.astype(np.complex128 if is_complex else np.float64)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.astype(payload.dtype.newbyteorder("<")).tobytes(order="C"))


def read_container(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != _MAGIC:
        raise ValueError("not a parawave container")
    version, ndim, is_complex = struct.unpack("<BBB", data[4:7])
    if version != _VERSION:
        raise ValueError(f"unsupported container version {version}")
    shape = struct.unpack(f"<{ndim}I", data[7:7 + 4 * ndim])
    dtype = np.dtype("<c16" if is_complex else "<f8")
    return np.frombuffer(data[7 + 4 * ndim:], dtype=dtype).reshape(shape).copy()


def save_grid_function(path: str | Path, u: GridFunction) -> None:
    write_container(path, u.values)


def load_grid_function(path: str | Path) -> GridFunction:
    values = read_container(path)
    if values.ndim not in (1, 2) or len(set(values.shape)) != 1:
        raise ValueError("container does not hold a square grid function")
    return GridFunction(PeriodicGrid(values.ndim, values.shape[0]), values)


def save_csv(path: str | Path, u: GridFunction) -> None:
    if u.grid.dim != 1:
        raise ValueError("CSV export is for one-dimensional grid functions")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "real", "imag"])
        vals = np.asarray(u.values, dtype=complex)
        for x, v in zip(u.grid.axis, vals):
            writer.writerow([repr(float(x)), repr(float(v.real)), repr(float(v.imag))])


def load_csv(path: str | Path) -> GridFunction:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    vals = np.array([float(r["real"]) + 1j * float(r["imag"]) for r in rows])
    grid = PeriodicGrid(1, len(rows))
    if np.all(vals.imag == 0):
        vals = vals.real
    return GridFunction(grid, vals)


def weierstrass(grid: PeriodicGrid, exponent: float, top_level: int | None = None,
                phases: Sequence[float] | None = None, axis: int = 0,
                first_level: int = 0) -> GridFunction:
    """Lacunary sum sum_k 2^{-k r} cos(2^k x + phase_k) along one axis."""
    top = grid.j_max - 1 if top_level is None else top_level
    if 2 ** top >= grid.nyquist:
        raise ValueError("top Weierstrass level exceeds the grid's Nyquist frequency")
    x = grid.coords[axis]
    total = np.zeros(grid.shape)
    for idx, k in enumerate(range(first_level, top + 1)):
        ph = 0.0 if phases is None else phases[idx]
        total += 2.0 ** (-k * exponent) * np.cos(2.0 ** k * x + ph)
    return GridFunction(grid, total)
