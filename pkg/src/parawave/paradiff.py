"""Paradifferential quantization on the torus.

The reference quantization of a symbol ``a(x, xi)`` acts on Fourier
coefficients as

    (T_a u)^(xi) = sum_eta chi(xi - eta, eta) a^(xi - eta, eta) psi_low(eta) u^(eta)

where ``a^(., eta)`` is the discrete x-transform of ``a(., eta)``.  The
``(2 pi)^-d`` of the continuous formula is absorbed by the coefficient
normalization of :mod:`parawave.spectral`.  Output frequencies are taken
modulo the lattice, so inputs should leave headroom below Nyquist.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .spectral import (
    DyadicPartition,
    GridFunction,
    PeriodicGrid,
    dyadic_block,
    dyadic_holder_norm,
    low_pass_profile,
    smooth_step,
)

SymbolEvaluator = Callable[[np.ndarray], np.ndarray]

XI_STEP = 2.0 ** -6
SEMINORM_RADII = (0.5, 1.0, 2.0, 4.0, 8.0, 16.0)


@dataclass(frozen=True)
class AdmissibleCutoff:
    eps1: float = 0.1
    eps2: float = 0.3

    def __post_init__(self) -> None:
        if not 0.0 < self.eps1 < self.eps2 < 0.5:
            raise ValueError("need 0 < eps1 < eps2 < 1/2")

    def chi_ratio(self, ratio: np.ndarray) -> np.ndarray:
        """chi as a function of |theta| / |eta|."""
        return 1.0 - smooth_step((np.asarray(ratio) - self.eps1) / (self.eps2 - self.eps1))

    def chi(self, theta_norm: np.ndarray, eta_norm: np.ndarray) -> np.ndarray:
        theta_norm = np.asarray(theta_norm, dtype=float)
        eta_norm = np.asarray(eta_norm, dtype=float)
        safe = np.where(eta_norm > 0, eta_norm, 1.0)
        return np.where(eta_norm > 0, self.chi_ratio(theta_norm / safe), 0.0)

    def psi_low(self, eta_norm: np.ndarray) -> np.ndarray:
        return 1.0 - low_pass_profile(np.asarray(eta_norm, dtype=float) / 2.0)


@dataclass(frozen=True, eq=False)
class Symbol:
    """A symbol a(x, xi) sampled on the x-grid.

    ``evaluate`` maps wavevectors of shape (K, d) to values of shape
    (K, *grid.shape).
    """

    grid: PeriodicGrid
    evaluate: SymbolEvaluator
    order: float
    rho: float = 0.0
    homogeneous: bool = False
    x_independent: bool = False
    xi_independent: bool = False
    name: str = ""
    # for xi-independent symbols: the x-function
    function: GridFunction | None = field(default=None, repr=False)

    def __call__(self, xi: np.ndarray) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        if xi.ndim == 1:
            return self.evaluate(xi[None, :])[0]
        return self.evaluate(xi)

    def at(self, xi: Sequence[float]) -> GridFunction:
        return GridFunction(self.grid, self(np.asarray(xi, dtype=float)))

    @classmethod
    def multiplier(cls, grid: PeriodicGrid, fn: Callable[[np.ndarray], np.ndarray],
                   order: float, name: str = "", homogeneous: bool = False) -> "Symbol":
        """x-independent symbol from fn(xi (K, d)) -> (K,)."""
        shape = grid.shape

        def evaluate(xi: np.ndarray) -> np.ndarray:
            vals = np.asarray(fn(xi))
            return np.broadcast_to(vals.reshape((-1,) + (1,) * grid.dim), (xi.shape[0],) + shape)

        return cls(grid, evaluate, order, rho=0.5, homogeneous=homogeneous,
                   x_independent=True, name=name)

    @classmethod
    def from_function(cls, f: GridFunction, name: str = "", rho: float = 0.0) -> "Symbol":
        """xi-independent symbol a(x, xi) = f(x)."""
        vals = f.values

        def evaluate(xi: np.ndarray) -> np.ndarray:
            return np.broadcast_to(vals, (xi.shape[0],) + vals.shape)

        return cls(f.grid, evaluate, 0.0, rho=rho, homogeneous=True, xi_independent=True,
                   name=name, function=f)

    @classmethod
    def product(cls, f: GridFunction, fn: Callable[[np.ndarray], np.ndarray], order: float,
                name: str = "", rho: float = 0.0) -> "Symbol":
        """Separable symbol f(x) * m(xi)."""
        vals = f.values

        def evaluate(xi: np.ndarray) -> np.ndarray:
            m = np.asarray(fn(xi)).reshape((-1,) + (1,) * f.grid.dim)
            return m * vals[None]

        return cls(f.grid, evaluate, order, rho=rho, name=name)


def half_wave_symbol(grid: PeriodicGrid, gravity: float = 1.0) -> Symbol:
    """sqrt(g |xi|)."""
    return Symbol.multiplier(grid, lambda xi: np.sqrt(gravity * np.linalg.norm(xi, axis=1)),
                             0.5, name="half_wave", homogeneous=True)


# ---------------------------------------------------------------------------
# quantization
# ---------------------------------------------------------------------------

def _flat_index_difference(grid: PeriodicGrid, out_idx: np.ndarray, in_idx: np.ndarray) -> np.ndarray:
    """Flat lattice index of (xi - eta) mod N for multi-indices of shape (A, d) and (B, d)."""
    n = grid.points_per_axis
    diff = (out_idx[:, None, :] - in_idx[None, :, :]) % n
    flat = np.zeros(diff.shape[:2], dtype=np.int64)
    for ax in range(grid.dim):
        flat = flat * n + diff[..., ax]
    return flat


def _lattice_multi_index(grid: PeriodicGrid) -> np.ndarray:
    idx = np.indices(grid.shape).reshape(grid.dim, -1).T
    return idx


def _symbol_columns(a: Symbol, cut: AdmissibleCutoff, eta_flat: np.ndarray) -> np.ndarray:
    """chi(theta, eta) a^(theta, eta) psi_low(eta) for each requested eta; shape (size, len(eta))."""
    grid = a.grid
    lattice = grid.lattice
    etas = lattice[eta_flat]
    eta_norm = np.linalg.norm(etas, axis=1)
    theta_norm = grid.abs_wavenumber.reshape(-1)
    axes = tuple(range(1, grid.dim + 1))
    if a.xi_independent and a.function is not None:
        coeff = a.function.spectrum.reshape(-1)[:, None]
    else:
        values = a(etas)
        if not np.all(np.isfinite(values)):
            raise ValueError("symbol is undefined at a required lattice frequency")
        coeff = (np.fft.fftn(values, axes=axes) / grid.size).reshape(len(eta_flat), -1).T
    weights = cut.chi(theta_norm[:, None], eta_norm[None, :]) * cut.psi_low(eta_norm)[None, :]
    return coeff * weights


def _active_etas(grid: PeriodicGrid, cut: AdmissibleCutoff, spectrum: np.ndarray | None) -> np.ndarray:
    eta_norm = grid.abs_wavenumber.reshape(-1)
    active = cut.psi_low(eta_norm) > 0
    if spectrum is not None:
        active &= np.abs(spectrum.reshape(-1)) > 0
    return np.nonzero(active)[0]


def _chunks(indices: np.ndarray, size: int):
    for start in range(0, len(indices), size):
        yield indices[start:start + size]


def paradiff_spectrum(a: Symbol, spectrum: np.ndarray, cut: AdmissibleCutoff = AdmissibleCutoff(),
                      chunk_budget: int = 2 ** 22) -> np.ndarray:
    """Output spectrum of T_a applied to the function with the given spectrum."""
    grid = a.grid
    spec_flat = np.asarray(spectrum).reshape(-1)
    out = np.zeros(grid.size, dtype=complex)
    etas = _active_etas(grid, cut, spectrum)
    if etas.size == 0:
        return out.reshape(grid.shape)
    multi = _lattice_multi_index(grid)
    chunk = max(1, chunk_budget // grid.size)
    for block in _chunks(etas, chunk):
        cols = _symbol_columns(a, cut, block)
        theta = _flat_index_difference(grid, multi, multi[block])
        gathered = np.take_along_axis(cols, theta, axis=0)
        out += gathered @ spec_flat[block]
    return out.reshape(grid.shape)


def paradiff_apply(a: Symbol, u: GridFunction, cut: AdmissibleCutoff = AdmissibleCutoff()) -> GridFunction:
    if a.grid != u.grid:
        raise ValueError("symbol and function live on different grids")
    return GridFunction.from_spectrum(u.grid, paradiff_spectrum(a, u.spectrum, cut))


def paradiff_matrix(a: Symbol, cut: AdmissibleCutoff = AdmissibleCutoff()) -> np.ndarray:
    """Dense Fourier-basis matrix of T_a (rows: output xi, columns: input eta, flat order)."""
    grid = a.grid
    mat = np.zeros((grid.size, grid.size), dtype=complex)
    etas = _active_etas(grid, cut, None)
    multi = _lattice_multi_index(grid)
    chunk = max(1, 2 ** 22 // grid.size)
    for block in _chunks(etas, chunk):
        cols = _symbol_columns(a, cut, block)
        theta = _flat_index_difference(grid, multi, multi[block])
        mat[:, block] = np.take_along_axis(cols, theta, axis=0)
    return mat


def paraproduct_apply(f: GridFunction, u: GridFunction,
                      cut: AdmissibleCutoff = AdmissibleCutoff()) -> GridFunction:
    """T_f u: the quantization of the xi-independent symbol f(x)."""
    if f.grid != u.grid:
        raise ValueError("grid mismatch")
    out = paradiff_apply(Symbol.from_function(f), u, cut)
    if f.is_real and u.is_real:
        return out.real
    return out


def paraproduct_blocks(f: GridFunction, u: GridFunction, gap: int = 3) -> GridFunction:
    """Littlewood-Paley fast path sum_j S_{j-gap}(f) Delta_j u."""
    part = DyadicPartition(u.grid)
    total = np.zeros(u.grid.shape, dtype=complex)
    for j in range(gap, part.j_max + 1):
        low = dyadic_block(f, j - gap, "s_low")
        total = total + low.values * dyadic_block(u, j, "delta").values
    if f.is_real and u.is_real:
        total = total.real
    return GridFunction(u.grid, total)


# ---------------------------------------------------------------------------
# seminorms
# ---------------------------------------------------------------------------

_FIRST = (np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0, np.arange(-2, 3))


def xi_derivative(evaluate: Callable[[np.ndarray], np.ndarray], xi: np.ndarray,
                  alpha: Sequence[int], step: float) -> np.ndarray:
    """d^alpha_xi of an evaluator (K, d) -> (K, ...) by nested 4th-order centered differences."""
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    alpha = tuple(int(a) for a in alpha)
    if sum(alpha) == 0:
        return evaluate(xi)
    axis = next(i for i, a in enumerate(alpha) if a > 0)
    reduced = list(alpha)
    reduced[axis] -= 1
    coeffs, offsets = _FIRST
    total = 0.0
    for c, o in zip(coeffs, offsets):
        if c == 0.0:
            continue
        shifted = xi.copy()
        shifted[:, axis] += o * step
        total = total + c * xi_derivative(evaluate, shifted, reduced, step)
    return total / step


def multi_indices(dim: int, max_order: int) -> list[tuple[int, ...]]:
    return [a for a in itertools.product(range(max_order + 1), repeat=dim) if sum(a) <= max_order]


def seminorm_sample_points(dim: int, radii: Sequence[float] = SEMINORM_RADII,
                           n_angles: int = 8) -> np.ndarray:
    if dim == 1:
        r = np.asarray(radii, dtype=float)
        return np.concatenate([r, -r])[:, None]
    angles = 2 * np.pi * np.arange(n_angles) / n_angles
    pts = [(r * np.cos(t), r * np.sin(t)) for r in radii for t in angles]
    return np.asarray(pts)


def regularity_norm(u: GridFunction, rho: float) -> float:
    """W^{rho, inf} norm: sup norm for rho = 0, dyadic Hölder norm for non-integer rho."""
    if rho == 0:
        return u.sup_norm()
    if float(rho).is_integer():
        raise ValueError(f"regularity index {rho} is a positive integer; not supported")
    return dyadic_holder_norm(u, rho)


def symbol_seminorm(a: Symbol, alpha_max: int, rho: float | None = None,
                    radii: Sequence[float] = SEMINORM_RADII) -> float:
    """max over |alpha| <= alpha_max and sampled |xi| >= 1/2 of <xi>^{|alpha|-m} ||d^alpha_xi a||_{W^{rho,inf}}."""
    rho = a.rho if rho is None else rho
    if rho != 0 and float(rho).is_integer():
        raise ValueError(f"regularity index {rho} is a positive integer; not supported")
    grid = a.grid
    points = seminorm_sample_points(grid.dim, radii)
    best = 0.0
    for alpha in multi_indices(grid.dim, alpha_max):
        for xi in points:
            r = float(np.linalg.norm(xi))
            step = XI_STEP * max(1.0, r)
            vals = xi_derivative(a.evaluate, xi[None, :], alpha, step)[0]
            weight = (1.0 + r * r) ** ((sum(alpha) - a.order) / 2.0)
            best = max(best, weight * regularity_norm(GridFunction(grid, vals), rho))
    return best


# ---------------------------------------------------------------------------
# localization of the transport term
# ---------------------------------------------------------------------------

def localize_transport(V: Sequence[GridFunction], u: GridFunction, j: int,
                       cut: AdmissibleCutoff = AdmissibleCutoff()) -> tuple[GridFunction, GridFunction]:
    """Split T_V . grad(Delta_j u) into S_j(V) . grad(Delta_j u) plus a remainder."""
    if j < 0:
        raise ValueError("j must be nonnegative")
    if len(V) != u.grid.dim:
        raise ValueError("V must have one component per dimension")
    block = dyadic_block(u, j, "delta")
    grads = block.gradient()
    main = GridFunction.zeros(u.grid)
    full = GridFunction.zeros(u.grid)
    for v, g in zip(V, grads):
        main = main + dyadic_block(v, j, "s_low") * g
        full = full + paraproduct_apply(v, g, cut)
    return main, full - main


# ---------------------------------------------------------------------------
# Fourier transform of the cutoff in its first slot
# ---------------------------------------------------------------------------

def cutoff_fourier_transform(cut: AdmissibleCutoff, eta: Sequence[float], mu: np.ndarray,
                             nodes: int | None = None) -> np.ndarray:
    """chi^(mu, eta) = int exp(-i mu.zeta) chi(zeta, eta) d zeta, by trapezoid over the compact support."""
    eta = np.asarray(eta, dtype=float)
    mu = np.atleast_2d(np.asarray(mu, dtype=float))
    dim = eta.size
    if mu.shape[1] != dim:
        mu = mu.reshape(-1, dim)
    radius = cut.eps2 * float(np.linalg.norm(eta))
    if radius == 0:
        return np.zeros(mu.shape[0])
    if nodes is None:
        # trapezoid on a compactly supported smooth function is exact up to aliasing at 2 pi / spacing
        nodes = max(512 if dim == 2 else 2048, int(4 * radius * np.abs(mu).max()) + 1)
    axis = np.linspace(-radius, radius, nodes + 1)
    weight = axis[1] - axis[0]
    if dim == 1:
        vals = cut.chi(np.abs(axis), np.linalg.norm(eta))
        # chi is even, so the transform is a cosine transform
        return (np.cos(np.outer(mu[:, 0], axis)) @ vals) * weight
    zz = np.meshgrid(axis, axis, indexing="ij")
    vals = cut.chi(np.sqrt(zz[0] ** 2 + zz[1] ** 2), np.linalg.norm(eta)).ravel()
    pts = np.stack([z.ravel() for z in zz], axis=1)
    out = np.empty(mu.shape[0])
    for i, m in enumerate(mu):
        out[i] = np.cos(pts @ m) @ vals * weight ** 2
    return out


def cutoff_normalized_kernel(cut: AdmissibleCutoff, eta: Sequence[float], mu: np.ndarray,
                             nodes: int | None = None) -> np.ndarray:
    """(2 pi)^{-d} chi^(mu, eta): integrates to chi(0, eta) = 1 in mu."""
    d = np.asarray(eta).size
    return cutoff_fourier_transform(cut, eta, mu, nodes) / (2 * math.pi) ** d
