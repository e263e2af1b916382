"""Oscillatory-integral parametrix, its conjugation residual, and dispersive decay scans.

The kernel is

    K(t, z, y) = (2 pi h_tilde)^-d  int exp(i (phi(t, z, xi) - y.xi) / h_tilde) b~(t, z, y, xi) chi1(xi) dxi,
    b~ = Psi0(d_xi phi - y) b,

and d_xi phi(t, z, xi) = kappa(t; z, xi) because phi generates the ray map.
Two realizations act on periodic data w(y) = sum_k w_k exp(i k h_tilde y):

* localized form: the y-integral against the bump gives
  sum_k w_k Psi0^(k h_tilde - xi / h_tilde) exp(i kappa.(k h_tilde - xi / h_tilde)),
  and the xi-integral is a trapezoid sum;
* lattice form: Psi0 = 1, so the y-integral is a delta at xi = h k and
  K w (z) = sum_k w_k exp(i phi(t, z, h k) / h_tilde) b(t, z, h k) chi1(h k).

The lattice form is exact for constant coefficients; the localized form
carries the Psi0 tail, which decays only like exp(-c sqrt(|.|)) for a
C-infinity bump of the exp(-1/t) family.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Protocol, Sequence

import numpy as np
from scipy.interpolate import BarycentricInterpolator
from scipy.sparse.linalg import expm_multiply
from scipy.special import j0

from .errors import ConvergenceError
from .fitting import DecayFit, power_law_fit
from .flows import (ConstantHamiltonian, SemiclassicalSymbol, eikonal_phase, half_wave_hamiltonian,
                    hamiltonian_gradient, localization_bump, microlocal_window, periodic_coefficients, periodic_interpolate,
                    transport_solve)
from .paradiff import AdmissibleCutoff, Symbol, paradiff_matrix
from .smoothing import DELTA, SmoothedSymbol, SmoothingParams, smooth_field
from .spectral import GridFunction, PeriodicGrid, upsample, window_profile
from .symmetrize import symbols_from_fields
from .waterwaves import FluidParams, mode_state, traces_and_taylor

KERNEL_TOL = 1e-8
MAX_REFINEMENTS = 8
PHASE_STEP_LIMIT = 0.1


def amplitude_cutoff(r: np.ndarray) -> np.ndarray:
    """chi: 1 on 3/4 <= |xi| <= 3/2, supported in 1/2 <= |xi| <= 2."""
    return window_profile(r, 0.5, 2.0, 0.75, 1.5)


def packet_filter(r: np.ndarray) -> np.ndarray:
    """Spectral filter for data: supported where chi = 1."""
    return window_profile(r, 0.75, 1.5, 0.9, 1.25)


def sigma_zero(dim: int) -> int:
    """Smallest integer above d/2."""
    return dim // 2 + 1


# ---------------------------------------------------------------------------
# Fourier transform of the localization bump
# ---------------------------------------------------------------------------

@lru_cache(maxsize=8)
def _bump_table(dim: int, omega_max: float, spacing: float = 2.5e-3) -> tuple[np.ndarray, np.ndarray]:
    omega = np.arange(0.0, omega_max + 2 * spacing, spacing)
    r = np.linspace(0.0, 2.0, 4097)
    dr = r[1] - r[0]
    w = np.full(r.size, dr)
    w[0] = w[-1] = dr / 2
    bump = localization_bump(r) * w
    out = np.empty(omega.size)
    for start in range(0, omega.size, 4096):
        om = omega[start:start + 4096]
        if dim == 1:
            out[start:start + 4096] = 2.0 * np.cos(np.outer(om, r)) @ bump
        else:
            out[start:start + 4096] = 2.0 * math.pi * j0(np.outer(om, r)) @ (bump * r)
    return omega, out


def bump_transform(omega: np.ndarray, dim: int) -> np.ndarray:
    """Psi0^(omega) = int exp(-i omega.u) Psi0(u) du for omega of shape (..., d); real and radial."""
    mag = np.linalg.norm(np.asarray(omega, dtype=float), axis=-1)
    top = float(mag.max()) if mag.size else 0.0
    omega_max = 2.0 ** math.ceil(math.log2(max(top, 16.0)))
    grid, table = _bump_table(dim, omega_max)
    step = grid[1] - grid[0]
    idx = np.clip(np.floor(mag / step).astype(int), 1, grid.size - 3)
    s = mag / step - idx
    p0, p1, p2, p3 = table[idx - 1], table[idx], table[idx + 1], table[idx + 2]
    # cubic Lagrange interpolation through four consecutive table entries
    return (-s * (s - 1) * (s - 2) / 6 * p0 + (s + 1) * (s - 1) * (s - 2) / 2 * p1
            - (s + 1) * s * (s - 2) / 2 * p2 + (s + 1) * s * (s - 1) / 6 * p3)


# ---------------------------------------------------------------------------
# phase models
# ---------------------------------------------------------------------------

class PhaseModel(Protocol):
    dim: int
    h_tilde: float
    t: np.ndarray
    translation_invariant: bool

    def evaluate(self, n: int, xi: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(phi - z.xi, z - kappa, b) at time index n: shapes (Q, P), (Q, P, d), (Q, P)."""
        ...


@dataclass(frozen=True, eq=False)
class ClosedFormPhase:
    """phi = z.xi - t p(xi), kappa = z - t grad p(xi), b = chi(xi), for a constant-coefficient symbol."""

    hamiltonian: ConstantHamiltonian
    t: np.ndarray
    chi_amp: Callable[[np.ndarray], np.ndarray] = amplitude_cutoff
    translation_invariant: bool = True

    @property
    def dim(self) -> int:
        return self.hamiltonian.grid.dim

    @property
    def h_tilde(self) -> float:
        return self.hamiltonian.h_tilde

    def evaluate(self, n: int, xi: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        xi = np.atleast_2d(xi)
        z = np.atleast_2d(z)
        t = float(self.t[n])
        pv = self.hamiltonian(t, np.zeros_like(xi), xi)
        _, grad = hamiltonian_gradient(self.hamiltonian, t, np.zeros_like(xi), xi)
        P = z.shape[0]
        inc = np.broadcast_to((-t * pv)[:, None], (xi.shape[0], P))
        shift = np.broadcast_to((t * grad)[:, None, :], (xi.shape[0], P, self.dim))
        amp = np.broadcast_to(self.chi_amp(np.linalg.norm(xi, axis=1))[:, None], (xi.shape[0], P)).astype(complex)
        return inc, shift, amp


def chebyshev_nodes(n: int, lo: float = 0.5, hi: float = 2.0) -> np.ndarray:
    """Chebyshev points of the second kind on [lo, hi], endpoints included."""
    k = np.arange(n)
    return lo + (hi - lo) * (1 - np.cos(np.pi * k / (n - 1))) / 2


@dataclass(frozen=True, eq=False)
class TracedPhase:
    """Eikonal and transport data traced on Chebyshev xi-nodes (both signs, d = 1), interpolated in xi and z."""

    grid: PeriodicGrid
    h_tilde: float
    t: np.ndarray
    nodes: np.ndarray          # (n,) positive nodes on [1/2, 2]
    increment: np.ndarray      # (nt, 2n, K): columns ordered +nodes then -nodes
    shift: np.ndarray          # (nt, 2n, K, 1): z - kappa
    amplitude: np.ndarray      # (nt, 2n, K): b / chi(xi), complex
    chi_amp: Callable[[np.ndarray], np.ndarray] = amplitude_cutoff
    translation_invariant: bool = False

    @property
    def dim(self) -> int:
        return 1

    def _z_interp(self, arr: np.ndarray, z: np.ndarray, real: bool) -> np.ndarray:
        coeffs = periodic_coefficients(self.grid, arr.reshape((arr.shape[0],) + self.grid.shape))
        return periodic_interpolate(self.grid, coeffs, self.h_tilde * z, real=real)

    def evaluate(self, n: int, xi: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        xi = np.atleast_2d(xi)[:, 0]
        z = np.atleast_2d(z)
        nn = len(self.nodes)
        inc_z = self._z_interp(self.increment[n], z, True)
        sh_z = self._z_interp(self.shift[n, :, :, 0], z, True)
        amp_z = self._z_interp(self.amplitude[n], z, False)
        out_inc = np.zeros((xi.size, z.shape[0]))
        out_sh = np.zeros((xi.size, z.shape[0]))
        out_amp = np.zeros((xi.size, z.shape[0]), dtype=complex)
        r = np.abs(xi)
        live = (r >= self.nodes[0]) & (r <= self.nodes[-1])
        for sign, cols in ((1.0, slice(0, nn)), (-1.0, slice(nn, 2 * nn))):
            sel = live & (np.sign(xi) == sign)
            if not np.any(sel):
                continue
            for src, dst in ((inc_z, out_inc), (sh_z, out_sh), (amp_z, out_amp)):
                dst[sel] = BarycentricInterpolator(self.nodes, src[cols], axis=0)(r[sel])
        out_amp *= self.chi_amp(r)[:, None]
        return out_inc, out_sh[..., None], out_amp


def build_traced_phase(sym: SemiclassicalSymbol | ConstantHamiltonian, t_grid: Sequence[float], n_nodes: int = 17,
                       levels: int = 1, chi_amp: Callable[[np.ndarray], np.ndarray] = amplitude_cutoff,
                       substeps: int = 1) -> TracedPhase:
    """Trace rays and transport on Chebyshev xi-nodes of both signs (d = 1)."""
    grid = sym.grid
    if grid.dim != 1:
        raise ValueError("traced phases are implemented for d = 1")
    nodes = chebyshev_nodes(n_nodes)
    xi_set = np.concatenate([nodes, -nodes])[:, None]
    pp = eikonal_phase(sym, t_grid, xi_set, substeps=substeps)
    tp = transport_solve(pp, sym, N=levels, chi_amp=lambda r: np.ones_like(r))
    amp = tp.amplitude(sym.h_tilde)
    shift = (pp.z_grid[None, None] - pp.kappa)
    return TracedPhase(grid, sym.h_tilde, pp.t, nodes, pp.increment, shift, amp, chi_amp)


# ---------------------------------------------------------------------------
# kernel
# ---------------------------------------------------------------------------

def xi_nodes(dim: int, spacing: float, lo: float = 0.5, hi: float = 2.0) -> tuple[np.ndarray, float]:
    """Uniform trapezoid nodes covering lo <= |xi| <= hi, and the cell weight."""
    if dim == 1:
        pos = lo + spacing * np.arange(int(math.floor((hi - lo) / spacing)) + 1)
        return np.concatenate([pos, -pos])[:, None], spacing
    axis = spacing * np.arange(-int(math.ceil(hi / spacing)), int(math.ceil(hi / spacing)) + 1)
    g = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1).reshape(-1, 2)
    r = np.linalg.norm(g, axis=1)
    return g[(r >= lo) & (r <= hi)], spacing ** 2


@dataclass(frozen=True, eq=False)
class ParametrixKernel:
    phase: PhaseModel
    chi1: Callable[[np.ndarray], np.ndarray] = microlocal_window
    spacing: float | None = None

    @property
    def h_tilde(self) -> float:
        return self.phase.h_tilde

    @property
    def dim(self) -> int:
        return self.phase.dim

    @property
    def base_spacing(self) -> float:
        return self.h_tilde / 2 if self.spacing is None else self.spacing


def _kernel_sum(pk: ParametrixKernel, n: int, z: np.ndarray, y: np.ndarray, spacing: float) -> np.ndarray:
    xi, weight = xi_nodes(pk.dim, spacing)
    ht = pk.h_tilde
    out = np.zeros(z.shape[0], dtype=complex)
    for p in range(z.shape[0]):
        inc, shift, amp = pk.phase.evaluate(n, xi, z[p:p + 1])
        kappa = z[p][None] - shift[:, 0]
        phase = ((z[p] - y[p])[None] @ xi.T)[0] + inc[:, 0]
        loc = localization_bump(kappa - y[p][None])
        out[p] = np.sum(np.exp(1j * phase / ht) * amp[:, 0] * pk.chi1(np.linalg.norm(xi, axis=1)) * loc) * weight
    return out / (2 * math.pi * ht) ** pk.dim


def kernel_eval(pk: ParametrixKernel, n: int, z: np.ndarray, y: np.ndarray, tol: float = KERNEL_TOL,
                max_refinements: int = MAX_REFINEMENTS) -> np.ndarray:
    """K(t_n, z, y) for paired rows of z and y, halving the xi spacing until successive values agree."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if float(pk.phase.t[n]) <= 0:
        raise ValueError("kernel values need t > 0")
    spacing = pk.base_spacing
    prev = _kernel_sum(pk, n, z, y, spacing)
    for _ in range(max_refinements):
        spacing /= 2
        cur = _kernel_sum(pk, n, z, y, spacing)
        scale = max(1.0, float(np.abs(cur).max()))
        if float(np.abs(cur - prev).max()) <= tol * scale:
            return cur
        prev = cur
    raise ConvergenceError("xi-quadrature of the kernel did not settle; use a finer starting spacing",
                           float(np.abs(cur - prev).max()))


# ---------------------------------------------------------------------------
# applying the parametrix
# ---------------------------------------------------------------------------

def check_spectral_support(w0: GridFunction, h: float, tol: float = 1e-12) -> None:
    mag = np.abs(w0.spectrum)
    outside = amplitude_cutoff(h * w0.grid.abs_wavenumber) < 1.0 - 1e-14
    if mag[outside].max(initial=0.0) > tol * max(mag.max(), 1e-300):
        raise ValueError("datum is not spectrally supported where the amplitude cutoff equals 1")


def _active_modes(w0: GridFunction, tol: float = 1e-15) -> np.ndarray:
    mag = np.abs(w0.spectrum).reshape(-1)
    return np.nonzero(mag > tol * mag.max())[0]


def apply_parametrix(pk: ParametrixKernel, w0: GridFunction, n: int, localized: bool = False,
                     check_support: bool = True) -> GridFunction:
    """K w0 at t_n on the grid of w0 (z = x / h_tilde)."""
    grid = w0.grid
    ht = pk.h_tilde
    h = ht * ht
    if grid.dim != pk.dim:
        raise ValueError("datum dimension does not match the kernel")
    if check_support:
        check_spectral_support(w0, h)
    active = _active_modes(w0)
    k = grid.lattice[active]
    coeff = w0.spectrum.reshape(-1)[active]
    z = grid.points / ht
    if not localized:
        xi = h * k
        inc, shift, amp = pk.phase.evaluate(n, xi, z)
        chi1 = pk.chi1(np.linalg.norm(xi, axis=1))
        if pk.phase.translation_invariant:
            spec = np.zeros(grid.size, dtype=complex)
            spec[active] = coeff * chi1 * amp[:, 0] * np.exp(1j * inc[:, 0] / ht)
            return GridFunction.from_spectrum(grid, spec.reshape(grid.shape))
        out = np.zeros(grid.size, dtype=complex)
        for q in range(xi.shape[0]):
            phase = grid.points @ k[q] + inc[q] / ht
            out += coeff[q] * chi1[q] * amp[q] * np.exp(1j * phase)
        return GridFunction(grid, out.reshape(grid.shape))
    xi, weight = xi_nodes(pk.dim, pk.base_spacing)
    inc, shift, amp = pk.phase.evaluate(n, xi, z if not pk.phase.translation_invariant else z[:1])
    chi1 = pk.chi1(np.linalg.norm(xi, axis=1))
    kz = ht * k  # z-wavenumbers
    norm = weight / (2 * math.pi * ht) ** pk.dim
    if pk.phase.translation_invariant:
        spec = np.zeros(active.size, dtype=complex)
        for q in range(xi.shape[0]):
            if chi1[q] * abs(amp[q, 0]) == 0:
                continue
            s = shift[q, 0]
            omega = kz - xi[q][None] / ht
            pre = np.exp(1j * (s @ xi[q] + inc[q, 0]) / ht) * amp[q, 0] * chi1[q]
            spec += pre * bump_transform(omega, pk.dim) * np.exp(-1j * (kz @ s))
        full = np.zeros(grid.size, dtype=complex)
        full[active] = norm * coeff * spec
        return GridFunction.from_spectrum(grid, full.reshape(grid.shape))
    out = np.zeros(grid.size, dtype=complex)
    for q in range(xi.shape[0]):
        if chi1[q] == 0 or not np.any(amp[q]):
            continue
        kappa = z - shift[q]
        omega = kz - xi[q][None] / ht
        wk = coeff * bump_transform(omega, pk.dim)
        inner = np.exp(1j * kappa @ omega.T) @ wk
        phase = ((z - kappa) @ xi[q] + inc[q]) / ht
        out += norm * chi1[q] * amp[q] * np.exp(1j * phase) * inner
    return GridFunction(grid, out.reshape(grid.shape))


# ---------------------------------------------------------------------------
# the semiclassical operator and the conjugation residual
# ---------------------------------------------------------------------------

def semiclassical_operator(sym: SemiclassicalSymbol | ConstantHamiltonian, t: float,
                           grid: PeriodicGrid | None = None) -> np.ndarray:
    """Dense matrix of P on values over ``grid`` (z = x / h_tilde): left quantization of p, with p~ when the flow is not the identity."""
    grid = sym.grid if grid is None else grid
    ht = sym.h_tilde
    h = ht * ht
    z = grid.points / ht
    k = grid.lattice
    zeta = h * k
    dft = np.exp(-1j * grid.points @ k.T) / grid.size  # values -> spectrum
    if isinstance(sym, ConstantHamiltonian):
        return (np.exp(1j * grid.points @ k.T) * sym(t, np.zeros_like(zeta), zeta)[None]) @ dft
    if sym.flow.trivial:
        left = np.empty((grid.size, grid.size))
        for i in range(grid.size):
            left[i] = sym(t, np.repeat(z[i:i + 1], k.shape[0], axis=0), zeta)
        return (left * np.exp(1j * grid.points @ k.T)) @ dft
    if grid.dim != 1:
        raise ValueError("the p~ quantization is implemented for d = 1")
    period = 2 * math.pi / ht
    mat = np.zeros((grid.size, grid.size), dtype=complex)
    for i in range(grid.size):
        zp = z[:, 0]
        zp = zp + period * np.round((z[i, 0] - zp) / period)  # nearest periodic image
        zz = np.repeat(z[i:i + 1], grid.size, axis=0)
        for m in range(grid.size):
            vals = sym.p_tilde(t, zz, zp[:, None], np.repeat(zeta[m:m + 1], grid.size, axis=0))
            mat[i] += np.exp(1j * k[m, 0] * (grid.points[i, 0] - ht * zp)) * vals / grid.size
    return mat


@dataclass(frozen=True)
class ResidualSample:
    t: float
    norm: float
    relative: float


_TIME_STENCILS = {
    4: (np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0),
    6: (np.array([-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0]) / 60.0),
    8: (np.array([3.0, -32.0, 168.0, -672.0, 0.0, 672.0, -168.0, 32.0, -3.0]) / 840.0),
}


def conjugation_residual(pk: ParametrixKernel, sym: SemiclassicalSymbol | ConstantHamiltonian, w0: GridFunction,
                         indices: Sequence[int], order: int = 6) -> list[ResidualSample]:
    """||(h_tilde d_t + h_tilde c + i P) K w0||_{H^sigma0} at t_indices, central differencing in t of the given order."""
    if order not in _TIME_STENCILS:
        raise ValueError(f"differencing order must be one of {sorted(_TIME_STENCILS)}")
    stencil = _TIME_STENCILS[order]
    half = order // 2
    t = pk.phase.t
    ht = pk.h_tilde
    grid = w0.grid
    sigma = sigma_zero(grid.dim)
    out = []
    cache: dict[int, GridFunction] = {}

    def K(m: int) -> GridFunction:
        if m not in cache:
            cache[m] = apply_parametrix(pk, w0, m)
        return cache[m]

    base = w0.l2_norm()
    for n in indices:
        if n < half or n + half >= len(t):
            raise ValueError(f"each residual time needs {half} samples on each side")
        steps = np.diff(t[n - half:n + half + 1])
        dt = float(steps[0])
        if np.ptp(steps) > 1e-9 * dt:
            raise ValueError("residual stencil needs equally spaced times")
        P = semiclassical_operator(sym, float(t[n]), grid)
        Kn = K(n).values
        PK = (P @ Kn.reshape(-1)).reshape(grid.shape)
        rate = float(np.linalg.norm(PK) / max(np.linalg.norm(Kn), 1e-300))
        if dt * rate / ht > PHASE_STEP_LIMIT:
            raise ValueError(f"time grid too coarse: phase advance {dt * rate / ht:.3g} per step exceeds "
                             f"{PHASE_STEP_LIMIT}")
        dK = sum(c * K(n + off).values for off, c in zip(range(-half, half + 1), stencil) if c != 0) / dt
        c = sym.c(float(t[n]), grid.points / ht).reshape(grid.shape)
        F = ht * dK + ht * c * Kn + 1j * PK
        f = GridFunction(grid, F)
        weight = (1.0 + (ht * grid.abs_wavenumber) ** 2) ** sigma
        norm = float(np.sqrt(np.sum(weight * np.abs(f.spectrum) ** 2)))
        out.append(ResidualSample(float(t[n]), norm, norm / base))
    return out


# ---------------------------------------------------------------------------
# spectral propagation of the smoothed localized equation
# ---------------------------------------------------------------------------

def delta_packet(grid: PeriodicGrid, j: int, center: Sequence[float] | None = None,
                 direction: Sequence[float] | None = None) -> GridFunction:
    """Gaussian of width h/4 modulated to |xi| = 1/h, then filtered to the flat part of chi."""
    h = 2.0 ** -j
    d = grid.dim
    center = np.full(d, math.pi) if center is None else np.asarray(center, dtype=float)
    direction = np.eye(d)[0] if direction is None else np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    if packet_filter(np.array([1.0]))[0] != 1.0 or grid.nyquist * h < 2.0:
        raise ValueError(f"grid with {grid.points_per_axis} points cannot resolve frequency 2/h at j = {j}")
    offset = [c - cx for c, cx in zip(grid.coords, center)]
    offset = [(o + math.pi) % (2 * math.pi) - math.pi for o in offset]
    r2 = sum(o * o for o in offset)
    width = h / 4
    carrier = sum(dv * c for dv, c in zip(direction, grid.coords)) / h
    raw = GridFunction(grid, np.exp(-r2 / (2 * width ** 2)) * np.exp(1j * carrier))
    spec = raw.spectrum * packet_filter(h * grid.abs_wavenumber)
    return GridFunction.from_spectrum(grid, spec)


def free_propagate(u0: GridFunction, times: Sequence[float], gravity: float = 1.0) -> list[GridFunction]:
    """exp(-i t sqrt(g |D|)) u0."""
    omega = np.sqrt(gravity * u0.grid.abs_wavenumber)
    return [GridFunction.from_spectrum(u0.grid, u0.spectrum * np.exp(-1j * t * omega)) for t in times]


def smoothed_generator(grid: PeriodicGrid, taylor: np.ndarray, slope: Sequence[np.ndarray],
                       velocity: Sequence[np.ndarray] | None, sp: SmoothingParams,
                       cut: AdmissibleCutoff = AdmissibleCutoff()) -> np.ndarray:
    """Spectral matrix of -(1/2)(T_{V_delta}.grad + div T_{V_delta}) - i T_{gamma_delta}."""
    ps = symbols_from_fields(grid, slope, taylor)
    A = -1j * paradiff_matrix(SmoothedSymbol(ps.gamma, sp).as_symbol(), cut)
    if velocity is not None and any(np.any(v != 0) for v in velocity):
        Vd = smooth_field([GridFunction(grid, np.asarray(v, dtype=float)) for v in velocity], sp)
        k = grid.lattice
        for ax, v in enumerate(Vd):
            T = paradiff_matrix(Symbol.from_function(v), cut)
            ik = 1j * k[:, ax]
            A -= 0.5 * (T * ik[None, :] + ik[:, None] * T)
    return A


def dense_propagate(A: np.ndarray, u0: GridFunction, times: Sequence[float]) -> list[GridFunction]:
    """exp(t A) applied to the spectrum of u0 (Krylov action of the matrix exponential)."""
    out = []
    spec = u0.spectrum.reshape(-1)
    for t in times:
        v = spec if t == 0 else expm_multiply(A * float(t), spec)
        out.append(GridFunction.from_spectrum(u0.grid, v.reshape(u0.grid.shape)))
    return out


# ---------------------------------------------------------------------------
# dispersion scan
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DispersionFits:
    path: str
    t_fits: dict[int, DecayFit]
    h_fit: DecayFit
    rows: list[dict] = field(default_factory=list)

    @property
    def low_confidence(self) -> bool:
        return self.h_fit.r_squared < 0.95 or any(f.r_squared < 0.95 for f in self.t_fits.values())


def dispersion_times(j: int, fractions: Sequence[float]) -> np.ndarray:
    window = 2.0 ** (-j * float(DELTA) / 2)
    return window * np.asarray(fractions, dtype=float)


def dispersion_grid(dim: int, j: int) -> PeriodicGrid:
    return PeriodicGrid(dim, 2 ** (j + 3))


def _sup_ratio(u: GridFunction, l1: float) -> float:
    return float(np.abs(upsample(u, 2)).max()) / l1


def perturbed_coefficients(grid: PeriodicGrid, epsilon: float, gravity: float = 1.0
                           ) -> tuple[np.ndarray, list[np.ndarray], list[np.ndarray]]:
    """Taylor coefficient, slope and velocity trace of the still surface eta = epsilon cos(x_1)."""
    w = mode_state(grid, [{"k": [1] + [0] * (grid.dim - 1), "amplitude": epsilon, "phase": 0.0}], [])
    tf = traces_and_taylor(w, FluidParams(gravity=gravity))
    return tf.a.values, [g.values for g in w.eta.gradient()], [v.values for v in tf.V]


def dispersion_scan(dim: int, levels: Sequence[int], path: str, fractions: Sequence[float] = (1 / 16, 1 / 8, 1 / 4, 1 / 2, 1.0),
                    epsilon: float = 0.0, gravity: float = 1.0, h_fraction: float = 1.0) -> DispersionFits:
    """sup|S(t) u0| / ||u0||_{L1} for delta-like packets; t-exponent per j, h-exponent of the t^{d/2}-rescaled value at t = h_fraction * h^{delta/2}."""
    if path not in ("parametrix", "spectral"):
        raise ValueError(f"unknown propagation path {path!r}")
    if epsilon and (path == "parametrix" or dim != 1):
        raise ValueError("perturbed states are propagated on the spectral path in d = 1")
    rows = []
    t_fits: dict[int, DecayFit] = {}
    amps = []
    for j in levels:
        grid = dispersion_grid(dim, j)
        sp = SmoothingParams(j)
        times = dispersion_times(j, list(fractions) + [h_fraction])
        u0 = delta_packet(grid, j)
        l1 = u0.l1_norm()
        if path == "spectral":
            if epsilon:
                taylor, slope, velocity = perturbed_coefficients(grid, epsilon, gravity)
                A = smoothed_generator(grid, taylor, slope, velocity, sp)
                states = dense_propagate(A, u0, times)
            else:
                states = free_propagate(u0, times, gravity)
        else:
            ht = sp.h_tilde
            ham = half_wave_hamiltonian(grid, ht, gravity)
            pk = ParametrixKernel(ClosedFormPhase(ham, times))
            states = [apply_parametrix(pk, u0, n, localized=True) for n in range(len(times))]
        ratios = [_sup_ratio(u, l1) for u in states]
        for t, r in zip(times[:-1], ratios[:-1]):
            rows.append({"path": path, "j": j, "h": 2.0 ** -j, "t": float(t), "sup_over_l1": r})
        t_fits[j] = power_law_fit(times[:-1], ratios[:-1])
        amps.append(ratios[-1] * float(times[-1]) ** (dim / 2))
    h_fit = power_law_fit(2.0 ** -np.asarray(levels, dtype=float), amps)
    return DispersionFits(path, t_fits, h_fit, rows)
