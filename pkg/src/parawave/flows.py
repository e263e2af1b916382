"""Straightened transport flow, the semiclassical symbol, rays, eikonal phase and transport amplitudes.

Variables.  ``x`` lives on the 2 pi-torus of the water-wave grid, ``y`` is the
straightened coordinate (x = X(t; y)), and ``z = y / h_tilde`` is the
semiclassical coordinate, periodic with period 2 pi / h_tilde.  All periodic
maps of ``z`` are stored on the seed lattice ``z_k = x_k / h_tilde`` and
interpolated trigonometrically, so derivatives in ``z`` are h_tilde times
x-derivatives on the grid.

The semiclassical symbol.  With rho = M0 zeta and h = h_tilde^2,

    p(t, z, zeta) = [chi(h D_x, rho) gamma_delta(t, ., rho)](X(t, h_tilde z)) * phi1(rho),

which is the mu-integral of the normalized kernel (2 pi)^-d chi^(mu, rho) against
gamma_delta(X - h mu, rho), evaluated on the Fourier side.  ``p_quadrature`` keeps
the mu-integral itself as an independent route.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConvergenceError
from .paradiff import AdmissibleCutoff, cutoff_normalized_kernel
from .smoothing import SmoothingParams, smoothing_weights
from .spectral import GridFunction, PeriodicGrid, annulus_profile, low_pass_profile, window_profile
from .symmetrize import _quadratic_form
from .waterwaves import FluidParams, WaveState, traces_and_taylor

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 20
RAY_FD_STEP = 1e-3
GAUSS_NODES, GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(8)
GAUSS_NODES = 0.5 * (GAUSS_NODES + 1.0)
GAUSS_WEIGHTS = 0.5 * GAUSS_WEIGHTS

_FIRST = ((-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0))
_SECOND = ((-2, -1.0 / 12.0), (-1, 16.0 / 12.0), (0, -30.0 / 12.0), (1, 16.0 / 12.0), (2, -1.0 / 12.0))


def microlocal_window(r: np.ndarray) -> np.ndarray:
    """phi1: 1 on 1/3 <= |xi| <= 3, supported in 1/4 <= |xi| <= 4."""
    return window_profile(r, 0.25, 4.0, 1.0 / 3.0, 3.0)


def localization_bump(t: np.ndarray) -> np.ndarray:
    """Psi0: 1 for |t| <= 1, 0 for |t| >= 2 (radial in R^d)."""
    t = np.asarray(t, dtype=float)
    r = np.linalg.norm(t, axis=-1) if t.ndim > 1 else np.abs(t)
    return low_pass_profile(r / 2.0)


# ---------------------------------------------------------------------------
# trigonometric interpolation helpers
# ---------------------------------------------------------------------------

def _grid_axes(grid: PeriodicGrid, lead: int) -> tuple[int, ...]:
    return tuple(range(lead, lead + grid.dim))


def periodic_coefficients(grid: PeriodicGrid, values: np.ndarray) -> np.ndarray:
    """Fourier coefficients of a stack of grid functions, shape (C, size)."""
    values = np.asarray(values)
    lead = values.ndim - grid.dim
    spec = np.fft.fftn(values, axes=_grid_axes(grid, lead)) / grid.size
    return spec.reshape(values.shape[:lead] + (grid.size,)).reshape(-1, grid.size)


def periodic_interpolate(grid: PeriodicGrid, coeffs: np.ndarray, x: np.ndarray,
                         real: bool = True, chunk_budget: int = 2 ** 22) -> np.ndarray:
    """sum_k c_k exp(i k.x) for coefficient rows (C, size) at points (K, d); returns (C, K)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    lattice = grid.lattice
    out = np.empty((coeffs.shape[0], x.shape[0]), dtype=float if real else complex)
    step = max(1, chunk_budget // max(grid.size, 1))
    for start in range(0, x.shape[0], step):
        phase = np.exp(1j * x[start:start + step] @ lattice.T)
        block = coeffs @ phase.T
        out[:, start:start + step] = block.real if real else block
    return out


def periodic_gradient(grid: PeriodicGrid, values: np.ndarray) -> np.ndarray:
    """x-gradient of a stack (C, *shape) of periodic grid functions: (C, d, *shape)."""
    values = np.asarray(values)
    lead = values.ndim - grid.dim
    axes = _grid_axes(grid, lead)
    spec = np.fft.fftn(values, axes=axes)
    outs = []
    for ax, k in enumerate(grid.wavenumbers):
        kk = k.copy()
        if grid.points_per_axis % 2 == 0:
            kk[np.isclose(np.abs(kk), grid.points_per_axis / 2)] = 0.0
        outs.append(np.fft.ifftn(spec * 1j * kk, axes=axes).real)
    return np.stack(outs, axis=lead)


@dataclass(frozen=True, eq=False)
class _ModeSet:
    """Fourier modes inside a radius, for fast evaluation of band-limited fields."""

    grid: PeriodicGrid
    radius: float
    flat: np.ndarray = field(init=False)
    k: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        flat = np.nonzero(self.grid.abs_wavenumber.reshape(-1) < self.radius)[0]
        object.__setattr__(self, "flat", flat)
        object.__setattr__(self, "k", self.grid.lattice[flat])

    def evaluate(self, coeffs: np.ndarray, x: np.ndarray, gradient: bool = False) -> np.ndarray:
        """coeffs (C, M) at points (K, d) -> (C, K), or (C, d, K) for the gradient."""
        phase = np.exp(1j * np.atleast_2d(x) @ self.k.T)  # (K, M)
        if not gradient:
            return (coeffs @ phase.T).real
        return np.stack([(coeffs * (1j * self.k[:, ax])[None]) @ phase.T for ax in range(self.grid.dim)],
                        axis=1).real


# ---------------------------------------------------------------------------
# coefficient history
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CoefficientHistory:
    """Time samples of the Taylor coefficient, the surface slope and the horizontal velocity trace."""

    grid: PeriodicGrid
    times: np.ndarray
    taylor: np.ndarray
    slope: np.ndarray
    velocity: np.ndarray

    def __post_init__(self) -> None:
        nt = len(self.times)
        d = self.grid.dim
        if self.taylor.shape != (nt,) + self.grid.shape:
            raise ValueError("taylor samples have the wrong shape")
        if self.slope.shape != (nt, d) + self.grid.shape or self.velocity.shape != self.slope.shape:
            raise ValueError("slope/velocity samples have the wrong shape")
        if nt > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("history times must increase")
        if np.min(self.taylor) <= 0:
            raise ValueError("Taylor coefficient must stay positive")

    @classmethod
    def frozen(cls, grid: PeriodicGrid, taylor: np.ndarray, slope: Sequence[np.ndarray],
               velocity: Sequence[np.ndarray]) -> "CoefficientHistory":
        return cls(grid, np.zeros(1), np.asarray(taylor, dtype=float)[None],
                   np.asarray(slope, dtype=float)[None], np.asarray(velocity, dtype=float)[None])

    @classmethod
    def flat(cls, grid: PeriodicGrid, gravity: float = 1.0) -> "CoefficientHistory":
        zeros = np.zeros((grid.dim,) + grid.shape)
        return cls.frozen(grid, np.full(grid.shape, gravity), zeros, zeros)

    @classmethod
    def from_states(cls, states: Sequence[WaveState], p: FluidParams) -> "CoefficientHistory":
        grid = states[0].grid
        taylor, slope, velocity = [], [], []
        for w in states:
            tf = traces_and_taylor(w, p)
            taylor.append(tf.a.values)
            slope.append([g.values for g in w.eta.gradient()])
            velocity.append([v.values for v in tf.V])
        times = np.array([w.t for w in states]) - states[0].t
        return cls(grid, times, np.asarray(taylor), np.asarray(slope), np.asarray(velocity))

    @property
    def is_static(self) -> bool:
        return len(self.times) == 1

    @property
    def is_uniform(self) -> bool:
        """x-independent Taylor coefficient and zero slope: gamma does not depend on x."""
        return bool(np.all(self.slope == 0) and np.ptp(self.taylor, axis=tuple(range(1, self.taylor.ndim))).max() == 0)

    @property
    def has_velocity(self) -> bool:
        return bool(np.any(self.velocity != 0))

    def _weights(self, t: float) -> tuple[int, int, float]:
        if self.is_static:
            return 0, 0, 0.0
        if t < self.times[0] - 1e-12 or t > self.times[-1] + 1e-12:
            raise ValueError(f"t = {t} outside the sampled history [{self.times[0]}, {self.times[-1]}]")
        i = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 2))
        w = (t - self.times[i]) / (self.times[i + 1] - self.times[i])
        return i, i + 1, float(np.clip(w, 0.0, 1.0))

    def _lerp(self, arr: np.ndarray, t: float) -> np.ndarray:
        i, k, w = self._weights(t)
        return arr[i] if w == 0.0 else (1 - w) * arr[i] + w * arr[k]

    def taylor_at(self, t: float) -> np.ndarray:
        return self._lerp(self.taylor, t)

    def slope_at(self, t: float) -> np.ndarray:
        return self._lerp(self.slope, t)

    def velocity_at(self, t: float) -> np.ndarray:
        return self._lerp(self.velocity, t)


@dataclass(frozen=True, eq=False)
class SmoothedVelocity:
    """S_{j delta} V and S_{j delta}(div V) as band-limited fields, linear in t between samples."""

    history: CoefficientHistory
    params: SmoothingParams
    modes: _ModeSet = field(init=False)
    coeffs: np.ndarray = field(init=False)       # (nt, d, M)
    div_coeffs: np.ndarray = field(init=False)   # (nt, M)

    def __post_init__(self) -> None:
        grid = self.history.grid
        weights = smoothing_weights(grid, self.params).reshape(-1)
        modes = _ModeSet(grid, self.params.cutoff)
        nt, d = len(self.history.times), grid.dim
        spec = periodic_coefficients(grid, self.history.velocity).reshape(nt, d, grid.size)
        coeffs = spec[..., modes.flat] * weights[modes.flat]
        div = sum(coeffs[:, ax] * (1j * modes.k[:, ax]) for ax in range(d))
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "div_coeffs", div)

    def _coeffs_at(self, arr: np.ndarray, t: float) -> np.ndarray:
        return self.history._lerp(arr, t)

    def value(self, t: float, x: np.ndarray) -> np.ndarray:
        """(K, d)"""
        return self.modes.evaluate(self._coeffs_at(self.coeffs, t), x).T

    def jacobian(self, t: float, x: np.ndarray) -> np.ndarray:
        """d S V_k / d x_l at points: (K, d, d)."""
        return np.moveaxis(self.modes.evaluate(self._coeffs_at(self.coeffs, t), x, gradient=True), -1, 0)

    def divergence(self, t: float, x: np.ndarray) -> np.ndarray:
        return self.modes.evaluate(self._coeffs_at(self.div_coeffs, t)[None], x)[0]


# ---------------------------------------------------------------------------
# straightened flow
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FlowMap:
    """X(s; x) = x + displacement, with Jacobian, on grid seeds at times s_grid."""

    grid: PeriodicGrid
    params: SmoothingParams
    s_grid: np.ndarray
    displacement: np.ndarray   # (ns, d, *shape)
    velocity: np.ndarray       # (ns, d, *shape), dX/ds
    jacobian: np.ndarray       # (ns, d, d, *shape)
    jacobian_rate: np.ndarray  # (ns, d, d, *shape)
    trivial: bool = False
    _disp_coeffs: np.ndarray = field(init=False, repr=False)
    _vel_coeffs: np.ndarray = field(init=False, repr=False)
    _jac_coeffs: np.ndarray = field(init=False, repr=False)
    _jrate_coeffs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        ns = len(self.s_grid)
        g = self.grid
        object.__setattr__(self, "_disp_coeffs", periodic_coefficients(g, self.displacement).reshape(ns, -1, g.size))
        object.__setattr__(self, "_vel_coeffs", periodic_coefficients(g, self.velocity).reshape(ns, -1, g.size))
        object.__setattr__(self, "_jac_coeffs", periodic_coefficients(g, self.jacobian).reshape(ns, -1, g.size))
        object.__setattr__(self, "_jrate_coeffs", periodic_coefficients(g, self.jacobian_rate).reshape(ns, -1, g.size))

    @classmethod
    def identity(cls, grid: PeriodicGrid, params: SmoothingParams, s_grid: np.ndarray) -> "FlowMap":
        ns, d = len(s_grid), grid.dim
        zeros = np.zeros((ns, d) + grid.shape)
        eye = np.broadcast_to(np.eye(d).reshape((1, d, d) + (1,) * d), (ns, d, d) + grid.shape).copy()
        return cls(grid, params, np.asarray(s_grid, dtype=float), zeros, zeros.copy(), eye,
                   np.zeros_like(eye), trivial=True)

    def _bracket(self, s: float) -> tuple[int, float, float]:
        sg = self.s_grid
        if s < sg[0] - 1e-12 or s > sg[-1] + 1e-12:
            raise ValueError(f"s = {s} outside the flow window [{sg[0]}, {sg[-1]}]")
        if len(sg) == 1:
            return 0, 0.0, 0.0
        i = int(np.clip(np.searchsorted(sg, s, side="right") - 1, 0, len(sg) - 2))
        ds = sg[i + 1] - sg[i]
        return i, float(np.clip((s - sg[i]) / ds, 0.0, 1.0)), float(ds)

    def _hermite(self, values: np.ndarray, rates: np.ndarray, s: float, x: np.ndarray) -> np.ndarray:
        i, th, ds = self._bracket(s)
        if ds == 0.0:
            return periodic_interpolate(self.grid, values[i], x)
        h00 = 2 * th ** 3 - 3 * th ** 2 + 1
        h10 = th ** 3 - 2 * th ** 2 + th
        h01 = -2 * th ** 3 + 3 * th ** 2
        h11 = th ** 3 - th ** 2
        coeff = h00 * values[i] + h10 * ds * rates[i] + h01 * values[i + 1] + h11 * ds * rates[i + 1]
        return periodic_interpolate(self.grid, coeff, x)

    def position(self, s: float, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.trivial:
            return x.copy()
        return x + self._hermite(self._disp_coeffs, self._vel_coeffs, s, x).T

    def jacobian_at(self, s: float, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        d = self.grid.dim
        if self.trivial:
            return np.broadcast_to(np.eye(d), (x.shape[0], d, d)).copy()
        vals = self._hermite(self._jac_coeffs, self._jrate_coeffs, s, x)  # (d*d, K)
        return vals.T.reshape(-1, d, d)

    def deviation_sup(self) -> np.ndarray:
        """sup_x |dX/dx - Id| (max-entry) at each s."""
        d = self.grid.dim
        eye = np.eye(d).reshape((1, d, d) + (1,) * d)
        dev = np.abs(self.jacobian - eye)
        return dev.reshape(len(self.s_grid), -1).max(axis=1)

    def second_derivative_sup(self) -> np.ndarray:
        """sup_x |d^2 X / dx^2| (max-entry) at each s."""
        ns, d = len(self.s_grid), self.grid.dim
        grad = periodic_gradient(self.grid, self.jacobian.reshape((ns * d * d,) + self.grid.shape))
        return np.abs(grad).reshape(ns, -1).max(axis=1)

    def min_determinant(self) -> float:
        jac = np.moveaxis(self.jacobian, (1, 2), (-2, -1))
        return float(np.linalg.det(jac).min())

    @property
    def flagged(self) -> bool:
        return self.min_determinant() < 0.5


def straighten_flow(history: CoefficientHistory, sp: SmoothingParams, s_grid: Sequence[float],
                    substeps: int = 4) -> FlowMap:
    """RK4 for dX/ds = S_{j delta}V(s, X) and its variational equation, seeded at every grid point."""
    s_grid = np.asarray(s_grid, dtype=float)
    grid = history.grid
    sp.check_grid(grid)
    if not history.has_velocity:
        return FlowMap.identity(grid, sp, s_grid)
    field_ = SmoothedVelocity(history, sp)
    d, K = grid.dim, grid.size
    seeds = grid.points
    X = seeds.copy()
    J = np.broadcast_to(np.eye(d), (K, d, d)).copy()

    def rhs(s: float, X: np.ndarray, J: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return field_.value(s, X), np.einsum("kab,kbc->kac", field_.jacobian(s, X), J)

    disp, vel, jac, jrate = [], [], [], []

    def record(s: float, X: np.ndarray, J: np.ndarray) -> None:
        v, jr = rhs(s, X, J)
        disp.append((X - seeds).T.reshape((d,) + grid.shape))
        vel.append(v.T.reshape((d,) + grid.shape))
        jac.append(np.moveaxis(J, 0, -1).reshape((d, d) + grid.shape))
        jrate.append(np.moveaxis(jr, 0, -1).reshape((d, d) + grid.shape))

    record(s_grid[0], X, J)
    for n in range(len(s_grid) - 1):
        s0 = s_grid[n]
        ds = (s_grid[n + 1] - s0) / substeps
        for m in range(substeps):
            s = s0 + m * ds
            k1 = rhs(s, X, J)
            k2 = rhs(s + ds / 2, X + ds / 2 * k1[0], J + ds / 2 * k1[1])
            k3 = rhs(s + ds / 2, X + ds / 2 * k2[0], J + ds / 2 * k2[1])
            k4 = rhs(s + ds, X + ds * k3[0], J + ds * k3[1])
            X = X + ds / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            J = J + ds / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        record(s_grid[n + 1], X, J)
    return FlowMap(grid, sp, s_grid, np.asarray(disp), np.asarray(vel), np.asarray(jac), np.asarray(jrate))


def newton_solve(forward: Callable[[np.ndarray], np.ndarray], jacobian: Callable[[np.ndarray], np.ndarray],
                 target: np.ndarray, start: np.ndarray, tol: float = NEWTON_TOL,
                 max_iter: int = NEWTON_MAX_ITER) -> np.ndarray:
    """Solve forward(x) = target pointwise for batches of shape (K, d)."""
    x = np.array(start, dtype=float)
    residual = math.inf
    for _ in range(max_iter + 1):
        r = forward(x) - target
        residual = float(np.abs(r).max()) if r.size else 0.0
        if residual <= tol:
            return x
        x = x - np.linalg.solve(jacobian(x), r[..., None])[..., 0]
    raise ConvergenceError(f"Newton inversion did not reach {tol:g} in {max_iter} iterations", residual)


def invert_flow(fm: FlowMap, s: float, z: np.ndarray) -> np.ndarray:
    """Points x with X(s; x) = z."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    if fm.trivial:
        return z.copy()
    start = z - (fm.position(s, z) - z)
    return newton_solve(lambda x: fm.position(s, x), lambda x: fm.jacobian_at(s, x), z, start)


@dataclass(frozen=True, eq=False)
class ChangeOfVariables:
    """H(y, y'), M = (H^T)^-1, M0 = (dX/dx^T)^-1 and J = |det dX/dx(y')| |det M| at a fixed time."""

    flow: FlowMap
    s: float

    def H(self, y: np.ndarray, yp: np.ndarray) -> np.ndarray:
        y = np.atleast_2d(y)
        yp = np.atleast_2d(yp)
        total = 0.0
        for lam, w in zip(GAUSS_NODES, GAUSS_WEIGHTS):
            total = total + w * self.flow.jacobian_at(self.s, lam * y + (1 - lam) * yp)
        return total

    def M(self, y: np.ndarray, yp: np.ndarray) -> np.ndarray:
        return np.linalg.inv(np.swapaxes(self.H(y, yp), -1, -2))

    def M0(self, y: np.ndarray) -> np.ndarray:
        return np.linalg.inv(np.swapaxes(self.flow.jacobian_at(self.s, y), -1, -2))

    def J(self, y: np.ndarray, yp: np.ndarray) -> np.ndarray:
        jac = np.abs(np.linalg.det(self.flow.jacobian_at(self.s, yp)))
        return jac * np.abs(np.linalg.det(self.M(y, yp)))


# ---------------------------------------------------------------------------
# semiclassical symbol
# ---------------------------------------------------------------------------

class Hamiltonian(Protocol):
    grid: PeriodicGrid
    h_tilde: float

    def __call__(self, t: float, z: np.ndarray, zeta: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True, eq=False)
class ConstantHamiltonian:
    """A z- and t-independent symbol p(zeta) on the seed lattice of ``grid``."""

    grid: PeriodicGrid
    h_tilde: float
    fn: Callable[[np.ndarray], np.ndarray]

    def __call__(self, t: float, z: np.ndarray, zeta: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(np.atleast_2d(zeta)), dtype=float)

    def p_tilde(self, t: float, z: np.ndarray, zp: np.ndarray, zeta: np.ndarray) -> np.ndarray:
        return self(t, z, zeta)

    def c(self, t: float, z: np.ndarray) -> np.ndarray:
        return np.zeros(np.atleast_2d(z).shape[0])


def half_wave_hamiltonian(grid: PeriodicGrid, h_tilde: float, gravity: float = 1.0,
                          windowed: bool = False) -> ConstantHamiltonian:
    def fn(zeta: np.ndarray) -> np.ndarray:
        r = np.linalg.norm(zeta, axis=1)
        val = np.sqrt(gravity * r)
        return val * microlocal_window(r) if windowed else val

    return ConstantHamiltonian(grid, h_tilde, fn)


@dataclass(frozen=True, eq=False)
class SemiclassicalSymbol:
    history: CoefficientHistory
    params: SmoothingParams
    flow: FlowMap
    cut: AdmissibleCutoff = AdmissibleCutoff()
    chunk_budget: int = 2 ** 22
    _modes: _ModeSet = field(init=False, repr=False)
    _smooth_w: np.ndarray = field(init=False, repr=False)
    _velocity: SmoothedVelocity | None = field(init=False, repr=False)

    def __post_init__(self) -> None:
        grid = self.history.grid
        modes = _ModeSet(grid, self.params.cutoff)
        object.__setattr__(self, "_modes", modes)
        object.__setattr__(self, "_smooth_w", smoothing_weights(grid, self.params).reshape(-1)[modes.flat])
        vel = SmoothedVelocity(self.history, self.params) if self.history.has_velocity else None
        object.__setattr__(self, "_velocity", vel)

    @property
    def grid(self) -> PeriodicGrid:
        return self.history.grid

    @property
    def h_tilde(self) -> float:
        return self.params.h_tilde

    @property
    def h(self) -> float:
        return self.params.h

    def smoothed_values(self, t: float, x: np.ndarray, rho: np.ndarray) -> np.ndarray:
        """[chi(h D_x, rho) gamma_delta(t, ., rho)](x) for paired rows of x and rho."""
        x = np.atleast_2d(x)
        rho = np.atleast_2d(rho)
        taylor = self.history.taylor_at(t)
        slope = tuple(self.history.slope_at(t))
        rnorm = np.linalg.norm(rho, axis=1)
        if self.history.is_uniform:
            a0 = float(taylor.reshape(-1)[0])
            return (a0 ** 2 * np.sum(rho * rho, axis=1)) ** 0.25 * (rnorm > 0)
        grid = self.grid
        out = np.empty(x.shape[0])
        theta = np.linalg.norm(self._modes.k, axis=1)
        if grid.dim == 1:
            # U(x, rho) = rho^2 in one dimension, so gamma = sqrt(a) |rho|^(1/2) separates
            unit = periodic_coefficients(grid, np.sqrt(taylor))[0]
            kmax = int(np.floor(self._modes.radius - 1e-12))
            ks = np.arange(kmax + 1)
            coeff = unit[ks] * smoothing_weights(grid, self.params).reshape(-1)[ks]
            weights = coeff[None] * self.cut.chi(self.h * ks[None], rnorm[:, None])
            # exp(i k x) for k = 0..kmax by repeated multiplication; the sum is real by symmetry in k
            powers = np.cumprod(np.broadcast_to(np.exp(1j * x[:, :1]), (x.shape[0], kmax + 1)), axis=1)
            powers = np.concatenate([np.ones((x.shape[0], 1)), powers[:, :-1]], axis=1)
            total = weights[:, 0].real + 2.0 * np.sum(weights[:, 1:] * powers[:, 1:], axis=1).real
            return np.sqrt(rnorm) * total
        step = max(1, self.chunk_budget // grid.size)
        for start in range(0, x.shape[0], step):
            sl = slice(start, start + step)
            gamma = (taylor[None] ** 2 * _quadratic_form(slope, rho[sl])) ** 0.25
            coeff = periodic_coefficients(grid, gamma)[:, self._modes.flat]
            weights = self._smooth_w[None] * self.cut.chi(self.h * theta[None], rnorm[sl, None])
            phase = np.exp(1j * x[sl] @ self._modes.k.T)
            out[sl] = np.sum(coeff * weights * phase, axis=1).real
        return out

    def _frame(self, t: float, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """X(t, h_tilde z) and M0(t, h_tilde z)."""
        y = self.h_tilde * np.atleast_2d(z)
        if self.flow.trivial:
            d = self.grid.dim
            return y, np.broadcast_to(np.eye(d), (y.shape[0], d, d))
        x = self.flow.position(t, y)
        m0 = np.linalg.inv(np.swapaxes(self.flow.jacobian_at(t, y), -1, -2))
        return x, m0

    def __call__(self, t: float, z: np.ndarray, zeta: np.ndarray) -> np.ndarray:
        x, m0 = self._frame(t, z)
        rho = np.einsum("kab,kb->ka", m0, np.atleast_2d(zeta))
        return self.smoothed_values(t, x, rho) * microlocal_window(np.linalg.norm(rho, axis=1))

    def p_tilde(self, t: float, z: np.ndarray, zp: np.ndarray, zeta: np.ndarray) -> np.ndarray:
        z = np.atleast_2d(z)
        zp = np.atleast_2d(zp)
        y, yp = self.h_tilde * z, self.h_tilde * zp
        if self.flow.trivial:
            x, M, jfac = y, None, np.ones(z.shape[0])
            rho = np.atleast_2d(zeta)
        else:
            cv = ChangeOfVariables(self.flow, t)
            x = self.flow.position(t, y)
            M = cv.M(y, yp)
            jfac = np.abs(np.linalg.det(self.flow.jacobian_at(t, yp))) * np.abs(np.linalg.det(M))
            rho = np.einsum("kab,kb->ka", M, np.atleast_2d(zeta))
        return self.smoothed_values(t, x, rho) * microlocal_window(np.linalg.norm(rho, axis=1)) * jfac

    def p_quadrature(self, t: float, z: np.ndarray, zeta: np.ndarray, mu_extent: float = 2000.0) -> np.ndarray:
        """Independent route (d = 1): trapezoid in mu of (2 pi)^-1 chi^(mu, rho) gamma_delta(X - h mu, rho)."""
        if self.grid.dim != 1:
            raise ValueError("the mu-quadrature oracle is implemented for d = 1")
        x, m0 = self._frame(t, z)
        rho = np.einsum("kab,kb->ka", m0, np.atleast_2d(zeta))
        taylor = self.history.taylor_at(t)
        slope = tuple(self.history.slope_at(t))
        grid = self.grid
        full_w = smoothing_weights(grid, self.params)
        out = np.empty(x.shape[0])
        for k in range(x.shape[0]):
            r = float(abs(rho[k, 0]))
            if r == 0:
                out[k] = 0.0
                continue
            gamma = (taylor ** 2 * _quadratic_form(slope, rho[k:k + 1])[0]) ** 0.25
            g_delta = GridFunction(grid, np.fft.ifft(np.fft.fft(gamma) * full_w).real)
            band = self.cut.eps2 * r + self.params.cutoff * self.h
            spacing = math.pi / band
            half = mu_extent / r
            mu = np.arange(-half, half + spacing / 2, spacing)
            kern = cutoff_normalized_kernel(self.cut, rho[k], mu[:, None])
            vals = g_delta.evaluate_at((x[k, 0] - self.h * mu)[:, None]).real
            out[k] = float(np.sum(kern * vals) * spacing)
        return out * microlocal_window(np.linalg.norm(rho, axis=1))

    def c(self, t: float, z: np.ndarray) -> np.ndarray:
        """1/2 S_{j delta}(div V)(t, X(t, h_tilde z))."""
        z = np.atleast_2d(z)
        if self._velocity is None:
            return np.zeros(z.shape[0])
        x = self.flow.position(t, self.h_tilde * z)
        return 0.5 * self._velocity.divergence(t, x)


def build_symbol(history: CoefficientHistory, j: int, window: float | None = None, s_points: int = 33,
                 cut: AdmissibleCutoff = AdmissibleCutoff()) -> SemiclassicalSymbol:
    """Straighten the flow over [0, window] (default h_tilde^delta) and assemble p."""
    sp = SmoothingParams(j)
    T = sp.h_tilde ** float(sp.delta) if window is None else window
    flow = straighten_flow(history, sp, np.linspace(0.0, T, s_points))
    return SemiclassicalSymbol(history, sp, flow, cut)


# ---------------------------------------------------------------------------
# Hamiltonian derivatives by centred differences
# ---------------------------------------------------------------------------

def hamiltonian_gradient(p: Hamiltonian, t: float, z: np.ndarray, zeta: np.ndarray,
                         step_z: float = RAY_FD_STEP, step_zeta: float = RAY_FD_STEP) -> tuple[np.ndarray, np.ndarray]:
    """(dp/dz, dp/dzeta), each (K, d), from one batched call."""
    z = np.atleast_2d(z)
    zeta = np.atleast_2d(zeta)
    K, d = z.shape
    zs, zetas = [], []
    for which, step in ((0, step_z), (1, step_zeta)):
        for ax in range(d):
            for off, _ in _FIRST:
                zz, ww = z.copy(), zeta.copy()
                (zz if which == 0 else ww)[:, ax] += off * step
                zs.append(zz)
                zetas.append(ww)
    vals = p(t, np.concatenate(zs), np.concatenate(zetas)).reshape(2, d, len(_FIRST), K)
    coef = np.array([c for _, c in _FIRST])
    grads = np.einsum("wdok,o->wkd", vals, coef)
    return grads[0] / step_z, grads[1] / step_zeta


def second_derivative(f: Callable[[np.ndarray], np.ndarray], point: np.ndarray, i: int, k: int,
                      step: float) -> np.ndarray:
    """d^2 f / d point_i d point_k for a batch (K, d) by fourth-order differences."""
    point = np.atleast_2d(point)
    if i == k:
        total = 0.0
        for off, c in _SECOND:
            shifted = point.copy()
            shifted[:, i] += off * step
            total = total + c * f(shifted)
        return total / step ** 2
    total = 0.0
    for (oi, ci), (ok, ck) in itertools.product(_FIRST, _FIRST):
        shifted = point.copy()
        shifted[:, i] += oi * step
        shifted[:, k] += ok * step
        total = total + ci * ck * f(shifted)
    return total / step ** 2


# ---------------------------------------------------------------------------
# bicharacteristics
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Bicharacteristics:
    t: np.ndarray
    z: np.ndarray       # (nt, K, d)
    zeta: np.ndarray    # (nt, K, d)
    exited: np.ndarray  # (K,) bool


def bicharacteristic_flow(p_eval: Hamiltonian, z0: np.ndarray, xi: np.ndarray, t_grid: Sequence[float],
                          substeps: int = 1, step: float = RAY_FD_STEP) -> Bicharacteristics:
    """RK4 for dz/ds = dp/dzeta, dzeta/ds = -dp/dz (t = s); rays leaving 1/3 <= |zeta| <= 3 are frozen and flagged."""
    t_grid = np.asarray(t_grid, dtype=float)
    z = np.atleast_2d(np.asarray(z0, dtype=float)).copy()
    zeta = np.broadcast_to(np.atleast_2d(np.asarray(xi, dtype=float)), z.shape).copy()
    r0 = np.linalg.norm(zeta, axis=1)
    if np.any((r0 < 0.5 - 1e-12) | (r0 > 2.0 + 1e-12)):
        raise ValueError("initial frequencies must lie in the annulus 1/2 <= |xi| <= 2")
    exited = np.zeros(z.shape[0], dtype=bool)

    def rhs(t: float, z: np.ndarray, zeta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        gz, gzeta = hamiltonian_gradient(p_eval, t, z, zeta, step, step)
        live = (~exited)[:, None]
        return gzeta * live, -gz * live

    zs, zetas = [z.copy()], [zeta.copy()]
    for n in range(len(t_grid) - 1):
        ds = (t_grid[n + 1] - t_grid[n]) / substeps
        for m in range(substeps):
            t = t_grid[n] + m * ds
            k1 = rhs(t, z, zeta)
            k2 = rhs(t + ds / 2, z + ds / 2 * k1[0], zeta + ds / 2 * k1[1])
            k3 = rhs(t + ds / 2, z + ds / 2 * k2[0], zeta + ds / 2 * k2[1])
            k4 = rhs(t + ds, z + ds * k3[0], zeta + ds * k3[1])
            z = z + ds / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            zeta = zeta + ds / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
            r = np.linalg.norm(zeta, axis=1)
            exited |= (r < 1.0 / 3.0) | (r > 3.0)
        zs.append(z.copy())
        zetas.append(zeta.copy())
    return Bicharacteristics(t_grid, np.asarray(zs), np.asarray(zetas), exited)


# ---------------------------------------------------------------------------
# eikonal phase
# ---------------------------------------------------------------------------

def xi_stencil(center: Sequence[float], step: float) -> np.ndarray:
    """Tensor stencil center + step * {-2..2}^d, in lexicographic order (center at the middle)."""
    center = np.asarray(center, dtype=float)
    offs = np.array(list(itertools.product(range(-2, 3), repeat=center.size)), dtype=float)
    return center[None] + step * offs


def _cumulative_integral(t: np.ndarray, values: np.ndarray) -> np.ndarray:
    """int_0^t values d sigma along axis 0 by cubic-spline antiderivative."""
    if len(t) == 1:
        return np.zeros_like(values)
    if np.iscomplexobj(values):
        return _cumulative_integral(t, values.real) + 1j * _cumulative_integral(t, values.imag)
    if len(t) < 4:
        inc = 0.5 * (values[1:] + values[:-1]) * np.diff(t).reshape((-1,) + (1,) * (values.ndim - 1))
        return np.concatenate([np.zeros_like(values[:1]), np.cumsum(inc, axis=0)])
    return CubicSpline(t, values, axis=0).antiderivative()(t)


@dataclass(frozen=True, eq=False)
class _SeedMaps:
    """Periodic ray maps z0 -> z(t; z0) - z0 and z0 -> zeta(t; z0) - xi on the seed lattice."""

    grid: PeriodicGrid
    h_tilde: float
    disp: np.ndarray   # (nt, nxi, d, *shape)
    dzeta: np.ndarray  # (nt, nxi, d, *shape)

    def _coeffs(self, arr: np.ndarray, n: int, i: int) -> np.ndarray:
        return periodic_coefficients(self.grid, arr[n, i])

    def forward(self, n: int, i: int, z0: np.ndarray) -> np.ndarray:
        c = self._coeffs(self.disp, n, i)
        return z0 + periodic_interpolate(self.grid, c, self.h_tilde * z0).T

    def forward_jacobian(self, n: int, i: int, z0: np.ndarray) -> np.ndarray:
        d = self.grid.dim
        grad = self.h_tilde * periodic_gradient(self.grid, self.disp[n, i])  # (d, d, *shape): [comp, deriv]
        vals = periodic_interpolate(self.grid, periodic_coefficients(self.grid, grad), self.h_tilde * z0)
        return np.eye(d)[None] + vals.T.reshape(-1, d, d)

    def zeta_at(self, n: int, i: int, z0: np.ndarray, xi: np.ndarray) -> np.ndarray:
        c = self._coeffs(self.dzeta, n, i)
        return xi[None] + periodic_interpolate(self.grid, c, self.h_tilde * z0).T


@dataclass(frozen=True, eq=False)
class PhasePack:
    grid: PeriodicGrid
    h_tilde: float
    t: np.ndarray          # (nt,)
    xi: np.ndarray         # (nxi, d)
    rays_z: np.ndarray     # (nt, nxi, K, d)
    rays_zeta: np.ndarray  # (nt, nxi, K, d)
    kappa: np.ndarray      # (nt, nxi, K, d)
    zeta_on_grid: np.ndarray  # (nt, nxi, K, d): zeta(t; kappa(t; z))
    increment: np.ndarray  # (nt, nxi, K): phi - z.xi on the fixed z-lattice
    p_eval: Hamiltonian = field(repr=False)

    @property
    def z_grid(self) -> np.ndarray:
        return self.grid.points / self.h_tilde

    def phi(self, n: int, i: int) -> np.ndarray:
        return self.z_grid @ self.xi[i] + self.increment[n, i]

    def grad_z_phi(self, n: int) -> np.ndarray:
        """(nxi, K, d)"""
        g = self.grid
        inc = self.increment[n].reshape((-1,) + g.shape)
        grad = self.h_tilde * periodic_gradient(g, inc)  # (nxi, d, *shape)
        return self.xi[:, None, :] + np.moveaxis(grad.reshape(len(self.xi), g.dim, -1), 1, 2)

    def gradient_identity_error(self) -> float:
        return max(float(np.abs(self.grad_z_phi(n) - self.zeta_on_grid[n]).max()) for n in range(len(self.t)))

    def eikonal_residual(self) -> np.ndarray:
        """max_z |d_t phi + p(t, z, d_z phi)| at interior times, by fourth-order differences in t."""
        dt = np.diff(self.t)
        if len(self.t) < 5 or np.ptp(dt) > 1e-9 * dt[0]:
            raise ValueError("eikonal residual needs at least five equally spaced times")
        out = []
        z = self.z_grid
        nxi, K = self.increment.shape[1:]
        for n in range(2, len(self.t) - 2):
            dphi = sum(c * self.increment[n + o] for o, c in _FIRST) / dt[0]
            grad = self.grad_z_phi(n)
            pv = self.p_eval(float(self.t[n]), np.tile(z, (nxi, 1)), grad.reshape(-1, grad.shape[-1]))
            out.append(float(np.abs(dphi + pv.reshape(nxi, K)).max()))
        return np.asarray(out)

    def hess_xi_phi(self, n: int, step: float) -> np.ndarray:
        """d^2 phi / d xi^2 on the z-lattice (K, d, d), for a pack built on ``xi_stencil(center, step)``."""
        d = self.grid.dim
        idx = {tuple(o): k for k, o in enumerate(itertools.product(range(-2, 3), repeat=d))}
        if len(idx) != len(self.xi):
            raise ValueError("phase pack was not built on a 5^d xi stencil")
        inc = self.increment[n]
        hess = np.empty((inc.shape[1], d, d))
        zero = [0] * d
        for i in range(d):
            for k in range(i, d):
                total = 0.0
                if i == k:
                    for off, c in _SECOND:
                        o = list(zero)
                        o[i] = off
                        total = total + c * inc[idx[tuple(o)]]
                else:
                    for (oi, ci), (ok, ck) in itertools.product(_FIRST, _FIRST):
                        o = list(zero)
                        o[i], o[k] = oi, ok
                        total = total + ci * ck * inc[idx[tuple(o)]]
                hess[:, i, k] = hess[:, k, i] = total / step ** 2
        return hess


def eikonal_phase(p_eval: Hamiltonian, t_grid: Sequence[float], xi_set: np.ndarray,
                  substeps: int = 1, step: float = RAY_FD_STEP) -> PhasePack:
    """phi = z.xi - int_0^t p(s, z, zeta(s; kappa(s; z))) ds on the seed lattice, one column per xi."""
    grid, ht = p_eval.grid, p_eval.h_tilde
    xi_set = np.atleast_2d(np.asarray(xi_set, dtype=float))
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid[0] != 0.0:
        raise ValueError("t_grid must start at 0")
    nxi, d, K, nt = xi_set.shape[0], grid.dim, grid.size, len(t_grid)
    seeds = grid.points / ht
    z0 = np.tile(seeds, (nxi, 1))
    xi_rows = np.repeat(xi_set, K, axis=0)
    rays = bicharacteristic_flow(p_eval, z0, xi_rows, t_grid, substeps, step)
    rz = rays.z.reshape(nt, nxi, K, d)
    rzeta = rays.zeta.reshape(nt, nxi, K, d)
    disp = np.moveaxis(rz - seeds[None, None], -1, 2).reshape((nt, nxi, d) + grid.shape)
    dzeta = np.moveaxis(rzeta - xi_set[None, :, None, :], -1, 2).reshape((nt, nxi, d) + grid.shape)
    maps = _SeedMaps(grid, ht, disp, dzeta)

    kappa = np.empty((nt, nxi, K, d))
    zeta_grid = np.empty((nt, nxi, K, d))
    p_on_grid = np.empty((nt, nxi, K))
    for n in range(nt):
        for i in range(nxi):
            if n == 0:
                kap = seeds.copy()
            else:
                start = seeds - (maps.forward(n, i, seeds) - seeds)
                kap = newton_solve(lambda x, n=n, i=i: maps.forward(n, i, x),
                                   lambda x, n=n, i=i: maps.forward_jacobian(n, i, x), seeds, start)
            kappa[n, i] = kap
            zeta_grid[n, i] = maps.zeta_at(n, i, kap, xi_set[i])
        p_on_grid[n] = p_eval(float(t_grid[n]), np.tile(seeds, (nxi, 1)),
                              zeta_grid[n].reshape(-1, d)).reshape(nxi, K)
    increment = -_cumulative_integral(t_grid, p_on_grid)
    return PhasePack(grid, ht, t_grid, xi_set, rz, rzeta, kappa, zeta_grid, increment, p_eval)


# ---------------------------------------------------------------------------
# transport amplitudes
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TransportPack:
    t: np.ndarray
    xi: np.ndarray
    chi_values: np.ndarray          # (nxi,)
    c0_rays: np.ndarray             # (nt, nxi, K): c0 along the rays
    b_rays: list[np.ndarray]        # levels, each (nt, nxi, K), along rays z(t; z0)
    b_grid: list[np.ndarray]        # levels on the fixed z-lattice
    source_rays: list[np.ndarray]   # F_{j-1} along rays, for j >= 1

    def amplitude(self, h_tilde: float, levels: int | None = None) -> np.ndarray:
        """b = sum_j h_tilde^j b_j on the fixed lattice."""
        levels = len(self.b_grid) if levels is None else levels
        return sum(h_tilde ** k * self.b_grid[k] for k in range(levels))


def _phase_hessian_on_rays(pp: PhasePack) -> np.ndarray:
    """d^2 phi / dz^2 at (t, z(t; z0)) = (d zeta / d z0)(d z / d z0)^-1: (nt, nxi, K, d, d)."""
    grid, ht = pp.grid, pp.h_tilde
    nt, nxi, K, d = pp.rays_z.shape
    seeds = grid.points / ht
    disp = np.moveaxis(pp.rays_z - seeds[None, None], -1, 2).reshape((nt * nxi, d) + grid.shape)
    dzeta = np.moveaxis(pp.rays_zeta - pp.xi[None, :, None, :], -1, 2).reshape((nt * nxi, d) + grid.shape)
    dz = ht * periodic_gradient(grid, disp).reshape(nt, nxi, d, d, K)
    dq = ht * periodic_gradient(grid, dzeta).reshape(nt, nxi, d, d, K)
    dz = np.moveaxis(dz, -1, 2) + np.eye(d)
    dq = np.moveaxis(dq, -1, 2)
    return np.einsum("...ab,...bc->...ac", dq, np.linalg.inv(dz))


def _to_lattice(grid: PeriodicGrid, ht: float, along_rays: np.ndarray, kappa: np.ndarray) -> np.ndarray:
    """Values f(z0) on the seeds, read at kappa(t; z): (nt, nxi, K) -> (nt, nxi, K)."""
    nt, nxi, K = along_rays.shape
    out = np.empty(along_rays.shape, dtype=along_rays.dtype)
    real = not np.iscomplexobj(along_rays)
    for n in range(nt):
        for i in range(nxi):
            c = periodic_coefficients(grid, along_rays[n, i].reshape(grid.shape))
            out[n, i] = periodic_interpolate(grid, c, ht * kappa[n, i], real=real)[0]
    return out


def transport_solve(pp: PhasePack, p_sym, N: int = 1,
                    chi_amp: Callable[[np.ndarray], np.ndarray] = annulus_profile,
                    step_z: float = 1e-2, step_zeta: float = 1e-2) -> TransportPack:
    """b_0 = chi(xi) exp(-int c0) along the rays; b_j (j >= 1) by Duhamel with source F_{j-1}."""
    if not 1 <= N <= 3:
        raise ValueError("N must lie in 1..3")
    grid, ht = pp.grid, pp.h_tilde
    nt, nxi, K, d = pp.rays_z.shape
    t = pp.t
    chi = chi_amp(np.linalg.norm(pp.xi, axis=1))
    hess_phi = _phase_hessian_on_rays(pp)

    c0 = np.empty((nt, nxi, K))
    for n in range(nt):
        tn = float(t[n])
        z = pp.rays_z[n].reshape(-1, d)
        zeta = pp.rays_zeta[n].reshape(-1, d)
        mixed = np.zeros(z.shape[0])
        for i in range(d):
            def f(pt: np.ndarray, i: int = i) -> np.ndarray:
                zp = z.copy()
                zp[:, i] = pt[:, 0]
                zz = zeta.copy()
                zz[:, i] = pt[:, 1]
                return p_sym.p_tilde(tn, z, zp, zz)
            mixed += second_derivative(f, np.stack([z[:, i], zeta[:, i]], axis=1), 0, 1, min(step_z, step_zeta))
        hp = hess_phi[n].reshape(-1, d, d)
        curvature = np.zeros(z.shape[0])
        for i in range(d):
            for k in range(d):
                if hp.size and np.any(hp[:, i, k] != 0):
                    d2p = second_derivative(lambda q: p_sym(tn, z, q), zeta, i, k, step_zeta)
                    curvature += 0.5 * d2p * hp[:, i, k]
        c0[n] = (mixed + curvature + p_sym.c(tn, z)).reshape(nxi, K)

    growth = _cumulative_integral(t, c0)
    b0_rays = chi[None, :, None] * np.exp(-growth)
    b_rays = [b0_rays]
    b_grid = [_to_lattice(grid, ht, b0_rays, pp.kappa)]
    sources = []
    for level in range(1, N):
        F = _transport_source(pp, p_sym, b_grid[level - 1], step_z, step_zeta)
        sources.append(F)
        weight = np.exp(growth)
        bj = np.exp(-growth) * _cumulative_integral(t, weight * F)
        b_rays.append(bj)
        b_grid.append(_to_lattice(grid, ht, bj, pp.kappa))
    return TransportPack(t, pp.xi, chi, c0, b_rays, b_grid, sources)


def _rowwise_interpolate(grid: PeriodicGrid, coeffs: np.ndarray, x: np.ndarray, real: bool = True) -> np.ndarray:
    """Row c of ``coeffs`` (C, size) evaluated at its own points x[c] (C, K, d); returns (C, K)."""
    phase = np.exp(1j * np.einsum("ckd,md->ckm", x, grid.lattice))
    out = np.einsum("cm,ckm->ck", coeffs, phase)
    return out.real if real else out


def _transport_source(pp: PhasePack, p_sym, b_prev_grid: np.ndarray, step_z: float,
                      step_zeta: float) -> np.ndarray:
    """F = i sum_{|alpha| = 2} (1/alpha!) d^alpha_{z'} [(d^alpha_zeta p~)(z, z', theta(z, z')) b(z')] at z' = z, along rays.

    All xi columns of one time level are stacked into a single batch.
    """
    grid, ht = pp.grid, pp.h_tilde
    nt, nxi, K, d = pp.rays_z.shape
    out = np.zeros((nt, nxi, K), dtype=complex)
    alphas = [a for a in itertools.product(range(3), repeat=d) if sum(a) == 2]
    breal = not np.iscomplexobj(b_prev_grid)
    for n in range(nt):
        tn = float(pp.t[n])
        grad_phi = pp.grad_z_phi(n)  # (nxi, K, d) on the lattice
        Z = pp.rays_z[n]  # (nxi, K, d)
        gcoef = periodic_coefficients(grid, np.moveaxis(grad_phi, -1, 1).reshape((nxi * d,) + grid.shape))
        bcoef = periodic_coefficients(grid, b_prev_grid[n].reshape((nxi,) + grid.shape))

        def theta(zp_flat: np.ndarray) -> np.ndarray:
            zp = zp_flat.reshape(nxi, K, d)
            total = np.zeros((nxi, K, d))
            for lam, w in zip(GAUSS_NODES, GAUSS_WEIGHTS):
                pts = np.repeat(ht * (lam * Z + (1 - lam) * zp), d, axis=0)
                vals = _rowwise_interpolate(grid, gcoef, pts).reshape(nxi, d, K)
                total += w * np.moveaxis(vals, 1, -1)
            return total.reshape(nxi * K, d)

        Z_flat = Z.reshape(nxi * K, d)
        for alpha in alphas:
            axes = [ax for ax, a in enumerate(alpha) for _ in range(a)]
            factorial = float(np.prod([math.factorial(a) for a in alpha]))

            def g(zp: np.ndarray, axes: list[int] = axes) -> np.ndarray:
                th = theta(zp)
                d2 = second_derivative(lambda q: p_sym.p_tilde(tn, Z_flat, zp, q), th, axes[0], axes[1], step_zeta)
                bval = _rowwise_interpolate(grid, bcoef, ht * zp.reshape(nxi, K, d), real=breal).reshape(-1)
                return d2 * bval

            out[n] += (1j / factorial * second_derivative(g, Z_flat, axes[0], axes[1], step_z)).reshape(nxi, K)
    return out
