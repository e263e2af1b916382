"""Symmetrization of the water-wave system into a single complex transport-dispersive equation.

From the surface slope zeta = grad(eta) and the Taylor coefficient a, the
principal symbols are

    U(x, xi) = (1 + |zeta|^2) |xi|^2 - (xi . zeta)^2 = <A(x) xi, xi>,
    lambda = sqrt(U),   gamma = (a^2 U)^{1/4},   q = sqrt(a / lambda).

The good unknowns at regularity s are

    zeta_s = <D>^s zeta,
    U_s = <D>^s V + T_zeta <D>^s B,
    theta_s = T_q zeta_s,
    u = <D>^{-s} (U_s - i theta_s),

one complex component per horizontal direction.  Along a trajectory the
residual

    f = d_t u + 1/2 (T_V . grad + div T_V) u + i T_gamma u

is what remains once the reduction has absorbed the principal part.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .paradiff import AdmissibleCutoff, Symbol, multi_indices, paradiff_apply, paraproduct_apply, xi_derivative
from .spectral import GridFunction, PeriodicGrid, bessel_potential, sobolev_norm
from .waterwaves import FluidParams, TraceFields, WaveState, traces_and_taylor

MU_DEFECT = 1.0 / 24.0
ANNULUS = (0.1, 10.0)


def default_regularity(dim: int) -> float:
    """Just above the threshold 1 + d/2 - 1/24."""
    return 1.0 + dim / 2.0 - MU_DEFECT + 0.01


class TaylorSignError(ValueError):
    """The Taylor coefficient is not positive, so gamma and q are undefined."""


@dataclass(frozen=True, eq=False)
class PrincipalSymbols:
    grid: PeriodicGrid
    slope: tuple[np.ndarray, ...]
    taylor: np.ndarray
    lam: Symbol
    gamma: Symbol
    q: Symbol

    def metric(self) -> np.ndarray:
        """A(x) = (1 + |zeta|^2) I - zeta zeta^T, shape (d, d, *grid.shape)."""
        d = self.grid.dim
        slope2 = sum(z * z for z in self.slope)
        out = np.empty((d, d) + self.grid.shape)
        for i in range(d):
            for j in range(d):
                out[i, j] = (1.0 + slope2) * (i == j) - self.slope[i] * self.slope[j]
        return out

    def quadratic_form(self, xi: np.ndarray) -> np.ndarray:
        return _quadratic_form(self.slope, np.atleast_2d(np.asarray(xi, dtype=float)))


def _quadratic_form(slope: tuple[np.ndarray, ...], xi: np.ndarray) -> np.ndarray:
    """U(x, xi) for xi of shape (K, d); result (K, *grid.shape)."""
    d = xi.shape[1]
    extra = (1,) * slope[0].ndim
    slope2 = sum(z * z for z in slope)[None]
    xi_sq = np.sum(xi * xi, axis=1).reshape((-1,) + extra)
    xi_dot = sum(xi[:, i].reshape((-1,) + extra) * slope[i][None] for i in range(d))
    # clip roundoff: U >= |xi|^2 >= 0 exactly
    return np.maximum((1.0 + slope2) * xi_sq - xi_dot ** 2, 0.0)


def symbols_from_fields(grid: PeriodicGrid, slope: Sequence[np.ndarray], taylor: np.ndarray) -> PrincipalSymbols:
    slope = tuple(np.asarray(z, dtype=float) for z in slope)
    taylor = np.asarray(taylor, dtype=float)
    if len(slope) != grid.dim:
        raise ValueError("slope needs one component per dimension")
    minimum = float(taylor.min())
    if minimum <= 0:
        raise TaylorSignError(f"min(a) = {minimum:.3g} is not positive")

    def lam(xi: np.ndarray) -> np.ndarray:
        return np.sqrt(_quadratic_form(slope, xi))

    def gamma(xi: np.ndarray) -> np.ndarray:
        return (taylor[None] ** 2 * _quadratic_form(slope, xi)) ** 0.25

    def q(xi: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.sqrt(taylor[None] / lam(xi))

    return PrincipalSymbols(
        grid, slope, taylor,
        Symbol(grid, lam, 1.0, homogeneous=True, name="lambda"),
        Symbol(grid, gamma, 0.5, homogeneous=True, name="gamma"),
        Symbol(grid, q, -0.5, homogeneous=True, name="q"),
    )


def principal_symbols(tf: TraceFields, eta: GridFunction) -> PrincipalSymbols:
    return symbols_from_fields(eta.grid, [g.values for g in eta.gradient()], tf.a.values)


# ---------------------------------------------------------------------------
# good unknowns
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ReducedState:
    s: float
    zeta_s: tuple[GridFunction, ...]
    U_s: tuple[GridFunction, ...]
    theta_s: tuple[GridFunction, ...]
    u: tuple[GridFunction, ...]
    t: float = 0.0

    def reconstruct(self) -> tuple[GridFunction, ...]:
        return tuple(bessel_potential(U - th * 1j, -self.s) for U, th in zip(self.U_s, self.theta_s))

    def norm(self, s: float | None = None) -> float:
        s = self.s if s is None else s
        return math.sqrt(sum(sobolev_norm(c, s) ** 2 for c in self.u))


def reduced_unknown(w: WaveState, tf: TraceFields, s: float, ps: PrincipalSymbols | None = None,
                    cut: AdmissibleCutoff = AdmissibleCutoff()) -> ReducedState:
    ps = principal_symbols(tf, w.eta) if ps is None else ps
    zeta = w.eta.gradient()
    zeta_s = tuple(bessel_potential(z, s) for z in zeta)
    B_s = bessel_potential(tf.B, s)
    U_s = tuple(bessel_potential(v, s) + paraproduct_apply(z, B_s, cut) for v, z in zip(tf.V, zeta))
    theta_s = tuple(paradiff_apply(ps.q, zs, cut) for zs in zeta_s)
    u = tuple(bessel_potential(U - th * 1j, -s) for U, th in zip(U_s, theta_s))
    return ReducedState(s, zeta_s, U_s, theta_s, u, w.t)


# ---------------------------------------------------------------------------
# residual of the reduced equation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ResidualSample:
    t: float
    residual: tuple[GridFunction, ...]
    norm: float
    u_norm: float


def transport_dispersion(u: GridFunction, V: Sequence[GridFunction], ps: PrincipalSymbols,
                         cut: AdmissibleCutoff = AdmissibleCutoff()) -> GridFunction:
    """1/2 (T_V . grad + div T_V) u + i T_gamma u."""
    total = paradiff_apply(ps.gamma, u, cut) * 1j
    for ax, v in enumerate(V):
        a = Symbol.from_function(v)
        total = total + 0.5 * paradiff_apply(a, u.derivative(ax), cut).values
        total = total + 0.5 * paradiff_apply(a, u, cut).derivative(ax).values
    return total


_TIME_STENCIL = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0


def equation_residual(states: Sequence[WaveState], p: FluidParams, s: float,
                      cut: AdmissibleCutoff = AdmissibleCutoff()) -> list[ResidualSample]:
    """f(t) at every sample with two neighbours on each side; samples must be equally spaced."""
    if len(states) < 5:
        raise ValueError("fourth-order time differencing needs at least five samples")
    times = np.array([w.t for w in states])
    steps = np.diff(times)
    dt = float(steps[0])
    if dt == 0 or np.max(np.abs(steps - dt)) > 1e-9 * abs(dt):
        raise ValueError("trajectory samples must be equally spaced in time")
    reduced = []
    fields = []
    for w in states:
        tf = traces_and_taylor(w, p)
        ps = principal_symbols(tf, w.eta)
        reduced.append(reduced_unknown(w, tf, s, ps, cut))
        fields.append((tf, ps))
    out = []
    for i in range(2, len(states) - 2):
        tf, ps = fields[i]
        comps = []
        for c in range(len(reduced[i].u)):
            dudt = sum(coef * reduced[i + off].u[c].values
                       for coef, off in zip(_TIME_STENCIL, range(-2, 3)) if coef != 0) / dt
            comps.append(transport_dispersion(reduced[i].u[c], tf.V, ps, cut) + dudt)
        norm = math.sqrt(sum(sobolev_norm(f, s) ** 2 for f in comps))
        out.append(ResidualSample(float(times[i]), tuple(comps), norm, reduced[i].norm()))
    return out


# ---------------------------------------------------------------------------
# seminorm of gamma on the unit-scale annulus
# ---------------------------------------------------------------------------

def annulus_points(dim: int, radii: int = 33, angles: int = 16) -> list[np.ndarray]:
    """Sample points of {0.1 <= |xi| <= 10}, grouped by radius; endpoints included."""
    rs = np.geomspace(ANNULUS[0], ANNULUS[1], radii)
    if dim == 1:
        return [np.array([[r], [-r]]) for r in rs]
    th = 2 * np.pi * np.arange(angles) / angles
    return [np.stack([r * np.cos(th), r * np.sin(th)], axis=1) for r in rs]


def gamma_seminorm(ps: PrincipalSymbols, k: int) -> float:
    """sum over |beta| <= k of sup over the annulus and the grid of |d^beta_xi gamma|."""
    if not 0 <= k <= 6:
        raise ValueError("k must lie in 0..6")
    groups = annulus_points(ps.grid.dim)
    total = 0.0
    for beta in multi_indices(ps.grid.dim, k):
        order = sum(beta)
        best = 0.0
        for pts in groups:
            r = float(np.linalg.norm(pts[0]))
            step = r * max(2.0 ** -6, np.finfo(float).eps ** (1.0 / (order + 4)))
            vals = xi_derivative(ps.gamma.evaluate, pts, beta, step)
            best = max(best, float(np.abs(vals).max()))
        total += best
    return total
