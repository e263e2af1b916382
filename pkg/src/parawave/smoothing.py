"""Frequency smoothing of rough symbols and coefficients at scale h^delta, and the Hessian apparatus.

With h = 2^-j and delta = 2/3, the smoothed symbol is the x-low-pass
gamma_delta = psi(h^delta D_x) gamma.  In the semiclassical variables the
dispersion relation is gamma = (a^2 U)^(1/4) with U = <A xi, xi>, whose
xi-Hessian determinant has the closed form

    det Hess_xi gamma = a^{d/2} (2 alpha)^d |2 alpha - 1| det A  U^{(alpha - 1) d},   alpha = 1/4.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .fitting import DecayFit, dyadic_slope
from .paradiff import Symbol, xi_derivative
from .spectral import GridFunction, PeriodicGrid, apply_multiplier, dyadic_block, low_pass_profile, upsample
from .symmetrize import PrincipalSymbols

DELTA = Fraction(2, 3)
ALPHA = 0.25
HESSIAN_STEP = 2.0 ** -9


@dataclass(frozen=True)
class SmoothingParams:
    j: int
    delta: Fraction = DELTA

    def __post_init__(self) -> None:
        if self.delta != DELTA:
            raise ValueError("delta is fixed at 2/3")
        if self.j < 0:
            raise ValueError("j must be nonnegative")

    @property
    def h(self) -> float:
        return 2.0 ** -self.j

    @property
    def h_tilde(self) -> float:
        return math.sqrt(self.h)

    @property
    def cutoff(self) -> float:
        """h^-delta = 2^{j delta}: the x-frequency radius kept by the smoothing."""
        return 2.0 ** (self.j * float(self.delta))

    def check_grid(self, grid: PeriodicGrid) -> None:
        if self.cutoff > grid.points_per_axis // 2:
            raise ValueError(f"smoothing radius 2^(j delta) = {self.cutoff:.3g} exceeds Nyquist "
                             f"{grid.points_per_axis // 2}")


def smoothing_weights(grid: PeriodicGrid, sp: SmoothingParams) -> np.ndarray:
    sp.check_grid(grid)
    return low_pass_profile(grid.abs_wavenumber / sp.cutoff)


def _low_pass_last_axes(values: np.ndarray, grid: PeriodicGrid, weights: np.ndarray) -> np.ndarray:
    axes = tuple(range(values.ndim - grid.dim, values.ndim))
    out = np.fft.ifftn(np.fft.fftn(values, axes=axes) * weights, axes=axes)
    return out.real if np.isrealobj(values) else out


@dataclass(frozen=True, eq=False)
class SmoothedSymbol:
    base: Symbol
    params: SmoothingParams

    def __post_init__(self) -> None:
        self.params.check_grid(self.base.grid)

    @property
    def grid(self) -> PeriodicGrid:
        return self.base.grid

    def evaluate(self, xi: np.ndarray) -> np.ndarray:
        weights = smoothing_weights(self.grid, self.params)
        return _low_pass_last_axes(self.base.evaluate(np.atleast_2d(xi)), self.grid, weights)

    def at(self, xi: Sequence[float]) -> GridFunction:
        return GridFunction(self.grid, self.evaluate(np.asarray(xi, dtype=float)[None])[0])

    def as_symbol(self) -> Symbol:
        b = self.base
        return Symbol(b.grid, self.evaluate, b.order, rho=b.rho, homogeneous=b.homogeneous,
                      x_independent=b.x_independent, name=f"{b.name}_smoothed")

    def x_derivative_sup(self, xi: Sequence[float], alpha: Sequence[int], oversample: int = 8) -> float:
        """sup over x of |d^alpha_x gamma_delta(x, xi)|, read off a spectrally refined grid."""
        f = self.at(xi)
        for ax, order in enumerate(alpha):
            if order:
                f = f.derivative(ax, order)
        return float(np.abs(upsample(f, oversample)).max())


def smooth_symbol(a: Symbol, sp: SmoothingParams) -> SmoothedSymbol:
    return SmoothedSymbol(a, sp)


def smooth_field(V: Sequence[GridFunction], sp: SmoothingParams) -> tuple[GridFunction, ...]:
    """S_{j delta} V = psi(2^{-j delta} D) V, componentwise."""
    out = []
    for v in V:
        out.append(apply_multiplier(v, smoothing_weights(v.grid, sp)))
    return tuple(out)


def coefficient_gap(V: Sequence[GridFunction], j: int, oversample: int = 4) -> float:
    """max_i ||S_j V_i - S_{j delta} V_i||_inf."""
    sp = SmoothingParams(j)
    smoothed = smooth_field(V, sp)
    worst = 0.0
    for v, s in zip(V, smoothed):
        gap = dyadic_block(v, j, "s_low") - s.values
        worst = max(worst, float(np.abs(upsample(gap, oversample)).max()))
    return worst


# ---------------------------------------------------------------------------
# Hessian of gamma in xi
# ---------------------------------------------------------------------------

def hessian_formula(taylor: np.ndarray, metric: np.ndarray, xi: np.ndarray, alpha: float = ALPHA) -> np.ndarray:
    """Closed-form det Hess_xi (a^2 U)^{alpha} at every grid point; metric has shape (d, d, *grid)."""
    d = metric.shape[0]
    xi = np.asarray(xi, dtype=float)
    U = np.einsum("i,ij...,j->...", xi, metric, xi)
    det_a = np.linalg.det(np.moveaxis(metric, (0, 1), (-2, -1)))
    return taylor ** (d / 2.0) * (2 * alpha) ** d * abs(2 * alpha - 1) * det_a * U ** ((alpha - 1) * d)


def fd_hessian_det(evaluate, xi: np.ndarray, dim: int, step: float = HESSIAN_STEP) -> np.ndarray:
    """Determinant of the fourth-order finite-difference xi-Hessian, at every grid point."""
    xi = np.asarray(xi, dtype=float)[None, :]
    hess = None
    for i in range(dim):
        for k in range(i, dim):
            alpha = [0] * dim
            alpha[i] += 1
            alpha[k] += 1
            val = xi_derivative(evaluate, xi, alpha, step)[0]
            if hess is None:
                hess = np.empty((dim, dim) + val.shape)
            hess[i, k] = hess[k, i] = val
    return np.linalg.det(np.moveaxis(hess, (0, 1), (-2, -1)))


def _check_annulus(xi: np.ndarray) -> None:
    r = float(np.linalg.norm(xi))
    # allow roundoff so that points built from polar coordinates on the boundary are accepted
    if not 0.5 * (1 - 1e-12) <= r <= 2.0 * (1 + 1e-12):
        raise ValueError(f"|xi| = {r:.3g} lies outside the annulus [1/2, 2]")


def hessian_det(ps: PrincipalSymbols | SmoothedSymbol, x_index: Sequence[int], xi: Sequence[float],
                principal: PrincipalSymbols | None = None) -> tuple[float, float]:
    """(closed form for the unsmoothed gamma, finite-difference value for the given symbol) at a grid point.

    Both are absolute values: for alpha < 1/2 the radial curvature is negative, so the
    signed determinant is (-1) times the closed form in odd dimension.
    """
    xi = np.asarray(xi, dtype=float)
    _check_annulus(xi)
    if isinstance(ps, SmoothedSymbol):
        if principal is None:
            raise ValueError("a smoothed symbol needs its principal symbols for the closed form")
        evaluate, grid = ps.evaluate, ps.grid
    else:
        principal = ps
        evaluate, grid = ps.gamma.evaluate, ps.grid
    idx = tuple(int(i) for i in x_index)
    formula = hessian_formula(principal.taylor, principal.metric(), xi)[idx]
    fd = fd_hessian_det(evaluate, xi, grid.dim)[idx]
    return float(formula), abs(float(fd))


def rank_one_det(lam: float, omega: Sequence[float]) -> float:
    """det(I + lam omega omega^T) by direct evaluation."""
    omega = np.asarray(omega, dtype=float)
    return float(np.linalg.det(np.eye(omega.size) + lam * np.outer(omega, omega)))


@dataclass(frozen=True)
class HessianFloor:
    j: int
    min_ratio: float


def hessian_floor_scan(ps: PrincipalSymbols, levels: Sequence[int], xis: np.ndarray,
                       threshold: float = 0.5) -> tuple[list[HessianFloor], int | None]:
    """min over grid and xi of det Hess(gamma_delta) / closed form, per j; and the first j from which it stays above threshold."""
    rows = []
    for j in levels:
        sm = SmoothedSymbol(ps.gamma, SmoothingParams(j))
        worst = math.inf
        for xi in np.atleast_2d(xis):
            closed = hessian_formula(ps.taylor, ps.metric(), xi)
            fd = fd_hessian_det(sm.evaluate, xi, ps.grid.dim)
            worst = min(worst, float(np.min(np.abs(fd) / closed)))
        rows.append(HessianFloor(int(j), worst))
    first_good = None
    for k in range(len(rows)):
        if all(r.min_ratio >= threshold for r in rows[k:]):
            first_good = rows[k].j
            break
    return rows, first_good


# ---------------------------------------------------------------------------
# derivative growth
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SlopeReport:
    alpha: tuple[int, ...]
    fit: DecayFit
    predicted: float

    @property
    def relative_error(self) -> float:
        return abs(self.fit.slope - self.predicted) / abs(self.predicted)

    def row(self) -> dict:
        return {"alpha_multiindex": "".join(str(a) for a in self.alpha), "fitted_slope": self.fit.slope,
                "predicted_slope": self.predicted, "r_squared": self.fit.r_squared}


def derivative_growth(base: Symbol, xi: Sequence[float], levels: Sequence[int], alphas: Sequence[Sequence[int]],
                      holder: float, oversample: int = 8) -> list[SlopeReport]:
    """Fitted h-exponents of ||d^alpha_x gamma_delta(., xi)||_inf over the given j.

    The prediction is -delta |alpha| for a merely bounded base (holder = 0) and
    -delta (|alpha| - holder) for a base of Hölder regularity ``holder``.
    """
    reports = []
    sups = {tuple(a): [] for a in alphas}
    for j in levels:
        sm = SmoothedSymbol(base, SmoothingParams(j))
        for a in alphas:
            sups[tuple(a)].append(sm.x_derivative_sup(xi, a, oversample))
    for a, vals in sups.items():
        predicted = -float(DELTA) * (sum(a) - holder)
        reports.append(SlopeReport(a, dyadic_slope(levels, vals), predicted))
    return reports
