"""Craig-Sulem-Zakharov evolution of gravity water waves on the torus.

Unknowns are the surface elevation ``eta`` and the surface trace ``psi`` of
the velocity potential.  The Dirichlet-Neumann operator is the truncated
Craig-Sulem series; with ``T = tanh(depth |D|)`` (``T = 1`` in infinite depth)
the harmonic extension is written as ``sum_k A_k`` with

    A_0 = psi,      A_m = - sum_{n=1}^{m} eta^n / n! * C_n A_{m-n},
    G_m psi = sum_{n=0}^{m} eta^n / n! * S_n A_{m-n}
              - sum_{n=0}^{m-1} grad(eta) . eta^n / n! * grad(C_n A_{m-1-n}),

where ``C_n = |D|^n`` (n even) or ``|D|^n T`` (n odd), and
``S_n = |D|^{n+1} T`` (n even) or ``|D|^{n+1}`` (n odd).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .spectral import GridFunction, PeriodicGrid, apply_multiplier, sobolev_norm


class StripViolation(ValueError):
    """The fluid strip collapsed (surface reached the bottom)."""

    def __init__(self, minimum: float, message: str = "strip condition violated"):
        super().__init__(f"{message}: min(eta) + depth = {minimum:.6g}")
        self.minimum = minimum


@dataclass(frozen=True)
class FluidParams:
    gravity: float = 1.0
    depth: float = math.inf
    dn_order: int = 2
    strip_min: float = 1e-3
    dealias: bool = True

    def __post_init__(self) -> None:
        if self.gravity <= 0:
            raise ValueError("gravity must be positive")
        if not self.depth > 0:
            raise ValueError("depth must be positive (or infinite)")
        if not 0 <= self.dn_order <= 4:
            raise ValueError(f"dn_order must lie in 0..4, got {self.dn_order}")

    @property
    def finite_depth(self) -> bool:
        return math.isfinite(self.depth)


@dataclass(frozen=True)
class WaveState:
    eta: GridFunction
    psi: GridFunction
    t: float = 0.0

    def __post_init__(self) -> None:
        if self.eta.grid != self.psi.grid:
            raise ValueError("eta and psi live on different grids")
        if not (self.eta.is_real and self.psi.is_real):
            raise ValueError("eta and psi must be real")

    @property
    def grid(self) -> PeriodicGrid:
        return self.eta.grid

    @classmethod
    def rest(cls, grid: PeriodicGrid) -> "WaveState":
        return cls(GridFunction.zeros(grid), GridFunction.zeros(grid))


@dataclass(frozen=True)
class TraceFields:
    B: GridFunction
    V: tuple[GridFunction, ...]
    a: GridFunction
    min_a: float = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "min_a", float(np.min(self.a.values)))

    @property
    def taylor_sign_ok(self) -> bool:
        return self.min_a > 0


def check_strip(eta: GridFunction, p: FluidParams) -> None:
    if p.finite_depth:
        lowest = float(eta.values.min()) + p.depth
        if lowest < p.strip_min:
            raise StripViolation(lowest)


# ---------------------------------------------------------------------------
# Dirichlet-Neumann operator
# ---------------------------------------------------------------------------

def _flat_tanh(grid: PeriodicGrid, p: FluidParams) -> np.ndarray:
    k = grid.abs_wavenumber
    return np.tanh(p.depth * k) if p.finite_depth else np.ones_like(k)


def dn_terms(eta: GridFunction, f: GridFunction, p: FluidParams) -> list[GridFunction]:
    """[G_0 f, G_1(eta) f, ..., G_M(eta) f]."""
    check_strip(eta, p)
    grid = eta.grid
    k = grid.abs_wavenumber
    tanh = _flat_tanh(grid, p)
    order = p.dn_order

    def c_mult(n: int) -> np.ndarray:
        return k ** n * (tanh if n % 2 else 1.0)

    def s_mult(n: int) -> np.ndarray:
        return k ** (n + 1) * (1.0 if n % 2 else tanh)

    powers = [np.ones(grid.shape)]
    for n in range(1, order + 1):
        powers.append(powers[-1] * eta.values / n)  # eta^n / n!
    grad_eta = [g.values for g in eta.gradient()]

    extension = [f]
    for m in range(1, order + 1):
        acc = np.zeros(grid.shape)
        for n in range(1, m + 1):
            acc -= powers[n] * apply_multiplier(extension[m - n], c_mult(n)).values
        extension.append(GridFunction(grid, acc))

    terms = []
    for m in range(order + 1):
        acc = np.zeros(grid.shape)
        for n in range(m + 1):
            acc += powers[n] * apply_multiplier(extension[m - n], s_mult(n)).values
        for n in range(m):
            inner = apply_multiplier(extension[m - 1 - n], c_mult(n))
            for ax, ge in enumerate(grad_eta):
                acc -= ge * powers[n] * inner.derivative(ax).values
        terms.append(GridFunction(grid, acc))
    return terms


def dn_apply(eta: GridFunction, f: GridFunction, p: FluidParams) -> GridFunction:
    """Order-M Craig-Sulem expansion of G(eta) f."""
    terms = dn_terms(eta, f, p)
    total = terms[0].values.copy()
    for t in terms[1:]:
        total += t.values
    return GridFunction(eta.grid, total)


# ---------------------------------------------------------------------------
# evolution
# ---------------------------------------------------------------------------

def _dot(a: tuple[np.ndarray, ...], b: tuple[np.ndarray, ...]) -> np.ndarray:
    return sum(x * y for x, y in zip(a, b))


def csz_rhs(w: WaveState, p: FluidParams) -> tuple[GridFunction, GridFunction]:
    """Time derivatives (eta_t, psi_t) of the Craig-Sulem-Zakharov system."""
    grid = w.grid
    g_psi = dn_apply(w.eta, w.psi, p)
    grad_eta = tuple(g.values for g in w.eta.gradient())
    grad_psi = tuple(g.values for g in w.psi.gradient())
    slope2 = _dot(grad_eta, grad_eta)
    vertical = _dot(grad_eta, grad_psi) + g_psi.values
    nonlinear = -0.5 * _dot(grad_psi, grad_psi) + 0.5 * vertical ** 2 / (1.0 + slope2)
    g0_psi = apply_multiplier(w.psi, grid.abs_wavenumber * _flat_tanh(grid, p))
    dn_nonlinear = g_psi.values - g0_psi.values
    if p.dealias:
        mask = grid.dealias_mask
        dn_nonlinear = GridFunction(grid, dn_nonlinear)
        dn_nonlinear = apply_multiplier(dn_nonlinear, mask).values
        nonlinear = apply_multiplier(GridFunction(grid, nonlinear), mask).values
    eta_t = GridFunction(grid, g0_psi.values + dn_nonlinear)
    psi_t = GridFunction(grid, -p.gravity * w.eta.values + nonlinear)
    return eta_t, psi_t


def cfl_cap(grid: PeriodicGrid) -> float:
    return 0.5 / math.sqrt(grid.max_wavenumber)


def _advance(w: WaveState, k: tuple[GridFunction, GridFunction], dt: float) -> WaveState:
    return WaveState(w.eta + dt * k[0].values, w.psi + dt * k[1].values, w.t + dt)


def csz_step(w: WaveState, p: FluidParams, dt: float) -> WaveState:
    """One classical fourth-order Runge-Kutta step."""
    if abs(dt) > cfl_cap(w.grid) * (1 + 1e-12):
        raise ValueError(f"|dt| = {abs(dt):.3g} exceeds the dispersive cap {cfl_cap(w.grid):.3g}")
    k1 = csz_rhs(w, p)
    k2 = csz_rhs(_advance(w, k1, dt / 2), p)
    k3 = csz_rhs(_advance(w, k2, dt / 2), p)
    k4 = csz_rhs(_advance(w, k3, dt), p)
    eta = w.eta.values + dt / 6 * (k1[0].values + 2 * k2[0].values + 2 * k3[0].values + k4[0].values)
    psi = w.psi.values + dt / 6 * (k1[1].values + 2 * k2[1].values + 2 * k3[1].values + k4[1].values)
    out = WaveState(GridFunction(w.grid, eta), GridFunction(w.grid, psi), w.t + dt)
    if p.finite_depth and eta.min() + p.depth < p.strip_min:
        raise StripViolation(float(eta.min() + p.depth), "strip condition violated after step")
    return out


def evolve(w: WaveState, p: FluidParams, dt: float, steps: int) -> list[WaveState]:
    states = [w]
    for _ in range(steps):
        states.append(csz_step(states[-1], p, dt))
    return states


# ---------------------------------------------------------------------------
# traces, Taylor coefficient and diagnostics
# ---------------------------------------------------------------------------

def velocity_traces(w: WaveState, p: FluidParams) -> tuple[GridFunction, tuple[GridFunction, ...]]:
    """Vertical trace B and horizontal trace V of the velocity at the surface."""
    g_psi = dn_apply(w.eta, w.psi, p)
    grad_eta = tuple(g.values for g in w.eta.gradient())
    grad_psi = tuple(g.values for g in w.psi.gradient())
    B = (_dot(grad_eta, grad_psi) + g_psi.values) / (1.0 + _dot(grad_eta, grad_eta))
    V = tuple(GridFunction(w.grid, gp - B * ge) for gp, ge in zip(grad_psi, grad_eta))
    return GridFunction(w.grid, B), V


def traces_and_taylor(w: WaveState, p: FluidParams, tau: float = 1e-7) -> TraceFields:
    """B, V and a = g + (d_t B + V . grad B); d_t B by a one-sided difference along the flow."""
    B, V = velocity_traces(w, p)
    rates = csz_rhs(w, p)
    ahead = WaveState(w.eta + tau * rates[0].values, w.psi + tau * rates[1].values, w.t + tau)
    B_ahead, _ = velocity_traces(ahead, p)
    dB_dt = (B_ahead.values - B.values) / tau
    grad_B = tuple(g.values for g in B.gradient())
    convective = _dot(tuple(v.values for v in V), grad_B)
    a = GridFunction(w.grid, p.gravity + dB_dt + convective)
    return TraceFields(B, V, a)


def inner(f: GridFunction, g: GridFunction) -> float:
    """Real L^2 pairing with the true torus measure."""
    return float(np.real(np.mean(f.values * np.conj(g.values))) * f.grid.volume)


def energy(w: WaveState, p: FluidParams) -> float:
    kinetic = 0.5 * inner(w.psi, dn_apply(w.eta, w.psi, p))
    potential = 0.5 * p.gravity * inner(w.eta, w.eta)
    return kinetic + potential


def scaling_transform(w: WaveState, lam: float) -> WaveState:
    """(eta, psi) -> (lam^-1 eta(lam x), lam^-3/2 psi(lam x)) at time t / sqrt(lam), for dyadic lam."""
    if lam <= 0:
        raise ValueError("scaling factor must be positive")
    power = math.log2(lam)
    if abs(power - round(power)) > 1e-12:
        raise ValueError(f"scaling factor {lam} is not a power of two")
    power = int(round(power))
    eta = _dilate(w.eta, power) * (1.0 / lam)
    psi = _dilate(w.psi, power) * lam ** -1.5
    return WaveState(eta, psi, w.t / math.sqrt(lam))


def _dilate(u: GridFunction, power: int) -> GridFunction:
    """x -> u(2^power x) on the torus by relabelling Fourier modes."""
    if power == 0:
        return GridFunction(u.grid, u.values)
    grid = u.grid
    n = grid.points_per_axis
    spec = u.spectrum
    nonzero = np.argwhere(np.abs(spec) > 1e-15 * max(np.abs(spec).max(), 1e-300))
    out = np.zeros(grid.shape, dtype=complex)
    k_axis = grid.axis_wavenumbers.astype(int)
    for idx in nonzero:
        modes = k_axis[idx]
        if power > 0:
            new = modes * 2 ** power
            if np.any(np.abs(new) >= n // 2):
                raise ValueError("dilated spectrum exceeds the grid's Nyquist frequency")
        else:
            div = 2 ** (-power)
            if np.any(modes % div):
                raise ValueError("contraction needs every active mode divisible by the scale factor")
            new = modes // div
        out[tuple(int(m) % n for m in new)] += spec[tuple(idx)]
    return GridFunction.from_spectrum(grid, out, real=u.is_real)


def trajectory_row(w: WaveState, tf: TraceFields, p: FluidParams, s: float) -> dict[str, float]:
    """One line of the trajectory ledger."""
    bv = math.sqrt(sobolev_norm(tf.B, s) ** 2 + sum(sobolev_norm(v, s) ** 2 for v in tf.V))
    return {
        "t": w.t,
        "energy": energy(w, p),
        "min_a": tf.min_a,
        "eta_Hs_half": sobolev_norm(w.eta, s + 0.5),
        "BV_Hs": bv,
    }


def mode_state(grid: PeriodicGrid, eta_modes: list[dict], psi_modes: list[dict] | None = None) -> WaveState:
    """Initial data from mode lists {k, amplitude, phase}; k is an integer or an integer vector."""

    def build(modes: list[dict] | None) -> GridFunction:
        total = np.zeros(grid.shape)
        for m in modes or []:
            k = np.atleast_1d(np.asarray(m["k"], dtype=float))
            if k.size != grid.dim:
                raise ValueError("mode wavevector dimension does not match grid")
            phase = sum(ki * x for ki, x in zip(k, grid.coords)) + float(m.get("phase", 0.0))
            total += float(m["amplitude"]) * np.cos(phase)
        return GridFunction(grid, total)

    return WaveState(build(eta_modes), build(psi_modes))


def weierstrass_state(grid: PeriodicGrid, exponent: float, top_level: int, seed: int,
                      amplitude: float = 1e-2) -> WaveState:
    """Rough surface: eta = amplitude * sum_k 2^{-k r} cos(2^k x1 + random phase); psi = 0."""
    rng = np.random.default_rng(seed)
    x = grid.coords[0]
    eta = np.zeros(grid.shape)
    for k in range(top_level + 1):
        eta += 2.0 ** (-k * exponent) * np.cos(2.0 ** k * x + rng.uniform(0, 2 * np.pi))
    return WaveState(GridFunction(grid, amplitude * eta), GridFunction.zeros(grid))
