"""Named numerical experiments behind the ``parawave`` command.

Each experiment has a frozen dataclass config, built from a JSON object by
:func:`load_config`, and a runner returning a :class:`Report`.  A report holds
plain tables (lists of row dicts) plus a ``checks`` table with one row per
quantitative claim: the measured value, its target, the tolerance and a
pass flag.  A failing check is a result, not an error; only invalid
configuration (``ConfigError``) and failed numerical convergence
(``ConvergenceError``) abort a run.

Work items inside an experiment (levels, random states, propagation paths)
are independent and fan out over ``jobs`` processes; results are gathered
in submission order, so the output never depends on ``jobs``.
"""
from __future__ import annotations

import math
import types
from concurrent.futures import ProcessPoolExecutor
from dataclasses import MISSING, asdict, dataclass, field, fields, replace
from fractions import Fraction
from functools import partial
from typing import Any, Callable, Sequence, Union, get_args, get_origin, get_type_hints

import numpy as np
from scipy.optimize import curve_fit

from .errors import ConfigError, ConvergenceError
from .fitting import DecayFit, dyadic_slope, power_law_fit
from .flows import (CoefficientHistory, build_symbol, eikonal_phase, half_wave_hamiltonian, straighten_flow,
                    transport_solve, xi_stencil)
from .harness import (commutator_scan, cutoff_derivative_sup, exponent_budget, interval_glue,
                      norm_ledger, profile_derivative_sup, spatial_norm, strichartz_ratio, time_exponent)
from .laplace_oracle import fd_dirichlet_neumann
from .paradiff import Symbol
from .parametrix import (ParametrixKernel, apply_parametrix, build_traced_phase, conjugation_residual,
                         delta_packet, dense_propagate, dispersion_grid, dispersion_scan, free_propagate,
                         perturbed_coefficients, smoothed_generator)
from .smoothing import (DELTA, SlopeReport, SmoothedSymbol, SmoothingParams, coefficient_gap, fd_hessian_det,
                        hessian_formula, rank_one_det)
from .spectral import GridFunction, PeriodicGrid, dyadic_holder_norm, weierstrass
from .symmetrize import symbols_from_fields
from .waterwaves import (FluidParams, WaveState, dn_apply, evolve, mode_state, traces_and_taylor,
                         trajectory_row, weierstrass_state)

Row = dict[str, Any]


@dataclass
class Report:
    tables: dict[str, list[Row]] = field(default_factory=dict)
    checks: list[Row] = field(default_factory=list)

    def check(self, name: str, value: float, target: float | str, tolerance: float | str, passed: bool) -> None:
        self.checks.append({"check": name, "value": float(value), "target": target, "tolerance": tolerance,
                            "passed": bool(passed)})

    @property
    def all_passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def lookup(self, name: str) -> Row:
        for c in self.checks:
            if c["check"] == name:
                return c
        raise KeyError(name)


def fan_out(fn: Callable[[Any], Any], items: Sequence[Any], jobs: int) -> list[Any]:
    """Ordered map, in worker processes when jobs > 1."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))


def _levels(j_range: tuple[int, int]) -> list[int]:
    return list(range(j_range[0], j_range[1] + 1))


def _spread(values: Sequence[float]) -> float:
    values = np.asarray(values, dtype=float)
    return float(values.max() / values.min())


# ---------------------------------------------------------------------------
# config loading
# ---------------------------------------------------------------------------

def _coerce(key: str, value: Any, hint: Any) -> Any:
    origin, args = get_origin(hint), get_args(hint)
    if origin in (Union, types.UnionType):
        if value is None and type(None) in args:
            return None
        for option in (a for a in args if a is not type(None)):
            try:
                return _coerce(key, value, option)
            except ConfigError:
                continue
        raise ConfigError(key, f"value {value!r} has the wrong type")
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(key, f"expected true or false, got {value!r}")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(key, f"expected an integer, got {value!r}")
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, f"expected a number, got {value!r}")
        if not math.isfinite(value):
            raise ConfigError(key, "must be finite")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(key, f"expected a string, got {value!r}")
        return value
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(key, f"expected a list, got {value!r}")
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_coerce(key, v, args[0]) for v in value)
        if len(value) != len(args):
            raise ConfigError(key, f"expected {len(args)} entries, got {len(value)}")
        return tuple(_coerce(key, v, a) for v, a in zip(value, args))
    raise TypeError(f"unsupported config field type {hint!r}")


def load_config(cls: type, raw: dict[str, Any]) -> Any:
    """Build and validate an experiment config; every problem names the offending key."""
    if not isinstance(raw, dict):
        raise ConfigError("config", "the config file must hold a JSON object")
    hints = get_type_hints(cls)
    known = {f.name for f in fields(cls)}
    for key in sorted(raw):
        if key not in known and key not in ("experiment", "seed"):
            raise ConfigError(key, f"unknown parameter for this experiment (known: {', '.join(sorted(known))})")
    kwargs = {}
    for f in fields(cls):
        if f.name in raw:
            kwargs[f.name] = _coerce(f.name, raw[f.name], hints[f.name])
        elif f.default is MISSING and f.default_factory is MISSING:
            raise ConfigError(f.name, "required parameter is missing")
    cfg = cls(**kwargs)
    cfg.validate()
    return cfg


def _require(ok: bool, key: str, message: str) -> None:
    if not ok:
        raise ConfigError(key, message)


def _check_j_range(key: str, j_range: tuple[int, int], lowest: int = 1) -> None:
    _require(j_range[0] >= lowest, key, f"levels must be at least {lowest}")
    _require(j_range[1] > j_range[0], key, "need at least two levels for a slope fit")


def _check_smoothing_fits(key: str, top_level: int, points: int) -> None:
    sp = SmoothingParams(top_level)
    _require(sp.cutoff <= points / 2, key,
             f"level {top_level} puts the smoothing cutoff {sp.cutoff:.4g} above the Nyquist frequency {points // 2}")


def _check_power_of_two(key: str, points: int, minimum: int = 8) -> None:
    _require(points >= minimum and points & (points - 1) == 0, key, f"must be a power of two >= {minimum}")


# ---------------------------------------------------------------------------
# dn-oracle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DnOracleConfig:
    points: int = 256
    amplitude: float = 0.01
    eta_mode: int = 1
    f_mode: int = 2
    depth: float = 1.0
    dn_order: int = 2
    vertical_points: int = 128
    tolerance: float = 1e-4

    def validate(self) -> None:
        _check_power_of_two("points", self.points)
        _require(self.depth > 0, "depth", "must be positive")
        _require(abs(self.amplitude) < self.depth, "amplitude", "surface must stay above the bottom")
        _require(0 <= self.dn_order <= 4, "dn_order", "must lie in 0..4")
        _require(self.vertical_points >= 8, "vertical_points", "must be at least 8")
        for key in ("eta_mode", "f_mode"):
            _require(0 < getattr(self, key) < self.points // 2, key, "must be a resolved nonzero mode")


def run_dn_oracle(cfg: DnOracleConfig, seed: int, jobs: int) -> Report:
    grid = PeriodicGrid(1, cfg.points)
    x = grid.coords[0]
    eta = cfg.amplitude * np.cos(cfg.eta_mode * x)
    f = np.cos(cfg.f_mode * x)
    reference = fd_dirichlet_neumann(eta, f, cfg.depth, cfg.vertical_points)
    params = FluidParams(depth=cfg.depth, dn_order=cfg.dn_order)
    spectral = dn_apply(GridFunction(grid, eta), GridFunction(grid, f), params).values
    error = float(np.abs(spectral - reference).max() / np.abs(reference).max())
    report = Report()
    report.tables["dn_profile"] = [{"x": float(xi), "series": float(a), "finite_difference": float(b),
                                    "difference": float(a - b)} for xi, a, b in zip(grid.axis, spectral, reference)]
    report.check("max_relative_error", error, 0.0, cfg.tolerance, error <= cfg.tolerance)
    return report


# ---------------------------------------------------------------------------
# evolve
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EvolveConfig:
    points: int = 256
    amplitude: float = 1e-3
    mode: int = 1
    time_step: float = 0.01
    steps: int = 100
    regularity: float = 1.5
    drift_tolerance: float = 1e-8
    frequency_points: int = 32
    frequency_mode: int = 4
    frequency_amplitude: float = 1e-4
    frequency_time_step: float = 0.05
    periods: int = 10
    frequency_tolerance: float = 1e-3
    gravity: float = 1.0
    depth: float | None = None

    def validate(self) -> None:
        _check_power_of_two("points", self.points)
        _check_power_of_two("frequency_points", self.frequency_points)
        _require(self.steps >= 1, "steps", "must be positive")
        _require(self.periods >= 1, "periods", "must be positive")
        _require(self.gravity > 0, "gravity", "must be positive")
        _require(self.depth is None or self.depth > 0, "depth", "must be positive, or null for infinite depth")
        _require(0 < self.mode < self.points // 3, "mode", "must be a resolved nonzero mode")
        _require(0 < self.frequency_mode < self.frequency_points // 3, "frequency_mode",
                 "must be a resolved nonzero mode")
        for key, n in (("time_step", self.points), ("frequency_time_step", self.frequency_points)):
            cap = 0.5 / math.sqrt(n // 2)
            _require(0 < getattr(self, key) <= cap, key, f"must lie in (0, {cap:.4g}] for this grid")

    @property
    def fluid(self) -> FluidParams:
        return FluidParams(gravity=self.gravity, depth=math.inf if self.depth is None else self.depth)


def _linear_frequency(k: int, gravity: float, depth: float) -> float:
    return math.sqrt(gravity * k * (math.tanh(k * depth) if math.isfinite(depth) else 1.0))


def run_evolve(cfg: EvolveConfig, seed: int, jobs: int) -> Report:
    report = Report()
    params = cfg.fluid
    grid = PeriodicGrid(1, cfg.points)
    start = mode_state(grid, [{"k": cfg.mode, "amplitude": cfg.amplitude}],
                       [{"k": cfg.mode, "amplitude": cfg.amplitude, "phase": -math.pi / 2}])
    trajectory = evolve(start, params, cfg.time_step, cfg.steps)
    rows = [trajectory_row(w, traces_and_taylor(w, params), params, cfg.regularity) for w in trajectory]
    report.tables["trajectory"] = rows
    e0 = rows[0]["energy"]
    drift = max(abs(r["energy"] - e0) for r in rows) / e0
    report.check("relative_energy_drift", drift, 0.0, cfg.drift_tolerance, drift <= cfg.drift_tolerance)

    fgrid = PeriodicGrid(1, cfg.frequency_points)
    expected = _linear_frequency(cfg.frequency_mode, cfg.gravity, params.depth)
    steps = int(round(cfg.periods * 2 * math.pi / expected / cfg.frequency_time_step))
    wave = evolve(mode_state(fgrid, [{"k": cfg.frequency_mode, "amplitude": cfg.frequency_amplitude}]),
                  params, cfg.frequency_time_step, steps)
    times = np.array([w.t for w in wave])
    coeff = np.array([2.0 * np.fft.fft(w.eta.values)[cfg.frequency_mode].real / cfg.frequency_points for w in wave])

    def model(t: np.ndarray, amplitude: float, omega: float, phase: float) -> np.ndarray:
        return amplitude * np.cos(omega * t + phase)

    try:
        popt, _ = curve_fit(model, times, coeff, p0=[cfg.frequency_amplitude, expected, 0.0])
    except RuntimeError as exc:
        raise ConvergenceError(f"oscillation fit did not converge: {exc}") from exc
    omega = abs(float(popt[1]))
    report.tables["mode_amplitude"] = [{"t": float(t), "coefficient": float(c)} for t, c in zip(times, coeff)]
    gap = abs(omega - expected) / expected
    report.check("fitted_frequency", omega, expected, cfg.frequency_tolerance, gap <= cfg.frequency_tolerance)
    return report


# ---------------------------------------------------------------------------
# hessian
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HessianConfig:
    states: int = 50
    dims: tuple[int, ...] = (1, 2)
    points_1d: int = 32
    points_2d: int = 16
    modes: int = 3
    slope_amplitude: float = 0.2
    taylor_amplitude: float = 0.3
    tolerance: float = 1e-6
    rank_one_samples: int = 1000
    rank_one_dim: int = 3
    lambda_range: tuple[float, float] = (-0.9, 10.0)
    rank_one_tolerance: float = 1e-12

    def validate(self) -> None:
        _require(self.states >= 1, "states", "must be positive")
        _require(len(self.dims) > 0 and all(d in (1, 2) for d in self.dims), "dims", "entries must be 1 or 2")
        _check_power_of_two("points_1d", self.points_1d)
        _check_power_of_two("points_2d", self.points_2d)
        _require(1 <= self.modes < min(self.points_1d, self.points_2d) // 4, "modes", "too many modes for the grid")
        _require(0 <= self.taylor_amplitude < 1, "taylor_amplitude", "must lie in [0, 1) to keep the Taylor sign")
        _require(self.rank_one_samples >= 1, "rank_one_samples", "must be positive")
        _require(self.rank_one_dim >= 1, "rank_one_dim", "must be positive")
        lo, hi = self.lambda_range
        _require(-1 < lo < hi, "lambda_range", "need -1 < low < high")


def _random_field(grid: PeriodicGrid, rng: np.random.Generator, modes: int) -> np.ndarray:
    total = np.zeros(grid.shape)
    for _ in range(modes):
        k = rng.integers(-modes, modes + 1, size=grid.dim)
        if not k.any():
            k[0] = 1
        phase = sum(int(ki) * x for ki, x in zip(k, grid.coords)) + rng.uniform(0, 2 * np.pi)
        total += rng.normal() * np.cos(phase)
    return total


def _hessian_case(cfg: HessianConfig, seed: int, item: tuple[int, int]) -> Row:
    dim, index = item
    rng = np.random.default_rng([seed, dim, index])
    grid = PeriodicGrid(dim, cfg.points_1d if dim == 1 else cfg.points_2d)
    surface = GridFunction(grid, _random_field(grid, rng, cfg.modes))
    surface = surface * (cfg.slope_amplitude / max(max(g.sup_norm() for g in surface.gradient()), 1e-300))
    bump = _random_field(grid, rng, cfg.modes)
    taylor = 1.0 + cfg.taylor_amplitude * bump / np.abs(bump).max()
    ps = symbols_from_fields(grid, [g.values for g in surface.gradient()], taylor)
    direction = rng.normal(size=dim)
    xi = rng.uniform(0.5, 2.0) * direction / np.linalg.norm(direction)
    closed = hessian_formula(ps.taylor, ps.metric(), xi)
    fd = np.abs(fd_hessian_det(ps.gamma.evaluate, xi, dim))
    return {"dim": dim, "state": index, "xi_norm": float(np.linalg.norm(xi)),
            "max_relative_error": float(np.max(np.abs(fd - closed) / closed))}


def run_hessian(cfg: HessianConfig, seed: int, jobs: int) -> Report:
    report = Report()
    items = [(d, i) for d in cfg.dims for i in range(cfg.states)]
    rows = fan_out(partial(_hessian_case, cfg, seed), items, jobs)
    report.tables["hessian_states"] = rows
    for d in cfg.dims:
        worst = max(r["max_relative_error"] for r in rows if r["dim"] == d)
        report.check(f"closed_vs_fd_d{d}", worst, 0.0, cfg.tolerance, worst <= cfg.tolerance)
    flat_rows = []
    for d, exact in ((1, 0.25), (2, 0.125)):
        grid = PeriodicGrid(d, 8)
        ps = symbols_from_fields(grid, [np.zeros(grid.shape)] * d, np.ones(grid.shape))
        xi = np.eye(d)[0]
        closed = float(hessian_formula(ps.taylor, ps.metric(), xi).flat[0])
        fd = abs(float(fd_hessian_det(ps.gamma.evaluate, xi, d).flat[0]))
        flat_rows.append({"dim": d, "closed_form": closed, "finite_difference": fd, "exact": exact})
        gap = max(abs(closed - exact), abs(fd - exact)) / exact
        report.check(f"flat_value_d{d}", closed, exact, cfg.tolerance, gap <= cfg.tolerance)
    report.tables["hessian_flat"] = flat_rows

    rng = np.random.default_rng([seed, 1000])
    lo, hi = cfg.lambda_range
    worst = 0.0
    for _ in range(cfg.rank_one_samples):
        omega = rng.normal(size=cfg.rank_one_dim)
        omega /= np.linalg.norm(omega)
        lam = rng.uniform(lo, hi)
        worst = max(worst, abs(rank_one_det(lam, omega) - (1.0 + lam)))
    report.check("rank_one_identity", worst, 0.0, cfg.rank_one_tolerance, worst <= cfg.rank_one_tolerance)
    return report


# ---------------------------------------------------------------------------
# smoothing-slopes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SmoothingSlopesConfig:
    j_range: tuple[int, int]
    points: int = 2048
    holder_exponent: float = 0.5
    top_level: int = 9
    xi: tuple[float, ...] = (1.0,)
    alphas: tuple[tuple[int, ...], ...] = ((1,), (2,), (3,))
    oversample: int = 8
    tolerance: float = 0.1

    def validate(self) -> None:
        _check_power_of_two("points", self.points)
        _check_j_range("j_range", self.j_range)
        _check_smoothing_fits("j_range", self.j_range[1], self.points)
        _require(0 < self.holder_exponent < 1, "holder_exponent", "must lie in (0, 1)")
        _require(1 <= self.top_level and 2 ** self.top_level < self.points // 2, "top_level",
                 "the top Weierstrass frequency must stay below the Nyquist frequency")
        _require(len(self.xi) == 1 and 0.5 <= abs(self.xi[0]) <= 2.0, "xi", "one frequency in the annulus [1/2, 2]")
        _require(len(self.alphas) > 0 and all(len(a) == 1 and a[0] >= 1 for a in self.alphas), "alphas",
                 "one-dimensional derivative orders >= 1")


def _slope_bases(cfg: SmoothingSlopesConfig, seed: int) -> dict[str, tuple[Symbol, float]]:
    grid = PeriodicGrid(1, cfg.points)
    phases = np.random.default_rng(seed).uniform(0, 2 * np.pi, cfg.top_level + 1)
    rough = weierstrass(grid, cfg.holder_exponent, top_level=cfg.top_level, phases=phases)
    step = GridFunction(grid, np.sign(np.sin(grid.coords[0])))

    def root(xi: np.ndarray) -> np.ndarray:
        return np.sqrt(np.linalg.norm(xi, axis=1))

    return {"weierstrass": (Symbol.product(rough, root, 0.5), cfg.holder_exponent),
            "step": (Symbol.product(step, root, 0.5), 0.0)}


def _slope_level(cfg: SmoothingSlopesConfig, seed: int, j: int) -> dict[str, list[float]]:
    out = {}
    for name, (base, _) in _slope_bases(cfg, seed).items():
        sm = SmoothedSymbol(base, SmoothingParams(j))
        out[name] = [sm.x_derivative_sup(cfg.xi, a, cfg.oversample) for a in cfg.alphas]
    return out


def run_smoothing_slopes(cfg: SmoothingSlopesConfig, seed: int, jobs: int) -> Report:
    report = Report()
    levels = _levels(cfg.j_range)
    per_level = fan_out(partial(_slope_level, cfg, seed), levels, jobs)
    holders = {"weierstrass": cfg.holder_exponent, "step": 0.0}
    report.tables["derivative_sups"] = [
        {"base": name, "j": j, "alpha": a[0], "sup": sups[name][k]}
        for name in holders for j, sups in zip(levels, per_level) for k, a in enumerate(cfg.alphas)]
    fits = []
    for name, holder in holders.items():
        for k, a in enumerate(cfg.alphas):
            fit = dyadic_slope(levels, [sups[name][k] for sups in per_level])
            rep = SlopeReport(tuple(a), fit, -float(DELTA) * (sum(a) - holder))
            fits.append({"base": name, **rep.row(), "relative_error": rep.relative_error})
            report.check(f"slope_{name}_alpha{a[0]}", fit.slope, rep.predicted, cfg.tolerance,
                         rep.relative_error <= cfg.tolerance)
    report.tables["slope_fits"] = fits
    return report


# ---------------------------------------------------------------------------
# flow-bounds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FlowBoundsConfig:
    j_range: tuple[int, int]
    points: int = 4096
    holder_exponent: float = 1.0
    top_level: int = 10
    velocity_amplitude: float = 0.1
    flow_time: float = 0.05
    flow_samples: int = 9
    tolerance: float = 0.15

    def validate(self) -> None:
        _check_power_of_two("points", self.points)
        _check_j_range("j_range", self.j_range)
        _check_smoothing_fits("j_range", self.j_range[1], self.points)
        _require(1 <= self.top_level and 2 ** self.top_level < self.points // 2, "top_level",
                 "the top Weierstrass frequency must stay below the Nyquist frequency")
        _require(self.j_range[1] <= self.top_level, "j_range", "levels above the Weierstrass top level see no roughness")
        _require(self.flow_time > 0, "flow_time", "must be positive")
        _require(self.flow_samples >= 2, "flow_samples", "need at least two samples")


def _flow_level(cfg: FlowBoundsConfig, seed: int, j: int) -> Row:
    grid = PeriodicGrid(1, cfg.points)
    phases = np.random.default_rng(seed).uniform(0, 2 * np.pi, cfg.top_level + 1)
    V = weierstrass(grid, cfg.holder_exponent, top_level=cfg.top_level, phases=phases)
    hist = CoefficientHistory.frozen(grid, np.ones(cfg.points), [np.zeros(cfg.points)],
                                     [cfg.velocity_amplitude * V.values])
    fm = straighten_flow(hist, SmoothingParams(j), np.linspace(0, cfg.flow_time, cfg.flow_samples))
    return {"j": j, "second_derivative_sup": float(fm.second_derivative_sup()[-1]),
            "deviation_sup": float(fm.deviation_sup()[-1]), "min_determinant": float(fm.min_determinant()),
            "coefficient_gap": coefficient_gap([V], j)}


def run_flow_bounds(cfg: FlowBoundsConfig, seed: int, jobs: int) -> Report:
    report = Report()
    levels = _levels(cfg.j_range)
    rows = fan_out(partial(_flow_level, cfg, seed), levels, jobs)
    report.tables["flow_levels"] = rows
    delta = float(DELTA)
    d2 = dyadic_slope(levels, [r["second_derivative_sup"] for r in rows])
    gap = dyadic_slope(levels, [r["coefficient_gap"] for r in rows])
    report.check("second_derivative_slope", d2.slope, -delta, cfg.tolerance, d2.within(-delta, cfg.tolerance, True))
    report.check("coefficient_gap_slope", gap.slope, delta, cfg.tolerance, gap.within(delta, cfg.tolerance, True))
    worst = min(r["min_determinant"] for r in rows)
    report.check("min_jacobian_determinant", worst, "> 0", "n/a", worst > 0)
    return report


# ---------------------------------------------------------------------------
# eikonal
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EikonalConfig:
    j: int = 5
    points: int = 64
    time_samples: int = 17
    xi: tuple[float, ...] = (1.0, -0.7, 1.6)
    epsilon: float = 0.05
    state_amplitude: float = 0.05
    hessian_points: int = 8
    hessian_step: float = 1e-2
    constant_tolerance: float = 1e-12
    residual_tolerance: float = 1e-6
    gradient_tolerance: float = 1e-8
    slope_tolerance: float = 0.05

    def validate(self) -> None:
        _require(self.j >= 2, "j", "must be at least 2")
        _check_power_of_two("points", self.points)
        _check_power_of_two("hessian_points", self.hessian_points, minimum=4)
        _require(self.time_samples >= 3, "time_samples", "need at least three samples")
        _require(len(self.xi) > 0 and all(0.5 <= abs(x) <= 2.0 for x in self.xi), "xi",
                 "frequencies must lie in the annulus [1/2, 2]")
        _require(0 < self.hessian_step < 0.1, "hessian_step", "must lie in (0, 0.1)")


def run_eikonal(cfg: EikonalConfig, seed: int, jobs: int) -> Report:
    report = Report()
    sp = SmoothingParams(cfg.j)
    ht = sp.h_tilde
    window = ht ** (2 / 3)
    times = np.linspace(0, window, cfg.time_samples)
    xi_set = np.asarray(cfg.xi, dtype=float)[:, None]
    grid = PeriodicGrid(1, cfg.points)
    rows = []

    constant = eikonal_phase(half_wave_hamiltonian(grid, ht), times, xi_set)
    rows.append({"case": "constant", "residual": float(constant.eikonal_residual().max()),
                 "gradient_identity": float(constant.gradient_identity_error())})

    taylor, slope, _ = perturbed_coefficients(grid, cfg.epsilon)
    still = CoefficientHistory.frozen(grid, taylor, slope, [np.zeros(cfg.points)])
    pp = eikonal_phase(build_symbol(still, cfg.j, window=window), times, xi_set)
    rows.append({"case": "still_surface", "residual": float(pp.eikonal_residual().max()),
                 "gradient_identity": float(pp.gradient_identity_error())})

    moving = mode_state(grid, [{"k": 1, "amplitude": cfg.state_amplitude}],
                        [{"k": 1, "amplitude": cfg.state_amplitude, "phase": -math.pi / 2}])
    history = CoefficientHistory.from_states([moving], FluidParams())
    pp = eikonal_phase(build_symbol(history, cfg.j, window=window), times, xi_set)
    rows.append({"case": "moving_surface", "residual": float(pp.eikonal_residual().max()),
                 "gradient_identity": float(pp.gradient_identity_error())})
    report.tables["eikonal_cases"] = rows

    report.check("constant_residual", rows[0]["residual"], 0.0, cfg.constant_tolerance,
                 rows[0]["residual"] <= cfg.constant_tolerance)
    worst = max(r["residual"] for r in rows[1:])
    report.check("perturbed_residual", worst, 0.0, cfg.residual_tolerance, worst <= cfg.residual_tolerance)
    worst = max(r["gradient_identity"] for r in rows)
    report.check("gradient_identity", worst, 0.0, cfg.gradient_tolerance, worst <= cfg.gradient_tolerance)

    hess_rows = []
    for d in (1, 2):
        hgrid = PeriodicGrid(d, cfg.hessian_points)
        center = np.ones(d) / math.sqrt(d)
        flat = eikonal_phase(half_wave_hamiltonian(hgrid, ht), times, xi_stencil(center, cfg.hessian_step))
        dets = [float(np.abs(np.linalg.det(flat.hess_xi_phi(n, cfg.hessian_step))).max())
                for n in range(1, cfg.time_samples)]
        hess_rows += [{"dim": d, "t": float(t), "max_abs_det": v} for t, v in zip(times[1:], dets)]
        fit = power_law_fit(times[1:], dets)
        report.check(f"hessian_t_slope_d{d}", fit.slope, d, cfg.slope_tolerance,
                     fit.within(d, cfg.slope_tolerance, True))
    report.tables["phase_hessian"] = hess_rows
    return report


# ---------------------------------------------------------------------------
# transport
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TransportConfig:
    j: int = 5
    points: int = 64
    epsilon: float = 0.05
    time_samples: int = 41
    nodes: int = 17
    compare_indices: tuple[int, ...] = (10, 20, 40)
    residual_indices: tuple[int, ...] = (10, 20, 36)
    differencing_order: int = 6
    agreement_tolerance: float = 1e-6
    amplitude_levels: tuple[int, ...] = (4, 5, 6, 7)
    amplitude_samples: int = 17

    def validate(self) -> None:
        _require(self.j >= 3, "j", "must be at least 3")
        _check_power_of_two("points", self.points)
        _require(self.time_samples >= 9, "time_samples", "need at least nine samples")
        _require(self.nodes >= 3, "nodes", "need at least three nodes")
        _require(all(0 <= n < self.time_samples for n in self.compare_indices), "compare_indices",
                 "indices must address the time grid")
        half = self.differencing_order // 2
        _require(self.differencing_order in (4, 6, 8), "differencing_order", "must be 4, 6 or 8")
        _require(all(half <= n < self.time_samples - half for n in self.residual_indices), "residual_indices",
                 f"each index needs {half} time samples on both sides")
        _require(len(self.amplitude_levels) >= 2 and min(self.amplitude_levels) >= 2, "amplitude_levels",
                 "need at least two levels >= 2")
        _require(self.amplitude_samples >= 3, "amplitude_samples", "need at least three samples")


def _second_amplitude(cfg: TransportConfig, history: CoefficientHistory, j: int) -> tuple[list[Row], DecayFit, float]:
    sp = SmoothingParams(j)
    window = sp.h_tilde ** (2 / 3)
    times = np.linspace(0, window, cfg.amplitude_samples)
    sym = build_symbol(history, j, window=window)
    pp = eikonal_phase(sym, times, np.array([[1.0], [-0.7], [1.6]]))
    b1 = np.abs(transport_solve(pp, sym, N=2).b_rays[1]).max(axis=(1, 2))
    rows = [{"j": j, "t": float(t), "b1_sup": float(v)} for t, v in zip(times, b1)]
    scale = float(b1[-1]) / (sp.h_tilde ** -float(DELTA) * window)
    return rows, power_law_fit(times[1:], b1[1:]), scale


def run_transport(cfg: TransportConfig, seed: int, jobs: int) -> Report:
    report = Report()
    sp = SmoothingParams(cfg.j)
    window = sp.h_tilde ** (2 / 3)
    times = np.linspace(0, window, cfg.time_samples)
    coarse = PeriodicGrid(1, cfg.points)
    taylor, slope, _ = perturbed_coefficients(coarse, cfg.epsilon)
    history = CoefficientHistory.frozen(coarse, taylor, slope, [np.zeros(cfg.points)])
    sym = build_symbol(history, cfg.j, window=window)

    grid = dispersion_grid(1, cfg.j)
    u0 = delta_packet(grid, cfg.j)
    fine_taylor, fine_slope, _ = perturbed_coefficients(grid, cfg.epsilon)
    reference = dense_propagate(smoothed_generator(grid, fine_taylor, fine_slope, None, sp), u0,
                                times[list(cfg.compare_indices)])
    datum = np.linalg.norm(u0.values)

    agree_rows, residual_rows = [], []
    for levels in (1, 2):
        kernel = ParametrixKernel(build_traced_phase(sym, times, n_nodes=cfg.nodes, levels=levels))
        for n, ref in zip(cfg.compare_indices, reference):
            gap = float(np.linalg.norm(apply_parametrix(kernel, u0, n).values - ref.values) / datum)
            agree_rows.append({"levels": levels, "t": float(times[n]), "relative_gap": gap})
        for sample in conjugation_residual(kernel, sym, u0, cfg.residual_indices, order=cfg.differencing_order):
            residual_rows.append({"levels": levels, "t": sample.t, "norm": sample.norm, "relative": sample.relative})
    report.tables["propagator_agreement"] = agree_rows
    report.tables["conjugation_residual"] = residual_rows
    worst = max(r["relative_gap"] for r in agree_rows)
    report.check("parametrix_vs_propagator", worst, 0.0, cfg.agreement_tolerance, worst <= cfg.agreement_tolerance)
    one = [r["relative"] for r in residual_rows if r["levels"] == 1]
    two = [r["relative"] for r in residual_rows if r["levels"] == 2]
    improvement = min(a / b for a, b in zip(one, two))
    report.check("second_amplitude_lowers_residual", improvement, "> 1", "n/a", improvement > 1)

    amp_rows, fit_rows = [], []
    for j in cfg.amplitude_levels:
        rows, fit, scale = _second_amplitude(cfg, history, j)
        amp_rows += rows
        fit_rows.append({"j": j, "t_slope": fit.slope, "r_squared": fit.r_squared, "scaled_size": scale})
    report.tables["second_amplitude"] = amp_rows
    report.tables["second_amplitude_fits"] = fit_rows
    slowest = min(r["t_slope"] for r in fit_rows)
    report.check("second_amplitude_vanishes_linearly", slowest, ">= 1", "n/a", slowest >= 1.0)
    return report


# ---------------------------------------------------------------------------
# dispersion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DispersionConfig:
    j_range: tuple[int, int]
    j_range_2d: tuple[int, int] = (4, 6)
    include_2d: bool = True
    paths: tuple[str, ...] = ("spectral", "parametrix")
    epsilon: float = 0.05
    fractions: tuple[float, ...] = (1 / 16, 1 / 8, 1 / 4, 1 / 2, 1.0)
    t_tolerance: float = 0.05
    h_tolerance_1d: float = 0.05
    h_tolerance_2d: float = 0.08
    min_r_squared: float = 0.98
    stability_tolerance: float = 0.1

    def validate(self) -> None:
        _check_j_range("j_range", self.j_range, lowest=2)
        _check_j_range("j_range_2d", self.j_range_2d, lowest=2)
        _require(len(self.paths) > 0 and all(p in ("spectral", "parametrix") for p in self.paths), "paths",
                 "entries must be 'spectral' or 'parametrix'")
        _require(len(self.fractions) >= 2 and all(0 < f <= 1 for f in self.fractions), "fractions",
                 "need at least two fractions in (0, 1]")


def _dispersion_item(cfg: DispersionConfig, item: tuple[int, str, float]):
    dim, path, eps = item
    levels = _levels(cfg.j_range if dim == 1 else cfg.j_range_2d)
    return dispersion_scan(dim, levels, path, fractions=cfg.fractions, epsilon=eps)


def run_dispersion(cfg: DispersionConfig, seed: int, jobs: int) -> Report:
    report = Report()
    items = [(1, p, 0.0) for p in cfg.paths]
    if cfg.include_2d:
        items += [(2, p, 0.0) for p in cfg.paths]
    if cfg.epsilon:
        items.append((1, "spectral", cfg.epsilon))
    results = fan_out(partial(_dispersion_item, cfg), items, jobs)
    samples, fit_rows = [], []
    for (dim, path, eps), res in zip(items, results):
        samples += [{"dim": dim, "epsilon": eps, **r} for r in res.rows]
        for j, fit in res.t_fits.items():
            fit_rows.append({"dim": dim, "path": path, "epsilon": eps, "fit": "t", "j": j, "slope": fit.slope,
                             "r_squared": fit.r_squared})
        fit_rows.append({"dim": dim, "path": path, "epsilon": eps, "fit": "h", "j": "all", "slope": res.h_fit.slope,
                         "r_squared": res.h_fit.r_squared})
        tag = f"d{dim}_{path}" + (f"_eps{eps:g}" if eps else "")
        if eps:
            continue
        t_target, h_target = -dim / 2, -3 * dim / 4
        h_tol = cfg.h_tolerance_1d if dim == 1 else cfg.h_tolerance_2d
        worst = max(res.t_fits.values(), key=lambda f: abs(f.slope - t_target))
        report.check(f"{tag}_t_exponent", worst.slope, t_target, cfg.t_tolerance,
                     all(f.within(t_target, cfg.t_tolerance) for f in res.t_fits.values()))
        report.check(f"{tag}_h_exponent", res.h_fit.slope, h_target, h_tol, res.h_fit.within(h_target, h_tol))
        r2 = min([res.h_fit.r_squared] + [f.r_squared for f in res.t_fits.values()])
        report.check(f"{tag}_r_squared", r2, ">= min_r_squared", cfg.min_r_squared, r2 >= cfg.min_r_squared)
    report.tables["dispersion_samples"] = samples
    report.tables["dispersion_fits"] = fit_rows

    if cfg.epsilon and "spectral" in cfg.paths:
        flat = results[items.index((1, "spectral", 0.0))]
        bumped = results[-1]
        t_gap = max(abs(bumped.t_fits[j].slope - flat.t_fits[j].slope) for j in flat.t_fits)
        t_tol = cfg.stability_tolerance * 0.5
        report.check("perturbed_t_exponent_shift", t_gap, 0.0, t_tol, t_gap <= t_tol)
        h_gap = abs(bumped.h_fit.slope - flat.h_fit.slope) / abs(flat.h_fit.slope)
        report.check("perturbed_h_exponent_shift", h_gap, 0.0, cfg.stability_tolerance,
                     h_gap <= cfg.stability_tolerance)
    return report


# ---------------------------------------------------------------------------
# strichartz
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StrichartzConfig:
    j_range: tuple[int, int]
    time_samples: int = 129
    ratio_spread: float = 2.0
    glue_levels: tuple[int, ...] = (4, 6, 8)
    glue_windows: float = 4.3
    glue_tolerance: float = 0.05
    commutator_j_range: tuple[int, int] = (3, 8)
    commutator_points: int = 1024
    commutator_regularity: float = 0.5
    velocity_exponent: float = 1.5
    top_level: int = 8
    surface_amplitude: float = 0.05
    profiles: int = 3
    commutator_spread: float = 2.0

    def validate(self) -> None:
        _check_j_range("j_range", self.j_range, lowest=2)
        _check_j_range("commutator_j_range", self.commutator_j_range, lowest=1)
        _require(self.time_samples >= 9, "time_samples", "need at least nine samples")
        _require(len(self.glue_levels) > 0 and min(self.glue_levels) >= 2, "glue_levels", "levels must be >= 2")
        _require(self.glue_windows >= 3, "glue_windows", "gluing needs at least three windows")
        _check_power_of_two("commutator_points", self.commutator_points)
        _require(2 ** self.top_level < self.commutator_points // 2, "top_level",
                 "the top Weierstrass frequency must stay below the Nyquist frequency")
        _require(self.commutator_j_range[1] < int(math.log2(self.commutator_points)) - 1, "commutator_j_range",
                 "blocks above the grid resolution")
        _check_smoothing_fits("commutator_j_range", self.commutator_j_range[1], self.commutator_points)
        _require(self.profiles >= 1, "profiles", "need at least one random profile")


def _free_trajectory(j: int, window: float, samples: int) -> tuple[list[GridFunction], np.ndarray]:
    grid = dispersion_grid(1, j)
    times = np.linspace(0, window, samples)
    return free_propagate(delta_packet(grid, j), times), times


def _strichartz_level(cfg: StrichartzConfig, j: int) -> Row:
    h = 2.0 ** -j
    trajectory, times = _free_trajectory(j, h ** (float(DELTA) / 2), cfg.time_samples)
    row = strichartz_ratio(trajectory, times, j)
    return {"j": j, "h": row.h, "window": row.window, "norm": row.norm, "datum_l2": row.datum_l2, "ratio": row.ratio}


def _glue_level(cfg: StrichartzConfig, j: int) -> Row:
    h = 2.0 ** -j
    tau = h ** (float(DELTA) / 2)
    horizon = cfg.glue_windows * tau
    packet = delta_packet(dispersion_grid(1, j), j)

    def norm_at(ts: np.ndarray) -> np.ndarray:
        return np.array([spatial_norm(u, None) for u in free_propagate(packet, ts)])

    rep = interval_glue(norm_at, h, horizon, 4)
    constant = interval_glue(lambda ts: np.ones_like(ts), h, horizon, 4)
    cutoff = cutoff_derivative_sup(h, 1, rep.count, horizon, 4) * tau / profile_derivative_sup(4)
    return {"j": j, "horizon": horizon, "count": rep.count, "expected_count": int(math.floor(cfg.glue_windows)) - 1,
            "glued": rep.glued, "direct": rep.direct, "relative_gap": rep.relative_gap,
            "constant_gap": constant.relative_gap, "overlap_bound": rep.overlap_bound_holds,
            "cutoff_derivative_ratio": cutoff}


def _commutator_level(cfg: StrichartzConfig, seed: int, j: int) -> Row:
    grid = PeriodicGrid(1, cfg.commutator_points)
    phases = np.random.default_rng(seed).uniform(0, 2 * np.pi, cfg.top_level + 1)
    V = [weierstrass(grid, cfg.velocity_exponent, top_level=cfg.top_level, phases=phases)]
    surface = weierstrass_state(grid, cfg.velocity_exponent, cfg.top_level, seed=seed + 1,
                                amplitude=cfg.surface_amplitude)
    tf = traces_and_taylor(surface, FluidParams())
    ps = symbols_from_fields(grid, [g.values for g in surface.eta.gradient()], tf.a.values)
    seeds = [seed + k for k in range(cfg.profiles)]
    return commutator_scan(V, ps.gamma, [j], cfg.commutator_regularity, seeds)[0].row()


def run_strichartz(cfg: StrichartzConfig, seed: int, jobs: int) -> Report:
    report = Report()
    levels = _levels(cfg.j_range)
    rows = fan_out(partial(_strichartz_level, cfg), levels, jobs)
    report.tables["strichartz"] = rows
    spread = _spread([r["ratio"] for r in rows])
    report.check("strichartz_ratio_spread", spread, 1.0, cfg.ratio_spread, spread <= cfg.ratio_spread)

    glue = fan_out(partial(_glue_level, cfg), list(cfg.glue_levels), jobs)
    report.tables["gluing"] = glue
    worst = max(r["relative_gap"] for r in glue)
    report.check("glued_vs_direct", worst, 0.0, cfg.glue_tolerance, worst <= cfg.glue_tolerance)
    mismatches = sum(r["count"] != r["expected_count"] for r in glue)
    report.check("interval_count_mismatches", mismatches, 0, 0, mismatches == 0)
    report.check("overlap_bound", sum(not r["overlap_bound"] for r in glue), 0, 0, all(r["overlap_bound"] for r in glue))
    ratios = [r["cutoff_derivative_ratio"] for r in glue]
    off = max(abs(x - 1.0) for x in ratios)
    report.check("cutoff_derivative_scaling", off, 0.0, 0.01, off <= 0.01)

    clevels = _levels(cfg.commutator_j_range)
    comm = fan_out(partial(_commutator_level, cfg, seed), clevels, jobs)
    report.tables["commutators"] = comm
    for key in ("transport", "divergence", "dispersive"):
        spread = _spread([r[key] for r in comm])
        report.check(f"{key}_commutator_spread", spread, 1.0, cfg.commutator_spread, spread <= cfg.commutator_spread)
    gaps = [r["smoothing_gap"] for r in comm]
    growth = gaps[-1] / max(gaps[:-1])
    report.check("smoothing_gap_growth", growth, "<= 2", 2.0, growth <= 2.0)
    return report


# ---------------------------------------------------------------------------
# ledger
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LedgerConfig:
    points: int = 64
    regularity: float = 2.5
    r: float = 1.2
    r_prime: float = 1.7
    mu: float = 1 / 24
    amplitudes: tuple[float, ...] = (1e-4, 1e-3, 1e-2)
    time_step: float = 0.05
    steps: int = 20
    stride: int = 2
    threshold_factor: float = 4.0
    static_samples: int = 9
    interpolation_bound: float = 2.0

    def validate(self) -> None:
        _check_power_of_two("points", self.points)
        for key in ("r", "r_prime"):
            value = getattr(self, key)
            _require(value > 0 and abs(2 * value - round(2 * value)) > 1e-9, key, "must be positive and not in (1/2)N")
        _require(self.r < self.r_prime, "r_prime", "must exceed r")
        _require(0 < self.mu < 1, "mu", "must lie in (0, 1)")
        _require(len(self.amplitudes) >= 2 and list(self.amplitudes) == sorted(self.amplitudes), "amplitudes",
                 "need at least two increasing amplitudes")
        _require(self.steps >= 1 and self.stride >= 1, "steps", "steps and stride must be positive")
        _require(0 < self.time_step <= 0.5 / math.sqrt(self.points // 2), "time_step", "exceeds the dispersive cap")
        _require(self.static_samples >= 2, "static_samples", "need at least two samples")
        _require(self.threshold_factor > 1, "threshold_factor", "must exceed 1")


def _ledger_amplitude(cfg: LedgerConfig, amplitude: float) -> tuple[list[Row], Row]:
    grid = PeriodicGrid(1, cfg.points)
    params = FluidParams()
    start = mode_state(grid, [{"k": 1, "amplitude": amplitude}, {"k": 3, "amplitude": amplitude / 2}])
    trajectory = evolve(start, params, cfg.time_step, cfg.steps)[::cfg.stride]
    led = norm_ledger(trajectory, params, cfg.regularity, cfg.r, cfg.r_prime, cfg.mu, cfg.threshold_factor)
    rows = [{"amplitude": amplitude, **r} for r in led.rows()]
    crossing = led.crossing_time()
    summary = {"amplitude": amplitude, "f_final": led.final.M_s + led.final.Z_r,
               "interpolation_constant": led.interpolation_constant(), "monotone": led.monotone(),
               "crossing_time": "none" if crossing is None else crossing}
    return rows, summary


def run_ledger(cfg: LedgerConfig, seed: int, jobs: int) -> Report:
    report = Report()
    budget = exponent_budget(1)
    report.tables["exponent_budget"] = [{"quantity": k, "value": str(v)} for k, v in budget.items()]
    report.check("sigma_one_budget", float(budget["sigma_one"]), 0.5 - 1 / 24, 0.0,
                 budget["sigma_one"] == Fraction(1, 2) - Fraction(1, 24))

    grid = PeriodicGrid(1, cfg.points)
    params = FluidParams()
    rest = [replace(WaveState.rest(grid), t=t) for t in np.linspace(0, 1, cfg.static_samples)]
    rest_led = norm_ledger(rest, params, cfg.regularity, cfg.r, cfg.r_prime, cfg.mu)
    rest_size = rest_led.final.M_s + rest_led.final.Z_r
    report.check("rest_state_zero", rest_size, 0.0, 0.0, rest_size == 0.0)

    still = mode_state(grid, [{"k": 1, "amplitude": 0.01}], [{"k": 1, "amplitude": 0.01, "phase": 0.5}])
    static = [replace(still, t=t) for t in np.linspace(0, 1, cfg.static_samples)]
    led = norm_ledger(static, params, cfg.regularity, cfg.r, cfg.r_prime, cfg.mu)
    tf = traces_and_taylor(still, params)
    spatial = (dyadic_holder_norm(still.eta, cfg.r + 0.5) + dyadic_holder_norm(tf.B, cfg.r)
               + sum(dyadic_holder_norm(v, cfg.r) for v in tf.V))
    p = time_exponent(1)
    closed = led.final.t ** (1 / p) * spatial
    report.check("static_time_integral", led.final.Z_r, closed, 1e-10,
                 abs(led.final.Z_r - closed) <= 1e-10 * closed)
    constant = led.interpolation_constant()
    report.check("static_interpolation_constant", constant, "<= interpolation_bound", cfg.interpolation_bound,
                 constant <= cfg.interpolation_bound)
    report.tables["static_ledger"] = led.rows()

    results = fan_out(partial(_ledger_amplitude, cfg), list(cfg.amplitudes), jobs)
    report.tables["ledger_series"] = [r for rows, _ in results for r in rows]
    summaries = [s for _, s in results]
    report.tables["ledger_sweep"] = summaries
    report.check("ledger_monotone_in_time", sum(not s["monotone"] for s in summaries), 0, 0,
                 all(s["monotone"] for s in summaries))
    finals = [s["f_final"] for s in summaries]
    report.check("sweep_monotone_in_amplitude", float(np.min(np.diff(finals))), "> 0", "n/a",
                 bool(np.all(np.diff(finals) > 0)))
    crossings = sum(s["crossing_time"] != "none" for s in summaries)
    report.check("threshold_crossings", crossings, 0, 0, crossings == 0)
    report.tables["ledger_parameters"] = [{"theta": led.theta, "p": led.p, "threshold_factor": cfg.threshold_factor}]
    return report


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Experiment:
    config: type
    run: Callable[[Any, int, int], Report]


EXPERIMENTS: dict[str, Experiment] = {
    "dn-oracle": Experiment(DnOracleConfig, run_dn_oracle),
    "evolve": Experiment(EvolveConfig, run_evolve),
    "hessian": Experiment(HessianConfig, run_hessian),
    "smoothing-slopes": Experiment(SmoothingSlopesConfig, run_smoothing_slopes),
    "flow-bounds": Experiment(FlowBoundsConfig, run_flow_bounds),
    "eikonal": Experiment(EikonalConfig, run_eikonal),
    "transport": Experiment(TransportConfig, run_transport),
    "dispersion": Experiment(DispersionConfig, run_dispersion),
    "strichartz": Experiment(StrichartzConfig, run_strichartz),
    "ledger": Experiment(LedgerConfig, run_ledger),
}


def config_dict(cfg: Any) -> dict[str, Any]:
    return asdict(cfg)
