"""Frequency-localized problems, Strichartz-type time norms, interval gluing and the M_s / Z_r norm ledger.

These are the measurement tools the command-line experiments are built from.
Every function returns plain numbers or small dataclasses so that the runner
can serialize them without further processing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import trapezoid

from .paradiff import AdmissibleCutoff, Symbol, paradiff_apply, paraproduct_apply
from .spectral import GridFunction, PeriodicGrid, dyadic_block, dyadic_holder_norm, smooth_step, sobolev_norm, \
    spectral_radius, upsample
from .smoothing import DELTA, SmoothedSymbol, SmoothingParams, smooth_field
from .waterwaves import FluidParams, WaveState, traces_and_taylor

SAMPLES_PER_INTERVAL = 64
STRICHARTZ_LOSS = Fraction(3, 8)


class SpectralSupportError(ValueError):
    """A localized quantity carries frequencies outside the ball it must live in."""


# ---------------------------------------------------------------------------
# exponent bookkeeping
# ---------------------------------------------------------------------------

def time_exponent(dim: int) -> int:
    """Time integrability used by the Strichartz norms: 4 on the line, 2 otherwise."""
    return 4 if dim == 1 else 2


def exponent_budget(dim: int = 1) -> dict[str, Fraction]:
    """Loss arithmetic in one dimension: sigma_1 = 3/8 + delta/8 must equal 1/2 - mu with mu = 1/24."""
    if dim != 1:
        raise ValueError("the exact budget is stated for d = 1")
    sigma_one = STRICHARTZ_LOSS + DELTA / 8
    mu = Fraction(1, 2) - sigma_one
    if mu != Fraction(1, 24):
        raise AssertionError(f"loss arithmetic broken: mu = {mu}")
    return {"delta": DELTA, "strichartz_loss": STRICHARTZ_LOSS, "sigma_one": sigma_one, "mu": mu}


def torus_l2(u: GridFunction) -> float:
    """L^2 norm with the true torus measure (the grid norm is root-mean-square)."""
    return u.l2_norm() * math.sqrt(u.grid.volume)


# ---------------------------------------------------------------------------
# localized problem
# ---------------------------------------------------------------------------

def _block(u: GridFunction, j: int) -> GridFunction:
    return dyadic_block(u, j, "delta")


def _fattened_block(u: GridFunction, j: int, width: int = 2) -> GridFunction:
    top = u.grid.j_max
    total = GridFunction.zeros(u.grid)
    for k in range(max(j - width, -1), min(j + width, top) + 1):
        total = total + _block(u, k)
    return total


def transport_commutator(V: Sequence[GridFunction], u: GridFunction, j: int,
                         cut: AdmissibleCutoff = AdmissibleCutoff()) -> GridFunction:
    """[T_V, Delta_j] . grad u."""
    total = GridFunction.zeros(u.grid)
    for ax, v in enumerate(V):
        du = u.derivative(ax)
        total = total + paraproduct_apply(v, _block(du, j), cut) - _block(paraproduct_apply(v, du, cut), j)
    return total


def divergence_commutator(V: Sequence[GridFunction], u: GridFunction, j: int,
                          cut: AdmissibleCutoff = AdmissibleCutoff()) -> GridFunction:
    """div [T_V, Delta_j] u."""
    total = GridFunction.zeros(u.grid)
    for ax, v in enumerate(V):
        comm = paraproduct_apply(v, _block(u, j), cut) - _block(paraproduct_apply(v, u, cut), j)
        total = total + comm.derivative(ax)
    return total


def dispersive_commutator(gamma: Symbol, u: GridFunction, j: int,
                          cut: AdmissibleCutoff = AdmissibleCutoff()) -> GridFunction:
    """[T_gamma, Delta_j] u."""
    return paradiff_apply(gamma, _block(u, j), cut) - _block(paradiff_apply(gamma, u, cut), j)


def _symmetric_transport(W: Sequence[GridFunction], U: GridFunction) -> GridFunction:
    """1/2 (W . grad U + div(W U)) for a smooth field W, as pointwise products."""
    total = GridFunction.zeros(U.grid)
    for ax, w in enumerate(W):
        total = total + 0.5 * (w * U.derivative(ax)) + 0.5 * (w * U).derivative(ax)
    return total


def _paradiff_transport(V: Sequence[GridFunction], U: GridFunction, cut: AdmissibleCutoff) -> GridFunction:
    """1/2 (T_V . grad U + div T_V U)."""
    total = GridFunction.zeros(U.grid)
    for ax, v in enumerate(V):
        total = total + 0.5 * paraproduct_apply(v, U.derivative(ax), cut)
        total = total + 0.5 * paraproduct_apply(v, U, cut).derivative(ax)
    return total


@dataclass(frozen=True, eq=False)
class LocalizedProblem:
    j: int
    U: GridFunction
    source: GridFunction
    operator: str
    terms: dict[str, GridFunction] = field(repr=False)
    support_radius: float = 0.0

    def term_norms(self, s: float) -> dict[str, float]:
        return {name: sobolev_norm(term, s) for name, term in self.terms.items()}


def localized_problem(u: GridFunction, f: GridFunction, V: Sequence[GridFunction], gamma: Symbol, j: int,
                      smoothed: bool = False, gamma_smoothed: Symbol | None = None,
                      support_factor: float = 4.0, cut: AdmissibleCutoff = AdmissibleCutoff()) -> LocalizedProblem:
    """Source of the equation satisfied by Delta_j u at one time slice.

    ``f`` is L u for L = d_t + 1/2 (T_V . grad + div T_V) + i T_gamma.  The exact
    operator gives

        L Delta_j u = Delta_j f + 1/2 ([T_V, Delta_j] . grad u + div [T_V, Delta_j] u) + i [T_gamma, Delta_j] u.

    With ``smoothed`` the left side uses S_{j delta}(V) as a pointwise field and
    the smoothed symbol gamma_delta, and the source picks up the paraproduct
    remainders and the coefficient gaps so that the identity stays exact.
    """
    if len(V) != u.grid.dim:
        raise ValueError("V needs one component per dimension")
    U = _block(u, j)
    terms: dict[str, GridFunction] = {
        "block_source": _block(f, j),
        "transport_commutator": 0.5 * transport_commutator(V, u, j, cut),
        "divergence_commutator": 0.5 * divergence_commutator(V, u, j, cut),
        "dispersive_commutator": 1j * dispersive_commutator(gamma, u, j, cut),
    }
    if smoothed:
        sp = SmoothingParams(j)
        if gamma_smoothed is None:
            gamma_smoothed = SmoothedSymbol(gamma, sp).as_symbol()
        low = tuple(dyadic_block(v, j, "s_low") for v in V)
        low_delta = smooth_field(V, sp)
        # T_V-form minus S_j(V)-form: the paraproduct remainders
        terms["paraproduct_remainder"] = -1.0 * (_paradiff_transport(V, U, cut) - _symmetric_transport(low, U))
        gap = tuple(a - b for a, b in zip(low_delta, low))
        terms["coefficient_gap"] = _symmetric_transport(gap, U)
        terms["symbol_gap"] = 1j * (paradiff_apply(gamma_smoothed, U, cut) - paradiff_apply(gamma, U, cut))
    source = GridFunction.zeros(u.grid)
    for term in terms.values():
        source = source + term
    limit = support_factor * 2.0 ** j
    radius = max(spectral_radius(U, 1e-10), spectral_radius(source, 1e-10))
    if radius > limit:
        raise SpectralSupportError(f"spectrum reaches |xi| = {radius:.4g}, beyond the ball of radius {limit:.4g}")
    return LocalizedProblem(j, U, source, "delta-smoothed" if smoothed else "exact", terms, radius)


def localized_operator(U: GridFunction, V: Sequence[GridFunction], gamma: Symbol, j: int, smoothed: bool,
                       gamma_smoothed: Symbol | None = None,
                       cut: AdmissibleCutoff = AdmissibleCutoff()) -> GridFunction:
    """Spatial part of L (or L_delta) applied to U."""
    if not smoothed:
        return _paradiff_transport(V, U, cut) + 1j * paradiff_apply(gamma, U, cut)
    sp = SmoothingParams(j)
    if gamma_smoothed is None:
        gamma_smoothed = SmoothedSymbol(gamma, sp).as_symbol()
    return _symmetric_transport(smooth_field(V, sp), U) + 1j * paradiff_apply(gamma_smoothed, U, cut)


@dataclass(frozen=True)
class CommutatorSample:
    j: int
    transport: float
    divergence: float
    dispersive: float
    smoothing_gap: float

    def row(self) -> dict[str, float]:
        return {"j": self.j, "transport": self.transport, "divergence": self.divergence,
                "dispersive": self.dispersive, "smoothing_gap": self.smoothing_gap}


def commutator_constants(V: Sequence[GridFunction], gamma: Symbol, u: GridFunction, j: int, s: float,
                         cut: AdmissibleCutoff = AdmissibleCutoff()) -> CommutatorSample:
    """Ratios ||commutator||_{H^s} / ||fattened block of u||_{H^s} and the smoothing-gap ratio.

    The gap ratio is ||(T_V - T_{S_{j delta} V}) . grad u_h||_{H^{s - delta/2}} / ||u_h||_{H^s}
    with u_h = Delta_j u.
    """
    fat = sobolev_norm(_fattened_block(u, j), s)
    uh = _block(u, j)
    low_delta = smooth_field(V, SmoothingParams(j))
    gap = GridFunction.zeros(u.grid)
    for ax, (v, vd) in enumerate(zip(V, low_delta)):
        duh = uh.derivative(ax)
        gap = gap + paraproduct_apply(v, duh, cut) - paraproduct_apply(vd, duh, cut)
    return CommutatorSample(
        j,
        sobolev_norm(transport_commutator(V, u, j, cut), s) / fat,
        sobolev_norm(divergence_commutator(V, u, j, cut), s) / fat,
        sobolev_norm(dispersive_commutator(gamma, u, j, cut), s) / fat,
        sobolev_norm(gap, s - float(DELTA) / 2) / sobolev_norm(uh, s),
    )


def random_profile(grid: PeriodicGrid, s: float, seed: int, band: float = 0.25) -> GridFunction:
    """Complex random field with Gaussian coefficients decaying like <k>^{-s-1/2}, cut to |k| <= band * N."""
    rng = np.random.default_rng(seed)
    k = grid.abs_wavenumber
    spec = (rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)) * (1.0 + k ** 2) ** (-(s + 0.5) / 2)
    spec = np.where(k <= band * grid.points_per_axis, spec, 0.0)
    return GridFunction.from_spectrum(grid, spec)


def commutator_scan(V: Sequence[GridFunction], gamma: Symbol, levels: Sequence[int], s: float,
                    seeds: Sequence[int], cut: AdmissibleCutoff = AdmissibleCutoff()) -> list[CommutatorSample]:
    """Per level, the worst ratio over the random profiles."""
    profiles = [random_profile(V[0].grid, s, seed) for seed in seeds]
    out = []
    for j in levels:
        samples = [commutator_constants(V, gamma, u, j, s, cut) for u in profiles]
        out.append(CommutatorSample(int(j), max(c.transport for c in samples), max(c.divergence for c in samples),
                                    max(c.dispersive for c in samples), max(c.smoothing_gap for c in samples)))
    return out


# ---------------------------------------------------------------------------
# time norms
# ---------------------------------------------------------------------------

def spatial_norm(u: GridFunction, r: float | None, oversample: int = 2) -> float:
    """W^{r, infinity} through the dyadic Hölder norm, or the sup norm when r is None."""
    if r is None:
        return float(np.abs(upsample(u, oversample)).max()) if oversample > 1 else u.sup_norm()
    return dyadic_holder_norm(u, r)


def strichartz_norm(trajectory: Sequence[GridFunction], times: Sequence[float], r: float | None, p: float) -> float:
    """(int_I ||u(t)||^p dt)^{1/p} by the trapezoid rule on a uniform time grid."""
    times = np.asarray(times, dtype=float)
    if len(trajectory) != times.size:
        raise ValueError("one sample per time is required")
    if times.size < 2:
        raise ValueError("need at least two time samples")
    steps = np.diff(times)
    if np.max(np.abs(steps - steps[0])) > 1e-9 * max(abs(steps[0]), 1e-300):
        raise ValueError("time samples must be uniform")
    values = np.array([spatial_norm(u, r) for u in trajectory])
    return time_norm(values, times, p)


def time_norm(values: np.ndarray, times: np.ndarray, p: float) -> float:
    return float(trapezoid(np.asarray(values, dtype=float) ** p, times)) ** (1.0 / p)


@dataclass(frozen=True)
class StrichartzRow:
    j: int
    h: float
    window: float
    norm: float
    datum_l2: float
    ratio: float


def strichartz_ratio(trajectory: Sequence[GridFunction], times: Sequence[float], j: int) -> StrichartzRow:
    """||u||_{L^4(I; L^inf)} / (h^{-3/8} ||u(0)||_{L^2}) in one dimension."""
    h = 2.0 ** -j
    norm = strichartz_norm(trajectory, times, None, 4)
    l2 = torus_l2(trajectory[0])
    return StrichartzRow(j, h, float(times[-1]), norm, l2, norm / (h ** -float(STRICHARTZ_LOSS) * l2))


# ---------------------------------------------------------------------------
# interval gluing
# ---------------------------------------------------------------------------

def interval_count(h: float, T: float) -> int:
    """floor(T h^{-delta/2}) - 1 overlapping windows of length 2 h^{delta/2}."""
    tau = h ** (float(DELTA) / 2)
    if T < 3 * tau:
        raise ValueError(f"T = {T:.4g} is shorter than three windows (3 h^(delta/2) = {3 * tau:.4g})")
    return int(math.floor(T / tau + 1e-12)) - 1


def glue_weight(t: np.ndarray, k: int, count: int, tau: float, T: float) -> np.ndarray:
    """The k-th member of a partition of unity of [0, T] subordinate to [k tau, (k + 2) tau].

    Each weight rises on [k tau, (k+1) tau] and falls on [(k+1) tau, (k+2) tau];
    the first is flat from 0 and the last stays flat up to T, so the weights sum to 1 on [0, T].
    """
    s = (np.asarray(t, dtype=float) - k * tau) / tau
    rise = np.ones_like(s) if k == 0 else smooth_step(s)
    fall = np.ones_like(s) if k == count - 1 else 1.0 - smooth_step(s - 1.0)
    return rise * fall


def glue_cutoff(t: np.ndarray, k: int, count: int, tau: float, T: float, p: float) -> np.ndarray:
    """chi_{h,k} = weight^{1/p}, so that sum_k chi_{h,k}^p = 1 and local p-th powers add up."""
    return glue_weight(t, k, count, tau, T) ** (1.0 / p)


@dataclass(frozen=True)
class GlueReport:
    count: int
    tau: float
    local: list[float]
    glued: float
    direct: float
    overlap: int
    p: float

    @property
    def relative_gap(self) -> float:
        return abs(self.glued - self.direct) / self.direct if self.direct else abs(self.glued)

    @property
    def overlap_bound_holds(self) -> bool:
        return self.direct ** self.p <= self.overlap * sum(x ** self.p for x in self.local) * (1 + 1e-9)


def interval_glue(norm_at: Callable[[np.ndarray], np.ndarray], h: float, T: float, p: float,
                  samples: int = SAMPLES_PER_INTERVAL, direct_samples: int | None = None) -> GlueReport:
    """Local L^p norms of chi_{h,k} u on their own sample grids, reassembled and compared with the direct norm.

    ``norm_at`` maps an array of times to the spatial norm of u at those times.
    """
    count = interval_count(h, T)
    tau = h ** (float(DELTA) / 2)
    local = []
    for k in range(count):
        lo = k * tau
        hi = T if k == count - 1 else (k + 2) * tau
        n = samples if k < count - 1 else max(samples, int(math.ceil(samples * (hi - lo) / (2 * tau))))
        ts = np.linspace(lo, hi, n)
        chi = glue_cutoff(ts, k, count, tau, T, p)
        local.append(time_norm(chi * norm_at(ts), ts, p))
    glued = sum(x ** p for x in local) ** (1.0 / p)
    n_direct = direct_samples or samples * (count + 1)
    ts = np.linspace(0.0, T, n_direct)
    direct = time_norm(norm_at(ts), ts, p)
    return GlueReport(count, tau, local, glued, direct, overlap=2, p=p)


def cutoff_derivative_sup(h: float, k: int, count: int, T: float, p: float, samples: int = 4096) -> float:
    """sup_t |d/dt chi_{h,k}(t)| by central differences on a fine grid of the interval."""
    tau = h ** (float(DELTA) / 2)
    lo = k * tau
    hi = min((k + 2) * tau, T)
    ts = np.linspace(lo, hi, samples)
    chi = glue_cutoff(ts, k, count, tau, T, p)
    return float(np.abs(np.gradient(chi, ts)).max())


def profile_derivative_sup(p: float, samples: int = 4096) -> float:
    """sup |chi'| of the unscaled interior cutoff on [0, 2]."""
    s = np.linspace(0.0, 2.0, samples)
    chi = (smooth_step(s) * (1.0 - smooth_step(s - 1.0))) ** (1.0 / p)
    return float(np.abs(np.gradient(chi, s)).max())


# ---------------------------------------------------------------------------
# norm ledger
# ---------------------------------------------------------------------------

def _check_ledger_exponent(name: str, r: float) -> None:
    if r <= 0 or (2 * r).is_integer():
        raise ValueError(f"{name} = {r} must be positive and outside (1/2)N")


def interpolation_theta(r: float, r_prime: float, mu: float) -> float:
    """theta with r = theta (1 - mu) + (1 - theta) r'."""
    if not 1 - mu < r < r_prime:
        raise ValueError("need 1 - mu < r < r'")
    return (r_prime - r) / (r_prime - (1 - mu))


@dataclass(frozen=True)
class LedgerSample:
    t: float
    M_s: float
    Z_r: float
    Z_r_prime: float


@dataclass(frozen=True)
class NormLedger:
    s: float
    r: float
    r_prime: float
    mu: float
    p: int
    theta: float
    samples: list[LedgerSample]
    threshold: float

    @property
    def final(self) -> LedgerSample:
        return self.samples[-1]

    def interpolation_constant(self) -> float:
        """Measured C in Z_r(T) <= C T^{theta/p} M_s(T)^theta Z_r'(T)^{1-theta} at the final time."""
        last = self.final
        if last.Z_r == 0:
            return 0.0
        bound = last.t ** (self.theta / self.p) * last.M_s ** self.theta * last.Z_r_prime ** (1 - self.theta)
        return last.Z_r / bound

    def monotone(self) -> bool:
        m = np.array([x.M_s for x in self.samples])
        z = np.array([x.Z_r for x in self.samples])
        return bool(np.all(np.diff(m) >= 0) and np.all(np.diff(z) >= -1e-15))

    def crossing_time(self) -> float | None:
        """First sampled T at which M_s + Z_r exceeds the continuation threshold."""
        for x in self.samples:
            if x.M_s + x.Z_r > self.threshold:
                return x.t
        return None

    def rows(self) -> list[dict[str, float]]:
        return [{"t": x.t, "M_s": x.M_s, "Z_r": x.Z_r, "Z_r_prime": x.Z_r_prime, "f": x.M_s + x.Z_r}
                for x in self.samples]


def _sobolev_size(w: WaveState, B: GridFunction, V: Sequence[GridFunction], s: float) -> float:
    parts = [sobolev_norm(w.psi, s + 0.5), sobolev_norm(w.eta, s + 0.5), sobolev_norm(B, s)]
    parts += [sobolev_norm(v, s) for v in V]
    return math.sqrt(sum(x * x for x in parts))


def _holder_size(w: WaveState, B: GridFunction, V: Sequence[GridFunction], r: float) -> tuple[float, float]:
    eta_part = dyadic_holder_norm(w.eta, r + 0.5)
    bv_part = dyadic_holder_norm(B, r) + sum(dyadic_holder_norm(v, r) for v in V)
    return eta_part, bv_part


def norm_ledger(trajectory: Sequence[WaveState], params: FluidParams, s: float, r: float, r_prime: float,
                mu: float, threshold_factor: float = 4.0) -> NormLedger:
    """Running M_s(T), Z_r(T) and Z_r'(T) along a uniformly sampled trajectory.

    M_s is the running supremum of the (psi, eta, B, V) Sobolev size; Z_r adds the
    L^p-in-time Hölder norms of eta (index r + 1/2) and of (B, V) (index r).
    The continuation threshold is ``threshold_factor`` times M_s at the first sample.
    """
    _check_ledger_exponent("r", r)
    _check_ledger_exponent("r_prime", r_prime)
    theta = interpolation_theta(r, r_prime, mu)
    grid = trajectory[0].grid
    p = time_exponent(grid.dim)
    times = np.array([w.t for w in trajectory], dtype=float)
    sizes, eta_r, bv_r, eta_rp, bv_rp = [], [], [], [], []
    for w in trajectory:
        tf = traces_and_taylor(w, params)
        sizes.append(_sobolev_size(w, tf.B, tf.V, s))
        a, b = _holder_size(w, tf.B, tf.V, r)
        eta_r.append(a)
        bv_r.append(b)
        a, b = _holder_size(w, tf.B, tf.V, r_prime)
        eta_rp.append(a)
        bv_rp.append(b)
    samples = []
    for n in range(len(trajectory)):
        ts = times[:n + 1]
        if n == 0:
            zr = zrp = 0.0
        else:
            zr = time_norm(np.array(eta_r[:n + 1]), ts, p) + time_norm(np.array(bv_r[:n + 1]), ts, p)
            zrp = time_norm(np.array(eta_rp[:n + 1]), ts, p) + time_norm(np.array(bv_rp[:n + 1]), ts, p)
        samples.append(LedgerSample(float(times[n]), float(max(sizes[:n + 1])), zr, zrp))
    return NormLedger(s, r, r_prime, mu, p, theta, samples, threshold_factor * max(sizes[0], 1e-300))
