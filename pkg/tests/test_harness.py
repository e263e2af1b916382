import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from parawave.fitting import dyadic_slope, power_law_fit
from parawave.harness import (SpectralSupportError, commutator_constants, cutoff_derivative_sup, exponent_budget,
                              glue_cutoff, interpolation_theta, interval_count, interval_glue, localized_operator,
                              localized_problem, norm_ledger, profile_derivative_sup, random_profile,
                              strichartz_norm, strichartz_ratio, time_exponent, time_norm, torus_l2)
from parawave.paradiff import Symbol, half_wave_symbol
from parawave.smoothing import DELTA
from parawave.spectral import GridFunction, PeriodicGrid
from parawave.waterwaves import FluidParams, WaveState, evolve, mode_state


# --- fitting ------------------------------------------------------------------------

def test_power_law_fit_recovers_exact_law():
    x = np.array([1.0, 2.0, 4.0, 8.0])
    fit = power_law_fit(x, 3.0 * x ** -1.5)
    assert fit.slope == pytest.approx(-1.5, abs=1e-12)
    assert fit.prefactor == pytest.approx(3.0, rel=1e-12)
    assert fit.r_squared == pytest.approx(1.0)
    np.testing.assert_allclose(fit.predict(x), 3.0 * x ** -1.5, rtol=1e-12)
    assert fit.within(-1.4, 0.1 + 1e-12)
    assert not fit.within(-1.4, 0.05, relative=True)


def test_fit_rejects_bad_data():
    with pytest.raises(ValueError):
        power_law_fit([1.0], [1.0])
    with pytest.raises(ValueError):
        power_law_fit([1.0, 2.0], [1.0, -1.0])


def test_dyadic_slope_is_exponent_of_h():
    levels = [2, 3, 4, 5]
    assert dyadic_slope(levels, [2.0 ** (-0.5 * j) for j in levels]).slope == pytest.approx(0.5)


# --- exponent bookkeeping -------------------------------------------------------------

def test_exponent_budget_closes():
    budget = exponent_budget()
    assert budget["mu"] == Fraction(1, 24)
    assert budget["sigma_one"] == Fraction(11, 24)
    assert budget["delta"] == DELTA
    with pytest.raises(ValueError):
        exponent_budget(2)
    assert (time_exponent(1), time_exponent(2)) == (4, 2)


def test_torus_measure():
    for dim in (1, 2):
        one = GridFunction(PeriodicGrid(dim, 8), np.ones((8,) * dim))
        assert torus_l2(one) == pytest.approx((2 * math.pi) ** (dim / 2), rel=1e-14)


# --- localized problem ---------------------------------------------------------------------

def problem_data(seed: int = 0):
    grid = PeriodicGrid(1, 128)
    rng = np.random.default_rng(seed)
    x = grid.coords[0]
    V = [GridFunction(grid, 0.3 * np.cos(x) + 0.1 * np.sin(3 * x + rng.uniform(0, 6)) + 0.05 * np.cos(9 * x))]
    a = GridFunction(grid, 1.0 + 0.2 * np.cos(2 * x))
    gamma = Symbol.product(a, lambda xi: np.sqrt(np.abs(xi[:, 0])), 0.5)
    u = random_profile(grid, 1.0, seed)
    return grid, V, gamma, u


@pytest.mark.parametrize("j", [2, 4, 5])
@pytest.mark.parametrize("smoothed", [False, True])
def test_localized_source_closes_the_equation(j, smoothed):
    # with f = L u at a time slice, the source must equal L(_delta) applied to Delta_j u
    grid, V, gamma, u = problem_data()
    f = localized_operator(u, V, gamma, j, smoothed=False)
    prob = localized_problem(u, f, V, gamma, j, smoothed=smoothed)
    lhs = localized_operator(prob.U, V, gamma, j, smoothed=smoothed)
    assert np.abs(lhs.values - prob.source.values).max() <= 1e-10 * np.abs(lhs.values).max()
    assert prob.operator == ("delta-smoothed" if smoothed else "exact")
    assert set(prob.term_norms(0.5)) == set(prob.terms)


def test_localized_problem_support_check():
    grid, V, gamma, u = problem_data()
    with pytest.raises(SpectralSupportError):
        localized_problem(u, u, V, gamma, 3, support_factor=0.5)
    with pytest.raises(ValueError):
        localized_problem(u, u, V * 2, gamma, 3)


def test_commutators_vanish_for_constant_coefficients():
    grid = PeriodicGrid(1, 128)
    V = [GridFunction(grid, np.full(128, 0.4))]
    u = random_profile(grid, 1.0, 3)
    c = commutator_constants(V, half_wave_symbol(grid), u, 4, 1.0)
    assert max(c.transport, c.divergence, c.dispersive) <= 1e-13
    assert c.smoothing_gap <= 1e-13


def test_commutator_ratios_stay_bounded_across_levels():
    grid, V, gamma, _ = problem_data()
    ratios = []
    for seed in range(3):
        u = random_profile(grid, 1.0, seed)
        ratios += [commutator_constants(V, gamma, u, j, 1.0) for j in range(2, 6)]
    for name in ("transport", "divergence", "dispersive"):
        values = [getattr(c, name) for c in ratios]
        assert max(values) <= 10.0
    assert set(ratios[0].row()) == {"j", "transport", "divergence", "dispersive", "smoothing_gap"}


def test_random_profile_is_band_limited_and_seeded():
    grid = PeriodicGrid(1, 64)
    u = random_profile(grid, 1.0, 5)
    assert np.abs(u.spectrum[grid.abs_wavenumber > 16]).max() == 0.0
    np.testing.assert_array_equal(u.values, random_profile(grid, 1.0, 5).values)
    assert not np.array_equal(u.values, random_profile(grid, 1.0, 6).values)


# --- time norms --------------------------------------------------------------------------

def test_time_norm_of_constant_profile():
    grid = PeriodicGrid(1, 16)
    u = GridFunction(grid, np.full(16, 2.0))
    times = np.linspace(0, 0.5, 11)
    assert strichartz_norm([u] * 11, times, None, 4) == pytest.approx(2.0 * 0.5 ** 0.25, rel=1e-12)
    assert time_norm(np.full(3, 3.0), np.array([0.0, 1.0, 2.0]), 2) == pytest.approx(3.0 * math.sqrt(2.0))


def test_strichartz_norm_argument_checks():
    u = GridFunction(PeriodicGrid(1, 8), np.ones(8))
    with pytest.raises(ValueError):
        strichartz_norm([u, u], [0.0, 0.1, 0.2], None, 4)
    with pytest.raises(ValueError):
        strichartz_norm([u], [0.0], None, 4)
    with pytest.raises(ValueError):
        strichartz_norm([u] * 3, [0.0, 0.1, 0.3], None, 4)


def test_strichartz_ratio_normalization():
    grid = PeriodicGrid(1, 16)
    u = GridFunction(grid, np.ones(16))
    row = strichartz_ratio([u, u], [0.0, 1.0], 3)
    assert row.ratio == pytest.approx(1.0 / (2.0 ** (3 * 3 / 8) * math.sqrt(2 * math.pi)), rel=1e-12)


# --- interval gluing ------------------------------------------------------------------------

def test_interval_count_values():
    h = 2.0 ** -6
    tau = h ** (1 / 3)
    assert tau == pytest.approx(0.25)
    assert interval_count(h, 1.0) == 3
    assert interval_count(h, 2.0) == 7
    with pytest.raises(ValueError):
        interval_count(h, 0.7)


@settings(max_examples=50, deadline=None)
@given(st.integers(4, 10), st.floats(1.0, 3.0), st.sampled_from([2.0, 4.0]))
def test_glue_cutoffs_partition_unity(j, T, p):
    h = 2.0 ** -j
    tau = h ** (float(DELTA) / 2)
    if T < 3 * tau:
        return
    count = interval_count(h, T)
    t = np.linspace(0, T, 2001)
    total = sum(glue_cutoff(t, k, count, tau, T, p) ** p for k in range(count))
    np.testing.assert_allclose(total, 1.0, atol=1e-12)


def test_glued_norm_matches_direct_norm():
    rep = interval_glue(lambda t: 1.0 + 0.5 * np.sin(3 * t), 2.0 ** -6, 2.0, 4.0, samples=256)
    assert rep.count == 7
    assert rep.relative_gap <= 1e-4
    assert rep.overlap_bound_holds


def test_cutoff_derivative_scales_with_window():
    p = 4.0
    base = profile_derivative_sup(p)
    for j in (4, 6, 8):
        h = 2.0 ** -j
        tau = h ** (1 / 3)
        count = interval_count(h, 3.0)
        assert cutoff_derivative_sup(h, 1, count, 3.0, p) * tau == pytest.approx(base, rel=1e-3)


# --- norm ledger -------------------------------------------------------------------------------

def test_interpolation_theta():
    mu = 1 / 24
    assert interpolation_theta(1.5, 2.5, mu) == pytest.approx(1.0 / (1.5 + mu))
    with pytest.raises(ValueError):
        interpolation_theta(0.9, 2.5, mu)
    with pytest.raises(ValueError):
        interpolation_theta(2.6, 2.5, mu)


def test_ledger_of_rest_state_is_zero():
    traj = evolve(WaveState.rest(PeriodicGrid(1, 32)), FluidParams(), 0.05, 4)
    led = norm_ledger(traj, FluidParams(), 1.5, 1.25, 2.25, 1 / 24)
    assert all(x.M_s == 0 and x.Z_r == 0 for x in led.samples)
    assert led.interpolation_constant() == 0.0
    assert led.crossing_time() is None


def test_ledger_rejects_half_integer_exponents():
    traj = evolve(WaveState.rest(PeriodicGrid(1, 32)), FluidParams(), 0.05, 2)
    with pytest.raises(ValueError):
        norm_ledger(traj, FluidParams(), 1.5, 1.5, 2.25, 1 / 24)
    with pytest.raises(ValueError):
        norm_ledger(traj, FluidParams(), 1.5, 1.25, 2.0, 1 / 24)


def test_ledger_running_quantities_are_monotone():
    grid = PeriodicGrid(1, 64)
    w = mode_state(grid, [{"k": 2, "amplitude": 1e-2}], [{"k": 3, "amplitude": 1e-2}])
    traj = evolve(w, FluidParams(), 0.02, 20)
    led = norm_ledger(traj, FluidParams(), 1.5, 1.25, 2.25, 1 / 24)
    assert led.monotone()
    assert led.p == 4
    assert led.final.Z_r > 0
    assert led.crossing_time() is None
    assert np.isfinite(led.interpolation_constant())
    assert set(led.rows()[0]) == {"t", "M_s", "Z_r", "Z_r_prime", "f"}
