import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from parawave.spectral import GridFunction, PeriodicGrid, dyadic_holder_norm, weierstrass
from parawave.symmetrize import (TaylorSignError, annulus_points, default_regularity, equation_residual,
                                 gamma_seminorm, principal_symbols, reduced_unknown, symbols_from_fields)
from parawave.waterwaves import FluidParams, WaveState, evolve, mode_state, traces_and_taylor

DEEP = FluidParams()


def flat_symbols(grid: PeriodicGrid, gravity: float = 1.0):
    return symbols_from_fields(grid, [np.zeros(grid.shape)] * grid.dim, np.full(grid.shape, gravity))


# --- principal symbols ------------------------------------------------------------

def test_flat_surface_lambda_is_modulus():
    grid = PeriodicGrid(2, 8)
    ps = flat_symbols(grid)
    xi = np.array([[3.0, -4.0], [0.5, 0.0]])
    np.testing.assert_allclose(ps.lam(xi), np.array([5.0, 0.5])[:, None, None] * np.ones((2, 8, 8)))


@settings(max_examples=30)
@given(st.integers(0, 10_000), st.floats(-20.0, 20.0).filter(lambda v: abs(v) > 1e-3))
def test_one_dimensional_lambda_ignores_slope(seed, xi):
    grid = PeriodicGrid(1, 16)
    slope = 3.0 * np.random.default_rng(seed).normal(size=16)
    ps = symbols_from_fields(grid, [slope], np.ones(16))
    np.testing.assert_allclose(ps.lam(np.array([[xi]]))[0], abs(xi), rtol=1e-12)


def test_two_dimensional_worked_value():
    grid = PeriodicGrid(2, 8)
    ps = symbols_from_fields(grid, [np.ones((8, 8)), np.zeros((8, 8))], np.ones((8, 8)))
    xi = np.array([[0.0, 1.0]])
    np.testing.assert_allclose(ps.lam(xi), math.sqrt(2.0), rtol=1e-14)
    np.testing.assert_allclose(ps.gamma(xi), 2.0 ** 0.25, rtol=1e-14)


def test_metric_matches_quadratic_form():
    grid = PeriodicGrid(2, 8)
    rng = np.random.default_rng(4)
    ps = symbols_from_fields(grid, [rng.normal(size=(8, 8)), rng.normal(size=(8, 8))], np.ones((8, 8)))
    xi = np.array([0.7, -1.3])
    direct = np.einsum("i,ij...,j->...", xi, ps.metric(), xi)
    np.testing.assert_allclose(ps.quadratic_form(xi)[0], direct, rtol=1e-12)


def test_nonpositive_taylor_rejected():
    grid = PeriodicGrid(1, 8)
    taylor = np.ones(8)
    taylor[3] = 0.0
    with pytest.raises(TaylorSignError):
        symbols_from_fields(grid, [np.zeros(8)], taylor)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_symbol_identities_and_lower_bounds(seed):
    rng = np.random.default_rng(seed)
    grid = PeriodicGrid(2, 8)
    slope = [rng.normal(size=(8, 8)), rng.normal(size=(8, 8))]
    taylor = rng.uniform(0.2, 3.0, size=(8, 8))
    ps = symbols_from_fields(grid, slope, taylor)
    for xi in annulus_points(2, radii=5, angles=6):
        lam, gam, q = ps.lam(xi), ps.gamma(xi), ps.q(xi)
        norms = np.linalg.norm(xi, axis=1)[:, None, None]
        assert np.all(lam >= norms * (1 - 1e-12))
        assert np.all(gam >= np.sqrt(taylor.min() * norms) * (1 - 1e-12))
        np.testing.assert_allclose(gam ** 2 / lam, np.broadcast_to(taylor, lam.shape), rtol=1e-10)
        np.testing.assert_allclose((gam * q) ** 2, np.broadcast_to(taylor ** 2, lam.shape), rtol=1e-10)


def test_symbols_from_wave_state():
    grid = PeriodicGrid(1, 32)
    w = mode_state(grid, [{"k": 2, "amplitude": 1e-3}])
    tf = traces_and_taylor(w, DEEP)
    ps = principal_symbols(tf, w.eta)
    np.testing.assert_allclose(ps.gamma(np.array([[4.0]]))[0] ** 2 / 4.0, tf.a.values, rtol=1e-12)


# --- gamma seminorm --------------------------------------------------------------

def test_flat_gamma_seminorm_closed_forms():
    ps = flat_symbols(PeriodicGrid(1, 8))
    n0 = gamma_seminorm(ps, 0)
    n1 = gamma_seminorm(ps, 1)
    assert n0 == pytest.approx(math.sqrt(10.0), rel=1e-12)
    assert n1 - n0 == pytest.approx(0.5 * math.sqrt(10.0), rel=1e-6)


def test_gamma_seminorm_gravity_scaling_and_monotonicity():
    rng = np.random.default_rng(1)
    grid = PeriodicGrid(2, 8)
    ps = symbols_from_fields(grid, [0.3 * rng.normal(size=(8, 8)), 0.3 * rng.normal(size=(8, 8))],
                             rng.uniform(0.5, 2.0, size=(8, 8)))
    values = [gamma_seminorm(ps, k) for k in range(4)]
    assert all(b >= a for a, b in zip(values[:-1], values[1:]))
    flat4 = flat_symbols(PeriodicGrid(1, 8), gravity=4.0)
    assert gamma_seminorm(flat4, 0) == pytest.approx(2.0 * math.sqrt(10.0), rel=1e-12)


def test_gamma_seminorm_rejects_large_order():
    with pytest.raises(ValueError):
        gamma_seminorm(flat_symbols(PeriodicGrid(1, 8)), 7)


def test_gamma_holder_norm_controlled_by_slope_norm():
    # in d = 2 with xi normal to the slope, gamma = (1 + |zeta|^2)^{1/4}, a smooth function of the slope
    grid = PeriodicGrid(2, 64)
    base = weierstrass(PeriodicGrid(1, 64), 1.5, top_level=4).values
    xi = np.array([[0.0, 1.0]])
    slope_norms, gamma_norms = [], []
    for amplitude in (0.05, 0.1, 0.2, 0.4, 0.8):
        eta = GridFunction(grid, amplitude * np.broadcast_to(base[:, None], grid.shape))
        zeta = eta.gradient()
        ps = symbols_from_fields(grid, [z.values for z in zeta], np.ones(grid.shape))
        slope_norms.append(dyadic_holder_norm(zeta[0], 0.5))
        gamma_norms.append(dyadic_holder_norm(GridFunction(grid, ps.gamma(xi)[0]), 0.5))
    assert np.all(np.diff(slope_norms) > 0)
    assert np.all(np.diff(gamma_norms) > 0)
    for y, g in zip(slope_norms, gamma_norms):
        assert g <= 1.0 + y + y * y


# --- reduced unknown ---------------------------------------------------------------

def test_default_regularity_threshold():
    assert default_regularity(1) == pytest.approx(1.5 - 1 / 24 + 0.01)
    assert default_regularity(2) == pytest.approx(2.0 - 1 / 24 + 0.01)


def test_rest_state_reduces_to_zero():
    w = WaveState.rest(PeriodicGrid(1, 32))
    red = reduced_unknown(w, traces_and_taylor(w, DEEP), 1.5)
    for part in (red.U_s, red.theta_s, red.u):
        assert all(np.abs(c.values).max() == 0.0 for c in part)


def test_flat_surface_reduces_to_horizontal_velocity():
    grid = PeriodicGrid(1, 64)
    w = WaveState(GridFunction.zeros(grid), GridFunction.from_callable(grid, lambda x: np.cos(3 * x)))
    tf = traces_and_taylor(w, DEEP)
    red = reduced_unknown(w, tf, 1.5)
    assert np.abs(red.theta_s[0].values).max() == 0.0
    np.testing.assert_allclose(red.u[0].values, tf.V[0].values, atol=1e-12)


def test_reconstruction_round_trip():
    grid = PeriodicGrid(1, 64)
    w = mode_state(grid, [{"k": 2, "amplitude": 1e-2}], [{"k": 3, "amplitude": 1e-2}])
    red = reduced_unknown(w, traces_and_taylor(w, DEEP), 1.5)
    np.testing.assert_allclose(red.reconstruct()[0].values, red.u[0].values, atol=1e-14)


def test_reduced_norm_monotone_in_amplitude():
    grid = PeriodicGrid(1, 64)
    s = default_regularity(1)
    norms = []
    for eps in (1e-3, 3e-3, 1e-2, 3e-2):
        w = mode_state(grid, [{"k": 2, "amplitude": eps}, {"k": 5, "amplitude": eps / 4}],
                       [{"k": 3, "amplitude": eps}])
        norms.append(reduced_unknown(w, traces_and_taylor(w, DEEP), s).norm())
    assert np.all(np.isfinite(norms))
    assert np.all(np.diff(norms) > 0)


# --- residual of the reduced equation ------------------------------------------------

def test_rest_state_residual_vanishes():
    grid = PeriodicGrid(1, 32)
    states = evolve(WaveState.rest(grid), DEEP, 0.01, 5)
    assert all(sample.norm == 0.0 for sample in equation_residual(states, DEEP, 1.5))


def test_residual_needs_enough_equal_samples():
    grid = PeriodicGrid(1, 32)
    states = evolve(WaveState.rest(grid), DEEP, 0.01, 3)
    with pytest.raises(ValueError):
        equation_residual(states, DEEP, 1.5)
    uneven = evolve(WaveState.rest(grid), DEEP, 0.01, 5)
    uneven[-1] = WaveState(uneven[-1].eta, uneven[-1].psi, 1.0)
    with pytest.raises(ValueError):
        equation_residual(uneven, DEEP, 1.5)


def test_residual_is_quadratic_in_amplitude():
    # data avoid |xi| = 1, where the low-frequency cutoff would leave a linear term behind
    grid = PeriodicGrid(1, 64)
    s = default_regularity(1)
    amplitudes = np.array([1e-4, 2e-4, 4e-4, 8e-4])
    sizes, ratios = [], []
    for eps in amplitudes:
        w = mode_state(grid, [{"k": 2, "amplitude": eps}, {"k": 3, "amplitude": eps / 2, "phase": 0.3}],
                       [{"k": 2, "amplitude": eps, "phase": 1.0}])
        samples = equation_residual(evolve(w, DEEP, 0.01, 6), DEEP, s)
        size = max(x.norm for x in samples)
        sizes.append(size)
        tf = traces_and_taylor(w, DEEP)
        scale = 1 + dyadic_holder_norm(w.eta, 2.5 - 1 / 24) + dyadic_holder_norm(tf.B, 2 - 1 / 24) \
            + dyadic_holder_norm(tf.V[0], 2 - 1 / 24)
        ratios.append(size / scale)
    slope = np.polyfit(np.log(amplitudes), np.log(sizes), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.05)
    assert max(ratios) <= 1.0
