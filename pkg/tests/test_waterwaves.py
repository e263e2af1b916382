import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from parawave.laplace_oracle import fd_dirichlet_neumann
from parawave.spectral import GridFunction, PeriodicGrid
from parawave.waterwaves import (FluidParams, StripViolation, WaveState, cfl_cap, csz_step, dn_apply, dn_terms,
                                 energy, evolve, inner, mode_state, scaling_transform, traces_and_taylor,
                                 weierstrass_state)

DEEP = FluidParams()


def small_state(grid: PeriodicGrid, eps: float = 1e-3) -> WaveState:
    return mode_state(grid, [{"k": 1, "amplitude": eps}, {"k": 3, "amplitude": eps / 3, "phase": 0.7}],
                      [{"k": 2, "amplitude": eps}])


# --- Dirichlet-Neumann operator ----------------------------------------------------

@pytest.mark.parametrize("k", [1, 4, 9])
def test_flat_surface_infinite_depth(k):
    grid = PeriodicGrid(1, 64)
    f = GridFunction.from_callable(grid, lambda x: np.cos(k * x))
    out = dn_apply(GridFunction.zeros(grid), f, DEEP)
    np.testing.assert_allclose(out.values, k * f.values, atol=1e-12)


@pytest.mark.parametrize("depth", [0.3, 1.0, 2.5])
def test_flat_surface_finite_depth(depth):
    grid = PeriodicGrid(1, 64)
    f = GridFunction.from_callable(grid, lambda x: np.cos(3 * x))
    out = dn_apply(GridFunction.zeros(grid), f, FluidParams(depth=depth))
    np.testing.assert_allclose(out.values, 3 * math.tanh(3 * depth) * f.values, atol=1e-12)


def test_finite_difference_oracle_reproduces_flat_multiplier():
    grid = PeriodicGrid(1, 128)
    x = grid.coords[0]
    ref = fd_dirichlet_neumann(np.zeros(128), np.cos(3 * x), 1.0, 128)
    np.testing.assert_allclose(ref, 3 * math.tanh(3.0) * np.cos(3 * x), atol=2e-5)


def test_expansion_matches_finite_difference_oracle():
    grid = PeriodicGrid(1, 128)
    x = grid.coords[0]
    eta = GridFunction(grid, 0.01 * np.cos(x))
    f = GridFunction(grid, np.cos(2 * x))
    ref = fd_dirichlet_neumann(eta.values, f.values, 1.0, 128)
    got = dn_apply(eta, f, FluidParams(depth=1.0, dn_order=2)).values
    assert np.abs(got - ref).max() / np.abs(ref).max() <= 1e-4


def test_oracle_rejects_bad_input():
    with pytest.raises(ValueError):
        fd_dirichlet_neumann(np.zeros(8), np.zeros(9), 1.0)
    with pytest.raises(ValueError):
        fd_dirichlet_neumann(np.zeros(8), np.zeros(8), math.inf)


def test_expansion_terms_shrink_with_order():
    grid = PeriodicGrid(1, 64)
    eta = GridFunction.from_callable(grid, lambda x: 0.01 * np.cos(x))
    f = GridFunction.from_callable(grid, lambda x: np.cos(2 * x))
    sizes = [t.sup_norm() for t in dn_terms(eta, f, FluidParams(dn_order=4))]
    assert len(sizes) == 5
    assert all(b < 0.1 * a for a, b in zip(sizes[:-1], sizes[1:]) if a > 1e-14)


def test_parameter_validation():
    with pytest.raises(ValueError):
        FluidParams(dn_order=5)
    with pytest.raises(ValueError):
        FluidParams(gravity=0.0)
    with pytest.raises(ValueError):
        FluidParams(depth=-1.0)


def test_strip_violation_reports_minimum():
    grid = PeriodicGrid(1, 32)
    eta = GridFunction(grid, np.full(32, -0.9995))
    with pytest.raises(StripViolation) as info:
        dn_apply(eta, GridFunction.zeros(grid), FluidParams(depth=1.0))
    assert info.value.minimum == pytest.approx(5e-4)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([0, 1, 2, 3, 4]))
def test_dirichlet_neumann_self_adjoint(seed, order):
    grid = PeriodicGrid(1, 64)
    rng = np.random.default_rng(seed)
    x = grid.coords[0]
    eta = GridFunction(grid, 0.02 * np.cos(x + rng.uniform(0, 6)) + 0.01 * np.sin(2 * x))
    f = GridFunction(grid, sum(rng.normal() * np.cos(k * x + rng.uniform(0, 6)) for k in range(1, 6)))
    g = GridFunction(grid, sum(rng.normal() * np.cos(k * x + rng.uniform(0, 6)) for k in range(1, 6)))
    p = FluidParams(dn_order=order)
    lhs, rhs = inner(f, dn_apply(eta, g, p)), inner(dn_apply(eta, f, p), g)
    assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(lhs))


# --- traces and Taylor coefficient ---------------------------------------------------

def test_rest_state_traces():
    tf = traces_and_taylor(WaveState.rest(PeriodicGrid(1, 32)), FluidParams(gravity=9.81))
    assert np.abs(tf.B.values).max() == 0.0
    assert np.abs(tf.V[0].values).max() == 0.0
    np.testing.assert_allclose(tf.a.values, 9.81, atol=1e-14)
    assert tf.taylor_sign_ok


def test_flat_surface_traces():
    grid = PeriodicGrid(1, 64)
    k = 3
    w = WaveState(GridFunction.zeros(grid), GridFunction.from_callable(grid, lambda x: np.cos(k * x)))
    tf = traces_and_taylor(w, DEEP)
    x = grid.coords[0]
    np.testing.assert_allclose(tf.B.values, k * np.cos(k * x), atol=1e-12)
    np.testing.assert_allclose(tf.V[0].values, -k * np.sin(k * x), atol=1e-12)


def test_taylor_coefficient_close_to_gravity_for_small_waves():
    eps = 1e-3
    tf = traces_and_taylor(small_state(PeriodicGrid(1, 64), eps), DEEP)
    assert np.abs(tf.a.values - 1.0).max() <= 10 * eps
    assert tf.min_a >= 0.9


@pytest.mark.parametrize("seed", range(4))
def test_taylor_positivity_on_rough_small_states(seed):
    grid = PeriodicGrid(1, 128)
    w = weierstrass_state(grid, 0.5, 5, seed, amplitude=1e-3)
    assert traces_and_taylor(w, DEEP).min_a >= 0.9


# --- evolution ---------------------------------------------------------------------

def test_rest_state_is_fixed_point():
    w = WaveState.rest(PeriodicGrid(1, 32))
    out = evolve(w, DEEP, 0.05, 5)[-1]
    assert max(out.eta.sup_norm(), out.psi.sup_norm()) <= 1e-14


def test_step_respects_dispersive_cap():
    grid = PeriodicGrid(1, 64)
    with pytest.raises(ValueError):
        csz_step(small_state(grid), DEEP, 1.01 * cfl_cap(grid))


def test_strip_violation_after_step():
    grid = PeriodicGrid(1, 32)
    w = WaveState(GridFunction(grid, np.full(32, -0.9985)), GridFunction.from_callable(grid, np.cos))
    with pytest.raises(StripViolation):
        csz_step(w, FluidParams(depth=1.0), 0.05)


def test_forward_backward_step_returns_state():
    w = small_state(PeriodicGrid(1, 64))
    back = csz_step(csz_step(w, DEEP, 0.02), DEEP, -0.02)
    assert np.abs(back.eta.values - w.eta.values).max() <= 1e-10
    assert np.abs(back.psi.values - w.psi.values).max() <= 1e-10


def test_energy_values():
    grid = PeriodicGrid(1, 64)
    assert energy(WaveState.rest(grid), DEEP) == 0.0
    w = WaveState(GridFunction.zeros(grid), GridFunction.from_callable(grid, np.cos))
    assert energy(w, DEEP) == pytest.approx(math.pi / 2, rel=1e-13)


def test_energy_conserved_over_hundred_steps():
    w = small_state(PeriodicGrid(1, 128))
    e0 = energy(w, DEEP)
    drift = max(abs(energy(s, DEEP) - e0) for s in evolve(w, DEEP, 0.01, 100)) / e0
    assert drift <= 1e-8


# --- scaling -------------------------------------------------------------------------

def test_unit_scaling_is_identity():
    w = small_state(PeriodicGrid(1, 32))
    out = scaling_transform(w, 1.0)
    np.testing.assert_array_equal(out.eta.values, w.eta.values)
    np.testing.assert_array_equal(out.psi.values, w.psi.values)


def test_non_dyadic_scaling_rejected():
    with pytest.raises(ValueError):
        scaling_transform(small_state(PeriodicGrid(1, 32)), 3.0)


def test_energy_scales_with_inverse_square():
    # eta -> eta(lam x) / lam and psi -> psi(lam x) lam^{-3/2} multiply both energy parts by lam^{-2}
    w = small_state(PeriodicGrid(1, 64), 1e-2)
    for lam in (2.0, 4.0):
        assert energy(scaling_transform(w, lam), DEEP) == pytest.approx(energy(w, DEEP) / lam ** 2, rel=1e-12)


def test_scaling_commutes_with_evolution():
    grid = PeriodicGrid(1, 64)
    w = mode_state(grid, [{"k": 2, "amplitude": 1e-2}, {"k": 6, "amplitude": 3e-3, "phase": 0.4}],
                   [{"k": 4, "amplitude": 1e-2}])
    p = FluidParams(dn_order=4)
    lam, dt, steps = 0.5, 0.02, 20
    a = scaling_transform(evolve(w, p, dt, steps)[-1], lam)
    b = evolve(scaling_transform(w, lam), p, dt / math.sqrt(lam), steps)[-1]
    assert a.t == pytest.approx(b.t)
    assert np.abs(a.eta.values - b.eta.values).max() <= 1e-6
    assert np.abs(a.psi.values - b.psi.values).max() <= 1e-6


def test_two_dimensional_flat_multiplier():
    grid = PeriodicGrid(2, 16)
    f = GridFunction.from_callable(grid, lambda x, y: np.cos(3 * x + 4 * y))
    out = dn_apply(GridFunction.zeros(grid), f, DEEP)
    np.testing.assert_allclose(out.values, 5 * f.values, atol=1e-12)
