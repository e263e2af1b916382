import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from parawave.spectral import (DyadicPartition, GridFunction, PeriodicGrid, all_blocks, annulus_profile,
                               apply_multiplier, bessel_potential, dyadic_block, dyadic_holder_norm, load_csv,
                               load_grid_function, low_pass_profile, read_container, save_csv, save_grid_function,
                               smooth_step, sobolev_norm, spectral_radius, upsample, weierstrass, write_container)


def random_function(grid: PeriodicGrid, seed: int, real: bool = True) -> GridFunction:
    rng = np.random.default_rng(seed)
    vals = rng.normal(size=grid.shape)
    if not real:
        vals = vals + 1j * rng.normal(size=grid.shape)
    return GridFunction(grid, vals)


# --- grid ------------------------------------------------------------------

def test_grid_rejects_small_or_odd_sizes():
    with pytest.raises(ValueError):
        PeriodicGrid(1, 4)
    with pytest.raises(ValueError):
        PeriodicGrid(1, 24)
    with pytest.raises(ValueError):
        PeriodicGrid(3, 8)


def test_lattice_is_integer_and_half_open():
    grid = PeriodicGrid(1, 16)
    k = grid.axis_wavenumbers
    assert k.min() == -8 and k.max() == 7
    assert np.all(k == np.round(k))


# --- profiles ----------------------------------------------------------------

def test_profile_supports():
    r = np.linspace(0, 3, 3001)
    psi = low_pass_profile(r)
    phi = annulus_profile(r)
    assert np.all(psi[r <= 0.5] == 1.0)
    assert np.all(psi[r >= 1.0] == 0.0)
    assert np.all(phi[(r <= 0.5) | (r >= 2.0)] == 0.0)


@given(st.floats(-2.0, 3.0))
def test_smooth_step_is_monotone_and_bounded(t):
    a, b = smooth_step(t), smooth_step(t + 1e-3)
    assert 0.0 <= a <= b <= 1.0


def test_telescoping_identity_exact():
    part = DyadicPartition(PeriodicGrid(1, 1024))
    for n in range(1, part.j_max + 2):
        assert part.telescoping_residual(n) <= 1e-12


# --- multipliers -------------------------------------------------------------

def test_identity_multiplier():
    u = random_function(PeriodicGrid(1, 64), 0)
    np.testing.assert_allclose(apply_multiplier(u, np.ones(64)).values, u.values, atol=1e-14)


def test_abs_multiplier_on_single_mode():
    grid = PeriodicGrid(1, 64)
    u = GridFunction.from_callable(grid, lambda x: np.cos(3 * x))
    out = apply_multiplier(u, grid.abs_wavenumber)
    np.testing.assert_allclose(out.values, 3 * np.cos(3 * grid.coords[0]), atol=1e-12)


@settings(max_examples=25)
@given(st.integers(0, 10_000), st.floats(-3.0, 3.0))
def test_bessel_potential_inverse_pair(seed, s):
    u = random_function(PeriodicGrid(1, 64), seed)
    back = bessel_potential(bessel_potential(u, s), -s)
    assert np.abs(back.values - u.values).max() <= 1e-12 * max(1.0, np.abs(u.values).max())


def test_non_finite_multiplier_rejected():
    u = random_function(PeriodicGrid(1, 16), 1)
    with np.errstate(divide="ignore"), pytest.raises(ValueError):
        apply_multiplier(u, 1.0 / u.grid.abs_wavenumber)


@settings(max_examples=25)
@given(st.integers(0, 10_000), st.sampled_from([1, 2]))
def test_round_trip_and_hermitian_spectrum(seed, dim):
    grid = PeriodicGrid(dim, 16)
    u = random_function(grid, seed)
    back = GridFunction.from_spectrum(grid, u.spectrum)
    assert np.abs(back.values - u.values).max() <= 1e-12 * np.abs(u.values).max()
    spec = u.spectrum
    flipped = spec
    for ax in range(dim):
        flipped = np.roll(np.flip(flipped, axis=ax), 1, axis=ax)
    np.testing.assert_allclose(flipped, np.conj(spec), atol=1e-14)


# --- dyadic blocks -------------------------------------------------------------

def test_block_passes_centre_mode_with_unit_weight():
    grid = PeriodicGrid(1, 64)
    u = GridFunction.from_callable(grid, lambda x: np.exp(4j * x))
    block = dyadic_block(u, 2)
    # |xi| / 2^j = 1 sits where phi = psi(1/2) - psi(1) = 1
    assert annulus_profile(1.0) == 1.0
    np.testing.assert_allclose(block.values, u.values, atol=1e-13)
    assert np.abs(dyadic_block(u, 1).values).max() < 1e-13
    assert np.abs(dyadic_block(u, 3).values).max() < 1e-13


@settings(max_examples=25)
@given(st.integers(0, 10_000), st.sampled_from([1, 2]))
def test_partition_of_unity(seed, dim):
    grid = PeriodicGrid(dim, 32)
    u = random_function(grid, seed, real=False)
    total = sum(all_blocks(u))
    assert np.abs(total - u.values).max() <= 1e-10


def test_almost_orthogonality_exact_on_lattice():
    part = DyadicPartition(PeriodicGrid(2, 64))
    for j in range(-1, part.j_max + 1):
        for k in range(-1, part.j_max + 1):
            if abs(j - k) >= 2:
                assert np.all(part.block_weights(j) * part.block_weights(k) == 0.0)


def test_full_band_low_pass_is_identity():
    grid = PeriodicGrid(1, 64)
    u = random_function(grid, 3)
    out = dyadic_block(u, grid.j_max + 3, "s_low")
    np.testing.assert_array_equal(out.values, u.values)


def test_block_index_beyond_grid_rejected():
    u = random_function(PeriodicGrid(1, 32), 0)
    with pytest.raises(ValueError):
        dyadic_block(u, 10)
    with pytest.raises(ValueError):
        dyadic_block(u, -2)


def test_block_spectra_in_declared_annuli():
    grid = PeriodicGrid(1, 256)
    u = random_function(grid, 7)
    for j in range(0, grid.j_max + 1):
        assert spectral_radius(dyadic_block(u, j)) <= 2.0 ** (j + 1)


def test_bernstein_constant_stable_across_levels():
    grid = PeriodicGrid(1, 1024)
    ratios = []
    for j in range(3, 9):
        worst = 0.0
        for seed in range(5):
            u = dyadic_block(random_function(grid, seed), j, "s_low")
            worst = max(worst, u.derivative(0).sup_norm() / (2.0 ** j * u.sup_norm()))
        ratios.append(worst)
    ratios = np.array(ratios)
    assert ratios.max() / ratios.min() <= 1.2 / 0.8


# --- norms -------------------------------------------------------------------

def test_holder_norm_of_constant():
    grid = PeriodicGrid(1, 64)
    assert dyadic_holder_norm(GridFunction(grid, np.full(64, -2.5)), 0.5) == pytest.approx(2.5, abs=1e-14)


def test_holder_norm_single_block_value():
    # cos(32 x) sits in block j = 5 with weight phi(1) = 1 and in no other block
    grid = PeriodicGrid(1, 256)
    u = GridFunction.from_callable(grid, lambda x: np.cos(32 * x))
    assert dyadic_holder_norm(u, 0.5) == pytest.approx(2 ** 2.5, rel=1e-12)


def test_holder_norm_rejects_integer_exponent():
    u = random_function(PeriodicGrid(1, 32), 0)
    for r in (1.0, 2, 0.0, -0.5):
        with pytest.raises(ValueError):
            dyadic_holder_norm(u, r)


def test_weierstrass_holder_scan():
    """Half-Hölder partial sums: the r = 1/2 norm stays bounded while r = 3/4 grows like 2^{j/4}."""
    bounded, growing = [], []
    levels = range(4, 11)
    for top in levels:
        grid = PeriodicGrid(1, 2 ** (top + 2))
        u = weierstrass(grid, 0.5, top_level=top)
        bounded.append(dyadic_holder_norm(u, 0.5))
        growing.append(dyadic_holder_norm(u, 0.75))
    assert max(bounded) / min(bounded) < 1.1
    slope = np.polyfit(list(levels), np.log2(growing), 1)[0]
    assert slope == pytest.approx(0.25, abs=0.02)


def test_sobolev_norm_examples():
    grid = PeriodicGrid(1, 32)
    assert sobolev_norm(GridFunction.zeros(grid), 1.0) == 0.0
    u = GridFunction.from_callable(grid, lambda x: np.exp(3j * x))
    assert sobolev_norm(u, 1.0) == pytest.approx(math.sqrt(10), rel=1e-13)


@given(st.integers(0, 10_000))
def test_parseval(seed):
    u = random_function(PeriodicGrid(1, 64), seed, real=False)
    assert sobolev_norm(u, 0.0) == pytest.approx(u.l2_norm(), rel=1e-12)


def test_upsample_interpolates_band_limited():
    grid = PeriodicGrid(1, 32)
    u = GridFunction.from_callable(grid, lambda x: np.sin(5 * x) + 0.5 * np.cos(2 * x))
    fine = upsample(u, 4)
    x = np.arange(128) * 2 * np.pi / 128
    np.testing.assert_allclose(fine, np.sin(5 * x) + 0.5 * np.cos(2 * x), atol=1e-13)


# --- serialization ---------------------------------------------------------------

def test_container_round_trip(tmp_path):
    grid = PeriodicGrid(2, 8)
    u = random_function(grid, 4, real=False)
    path = tmp_path / "u.pwgf"
    save_grid_function(path, u)
    back = load_grid_function(path)
    assert back.grid == grid
    np.testing.assert_array_equal(back.values, u.values)
    arr = np.arange(6.0).reshape(2, 3)
    write_container(tmp_path / "a.bin", arr)
    np.testing.assert_array_equal(read_container(tmp_path / "a.bin"), arr)


def test_container_rejects_foreign_file(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"nope" + bytes(16))
    with pytest.raises(ValueError):
        read_container(path)


def test_csv_round_trip(tmp_path):
    u = random_function(PeriodicGrid(1, 16), 5)
    save_csv(tmp_path / "u.csv", u)
    np.testing.assert_array_equal(load_csv(tmp_path / "u.csv").values, u.values)
