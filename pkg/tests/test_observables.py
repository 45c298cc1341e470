import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cbho.errors import DegenerateStateError, UndefinedCentroidError
from cbho.observables import (
    KGrid,
    bz_transform,
    ehrenfest_velocity,
    energy_expectation,
    k_centroid,
    k_density,
    k_width,
    moments,
    observe,
    transport_excursion,
)
from cbho.state import InitialCondition, SiteWindow, WavepacketState, init_gaussian

WINDOW = SiteWindow(-21, 271)


def _state(window, amps):
    return WavepacketState(window, np.asarray(amps, dtype=complex))


def _delta(window, site, weight=1.0):
    a = np.zeros(window.length, complex)
    a[site - window.n_min] = weight
    return a


def test_kgrid_is_half_open_and_uniform():
    g = KGrid.uniform(8)
    assert g.points[-1] == 0.5 and g.points[0] > -0.5
    np.testing.assert_allclose(np.diff(g.points), 1 / 8)


def test_moments_single_site():
    w = SiteWindow(0, 20)
    assert moments(_state(w, _delta(w, 7))) == (1.0, 7.0, 0.0)


def test_moments_two_sites():
    w = SiteWindow(0, 20)
    a = _delta(w, 0, math.sqrt(0.5)) + _delta(w, 10, math.sqrt(0.5))
    norm, mean, sigma = moments(_state(w, a))
    assert norm == pytest.approx(1.0)
    assert mean == pytest.approx(5.0)
    assert sigma == pytest.approx(5.0)


def test_moments_gaussian():
    _, mean, sigma = moments(init_gaussian(InitialCondition(125.0), WINDOW))
    assert mean == pytest.approx(125.0, abs=1e-9)
    assert sigma == pytest.approx(3.16 / math.sqrt(2), rel=1e-6)


def test_degenerate_state():
    with pytest.raises(DegenerateStateError):
        moments(_state(WINDOW, np.zeros(WINDOW.length)))


@pytest.mark.parametrize("k", [0.0, 0.1, 0.25, -0.3, 0.5])
def test_plane_wave_velocity(k):
    w = SiteWindow(0, 63)
    n = w.sites
    a = np.exp(2j * np.pi * k * n) / math.sqrt(w.length)
    # open window: L-1 bonds each carrying sin(2 pi k)/L
    expected = 0.024 * math.sin(2 * math.pi * k) * (w.length - 1) / w.length
    assert ehrenfest_velocity(_state(w, a), 0.024) == pytest.approx(expected, abs=1e-15)


def test_real_amplitudes_carry_no_current():
    assert ehrenfest_velocity(init_gaussian(InitialCondition(125.0), WINDOW), 0.024) == 0.0


def test_delta_has_flat_spectrum():
    w = SiteWindow(-8, 23)
    p = k_density(_state(w, _delta(w, 0)))
    np.testing.assert_allclose(p, 1.0 / w.length, rtol=1e-14)


@settings(max_examples=30)
@given(st.floats(min_value=100, max_value=150), st.floats(min_value=-0.5, max_value=0.5),
       st.floats(min_value=0.5, max_value=8.0), st.integers(min_value=0, max_value=3))
def test_parseval(n0, k0, sigma, pad):
    s = init_gaussian(InitialCondition(n0, k0, sigma), WINDOW)
    grid = KGrid.uniform(WINDOW.length * (1 + pad))
    assert float(np.sum(k_density(s, grid))) == pytest.approx(s.norm(), abs=1e-12)


def test_transform_matches_fft_oracle():
    s = init_gaussian(InitialCondition(125.0, 0.25), WINDOW)
    M = WINDOW.length
    grid = KGrid.uniform(M)
    ck = bz_transform(s, grid)
    # direct DFT at each grid point, with absolute site phases
    oracle = np.array([sum(c * cmath.exp(2j * math.pi * k * n) for c, n in zip(s.amplitudes, WINDOW.sites))
                       for k in grid.points]) / math.sqrt(M)
    np.testing.assert_allclose(ck, oracle, atol=1e-12)


def test_transform_requires_large_enough_grid():
    with pytest.raises(ValueError):
        bz_transform(init_gaussian(InitialCondition(125.0), WINDOW), KGrid.uniform(10))


@pytest.mark.parametrize("sigma", [2.0, 3.16, 5.0])
def test_k_width_of_gaussian(sigma):
    s = init_gaussian(InitialCondition(125.0, 0.25, sigma), WINDOW)
    grid = KGrid.uniform(4 * WINDOW.length)
    p = k_density(s, grid)
    assert grid.points[np.argmax(p)] == pytest.approx(0.25, abs=1 / grid.size)
    # density exp(-(2 pi k sigma)^2): std 1/(2 sqrt2 pi sigma), 1/e half-width 1/(2 pi sigma)
    assert k_width(s, grid) == pytest.approx(1 / (2 * math.sqrt(2) * math.pi * sigma), rel=0.01)
    above = grid.points[p >= p.max() / math.e]
    half = 0.5 * (above.max() - above.min())
    assert half == pytest.approx(1 / (2 * math.pi * sigma), abs=1.5 / grid.size)
    _, _, width_n = moments(s)
    assert width_n * k_width(s, grid) == pytest.approx(1 / (4 * math.pi), rel=0.05)


def test_k_centroid_examples():
    assert k_centroid(init_gaussian(InitialCondition(125.0, 0.25), WINDOW)) == pytest.approx(0.25, abs=1e-6)
    assert k_centroid(init_gaussian(InitialCondition(125.0), WINDOW)) == 0.0
    edge = init_gaussian(InitialCondition(125.0, 0.5), WINDOW)
    assert k_centroid(edge) == pytest.approx(0.5, abs=1e-9)


@settings(max_examples=30)
@given(st.floats(min_value=-0.49, max_value=0.49), st.floats(min_value=0, max_value=2 * math.pi),
       st.integers(min_value=-500, max_value=500))
def test_k_centroid_invariances(k0, theta, shift):
    s = init_gaussian(InitialCondition(125.0, k0), WINDOW)
    kc = k_centroid(s)
    rotated = WavepacketState(WINDOW, s.amplitudes * cmath.exp(1j * theta))
    moved = WavepacketState(SiteWindow(WINDOW.n_min + shift, WINDOW.n_max + shift), s.amplitudes)
    assert k_centroid(rotated) == pytest.approx(kc, abs=1e-12)
    assert k_centroid(moved) == pytest.approx(kc, abs=1e-12)


def test_k_centroid_undefined():
    w = SiteWindow(0, 20)
    a = _delta(w, 3) + _delta(w, 10)
    with pytest.raises(UndefinedCentroidError):
        k_centroid(_state(w, a / math.sqrt(2)))
    assert math.isnan(observe(_state(w, a / math.sqrt(2)), 0.024).k_c)


def test_observe_record():
    s = init_gaussian(InitialCondition(125.0), WINDOW)
    r = observe(s, 0.024)
    assert r.t == 0.0 and r.norm == pytest.approx(1.0) and r.mean_n == pytest.approx(125.0)
    assert r.v_g == 0.0 and r.k_c == 0.0


def test_transport_excursion():
    assert transport_excursion([0.0, 10.0], [1.0, 2.0]) == pytest.approx(16.0)


def test_energy_of_plane_wave():
    w = SiteWindow(0, 63)
    a = np.exp(2j * np.pi * 0.2 * w.sites) / 8
    e = energy_expectation(_state(w, a), 0.024, 0.0)
    assert e == pytest.approx(-0.024 * math.cos(2 * math.pi * 0.2) * 63 / 64, rel=1e-12)
