import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cbho.errors import DomainError, WindowError
from cbho.observables import k_centroid, k_peak
from cbho.params import ModelParams, canonical_model
from cbho.state import (
    InitialCondition,
    SiteWindow,
    WavepacketState,
    default_window,
    init_gaussian,
    read_state_csv,
    write_state_csv,
)

WINDOW = SiteWindow(-21, 271)


def test_window_invariants():
    assert WINDOW.length == 293
    assert WINDOW.sites[0] == -21 and WINDOW.sites[-1] == 271
    with pytest.raises(WindowError):
        SiteWindow(0, 14)
    with pytest.raises(WindowError):
        SiteWindow(10, 0)
    assert SiteWindow(0, 15).length == 16


def test_canonical_gaussian_moments_by_summation():
    st_ = init_gaussian(InitialCondition(125.0), WINDOW)
    n = np.arange(-21, 272)
    p = np.abs(st_.amplitudes) ** 2
    assert p.sum() == pytest.approx(1.0, abs=1e-14)
    mean = sum(float(k) * float(w) for k, w in zip(n, p))
    var = sum((float(k) - mean) ** 2 * float(w) for k, w in zip(n, p))
    assert mean == pytest.approx(125.0, abs=1e-9)
    # sampled Gaussian density exp(-(n-n0)^2/sigma^2) has std sigma/sqrt(2)
    assert math.sqrt(var) == pytest.approx(3.16 / math.sqrt(2), rel=1e-6)


def test_quasi_momentum_of_boosted_gaussian():
    st_ = init_gaussian(InitialCondition(125.0, k0=0.25), WINDOW)
    assert k_centroid(st_) == pytest.approx(0.25, abs=1e-6)
    assert k_peak(st_) == pytest.approx(0.25, abs=1.0 / WINDOW.length)


@settings(max_examples=40)
@given(
    st.floats(min_value=-50.0, max_value=300.0),
    st.floats(min_value=-0.5, max_value=0.5),
    st.floats(min_value=0.3, max_value=8.0),
)
def test_preparation_is_normalised(n0, k0, sigma):
    ic = InitialCondition(n0, k0, sigma)
    st_ = init_gaussian(ic, default_window(ic, canonical_model()))
    assert st_.norm() == pytest.approx(1.0, abs=1e-14)
    assert st_.time == 0.0


def test_window_too_small():
    with pytest.raises(WindowError):
        init_gaussian(InitialCondition(125.0), SiteWindow(100, 140))


@pytest.mark.parametrize("kwargs", [dict(sigma_n=0.0), dict(sigma_n=-1.0), dict(k0=0.6)])
def test_initial_condition_domain(kwargs):
    with pytest.raises(DomainError):
        InitialCondition(125.0, **kwargs)


def test_default_window_canonical():
    ic = InitialCondition(125.0)
    w = default_window(ic, canonical_model())
    assert w.contains(-20, 270)
    assert w.n_min == math.floor(125 - 8 * 3.16 - math.sqrt(2 * 0.024 / 1.52e-5) - 64)
    init_gaussian(ic, w)


def test_default_window_without_trap():
    ic = InitialCondition(125.0, sigma_n=1.0)
    w = default_window(ic, ModelParams(J=0.024, K0=0.0))
    assert (w.n_min, w.n_max) == (125 - 72, 125 + 72)


@settings(max_examples=40)
@given(st.integers(min_value=-200, max_value=200), st.floats(min_value=-0.5, max_value=0.5),
       st.floats(min_value=0.5, max_value=6.0))
def test_parity_of_preparation(n0, k0, sigma):
    # with the exp(-i 2 pi k0 n) phase, mirroring (n0, k0) gives c'_{-n} = c_n exactly
    w = default_window(InitialCondition(n0, k0, sigma), canonical_model())
    a = init_gaussian(InitialCondition(n0, k0, sigma), w)
    b = init_gaussian(InitialCondition(-n0, -k0, sigma), w.mirrored())
    np.testing.assert_allclose(b.amplitudes[::-1], a.amplitudes, rtol=0, atol=1e-12)


def test_csv_round_trip_is_bit_exact(tmp_path):
    st_ = init_gaussian(InitialCondition(125.3, 0.137, 2.7), WINDOW)
    st_.time = 1234.5678901234567
    write_state_csv(st_, tmp_path / "s.csv")
    back = read_state_csv(tmp_path / "s.csv")
    assert back.window == st_.window
    assert back.time == st_.time
    assert np.array_equal(back.amplitudes, st_.amplitudes)


def test_edge_density_and_copy():
    amps = np.zeros(16, complex)
    amps[0] = amps[-1] = math.sqrt(0.5)
    s = WavepacketState(SiteWindow(0, 15), amps)
    assert s.edge_density() == pytest.approx(1.0)
    c = s.copy()
    c.amplitudes[0] = 0
    assert s.amplitudes[0] != 0
