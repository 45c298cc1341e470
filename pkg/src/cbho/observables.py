"""Diagnostics of a lattice state: moments, lattice current, Brillouin-zone spectrum.

Quasi-momentum sign convention: the spectrum uses the kernel exp(+i 2 pi k n),
so a state prepared with phase exp(-i 2 pi k0 n) peaks at +k0, and
:func:`k_centroid` reports the same +k0. The physical velocity of such a
state is -J sin(2 pi k0); the semiclassical phase is ``-2 pi k_c``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateStateError, UndefinedCentroidError
from .state import WavepacketState

DEGENERATE_NORM = 1e-12
COHERENCE_FLOOR = 1e-12


@dataclass(frozen=True)
class KGrid:
    """Uniform k points (units of k_B) on the half-open zone (-1/2, 1/2]."""

    points: np.ndarray

    @classmethod
    def uniform(cls, size: int) -> "KGrid":
        if size < 1:
            raise ValueError("k grid needs at least one point")
        j = np.arange(size)
        return cls(-0.5 + (j + 1) / size)

    @property
    def size(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class ObservableRecord:
    t: float
    norm: float
    mean_n: float
    sigma_n: float
    v_g: float
    k_c: float


def moments(state: WavepacketState) -> tuple[float, float, float]:
    """(norm, mean site, standard deviation of the site density)."""
    p = state.density
    n = state.sites
    norm = float(np.sum(p))
    if norm < DEGENERATE_NORM:
        raise DegenerateStateError(f"state norm {norm:.3e} is too small for moments")
    mean = float(np.sum(n * p)) / norm
    var = float(np.sum(n * n * p)) / norm - mean * mean
    return norm, mean, math.sqrt(max(var, 0.0))


def nearest_neighbour_coherence(state: WavepacketState) -> complex:
    """sum_n conj(c_n) c_{n+1}."""
    c = state.amplitudes
    return complex(np.sum(np.conj(c[:-1]) * c[1:]))


def ehrenfest_velocity(state: WavepacketState, J: float) -> float:
    """Exact lattice current J * sum_n Im(conj(c_n) c_{n+1}), in sites per hbar/E_R."""
    return J * nearest_neighbour_coherence(state).imag


def k_centroid(state: WavepacketState) -> float:
    """Circular mean of the quasi-momentum in (-1/2, 1/2], units of k_B.

    Uses the phase of the nearest-neighbour coherence, so it is continuous
    through Bragg reflection at the zone edge.
    """
    s = nearest_neighbour_coherence(state)
    if abs(s) < COHERENCE_FLOOR:
        raise UndefinedCentroidError("nearest-neighbour coherence vanishes")
    k = -math.atan2(s.imag, s.real) / (2 * math.pi)
    # atan2 gives (-pi, pi]; negating maps to [-1/2, 1/2), fold -1/2 (up to roundoff) onto +1/2
    return k + 1.0 if k <= -0.5 + 1e-12 else k


def bz_transform(state: WavepacketState, grid: KGrid | None = None) -> np.ndarray:
    """c_k = M^{-1/2} sum_n c_n exp(i 2 pi k n) over the grid points (absolute n)."""
    if grid is None:
        grid = KGrid.uniform(state.window.length)
    if grid.size < state.window.length:
        raise ValueError("k grid must have at least as many points as the window has sites")
    phase = np.exp(2j * np.pi * np.outer(grid.points, state.sites))
    return phase @ state.amplitudes / math.sqrt(grid.size)


def k_density(state: WavepacketState, grid: KGrid | None = None) -> np.ndarray:
    ck = bz_transform(state, grid)
    return ck.real**2 + ck.imag**2


def k_peak(state: WavepacketState, grid: KGrid | None = None) -> float:
    """Arg-max estimator of the quasi-momentum (discontinuous across the zone edge)."""
    if grid is None:
        grid = KGrid.uniform(state.window.length)
    return float(grid.points[np.argmax(k_density(state, grid))])


def k_width(state: WavepacketState, grid: KGrid | None = None) -> float:
    """Standard deviation of |c_k|^2 about the circular centroid, wrapping k periodically."""
    if grid is None:
        grid = KGrid.uniform(state.window.length)
    p = k_density(state, grid)
    kc = k_centroid(state)
    dk = (grid.points - kc + 0.5) % 1.0 - 0.5
    return math.sqrt(float(np.sum(dk * dk * p) / np.sum(p)))


def observe(state: WavepacketState, J: float) -> ObservableRecord:
    norm, mean, sigma = moments(state)
    try:
        kc = k_centroid(state)
    except UndefinedCentroidError:
        kc = math.nan
    return ObservableRecord(state.time, norm, mean, sigma, ehrenfest_velocity(state, J), kc)


def transport_excursion(mean_n, sigma_n) -> float:
    """Extent of sites swept by the packet body: max(<n> + 2 sigma) - min(<n> - 2 sigma)."""
    mean_n = np.asarray(mean_n)
    sigma_n = np.asarray(sigma_n)
    return float(np.max(mean_n + 2 * sigma_n) - np.min(mean_n - 2 * sigma_n))


def energy_expectation(state: WavepacketState, J: float, K: float) -> float:
    c = state.amplitudes
    n = state.sites
    hop = -J * nearest_neighbour_coherence(state).real
    return hop + K * float(np.sum(n * n * (c.real**2 + c.imag**2)))
