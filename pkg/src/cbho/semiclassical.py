"""Local acceleration model, perturbative group velocity and the slow-oscillation fit.

The semiclassical phase k_tilde (radians) obeys

    dk_tilde/dt = -2 K(t) n,    dn/dt = J sin(k_tilde)

in recoil units. It relates to the observables' quasi-momentum centroid by
k_tilde = -2 pi k_c (see :mod:`cbho.observables`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import FitError, NumericalBlowupError, ResonanceError
from .params import ModelParams
from .propagator import DriveSchedule

RESONANCE_EPS = 1e-15
# spectral peak must beat the median spectral amplitude by this factor
PEAK_TO_FLOOR = 5.0


@dataclass(frozen=True)
class SemiclassicalTrajectory:
    times: np.ndarray
    k_tilde: np.ndarray
    n: np.ndarray

    def velocity(self, J: float) -> np.ndarray:
        return J * np.sin(self.k_tilde)


@dataclass(frozen=True)
class HarmonicFit:
    delta_n: float
    delta_omega: float
    gamma: float
    delta_F: float
    residual_rms: float
    offset: float = 0.0

    @property
    def period(self) -> float:
        return 2 * math.pi / self.delta_omega


@dataclass(frozen=True)
class Eq7Params:
    """Inputs of the closed-form perturbative group velocity.

    ``F_n0`` and ``delta_F`` are forces times the lattice period (energies in
    E_R), so ``F_n0`` equals the local Bloch frequency 2 K0 n0.
    """

    J: float
    F_n0: float
    alpha: float
    omega_D: float
    phi: float
    delta_F: float
    delta_omega: float
    gamma: float = 0.0
    k0: float = 0.0

    @classmethod
    def from_model(cls, mp: ModelParams, n0: float, delta_F: float, delta_omega: float,
                   gamma: float = 0.0, k0: float = 0.0) -> "Eq7Params":
        return cls(J=mp.J, F_n0=2.0 * mp.K0 * n0, alpha=mp.alpha, omega_D=mp.omega_D, phi=mp.phi,
                   delta_F=delta_F, delta_omega=delta_omega, gamma=gamma, k0=k0)

    @classmethod
    def from_fit(cls, mp: ModelParams, n0: float, fit: HarmonicFit, k0: float = 0.0) -> "Eq7Params":
        return cls.from_model(mp, n0, fit.delta_F, fit.delta_omega, fit.gamma, k0)


def local_energy(J: float, K: float, n, k_tilde):
    """Semiclassical energy -J cos(k_tilde) + K n^2 (conserved for constant K)."""
    return -J * np.cos(k_tilde) + K * np.asarray(n) ** 2


def integrate_local_model(mp: ModelParams, n_init: float, k_init: float, t_end: float, dt: float,
                          ) -> SemiclassicalTrajectory:
    """RK4 for the local acceleration ODE; ``k_init`` in units of k_B (k_tilde = 2 pi k_init).

    The stored k_tilde is not wrapped.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    sched = DriveSchedule.from_model(mp)
    J = mp.J
    n_steps = int(round(t_end / dt))
    times = np.arange(n_steps + 1) * dt
    ks = np.empty(n_steps + 1)
    ns = np.empty(n_steps + 1)
    k, n = 2 * math.pi * k_init, float(n_init)
    ks[0], ns[0] = k, n
    K = sched.K
    sin = math.sin
    for i in range(n_steps):
        t = times[i]
        Ka, Kb, Kc = K(t), K(t + 0.5 * dt), K(t + dt)
        dk1, dn1 = -2 * Ka * n, J * sin(k)
        dk2, dn2 = -2 * Kb * (n + 0.5 * dt * dn1), J * sin(k + 0.5 * dt * dk1)
        dk3, dn3 = -2 * Kb * (n + 0.5 * dt * dn2), J * sin(k + 0.5 * dt * dk2)
        dk4, dn4 = -2 * Kc * (n + dt * dn3), J * sin(k + dt * dk3)
        k += dt / 6 * (dk1 + 2 * dk2 + 2 * dk3 + dk4)
        n += dt / 6 * (dn1 + 2 * dn2 + 2 * dn3 + dn4)
        if not (math.isfinite(k) and math.isfinite(n)):
            raise NumericalBlowupError(f"semiclassical state non-finite at step {i}", step=i)
        ks[i + 1], ns[i + 1] = k, n
    return SemiclassicalTrajectory(times, ks, ns)


def eq7_phase(p: Eq7Params, t):
    """Phase of the perturbative group velocity; the +- sidebands are summed."""
    if abs(p.delta_omega) < RESONANCE_EPS:
        raise ResonanceError("delta_omega = 0; integrate the local model instead")
    t = np.asarray(t, dtype=float)
    phase = 2 * math.pi * p.k0 - p.F_n0 * t
    phase = phase + p.delta_F / p.delta_omega * (np.cos(p.delta_omega * t + p.gamma) - math.cos(p.gamma))
    if p.alpha != 0:
        if abs(p.omega_D) < RESONANCE_EPS:
            raise ResonanceError("omega_D = 0 with a nonzero drive; integrate the local model instead")
        phase = phase + p.F_n0 * p.alpha / p.omega_D * (np.cos(p.omega_D * t + p.phi) - math.cos(p.phi))
        for s in (1.0, -1.0):
            w = p.omega_D + s * p.delta_omega
            if abs(w) < RESONANCE_EPS:
                raise ResonanceError("omega_D +- delta_omega = 0; integrate the local model instead")
            ph0 = p.phi + s * p.gamma
            phase = phase + s * p.delta_F * p.alpha / w * (np.sin(w * t + ph0) - math.sin(ph0))
    return phase


def eval_eq7(p: Eq7Params, t):
    """Perturbative group velocity J sin(phase) in sites per hbar/E_R."""
    return p.J * np.sin(eq7_phase(p, t))


def cycle_average(t, y, period: float):
    """Boxcar average over one period; returns centred times and averaged values."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    step = t[1] - t[0]
    w = int(round(period / step))
    if w < 1 or w > len(y):
        raise FitError(f"averaging window of {w} samples does not fit {len(y)} samples")
    avg = np.convolve(y, np.ones(w) / w, mode="valid")
    return t[: len(avg)] + 0.5 * (w - 1) * step, avg


def _sinusoid_lstsq(t, y, omega):
    A = np.column_stack([np.sin(omega * t), np.cos(omega * t), np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return coef, math.sqrt(float(np.mean(resid**2)))


def fit_harmonic(t, mean_n, T_B: float, K0: float, *, pad_factor: int = 16) -> HarmonicFit:
    """Fit <n>(t) ~ offset + delta_n sin(delta_omega t + gamma) to the cycle-averaged centroid.

    Steps: one-Bloch-period boxcar average, frequency guess from the highest
    nonzero peak of a zero-padded Hann spectrum, linear least squares for the
    amplitude/phase/offset, then a bounded 1-D refinement of delta_omega
    within half a spectral bin. The amplitude is divided by the boxcar's
    gain at delta_omega so that delta_n describes the unfiltered centroid.
    """
    t = np.asarray(t, dtype=float)
    if len(t) < 8:
        raise FitError("series too short to fit")
    ta, avg = cycle_average(t, mean_n, T_B)
    x = avg - avg.mean()
    span = ta[-1] - ta[0]
    step = ta[1] - ta[0]
    if span <= 0 or not np.any(x):
        raise FitError("flat series: no slow oscillation")
    n_fft = pad_factor * len(x)
    amp = np.abs(np.fft.rfft(x * np.hanning(len(x)), n_fft))
    freqs = 2 * np.pi * np.fft.rfftfreq(n_fft, step)
    bin_width = 2 * np.pi / span
    usable = freqs >= bin_width
    if not np.any(usable):
        raise FitError("series too short to resolve a slow oscillation")
    idx = np.flatnonzero(usable)[np.argmax(amp[usable])]
    floor = np.median(amp[usable])
    if not amp[idx] > PEAK_TO_FLOOR * floor:
        raise FitError(f"no spectral peak above the noise floor (peak/median = {amp[idx] / floor:.2f})")
    guess = freqs[idx]
    res = minimize_scalar(lambda w: _sinusoid_lstsq(ta, avg, w)[1],
                          bounds=(max(guess - 0.5 * bin_width, 0.5 * guess), guess + 0.5 * bin_width),
                          method="bounded", options={"xatol": 1e-12 * guess})
    omega = float(res.x)
    (a, b, off), rms = _sinusoid_lstsq(ta, avg, omega)
    if span * omega / (2 * math.pi) < 1.5:
        raise FitError(f"series covers only {span * omega / (2 * math.pi):.2f} slow periods (need 1.5)")
    width = round(T_B / (t[1] - t[0])) * (t[1] - t[0])
    x_half = 0.5 * omega * width
    gain = math.sin(x_half) / x_half if x_half > 0 else 1.0
    if gain <= 0.1:
        raise FitError("slow oscillation too fast for one-period cycle averaging")
    delta_n = float(math.hypot(a, b) / gain)
    gamma = math.atan2(b, a)
    if gamma <= -math.pi:
        gamma += 2 * math.pi
    return HarmonicFit(delta_n=delta_n, delta_omega=omega, gamma=gamma, delta_F=2.0 * K0 * delta_n,
                       residual_rms=rms, offset=float(off))


def compare_velocities(t_quantum, v_quantum, t_model, v_model, J: float) -> tuple[float, float]:
    """RMS of v_quantum - v_model on the quantum grid, and that RMS divided by J.

    The model series is linearly interpolated; quantum samples outside the
    model's time range are dropped.
    """
    tq = np.asarray(t_quantum, dtype=float)
    vq = np.asarray(v_quantum, dtype=float)
    tm = np.asarray(t_model, dtype=float)
    inside = (tq >= tm[0]) & (tq <= tm[-1])
    if not np.any(inside):
        raise ValueError("time grids do not overlap")
    vm = np.interp(tq[inside], tm, np.asarray(v_model, dtype=float))
    rms = math.sqrt(float(np.mean((vq[inside] - vm) ** 2)))
    return rms, rms / J


def zero_crossings(t, y) -> np.ndarray:
    """Linearly interpolated times where y changes sign."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    i = np.flatnonzero(np.signbit(y[1:]) != np.signbit(y[:-1]))
    return t[i] - y[i] * (t[i + 1] - t[i]) / (y[i + 1] - y[i])


def slow_crossing_offset(t, v_quantum, v_model, T_B: float) -> float:
    """Largest distance from a slow zero crossing of the quantum velocity to the nearest model crossing.

    Both velocities are smoothed by two passes of the one-Bloch-period boxcar
    (a single pass leaves chirped-BO leakage that splits crossings). Returns
    inf when either curve has no crossing or the counts differ by more than one.
    """
    ta, aq = cycle_average(t, v_quantum, T_B)
    ta, aq = cycle_average(ta, aq, T_B)
    tm, am = cycle_average(t, v_model, T_B)
    tm, am = cycle_average(tm, am, T_B)
    zq = zero_crossings(ta, aq)
    zm = zero_crossings(tm, am)
    if len(zq) == 0 or len(zm) == 0 or abs(len(zq) - len(zm)) > 1:
        return math.inf
    return float(max(np.min(np.abs(zm - z)) for z in zq))
