"""Fixed-step RK4 integration of the driven tight-binding equation

    i dc_n/dt = -(J/2)(c_{n+1} + c_{n-1}) + K(t) n^2 c_n,
    K(t) = K0 + K_D sin(omega_D t + phi),

on a hard-walled site window, with deterministic observable sampling.
"""
from __future__ import annotations

import math
import time as _time
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import ConfigError, NumericalBlowupError, StabilityError, WindowOverflowError
from .observables import KGrid, k_density, observe
from .params import ModelParams
from .state import DEFAULT_EDGE_GUARD, WavepacketState

STABILITY_LIMIT = 2.5
DEFAULT_DT = 0.02


@dataclass(frozen=True)
class DriveSchedule:
    K0: float
    K_D: float = 0.0
    omega_D: float = 0.0
    phi: float = 0.0

    @classmethod
    def from_model(cls, mp: ModelParams) -> "DriveSchedule":
        return cls(mp.K0, mp.K_D, mp.omega_D, mp.phi)

    def K(self, t):
        return self.K0 + self.K_D * np.sin(self.omega_D * t + self.phi)

    @property
    def K_max(self) -> float:
        return self.K0 + abs(self.K_D)


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = DEFAULT_DT
    t_end: float = 0.0
    sample_stride: int = 1
    snapshot_stride: int = 0
    k_snapshots: bool = False

    def __post_init__(self):
        if not self.dt > 0 or not math.isfinite(self.dt):
            raise ConfigError(f"dt must be positive, got {self.dt!r}")
        if not self.t_end >= 0:
            raise ConfigError(f"t_end must be >= 0, got {self.t_end!r}")
        if int(self.sample_stride) != self.sample_stride or self.sample_stride < 1:
            raise ConfigError("sample_stride must be a positive integer")
        if int(self.snapshot_stride) != self.snapshot_stride or self.snapshot_stride < 0:
            raise ConfigError("snapshot_stride must be a non-negative integer")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


def max_energy(J: float, sched: DriveSchedule, n_min: int, n_max: int) -> float:
    return J + sched.K_max * max(n_min * n_min, n_max * n_max)


def check_stability(J: float, sched: DriveSchedule, state: WavepacketState, dt: float) -> float:
    """Return dt * E_max; raise StabilityError if it reaches the RK4 safety limit."""
    w = state.window
    x = dt * max_energy(J, sched, w.n_min, w.n_max)
    if x >= STABILITY_LIMIT:
        raise StabilityError(f"dt * E_max = {x:.3f} >= {STABILITY_LIMIT}; reduce dt or the window")
    return x


def apply_hamiltonian(state: WavepacketState, J: float, K_t: float) -> np.ndarray:
    """H c with out-of-window neighbours treated as zero; n is the absolute site index."""
    c = state.amplitudes
    n = state.sites
    h = K_t * n * n * c
    h[:-1] -= 0.5 * J * c[1:]
    h[1:] -= 0.5 * J * c[:-1]
    return h


def rk4_step(state: WavepacketState, J: float, sched: DriveSchedule, dt: float) -> WavepacketState:
    """One classical RK4 step of dc/dt = -i H(t) c, with K sampled at t, t+dt/2, t+dt.

    Reference implementation; :func:`evolve` uses a compiled kernel that
    performs the same arithmetic.
    """
    t = state.time

    def f(c, tau):
        return -1j * apply_hamiltonian(WavepacketState(state.window, c, tau), J, sched.K(tau))

    c = state.amplitudes
    k1 = f(c, t)
    k2 = f(c + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = f(c + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = f(c + dt * k3, t + dt)
    out = c + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise NumericalBlowupError(f"non-finite amplitudes after step at t={t!r}", step=None)
    return WavepacketState(state.window, out, t + dt)


@numba.njit(cache=True)
def _stage(sr, si, n2, hj, K, cr, ci, coef, ar, ai, w, dr, di):
    # k = -i H s;  acc += w k;  d = c + coef k
    L = sr.shape[0]
    for i in range(L):
        xr = 0.0
        xi = 0.0
        if i > 0:
            xr += sr[i - 1]
            xi += si[i - 1]
        if i < L - 1:
            xr += sr[i + 1]
            xi += si[i + 1]
        d = K * n2[i]
        hr = d * sr[i] - hj * xr
        hi = d * si[i] - hj * xi
        ar[i] += w * hi
        ai[i] -= w * hr
        dr[i] = cr[i] + coef * hi
        di[i] = ci[i] - coef * hr


@numba.njit(cache=True)
def _rk4_steps(cr, ci, n2, J, K0, KD, omega_D, phi, step0, dt, nsteps):
    """Advance (cr, ci) in place by nsteps. Returns -1, or the global index of
    the first step that produced a non-finite amplitude."""
    L = cr.shape[0]
    hj = 0.5 * J
    yr = np.empty(L)
    yi = np.empty(L)
    zr = np.empty(L)
    zi = np.empty(L)
    ar = np.empty(L)
    ai = np.empty(L)
    h6 = dt / 6.0
    for s in range(nsteps):
        t = (step0 + s) * dt
        Ka = K0 + KD * np.sin(omega_D * t + phi)
        Kb = K0 + KD * np.sin(omega_D * (t + 0.5 * dt) + phi)
        Kc = K0 + KD * np.sin(omega_D * (t + dt) + phi)
        for i in range(L):
            ar[i] = 0.0
            ai[i] = 0.0
        _stage(cr, ci, n2, hj, Ka, cr, ci, 0.5 * dt, ar, ai, 1.0, yr, yi)
        _stage(yr, yi, n2, hj, Kb, cr, ci, 0.5 * dt, ar, ai, 2.0, zr, zi)
        _stage(zr, zi, n2, hj, Kb, cr, ci, dt, ar, ai, 2.0, yr, yi)
        _stage(yr, yi, n2, hj, Kc, cr, ci, 0.0, ar, ai, 1.0, zr, zi)
        acc = 0.0
        for i in range(L):
            cr[i] += h6 * ar[i]
            ci[i] += h6 * ai[i]
            acc += cr[i] * cr[i] + ci[i] * ci[i]
        if not np.isfinite(acc):
            return step0 + s
    return -1


@dataclass
class RunResult:
    """Sampled observables, optional density snapshots and the final state."""

    times: np.ndarray
    norm: np.ndarray
    mean_n: np.ndarray
    sigma_n: np.ndarray
    v_g: np.ndarray
    k_c: np.ndarray
    final_state: WavepacketState
    snapshot_times: np.ndarray = field(default_factory=lambda: np.empty(0))
    site_density: np.ndarray | None = None
    k_grid: np.ndarray | None = None
    k_snapshots: np.ndarray | None = None
    n_steps: int = 0
    status: str = "ok"
    wall_seconds: float = 0.0

    def columns(self) -> dict[str, np.ndarray]:
        return {
            "t": self.times,
            "norm": self.norm,
            "mean_n": self.mean_n,
            "sigma_n": self.sigma_n,
            "v_g": self.v_g,
            "k_c": self.k_c,
        }


def evolve(
    state: WavepacketState,
    J: float,
    sched: DriveSchedule,
    cfg: IntegratorConfig,
    *,
    edge_guard: float = DEFAULT_EDGE_GUARD,
    k_grid: KGrid | None = None,
) -> RunResult:
    """Integrate from ``state`` to ``state.time + cfg.t_end``.

    Observables are recorded at step 0, every ``sample_stride`` steps and at
    the last step; snapshots every ``snapshot_stride`` steps (0 disables).
    The edge guard is checked at each sample.
    """
    check_stability(J, sched, state, cfg.dt)
    started = _time.perf_counter()
    n_steps = cfg.n_steps
    # time is reconstructed from integer step counts: t = t_start + step * dt
    t_start = state.time
    sites = state.sites
    n2 = sites * sites
    cr = state.amplitudes.real.copy()
    ci = state.amplitudes.imag.copy()
    if cfg.k_snapshots and k_grid is None:
        k_grid = KGrid.uniform(state.window.length)

    # phase offset so the kernel can count time from zero at this state's t
    phi_eff = sched.phi + sched.omega_D * t_start

    samples: list = []
    snap_t: list[float] = []
    snap_n: list[np.ndarray] = []
    snap_k: list[np.ndarray] = []

    def current(step):
        return WavepacketState(state.window, cr + 1j * ci, t_start + step * cfg.dt)

    def build(status, step, cur):
        arr = np.array([[r.t, r.norm, r.mean_n, r.sigma_n, r.v_g, r.k_c] for r in samples]).reshape(-1, 6)
        return RunResult(
            times=arr[:, 0], norm=arr[:, 1], mean_n=arr[:, 2], sigma_n=arr[:, 3], v_g=arr[:, 4], k_c=arr[:, 5],
            final_state=cur,
            snapshot_times=np.array(snap_t),
            site_density=np.array(snap_n) if snap_n else None,
            k_grid=k_grid.points if k_grid is not None and cfg.k_snapshots else None,
            k_snapshots=np.array(snap_k) if snap_k else None,
            n_steps=step, status=status, wall_seconds=_time.perf_counter() - started,
        )

    sample_every = int(cfg.sample_stride)
    snap_every = int(cfg.snapshot_stride)
    step = 0
    while True:
        cur = current(step)
        if step % sample_every == 0 or step == n_steps:
            samples.append(observe(cur, J))
            edge = cur.edge_density()
            if edge >= edge_guard:
                partial = build("window-overflow", step, cur)
                raise WindowOverflowError(
                    f"edge density {edge:.3e} >= guard {edge_guard:.1e} at t={cur.time:.6g} (step {step})",
                    partial=partial,
                )
        if snap_every and step % snap_every == 0:
            snap_t.append(cur.time)
            snap_n.append(cur.density)
            if cfg.k_snapshots:
                snap_k.append(k_density(cur, k_grid))
        if step >= n_steps:
            break
        nxt = n_steps
        nxt = min(nxt, (step // sample_every + 1) * sample_every)
        if snap_every:
            nxt = min(nxt, (step // snap_every + 1) * snap_every)
        bad = _rk4_steps(cr, ci, n2, J, sched.K0, sched.K_D, sched.omega_D, phi_eff, step, cfg.dt, nxt - step)
        if bad >= 0:
            partial = build("blowup", step, current(step))
            raise NumericalBlowupError(f"non-finite amplitudes at step {bad} (t={t_start + (bad + 1) * cfg.dt:.6g})",
                                       step=bad, partial=partial)
        step = nxt
    return build("ok", n_steps, current(n_steps))
