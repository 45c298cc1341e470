"""Lattice wavefunction on a finite window of sites and its preparation."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError, WindowError
from .params import ModelParams

MIN_WINDOW_LENGTH = 16
DEFAULT_EDGE_GUARD = 1e-8
DEFAULT_MARGIN = 64


@dataclass(frozen=True)
class SiteWindow:
    """Closed range of absolute site indices [n_min, n_max] (hard walls outside)."""

    n_min: int
    n_max: int

    def __post_init__(self):
        if int(self.n_min) != self.n_min or int(self.n_max) != self.n_max:
            raise ConfigError("window bounds must be integers")
        object.__setattr__(self, "n_min", int(self.n_min))
        object.__setattr__(self, "n_max", int(self.n_max))
        if self.n_max - self.n_min + 1 < MIN_WINDOW_LENGTH:
            raise WindowError(f"window [{self.n_min}, {self.n_max}] shorter than {MIN_WINDOW_LENGTH} sites")

    @property
    def length(self) -> int:
        return self.n_max - self.n_min + 1

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.n_min, self.n_max + 1, dtype=float)

    def mirrored(self) -> "SiteWindow":
        return SiteWindow(-self.n_max, -self.n_min)

    def contains(self, lo: float, hi: float) -> bool:
        return self.n_min <= lo and hi <= self.n_max


@dataclass
class WavepacketState:
    window: SiteWindow
    amplitudes: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (self.window.length,):
            raise ConfigError(
                f"expected {self.window.length} amplitudes for {self.window}, got {self.amplitudes.shape}"
            )

    @property
    def sites(self) -> np.ndarray:
        return self.window.sites

    @property
    def density(self) -> np.ndarray:
        return self.amplitudes.real**2 + self.amplitudes.imag**2

    def norm(self) -> float:
        return float(np.sum(self.density))

    def edge_density(self) -> float:
        d = self.density
        return float(d[0] + d[-1])

    def copy(self) -> "WavepacketState":
        return WavepacketState(self.window, self.amplitudes.copy(), self.time)


@dataclass(frozen=True)
class InitialCondition:
    """Displaced Gaussian: centre n0 (sites), quasi-momentum k0 (units of k_B), width sigma_n (sites)."""

    n0: float
    k0: float = 0.0
    sigma_n: float = 3.16

    def __post_init__(self):
        if not self.sigma_n > 0:
            raise DomainError(f"sigma_n must be positive, got {self.sigma_n!r}")
        if not -0.5 <= self.k0 <= 0.5:
            raise DomainError(f"k0 must lie in [-1/2, 1/2], got {self.k0!r}")
        if not math.isfinite(self.n0):
            raise DomainError("n0 must be finite")


def init_gaussian(ic: InitialCondition, window: SiteWindow) -> WavepacketState:
    """Sample c_n = exp(-(n-n0)^2 / 2 sigma^2) exp(-i 2 pi k0 n) and normalise to one."""
    lo, hi = ic.n0 - 8 * ic.sigma_n, ic.n0 + 8 * ic.sigma_n
    if not window.contains(lo, hi):
        raise WindowError(f"window {window} does not contain [{lo:.3f}, {hi:.3f}]")
    n = window.sites
    envelope = np.exp(-((n - ic.n0) ** 2) / (2.0 * ic.sigma_n**2)) / math.sqrt(ic.sigma_n * math.sqrt(math.pi))
    c = envelope * np.exp(-2j * math.pi * ic.k0 * n)
    c /= math.sqrt(np.sum(c.real**2 + c.imag**2))
    return WavepacketState(window, c, 0.0)


def default_window(ic: InitialCondition, mp: ModelParams, margin: int = DEFAULT_MARGIN) -> SiteWindow:
    """Window of half-width 8 sigma_n + n_c + margin around n0."""
    n_c = math.sqrt(2.0 * mp.J / mp.K0) if mp.K0 > 0 else 0.0
    span = 8.0 * ic.sigma_n + n_c + margin
    return SiteWindow(math.floor(ic.n0 - span), math.ceil(ic.n0 + span))


def write_state_csv(state: WavepacketState, path) -> None:
    """Snapshot as CSV (n, re, im, abs2); a leading comment line stores the time."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# time={state.time!r}\n")
        w = csv.writer(fh)
        w.writerow(["n", "re", "im", "abs2"])
        for n, c, p in zip(range(state.window.n_min, state.window.n_max + 1), state.amplitudes, state.density):
            w.writerow([n, f"{c.real:.17g}", f"{c.imag:.17g}", f"{p:.17g}"])


def read_state_csv(path) -> WavepacketState:
    path = Path(path)
    time = 0.0
    rows = []
    with path.open(newline="") as fh:
        first = fh.readline()
        if first.startswith("# time="):
            time = float(first.split("=", 1)[1])
        else:
            fh.seek(0)
        reader = csv.DictReader(fh)
        for row in reader:
            rows.append((int(row["n"]), float(row["re"]), float(row["im"])))
    if not rows:
        raise ConfigError(f"{path}: no amplitudes")
    ns = [r[0] for r in rows]
    if ns != list(range(ns[0], ns[0] + len(ns))):
        raise ConfigError(f"{path}: site indices must be consecutive")
    amps = np.array([complex(r[1], r[2]) for r in rows])
    return WavepacketState(SiteWindow(ns[0], ns[-1]), amps, time)
