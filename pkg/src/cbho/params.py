"""Unit system and tight-binding parameters.

Everything downstream of this module works in recoil units: hbar = 1,
energies in E_R, times in hbar/E_R, positions as integer site indices.
SI quantities only appear in :class:`PhysicalParams` and the conversions
below.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

from scipy import constants
from scipy.optimize import brentq

from .errors import ConfigError, DomainError

HBAR = constants.hbar

# 87Rb in a 397.5 nm lattice, s = 12.77, 9 Hz axial trap
RB87_MASS = 1.1443e-25
RB87_LATTICE_PERIOD = 397.5e-9
RB87_DEPTH = 12.77
RB87_TRAP_FREQUENCY = 2 * math.pi * 9.0

# dimensionless values used by every preset (see derive_model for why K0 is
# not taken from the SI numbers)
CANONICAL_J = 0.024
CANONICAL_K0 = 1.52e-5
CANONICAL_N0 = 125.0


def recoil_energy(atomic_mass: float, lattice_period_d: float) -> float:
    """E_R = hbar^2 pi^2 / (2 m d^2) in joules."""
    if atomic_mass <= 0 or lattice_period_d <= 0:
        raise DomainError("atomic mass and lattice period must be positive")
    return HBAR**2 * math.pi**2 / (2.0 * atomic_mass * lattice_period_d**2)


def hopping_from_depth(s: float) -> float:
    """Nearest-neighbour tunnelling J/E_R for scaled lattice depth s = V0/E_R."""
    if not s > 0:
        raise DomainError(f"lattice depth must be positive, got {s!r}")
    return 8.0 / math.sqrt(math.pi) * s**0.75 * math.exp(-2.0 * math.sqrt(s))


def depth_from_hopping(J: float) -> float:
    """Inverse of :func:`hopping_from_depth` on its decreasing branch s > 9/16."""
    s_peak = 9.0 / 16.0
    if not 0 < J < hopping_from_depth(s_peak):
        raise DomainError(f"J={J!r} is outside the range of the depth formula")
    hi = 4.0
    while hopping_from_depth(hi) > J:
        hi *= 2.0
    return brentq(lambda s: hopping_from_depth(s) - J, s_peak, hi, xtol=1e-15, rtol=1e-15, maxiter=500)


@dataclass(frozen=True)
class PhysicalParams:
    atomic_mass: float
    lattice_period_d: float
    lattice_depth_s: float
    trap_frequency: float
    drive_amplitude_alpha: float = 1.0
    drive_frequency: float = 0.0
    drive_phase_phi: float = 0.0

    def __post_init__(self):
        if not (self.atomic_mass > 0 and self.lattice_period_d > 0 and self.lattice_depth_s > 0):
            raise ConfigError("atomic_mass, lattice_period_d and lattice_depth_s must be positive")
        if self.drive_amplitude_alpha < 0:
            raise ConfigError("drive_amplitude_alpha must be >= 0")
        if self.trap_frequency < 0 or self.drive_frequency < 0:
            raise ConfigError("frequencies must be >= 0")


@dataclass(frozen=True)
class ModelParams:
    """Dimensionless model of a run; K_D = alpha * K0."""

    J: float
    K0: float
    alpha: float = 1.0
    omega_D: float = 0.0
    phi: float = 0.0
    recoil_energy_joules: float | None = None

    def __post_init__(self):
        if not self.J > 0:
            raise ConfigError(f"J must be positive, got {self.J!r}")
        if not self.K0 >= 0:
            raise ConfigError(f"K0 must be >= 0, got {self.K0!r}")
        if not self.alpha >= 0:
            raise ConfigError(f"alpha must be >= 0, got {self.alpha!r}")
        for name in ("J", "K0", "alpha", "omega_D", "phi"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")

    @property
    def K_D(self) -> float:
        return self.alpha * self.K0

    def bloch_frequency(self, n0: float) -> float:
        return 2.0 * self.K0 * n0

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class DerivedScales:
    n_c: float | None
    omega_B: float
    T_B: float | None
    T_HO: float | None


def derive_model(p: PhysicalParams) -> ModelParams:
    """Convert SI inputs to recoil units.

    Note that the canonical 87Rb numbers give K0 ~ 9.5e-6 E_R here, while
    the presets use K0 = 1.52e-5 E_R (which is what reproduces n_c ~ 56 and
    hbar*omega_B = 0.0038 E_R at n0 = 125).
    """
    e_r = recoil_energy(p.atomic_mass, p.lattice_period_d)
    k0 = 0.5 * p.atomic_mass * p.trap_frequency**2 * p.lattice_period_d**2 / e_r
    return ModelParams(
        J=hopping_from_depth(p.lattice_depth_s),
        K0=k0,
        alpha=p.drive_amplitude_alpha,
        omega_D=p.drive_frequency * HBAR / e_r,
        phi=p.drive_phase_phi,
        recoil_energy_joules=e_r,
    )


def physical_from_model(mp: ModelParams, atomic_mass: float, lattice_period_d: float) -> PhysicalParams:
    """Inverse of :func:`derive_model` for a given mass and lattice period."""
    e_r = recoil_energy(atomic_mass, lattice_period_d)
    if mp.recoil_energy_joules is not None and not math.isclose(e_r, mp.recoil_energy_joules, rel_tol=1e-12):
        raise ConfigError("mass and lattice period are inconsistent with the model's recoil energy")
    return PhysicalParams(
        atomic_mass=atomic_mass,
        lattice_period_d=lattice_period_d,
        lattice_depth_s=depth_from_hopping(mp.J),
        trap_frequency=math.sqrt(2.0 * mp.K0 * e_r / (atomic_mass * lattice_period_d**2)),
        drive_amplitude_alpha=mp.alpha,
        drive_frequency=mp.omega_D * e_r / HBAR,
        drive_phase_phi=mp.phi,
    )


def derived_scales(mp: ModelParams, n0: float) -> DerivedScales:
    """Critical index, Bloch frequency/period at n0 and the slow harmonic period.

    Absent quantities (zero trap, zero drive) come back as None.
    """
    if n0 == 0:
        raise DomainError("n0 must be nonzero for a finite Bloch frequency")
    omega_b = mp.bloch_frequency(n0)
    if mp.K0 == 0:
        return DerivedScales(n_c=None, omega_B=0.0, T_B=None, T_HO=None)
    t_ho = None
    if mp.alpha > 0:
        t_ho = 2.0 * math.pi / math.sqrt(mp.J * mp.K0 * mp.alpha)
    return DerivedScales(
        n_c=math.sqrt(2.0 * mp.J / mp.K0),
        omega_B=omega_b,
        T_B=2.0 * math.pi / abs(omega_b),
        T_HO=t_ho,
    )


def rb87_physical(**overrides) -> PhysicalParams:
    base = dict(
        atomic_mass=RB87_MASS,
        lattice_period_d=RB87_LATTICE_PERIOD,
        lattice_depth_s=RB87_DEPTH,
        trap_frequency=RB87_TRAP_FREQUENCY,
        drive_amplitude_alpha=1.0,
        drive_frequency=0.0,
        drive_phase_phi=0.0,
    )
    base.update(overrides)
    return PhysicalParams(**base)


def canonical_model(alpha: float = 1.0, phi: float = 0.0, n0: float = CANONICAL_N0,
                    omega_D: float | None = None) -> ModelParams:
    """Preset parameters with the drive tuned to the initial Bloch frequency."""
    if omega_D is None:
        omega_D = 2.0 * CANONICAL_K0 * n0
    return ModelParams(
        J=CANONICAL_J,
        K0=CANONICAL_K0,
        alpha=alpha,
        omega_D=omega_D,
        phi=phi,
        recoil_energy_joules=recoil_energy(RB87_MASS, RB87_LATTICE_PERIOD),
    )
