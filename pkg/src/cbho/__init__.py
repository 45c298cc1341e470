"""Wavepacket dynamics in an optical lattice with a parametrically modulated parabolic trap."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CBHOError,
    ConfigError,
    FitError,
    NumericalBlowupError,
    WindowOverflowError,
)
from .observables import KGrid, bz_transform, ehrenfest_velocity, k_centroid, moments  # noqa: E402
from .params import (  # noqa: E402
    DerivedScales,
    ModelParams,
    PhysicalParams,
    canonical_model,
    derive_model,
    derived_scales,
    hopping_from_depth,
)
from .propagator import DriveSchedule, IntegratorConfig, RunResult, apply_hamiltonian, evolve, rk4_step  # noqa: E402
from .semiclassical import (  # noqa: E402
    Eq7Params,
    HarmonicFit,
    SemiclassicalTrajectory,
    compare_velocities,
    eval_eq7,
    fit_harmonic,
    integrate_local_model,
)
from .state import InitialCondition, SiteWindow, WavepacketState, default_window, init_gaussian  # noqa: E402
