"""Scenarios, presets and the file-producing runners behind the CLI."""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import io
from .errors import CBHOError, ConfigError, FitError
from .observables import KGrid, transport_excursion
from .params import (
    CANONICAL_N0,
    ModelParams,
    PhysicalParams,
    canonical_model,
    derive_model,
    derived_scales,
)
from .propagator import DEFAULT_DT, DriveSchedule, IntegratorConfig, RunResult, evolve
from .semiclassical import (
    Eq7Params,
    HarmonicFit,
    compare_velocities,
    eval_eq7,
    fit_harmonic,
    integrate_local_model,
    slow_crossing_offset,
)
from .state import (
    DEFAULT_EDGE_GUARD,
    DEFAULT_MARGIN,
    InitialCondition,
    SiteWindow,
    WavepacketState,
    default_window,
    init_gaussian,
    read_state_csv,
    write_state_csv,
)

PRESET_VERSION = 1
SAMPLES_PER_BLOCH = 200
SNAPSHOTS_PER_BLOCH = 40
ODE_STEPS_PER_BLOCH = 2000


@dataclass(frozen=True)
class Outputs:
    snapshots: bool = False
    k_snapshots: bool = False
    final_state: bool = True


@dataclass(frozen=True)
class Scenario:
    name: str
    model: ModelParams
    ic: InitialCondition
    integrator: IntegratorConfig
    window: SiteWindow
    outputs: Outputs = field(default_factory=Outputs)
    edge_guard: float = DEFAULT_EDGE_GUARD
    initial_state_file: str | None = None

    @property
    def bloch_period(self) -> float:
        return derived_scales(self.model, self.ic.n0).T_B

    def initial_state(self) -> WavepacketState:
        if self.initial_state_file:
            st = read_state_csv(self.initial_state_file)
            if st.window != self.window:
                raise ConfigError(f"restart state window {st.window} differs from scenario window {self.window}")
            return st
        return init_gaussian(self.ic, self.window)

    def to_dict(self) -> dict:
        """Fully resolved scenario in recoil units; loading it reproduces the run exactly."""
        m, ic, it, w, o = self.model, self.ic, self.integrator, self.window, self.outputs
        return {
            "name": self.name,
            "units": "recoil",
            "model": {"J": m.J, "K0": m.K0, "alpha": m.alpha, "omega_D": m.omega_D, "phi": m.phi,
                      "recoil_energy_joules": m.recoil_energy_joules},
            "initial": {"n0": ic.n0, "k0": ic.k0, "sigma_n": ic.sigma_n,
                        "state_file": self.initial_state_file},
            "window": {"n_min": w.n_min, "n_max": w.n_max},
            "integrator": {"dt": it.dt, "t_end": it.t_end, "sample_stride": it.sample_stride,
                           "snapshot_stride": it.snapshot_stride, "k_snapshots": it.k_snapshots},
            "outputs": {"snapshots": o.snapshots, "k_snapshots": o.k_snapshots, "final_state": o.final_state},
            "edge_guard": self.edge_guard,
        }


def _strides(T_B: float | None, dt: float) -> tuple[int, int]:
    if T_B is None or not math.isfinite(T_B):
        return 100, 1000
    steps_per_bloch = T_B / dt
    return (max(1, math.floor(steps_per_bloch / SAMPLES_PER_BLOCH)),
            max(1, math.floor(steps_per_bloch / SNAPSHOTS_PER_BLOCH)))


def build_scenario(name: str, model: ModelParams, ic: InitialCondition, *, t_end: float | None = None,
                   bloch_periods: float | None = None, dt: float = DEFAULT_DT, window: SiteWindow | None = None,
                   margin: int = DEFAULT_MARGIN, snapshots: bool = False, k_snapshots: bool = False,
                   sample_stride: int | None = None, snapshot_stride: int | None = None,
                   edge_guard: float = DEFAULT_EDGE_GUARD, initial_state_file: str | None = None) -> Scenario:
    T_B = derived_scales(model, ic.n0).T_B if ic.n0 != 0 else None
    if t_end is None:
        if bloch_periods is None or T_B is None:
            raise ConfigError("give t_end, or bloch_periods with a nonzero trap and n0")
        t_end = bloch_periods * T_B
    default_sample, default_snap = _strides(T_B, dt)
    if sample_stride is None:
        sample_stride = default_sample
    if snapshot_stride is None:
        snapshot_stride = default_snap if (snapshots or k_snapshots) else 0
    if window is None:
        window = default_window(ic, model, margin)
    return Scenario(
        name=name, model=model, ic=ic,
        integrator=IntegratorConfig(dt=dt, t_end=t_end, sample_stride=sample_stride,
                                    snapshot_stride=snapshot_stride, k_snapshots=k_snapshots),
        window=window, outputs=Outputs(snapshots=snapshots or k_snapshots, k_snapshots=k_snapshots),
        edge_guard=edge_guard, initial_state_file=initial_state_file,
    )


# name -> (drive phase, drive amplitude, horizon in initial Bloch periods)
_PRESETS = {
    "bo-static": (0.0, 0.0, 3.0),
    "fig2": (0.0, 1.0, 20.0),
    "fig3-long": (0.0, 1.0, 700.0),
    "fig4a": (-math.pi / 2, 1.0, 20.0),
    "fig4c": (math.pi / 2, 1.0, 10.0),
    "fig5a": (0.0, 1.0, 20.0),
    "fig5b": (-math.pi / 2, 1.0, 20.0),
    "fig5c": (math.pi / 2, 1.0, 20.0),
}
SLOW_PRESETS = frozenset({"fig3-long"})


def preset_names() -> list[str]:
    return sorted(_PRESETS)


def preset(name: str, **overrides) -> Scenario:
    """Canonical run: J=0.024, K0=1.52e-5, n0=125, k0=0, sigma_n=3.16, omega_D = omega_B."""
    try:
        phi, alpha, periods = _PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(preset_names())}") from None
    phi = overrides.pop("phi", phi)
    alpha = overrides.pop("alpha", alpha)
    model = canonical_model(alpha=alpha, phi=phi)
    ic = InitialCondition(n0=CANONICAL_N0, k0=0.0, sigma_n=3.16)
    if "t_end" not in overrides:
        overrides.setdefault("bloch_periods", periods)
    return build_scenario(name, model, ic, **overrides)


def _num(section: dict, key: str, default=None, required=False):
    if key not in section or section[key] is None:
        if required:
            raise ConfigError(f"missing required field {key!r}")
        return default
    v = section[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"field {key!r} must be a number, got {v!r}")
    return float(v)


def scenario_from_dict(doc: dict, base_dir: Path | None = None) -> Scenario:
    """Build a scenario from a config mapping (the ``scenario`` block of a manifest also works).

    ``units`` selects between a ``model`` block in recoil units and a
    ``physical`` block in SI units.
    """
    if "scenario" in doc and isinstance(doc["scenario"], dict):
        doc = doc["scenario"]
    if "preset" in doc:
        base = preset(doc["preset"])
        return base if len(doc) == 1 else _apply_overrides(base, doc)
    units = doc.get("units", "recoil")
    init = doc.get("initial") or {}
    ic = InitialCondition(n0=_num(init, "n0", required=True), k0=_num(init, "k0", 0.0),
                          sigma_n=_num(init, "sigma_n", 3.16))
    if units == "recoil":
        m = doc.get("model") or {}
        J = _num(m, "J", required=True)
        K0 = _num(m, "K0", required=True)
        omega_D = _num(m, "omega_D")
        if omega_D is None:
            omega_D = _num(m, "omega_D_over_omega_B", 1.0) * 2.0 * K0 * ic.n0
        model = ModelParams(J=J, K0=K0, alpha=_num(m, "alpha", 1.0), omega_D=omega_D, phi=_num(m, "phi", 0.0),
                            recoil_energy_joules=_num(m, "recoil_energy_joules"))
    elif units == "si":
        p = doc.get("physical") or {}
        phys = PhysicalParams(
            atomic_mass=_num(p, "atomic_mass", required=True),
            lattice_period_d=_num(p, "lattice_period_d", required=True),
            lattice_depth_s=_num(p, "lattice_depth_s", required=True),
            trap_frequency=_num(p, "trap_frequency", required=True),
            drive_amplitude_alpha=_num(p, "drive_amplitude_alpha", 1.0),
            drive_frequency=_num(p, "drive_frequency", 0.0),
            drive_phase_phi=_num(p, "drive_phase_phi", 0.0),
        )
        model = derive_model(phys)
        if _num(p, "K0_override") is not None:
            model = model.with_(K0=_num(p, "K0_override"))
        if "drive_frequency" not in p:
            model = model.with_(omega_D=_num(p, "drive_frequency_over_omega_B", 1.0) * 2.0 * model.K0 * ic.n0)
    else:
        raise ConfigError(f"units must be 'recoil' or 'si', got {units!r}")

    it = doc.get("integrator") or {}
    win = doc.get("window") or {}
    outs = doc.get("outputs") or {}
    window = None
    if "n_min" in win or "n_max" in win:
        window = SiteWindow(int(_num(win, "n_min", required=True)), int(_num(win, "n_max", required=True)))
    state_file = init.get("state_file")
    if state_file and base_dir is not None and not Path(state_file).is_absolute():
        state_file = str(base_dir / state_file)

    def _int(key):
        v = _num(it, key)
        return None if v is None else int(v)

    return build_scenario(
        doc.get("name", "custom"), model, ic,
        t_end=_num(it, "t_end"), bloch_periods=_num(it, "t_end_bloch"),
        dt=_num(it, "dt", DEFAULT_DT), window=window, margin=int(_num(win, "margin", DEFAULT_MARGIN)),
        snapshots=bool(outs.get("snapshots", False)), k_snapshots=bool(outs.get("k_snapshots", it.get("k_snapshots", False))),
        sample_stride=_int("sample_stride"), snapshot_stride=_int("snapshot_stride"),
        edge_guard=_num(doc, "edge_guard", DEFAULT_EDGE_GUARD), initial_state_file=state_file,
    )


def _apply_overrides(base: Scenario, doc: dict) -> Scenario:
    d = base.to_dict()
    for key, val in doc.items():
        if key == "preset":
            continue
        if isinstance(val, dict) and isinstance(d.get(key), dict):
            d[key].update(val)
        else:
            d[key] = val
    return scenario_from_dict(d)


def load_scenario(spec: str) -> Scenario:
    """A preset name, a config file, or a run directory / manifest to re-run."""
    if spec in _PRESETS:
        return preset(spec)
    path = Path(spec)
    if path.is_dir():
        path = path / "manifest.json"
    doc = io.load_config_file(path)
    return scenario_from_dict(doc, base_dir=path.parent)


def with_cli_overrides(s: Scenario, *, dt=None, t_end=None, phi=None, alpha=None, snapshots=None) -> Scenario:
    """Re-resolve a scenario after CLI flag overrides (strides follow the new dt)."""
    model = s.model
    if phi is not None:
        model = model.with_(phi=phi)
    if alpha is not None:
        model = model.with_(alpha=alpha)
    it = s.integrator
    new_dt = it.dt if dt is None else dt
    if dt is None and t_end is None and snapshots is None and model == s.model:
        return s
    sample, snap = (it.sample_stride, it.snapshot_stride)
    if dt is not None:
        sample, snap = _strides(s.bloch_period, new_dt)
        if not s.outputs.snapshots:
            snap = 0
    outputs = s.outputs
    if snapshots:
        outputs = replace(outputs, snapshots=True)
        if snap == 0:
            snap = _strides(s.bloch_period, new_dt)[1]
    integrator = IntegratorConfig(dt=new_dt, t_end=it.t_end if t_end is None else t_end,
                                  sample_stride=sample, snapshot_stride=snap, k_snapshots=it.k_snapshots)
    return replace(s, model=model, integrator=integrator, outputs=outputs)


def simulate(s: Scenario) -> RunResult:
    """prepare -> evolve, without touching the filesystem."""
    state = s.initial_state()
    grid = KGrid.uniform(s.window.length) if s.integrator.k_snapshots else None
    return evolve(state, s.model.J, DriveSchedule.from_model(s.model), s.integrator,
                  edge_guard=s.edge_guard, k_grid=grid)


def _derived_dict(s: Scenario) -> dict:
    d = derived_scales(s.model, s.ic.n0)
    return {"n_c": d.n_c, "omega_B": d.omega_B, "T_B": d.T_B, "T_HO": d.T_HO, "K_D": s.model.K_D}


def write_run(out_dir: Path, s: Scenario, result: RunResult, *, preset_name: str | None = None,
              error: str | None = None) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {"timeseries": "timeseries.csv"}
    io.write_timeseries(out_dir / "timeseries.csv", result)
    if result.site_density is not None:
        io.write_snapshot_matrix(out_dir / "snapshots_sites.csv", result.snapshot_times, s.window.sites,
                                 result.site_density, axis_format=lambda a: str(int(a)))
        files["snapshots_sites"] = "snapshots_sites.csv"
    if result.k_snapshots is not None:
        io.write_snapshot_matrix(out_dir / "snapshots_k.csv", result.snapshot_times, result.k_grid,
                                 result.k_snapshots)
        files["snapshots_k"] = "snapshots_k.csv"
    if s.outputs.final_state:
        write_state_csv(result.final_state, out_dir / "final_state.csv")
        files["final_state"] = "final_state.csv"
    manifest = {
        "kind": "run",
        "preset": preset_name,
        "preset_version": PRESET_VERSION if preset_name else None,
        "scenario": s.to_dict(),
        "derived": _derived_dict(s),
        "status": result.status,
        "error": error,
        "n_steps": result.n_steps,
        "wall_seconds": result.wall_seconds,
        "deterministic": True,
        "files": files,
    }
    io.write_manifest(out_dir / "manifest.json", manifest)
    return manifest


def run_scenario(s: Scenario, out_dir, *, preset_name: str | None = None) -> int:
    """Run and write all files; returns the exit status (0, or the error's exit code)."""
    out_dir = Path(out_dir)
    try:
        result = simulate(s)
    except CBHOError as exc:
        partial = getattr(exc, "partial", None)
        if partial is not None:
            write_run(out_dir, s, partial, preset_name=preset_name, error=str(exc))
        raise
    write_run(out_dir, s, result, preset_name=preset_name)
    return 0


# --- sweeps -----------------------------------------------------------------

_AXES = {
    "phi": ("model", "phi"), "model.phi": ("model", "phi"),
    "alpha": ("model", "alpha"), "model.alpha": ("model", "alpha"),
    "omega_D": ("model", "omega_D"), "model.omega_D": ("model", "omega_D"),
    "K0": ("model", "K0"), "model.K0": ("model", "K0"),
    "J": ("model", "J"), "model.J": ("model", "J"),
    "n0": ("initial", "n0"), "initial.n0": ("initial", "n0"),
    "k0": ("initial", "k0"), "initial.k0": ("initial", "k0"),
    "sigma_n": ("initial", "sigma_n"), "initial.sigma_n": ("initial", "sigma_n"),
    "dt": ("integrator", "dt"), "integrator.dt": ("integrator", "dt"),
}


@dataclass(frozen=True)
class SweepSpec:
    base: Scenario
    axis: str
    values: tuple
    parallelism: int = 1

    def __post_init__(self):
        if self.axis not in _AXES:
            raise ConfigError(f"unknown sweep axis {self.axis!r}; choose from {sorted(set(_AXES))}")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")

    def point(self, value) -> Scenario:
        section, key = _AXES[self.axis]
        d = self.base.to_dict()
        d[section][key] = float(value)
        if section == "integrator" and key == "dt":
            d["integrator"]["sample_stride"] = None
            d["integrator"]["snapshot_stride"] = None
        if section == "initial":
            d["window"] = {}
        return scenario_from_dict(d)


def load_sweep(path) -> SweepSpec:
    doc = io.load_config_file(path)
    base = doc.get("base")
    if isinstance(base, str):
        scenario = load_scenario(base) if base in _PRESETS else load_scenario(str(Path(path).parent / base))
    elif isinstance(base, dict):
        scenario = scenario_from_dict(base, base_dir=Path(path).parent)
    else:
        raise ConfigError("sweep spec needs a 'base' preset name, config path or mapping")
    values = doc.get("values", [])
    if not isinstance(values, list):
        raise ConfigError("'values' must be a list")
    return SweepSpec(scenario, str(doc.get("axis", "phi")), tuple(float(v) for v in values),
                     int(doc.get("parallelism", 1)))


SUMMARY_COLUMNS = ("value", "status", "exit_code", "max_excursion", "max_sigma_n", "delta_omega", "delta_n")


def _sweep_point(args):
    spec, index, value, out_dir = args
    row = {"value": value, "status": "ok", "exit_code": 0, "max_excursion": math.nan, "max_sigma_n": math.nan,
           "delta_omega": math.nan, "delta_n": math.nan}
    point_dir = Path(out_dir) / f"point_{index:03d}"
    try:
        s = spec.point(value)
        result = simulate(s)
    except CBHOError as exc:
        row.update(status=type(exc).__name__, exit_code=exc.exit_code)
        partial = getattr(exc, "partial", None)
        if partial is not None:
            write_run(point_dir, s, partial, error=str(exc))
        return row
    write_run(point_dir, s, result)
    row["max_excursion"] = transport_excursion(result.mean_n, result.sigma_n)
    row["max_sigma_n"] = float(np.max(result.sigma_n))
    try:
        fit = fit_harmonic(result.times, result.mean_n, s.bloch_period, s.model.K0)
        row["delta_omega"], row["delta_n"] = fit.delta_omega, fit.delta_n
    except (FitError, ConfigError, TypeError) as exc:
        row["status"] = f"ok (fit failed: {exc})"
    return row


def run_sweep(spec: SweepSpec, out_dir) -> list[dict]:
    """Run every point (bounded process pool), write per-point dirs and summary.csv."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = [(spec, i, v, str(out_dir)) for i, v in enumerate(spec.values)]
    if spec.parallelism > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(spec.parallelism, len(tasks))) as pool:
            rows = list(pool.map(_sweep_point, tasks))
    else:
        rows = [_sweep_point(t) for t in tasks]
    with (out_dir / "summary.csv").open("w", newline="") as fh:
        fh.write(",".join(SUMMARY_COLUMNS) + "\n")
        for r in rows:
            cells = []
            for c in SUMMARY_COLUMNS:
                v = r[c]
                cells.append(io.fmt(v) if isinstance(v, float) else str(v).replace(",", ";"))
            fh.write(",".join(cells) + "\n")
    io.write_manifest(out_dir / "manifest.json", {
        "kind": "sweep", "axis": spec.axis, "values": list(spec.values), "parallelism": spec.parallelism,
        "base": spec.base.to_dict(), "points": [f"point_{i:03d}" for i in range(len(tasks))],
    })
    return rows


# --- post-processing of run directories --------------------------------------

def load_run(run_dir) -> tuple[Scenario, dict, dict[str, np.ndarray]]:
    run_dir = Path(run_dir)
    manifest_path = run_dir / "manifest.json"
    if not manifest_path.is_file():
        raise ConfigError(f"{run_dir} has no manifest.json")
    manifest = io.read_manifest(manifest_path)
    s = scenario_from_dict(manifest, base_dir=run_dir)
    series = io.read_table(run_dir / manifest["files"]["timeseries"])
    return s, manifest, series


def fit_series(s: Scenario, series: dict) -> HarmonicFit:
    return fit_harmonic(series["t"], series["mean_n"], s.bloch_period, s.model.K0)


def run_fit(run_dir) -> HarmonicFit:
    s, _, series = load_run(run_dir)
    fit = fit_series(s, series)
    io.write_manifest(Path(run_dir) / "fit.json", {"kind": "fit", **_fit_dict(fit)})
    return fit


def _fit_dict(fit: HarmonicFit) -> dict:
    return {"delta_n": fit.delta_n, "delta_omega": fit.delta_omega, "gamma": fit.gamma, "delta_F": fit.delta_F,
            "residual_rms": fit.residual_rms, "offset": fit.offset}


@dataclass(frozen=True)
class Comparison:
    t: np.ndarray
    v_quantum: np.ndarray
    v_eq7: np.ndarray
    v_ode: np.ndarray
    fit: HarmonicFit
    fit_source: str
    metrics: dict


def compare_series(s: Scenario, series: dict, fallback: dict | None = None) -> Comparison:
    """Quantum velocity vs the perturbative formula and the local-model ODE.

    The harmonic fit comes from the run; if it fails, ``fallback`` (keys
    delta_n, delta_omega, gamma) is used instead.
    """
    mp = s.model
    T_B = s.bloch_period
    try:
        fit = fit_series(s, series)
        source = "fit"
    except FitError:
        if not fallback:
            raise
        dn = float(fallback["delta_n"])
        fit = HarmonicFit(delta_n=dn, delta_omega=float(fallback["delta_omega"]),
                          gamma=float(fallback.get("gamma", 0.0)), delta_F=2.0 * mp.K0 * dn, residual_rms=math.nan)
        source = "user"
    t = series["t"]
    v_q = series["v_g"]
    # quasi-momentum k0 (spectral convention) corresponds to semiclassical phase -2 pi k0
    p = Eq7Params.from_fit(mp, s.ic.n0, fit, k0=-s.ic.k0)
    v_eq7 = eval_eq7(p, t - t[0])
    ode_dt = T_B / ODE_STEPS_PER_BLOCH
    traj = integrate_local_model(mp, s.ic.n0, -s.ic.k0, t[-1] - t[0], ode_dt)
    v_ode = np.interp(t - t[0], traj.times, traj.velocity(mp.J))
    rms7, nrms7 = compare_velocities(t, v_q, t, v_eq7, mp.J)
    rms_ode, nrms_ode = compare_velocities(t, v_q, t, v_ode, mp.J)
    metrics = {
        "rms_eq7": rms7, "normalized_rms_eq7": nrms7,
        "rms_ode": rms_ode, "normalized_rms_ode": nrms_ode,
        "slow_crossing_offset_TB": slow_crossing_offset(t, v_q, v_eq7, T_B) / T_B,
        "fit_source": source, **{f"fit_{k}": v for k, v in _fit_dict(fit).items()},
    }
    return Comparison(t, v_q, v_eq7, v_ode, fit, source, metrics)


def run_compare(run_dir, fallback: dict | None = None) -> Comparison:
    s, _, series = load_run(run_dir)
    cmp = compare_series(s, series, fallback)
    io.write_table(Path(run_dir) / "comparison.csv", ["t", "v_quantum", "v_eq7", "v_ode"],
                   [cmp.t, cmp.v_quantum, cmp.v_eq7, cmp.v_ode])
    io.write_manifest(Path(run_dir) / "compare.json", {"kind": "compare", **cmp.metrics})
    return cmp


def run_semiclassical(s: Scenario, out_dir, dt: float | None = None) -> Path:
    """Integrate the local model for the scenario's initial condition and horizon."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    T_B = s.bloch_period
    step = dt if dt is not None else (T_B / ODE_STEPS_PER_BLOCH if T_B else s.integrator.dt)
    started = time.perf_counter()
    traj = integrate_local_model(s.model, s.ic.n0, -s.ic.k0, s.integrator.t_end, step)
    io.write_table(out_dir / "trajectory.csv", ["t", "k_tilde", "n", "v"],
                   [traj.times, traj.k_tilde, traj.n, traj.velocity(s.model.J)])
    io.write_manifest(out_dir / "manifest.json", {
        "kind": "semiclassical", "scenario": s.to_dict(), "derived": _derived_dict(s), "ode_dt": step,
        "wall_seconds": time.perf_counter() - started, "files": {"trajectory": "trajectory.csv"},
    })
    return out_dir / "trajectory.csv"
