"""Experiment orchestration: configs, scenario library, pipeline, reports.

A run executes evolve -> hydrodynamics -> flux -> good boxes -> phase lift ->
slope -> profile fit -> distances, writing CSV/JSON artifacts into a run
directory together with a MANIFEST and a report.json whose pass/fail verdicts
are pure functions of the artifacts and the thresholds echoed in the config.

Config files are flat key = value text with sections (configparser syntax);
see docs/config.md for the schema.  All floats serialize with 17 significant
digits so a config round-trips losslessly and reruns are byte-identical.
"""

from __future__ import annotations

import configparser
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .core import NonlinearitySpec, RadialGrid, make_initial_condition
from .hydro import (FluxSeries, flux_series, hydro_frame, iwc_indicator,
                    is_nodeless, kinetic_splitting)
from .phase import (bump_on_box, find_good_boxes, lift_phase, phase_slope,
                    polar_residuals, reconstruction_error,
                    theta_average_identity)
from .profile import fit_profile, profile_distance, scaled_profile
from .solver import SolverConfig, Trajectory, evolve

SCENARIOS = ("soliton_regression", "incoming_lens", "flux_classifier",
             "phase_slope_study", "identity_suite")
STAGES = ("evolve", "hydro", "flux", "boxes", "lift", "slope", "residuals",
          "profile", "report")

FLUX_VERDICTS = ("always_incoming", "incoming_then_outgoing", "mixed")


def fmt(x: float) -> str:
    """17-significant-digit decimal, the artifact float format."""
    return f"{x:.17g}"


# ----------------------------------------------------------------------------
# configuration
# ----------------------------------------------------------------------------

@dataclass
class Thresholds:
    """Pass/fail limits; every report verdict derives from these alone."""

    mass_drift: float = 1e-10
    energy_drift: float = 1e-8
    flux_balance: float = 1e-6     # relative to mass(0)
    iwc_bound: float = 1e-9
    splitting: float = 1e-8
    reconstruction: float = 1e-10
    e_gap: float = 1e-3            # |E_hat - E_fit| / E_fit
    distance_drop: float = 10.0    # max/final profile-distance ratio


@dataclass
class ExperimentConfig:
    scenario: str
    dimension: int = 1
    extent: float = 20.0 * math.pi      # 1D half-width L, or 3D r_max
    num_points: int = 2048
    method: str = "split_step_fourier"
    dt: float = 1e-3
    t_final: float = 50.0
    output_stride: int = 50
    picard_tol: float = 1e-12
    picard_max_iter: int = 25
    nl_power: float = 2.0
    nl_coefficient: float = -1.0
    recipe: str = "exact_soliton"
    recipe_params: dict = field(default_factory=dict)
    radii: tuple = ()
    interval: tuple = (-0.8, 0.8)
    delta: float = 0.0                  # 0 -> auto (half the late-time max on I)
    min_width: float = 0.5
    lift_t_start: float = 0.0
    l1_tol: float = 0.0                 # 0 -> 1e-3 * mass(0)
    exterior_radii_from: float = 10.0
    fit_e_lo: float = 0.05
    fit_e_hi: float = 50.0
    output_dir: str = "runs/out"
    csv_stride: int = 25
    frame_times: tuple = ()
    seed: int = 20240801
    thresholds: Thresholds = field(default_factory=Thresholds)

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}; "
                             f"expected one of {SCENARIOS}")
        if self.dimension not in (1, 3):
            raise ValueError("dimension must be 1 or 3")
        if self.csv_stride < 1:
            raise ValueError("csv_stride must be >= 1")
        grid = self.grid()
        for r in self.radii:
            lo = 0.0 if self.dimension == 3 else grid.nodes[0]
            if not (lo < r < grid.r_max):
                raise ValueError(f"diagnostic radius {r} outside the grid")
        if not (grid.nodes[0] <= self.interval[0] < self.interval[1]
                <= grid.nodes[-1]):
            raise ValueError(f"interval {self.interval} outside the grid")

    def grid(self) -> RadialGrid:
        if self.dimension == 1:
            return RadialGrid.line(self.extent, self.num_points)
        return RadialGrid.radial(self.extent, self.num_points)

    def nonlinearity(self) -> NonlinearitySpec:
        return NonlinearitySpec(power=self.nl_power,
                                coefficient=self.nl_coefficient)

    def solver_config(self) -> SolverConfig:
        return SolverConfig(self.method, self.dt, self.t_final,
                            self.output_stride, self.picard_tol,
                            self.picard_max_iter)

    # -- flat key-value serialization ----------------------------------------

    def to_file(self, path):
        cp = configparser.ConfigParser()
        cp.optionxform = str  # recipe parameter names are case sensitive
        cp["experiment"] = {"scenario": self.scenario, "seed": str(self.seed)}
        cp["grid"] = {"dimension": str(self.dimension),
                      "extent": fmt(self.extent),
                      "num_points": str(self.num_points)}
        cp["solver"] = {"method": self.method, "dt": fmt(self.dt),
                        "t_final": fmt(self.t_final),
                        "output_stride": str(self.output_stride),
                        "picard_tol": fmt(self.picard_tol),
                        "picard_max_iter": str(self.picard_max_iter)}
        cp["nonlinearity"] = {"power": fmt(self.nl_power),
                              "coefficient": fmt(self.nl_coefficient)}
        cp["recipe"] = {"name": self.recipe,
                        **{k: fmt(float(v)) for k, v in self.recipe_params.items()}}
        cp["diagnostics"] = {
            "radii": ", ".join(fmt(r) for r in self.radii),
            "interval": ", ".join(fmt(v) for v in self.interval),
            "delta": fmt(self.delta), "min_width": fmt(self.min_width),
            "lift_t_start": fmt(self.lift_t_start), "l1_tol": fmt(self.l1_tol),
            "exterior_radii_from": fmt(self.exterior_radii_from),
            "fit_e_lo": fmt(self.fit_e_lo), "fit_e_hi": fmt(self.fit_e_hi)}
        cp["output"] = {"output_dir": self.output_dir,
                        "csv_stride": str(self.csv_stride),
                        "frame_times": ", ".join(fmt(t) for t in self.frame_times)}
        cp["thresholds"] = {k: fmt(v) for k, v in asdict(self.thresholds).items()}
        with open(path, "w", encoding="utf-8") as fh:
            cp.write(fh)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        cp = configparser.ConfigParser()
        cp.optionxform = str  # recipe parameter names are case sensitive
        read = cp.read(path)
        if not read:
            raise FileNotFoundError(f"config file {path} not found or unreadable")
        if "experiment" not in cp or "scenario" not in cp["experiment"]:
            raise ValueError(f"{path}: missing [experiment] scenario key")
        scenario = cp["experiment"]["scenario"]
        cfg = default_config(scenario)

        def opt(section, key, cast, current):
            if section in cp and key in cp[section]:
                return cast(cp[section][key])
            return current

        def tuple_of_floats(text):
            text = text.strip()
            if not text:
                return ()
            return tuple(float(v) for v in text.split(","))

        cfg.seed = opt("experiment", "seed", int, cfg.seed)
        cfg.dimension = opt("grid", "dimension", int, cfg.dimension)
        cfg.extent = opt("grid", "extent", float, cfg.extent)
        cfg.num_points = opt("grid", "num_points", int, cfg.num_points)
        cfg.method = opt("solver", "method", str, cfg.method)
        cfg.dt = opt("solver", "dt", float, cfg.dt)
        cfg.t_final = opt("solver", "t_final", float, cfg.t_final)
        cfg.output_stride = opt("solver", "output_stride", int, cfg.output_stride)
        cfg.picard_tol = opt("solver", "picard_tol", float, cfg.picard_tol)
        cfg.picard_max_iter = opt("solver", "picard_max_iter", int,
                                  cfg.picard_max_iter)
        cfg.nl_power = opt("nonlinearity", "power", float, cfg.nl_power)
        cfg.nl_coefficient = opt("nonlinearity", "coefficient", float,
                                 cfg.nl_coefficient)
        if "recipe" in cp:
            cfg.recipe = cp["recipe"].get("name", cfg.recipe)
            cfg.recipe_params = {k: float(v) for k, v in cp["recipe"].items()
                                 if k != "name"}
        cfg.radii = opt("diagnostics", "radii", tuple_of_floats, cfg.radii)
        cfg.interval = opt("diagnostics", "interval", tuple_of_floats, cfg.interval)
        cfg.delta = opt("diagnostics", "delta", float, cfg.delta)
        cfg.min_width = opt("diagnostics", "min_width", float, cfg.min_width)
        cfg.lift_t_start = opt("diagnostics", "lift_t_start", float,
                               cfg.lift_t_start)
        cfg.l1_tol = opt("diagnostics", "l1_tol", float, cfg.l1_tol)
        cfg.exterior_radii_from = opt("diagnostics", "exterior_radii_from",
                                      float, cfg.exterior_radii_from)
        cfg.fit_e_lo = opt("diagnostics", "fit_e_lo", float, cfg.fit_e_lo)
        cfg.fit_e_hi = opt("diagnostics", "fit_e_hi", float, cfg.fit_e_hi)
        cfg.output_dir = opt("output", "output_dir", str, cfg.output_dir)
        cfg.csv_stride = opt("output", "csv_stride", int, cfg.csv_stride)
        cfg.frame_times = opt("output", "frame_times", tuple_of_floats,
                              cfg.frame_times)
        if "thresholds" in cp:
            for key in asdict(cfg.thresholds):
                if key in cp["thresholds"]:
                    setattr(cfg.thresholds, key, float(cp["thresholds"][key]))
        cfg.__post_init__()
        return cfg


def default_config(scenario: str, output_dir: str | None = None
                   ) -> ExperimentConfig:
    """The scenario library: tuned defaults for each named experiment."""
    if scenario == "soliton_regression":
        cfg = ExperimentConfig(
            scenario=scenario, extent=20.0 * math.pi, num_points=2048,
            dt=1e-3, t_final=50.0, output_stride=50,
            recipe="exact_soliton", recipe_params={"E": 1.0},
            radii=(2.0, 5.0, 10.0, 20.0, 30.0), interval=(-0.8, 0.8),
            delta=2.0, min_width=0.5, csv_stride=25,
            frame_times=(0.0, 25.0, 50.0),
            thresholds=Thresholds(distance_drop=1.0))
    elif scenario == "incoming_lens":
        cfg = ExperimentConfig(
            scenario=scenario, extent=32.0 * math.pi, num_points=2048,
            dt=1e-3, t_final=20.0, output_stride=1,
            recipe="gaussian_lens",
            recipe_params={"b": 0.5, "width": 1.0, "amplitude": 0.8},
            radii=(2.0, 5.0, 10.0, 20.0, 40.0), interval=(-1.0, 1.0),
            delta=0.0, min_width=0.5, exterior_radii_from=10.0,
            csv_stride=500, frame_times=(0.0, 0.5, 20.0),
            thresholds=Thresholds(mass_drift=1e-9, energy_drift=1e-6))
    elif scenario == "flux_classifier":
        cfg = ExperimentConfig(
            scenario=scenario, extent=32.0 * math.pi, num_points=2048,
            dt=1e-3, t_final=20.0, output_stride=2,
            recipe="gaussian_lens",
            recipe_params={"b": 0.5, "width": 1.5, "amplitude": 0.6},
            radii=(3.0, 6.0, 12.0, 24.0, 48.0), interval=(-1.0, 1.0),
            delta=0.0, min_width=0.5, exterior_radii_from=12.0,
            csv_stride=250, frame_times=(0.0, 20.0),
            thresholds=Thresholds(mass_drift=1e-9, energy_drift=1e-6))
    elif scenario == "phase_slope_study":
        cfg = ExperimentConfig(
            scenario=scenario, extent=20.0 * math.pi, num_points=2048,
            dt=5e-4, t_final=50.0, output_stride=100,
            recipe="exact_soliton", recipe_params={"E": 1.0},
            radii=(2.0, 5.0, 10.0, 20.0, 30.0), interval=(-0.8, 0.8),
            delta=2.0, min_width=0.5, csv_stride=25,
            frame_times=(0.0, 50.0),
            thresholds=Thresholds(distance_drop=1.0))
    elif scenario == "identity_suite":
        cfg = ExperimentConfig(
            scenario=scenario, extent=20.0 * math.pi, num_points=2048,
            dt=1e-3, t_final=2.0, output_stride=5, nl_coefficient=0.0,
            recipe="custom_samples", recipe_params={},
            radii=(2.0, 5.0, 10.0, 20.0, 40.0), interval=(-2.0, 2.0),
            delta=10.0, min_width=0.5, csv_stride=10,
            frame_times=(0.0, 2.0),
            thresholds=Thresholds(mass_drift=1e-10, energy_drift=1e-7,
                                  splitting=1e-8))
    else:
        raise ValueError(f"unknown scenario {scenario!r}")
    if output_dir is not None:
        cfg.output_dir = output_dir
    else:
        cfg.output_dir = f"runs/{scenario}"
    return cfg


def perturbed_soliton_config(output_dir: str | None = None) -> ExperimentConfig:
    """The theorem-level consistency run: a soliton with a 5% incoming lens
    perturbation, evolved long enough for the amplitude to relax onto the
    fitted profile and for the phase slope to agree with the fitted
    eigenvalue.

    Flux-balance and energy thresholds are looser than on the dedicated
    conservation runs: this configuration keeps a sparse snapshot stride, so
    the trapezoid time integral of the flux is the limiting error.
    """
    cfg = default_config("soliton_regression", output_dir)
    cfg.recipe = "lens_soliton"
    cfg.recipe_params = {"E": 1.0, "b": 0.02,
                         "perturb_amplitude": 0.05, "perturb_width": 2.0}
    cfg.thresholds = Thresholds(mass_drift=1e-9, energy_drift=1e-6,
                                flux_balance=1e-4, distance_drop=10.0,
                                e_gap=1e-2)
    if output_dir is None:
        cfg.output_dir = "runs/perturbed_soliton"
    return cfg


def random_smooth_field(grid: RadialGrid, seed: int) -> np.ndarray:
    """Band-limited random data for the identity suite: a strictly positive
    envelope (sum of Gaussian humps) under a smooth random phase.

    Keeping the envelope free of interference dips makes the modulus a
    resolved smooth function, so the kinetic-splitting identity is testable
    on every snapshot; the long-wavelength phase still drives a nontrivial
    current."""
    rng = np.random.default_rng(seed)
    x = grid.nodes
    envelope = np.zeros(grid.num_points)
    for _ in range(3):
        center = rng.uniform(-0.08, 0.08) * grid.r_max
        width = rng.uniform(2.5, 4.0)
        amp = rng.uniform(0.3, 1.0)
        envelope += amp * np.exp(-((x - center) ** 2) / (2 * width**2))
    phase = rng.uniform(-0.8, 0.8) * x
    for _ in range(2):
        wavelength = rng.uniform(8.0, 20.0)
        phase += rng.uniform(-0.5, 0.5) * np.sin(2 * np.pi * x / wavelength
                                                 + rng.uniform(0, 2 * np.pi))
    return envelope * np.exp(1j * phase)


# ----------------------------------------------------------------------------
# flux classifier
# ----------------------------------------------------------------------------

def _significant_signs(times: np.ndarray, flux_r: np.ndarray,
                       l1_tol: float) -> list[int]:
    """Condensed sign pattern of one radius' flux history after dropping
    excursions whose |time integral| is within the l1 budget."""
    signs = np.sign(flux_r)
    pattern = []
    k = 0
    n = flux_r.size
    while k < n:
        s = signs[k]
        j = k
        while j + 1 < n and signs[j + 1] == s:
            j += 1
        if s != 0:
            seg = slice(max(k - 1, 0), min(j + 2, n))  # include the crossings
            weight = abs(np.trapezoid(np.clip(flux_r[seg], None, 0.0)
                                      if s < 0 else
                                      np.clip(flux_r[seg], 0.0, None),
                                      times[seg]))
            if weight > l1_tol:
                if not pattern or pattern[-1] != s:
                    pattern.append(int(s))
        k = j + 1
    return pattern


def classify_flux(series: FluxSeries, l1_tol: float) -> str:
    """Sign-pattern verdict over all sampled radii (outward-normal signs).

    Excursions with time integral up to l1_tol are ignored ('up to L1(dt)
    corrections').  always_incoming: every radius stays <= 0.
    incoming_then_outgoing: every radius shows at most one sign change, and
    only from - to +.  Anything else is mixed.
    """
    if series.flux.size == 0:
        raise ValueError("empty flux series")
    if l1_tol < 0.0:
        raise ValueError("l1_tol must be >= 0")
    all_incoming = True
    all_single_switch = True
    for i in range(series.radii.size):
        pattern = _significant_signs(series.times, series.flux[:, i], l1_tol)
        if any(s > 0 for s in pattern):
            all_incoming = False
        if pattern not in ([], [-1], [1], [-1, 1]):
            all_single_switch = False
    if all_incoming:
        return "always_incoming"
    if all_single_switch:
        return "incoming_then_outgoing"
    return "mixed"


def restrict_radii(series: FluxSeries, r_from: float) -> FluxSeries:
    """Sub-series of the radii >= r_from (used for exterior-only verdicts)."""
    sel = series.radii >= r_from
    if not sel.any():
        raise ValueError(f"no sampled radii at or beyond {r_from}")
    return FluxSeries(series.radii[sel], series.times, series.flux[:, sel],
                      series.cumulative[:, sel], series.ball_mass[:, sel],
                      series.mass_total, series.iwc_horizon,
                      series.iwc_bound_ok, series.stride_warning)


# ----------------------------------------------------------------------------
# CSV writers (17 significant digits, byte-deterministic)
# ----------------------------------------------------------------------------

def write_csv(path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) if isinstance(v, float) else str(v)
                              for v in row) + "\n")


def write_trajectory_csv(path, traj: Trajectory, csv_stride: int) -> None:
    """Columns t, r, re_psi, im_psi in time-outer row-major order, decimated
    to every csv_stride-th snapshot (first and last always included)."""
    keep = sorted(set(range(0, len(traj), csv_stride)) | {len(traj) - 1})
    x = traj.grid.nodes
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,r,re_psi,im_psi\n")
        for k in keep:
            snap = traj.snapshots[k]
            t = fmt(snap.time)
            for j in range(x.size):
                fh.write(f"{t},{fmt(x[j])},{fmt(snap.values[j].real)},"
                         f"{fmt(snap.values[j].imag)}\n")


def write_conserved_csv(path, traj: Trajectory) -> None:
    rows = ((snap.time, c.mass, c.energy, c.variance, c.dilation, c.h1_norm)
            for snap, c in zip(traj.snapshots, traj.conserved))
    write_csv(path, ["t", "mass", "energy", "variance", "dilation", "h1"], rows)


def write_flux_csv(path, series: FluxSeries) -> None:
    def rows():
        for k, t in enumerate(series.times):
            for i, r in enumerate(series.radii):
                yield (float(t), float(r), float(series.flux[k, i]),
                       float(series.cumulative[k, i]))
    write_csv(path, ["t", "R", "flux", "cumulative"], rows())


def write_ballmass_csv(path, series: FluxSeries) -> None:
    def rows():
        for k, t in enumerate(series.times):
            for i, r in enumerate(series.radii):
                yield (float(t), float(r), float(series.ball_mass[k, i]))
    write_csv(path, ["t", "R", "mass_in_ball"], rows())


def write_frame_csv(path, frame) -> None:
    rows = ((float(r), float(e), float(d), float(j), float(v), int(m))
            for r, e, d, j, v, m in zip(frame.grid.nodes, frame.eta, frame.rho,
                                        frame.current, frame.velocity,
                                        frame.zero_set_mask))
    write_csv(path, ["r", "eta", "rho", "current", "velocity", "mask"], rows)


def write_phase_csv(path, sheet, csv_stride: int) -> None:
    keep = sorted(set(range(0, sheet.times.size, csv_stride))
                  | {sheet.times.size - 1})
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,r,theta\n")
        for k in keep:
            t = fmt(float(sheet.times[k]))
            for i, r in enumerate(sheet.radii):
                fh.write(f"{t},{fmt(float(r))},{fmt(float(sheet.theta[k, i]))}\n")


def _json_native(o):
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def write_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, allow_nan=False,
                  default=_json_native)
        fh.write("\n")


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


# ----------------------------------------------------------------------------
# run pipeline
# ----------------------------------------------------------------------------

class StageError(RuntimeError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class RunReport:
    """Machine-readable outcome of one run (serialized as report.json)."""

    scenario: str
    checks: dict
    metrics: dict
    stages_completed: list
    stages_skipped: dict

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def run(config: ExperimentConfig, stage_until: str | None = None) -> RunReport:
    """Execute the configured scenario pipeline, writing all artifacts.

    Deterministic for a fixed config and seed.  On stage failure the partial
    artifacts are kept and the MANIFEST marks the run incomplete; the failure
    is re-raised as StageError naming the stage.
    """
    if stage_until is not None and stage_until not in STAGES:
        raise ValueError(f"unknown stage {stage_until!r}; expected one of {STAGES}")
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    config.to_file(out / "config.cfg")

    grid = config.grid()
    nl = config.nonlinearity()
    metrics: dict = {"mass0": None}
    checks: dict = {}
    completed: list = []
    skipped: dict = {}
    artifacts = ["config.cfg"]
    thr = config.thresholds

    def manifest(complete: bool, failed_stage: str | None = None):
        payload = {"scenario": config.scenario, "complete": complete,
                   "stages_completed": completed, "stages_skipped": skipped,
                   "artifacts": sorted(artifacts)}
        if failed_stage:
            payload["failed_stage"] = failed_stage
        write_json(out / "MANIFEST", payload)

    state: dict = {}
    try:
        for stage in STAGES:
            _run_stage(stage, config, grid, nl, out, state, metrics, checks,
                       skipped, artifacts)
            completed.append(stage)
            if stage_until is not None and stage == stage_until:
                break
    except Exception as exc:
        manifest(False, failed_stage=_current_stage(completed))
        raise StageError(_current_stage(completed), exc) from exc

    manifest(True)
    report = RunReport(config.scenario, checks, metrics, completed, skipped)
    write_json(out / "report.json", {
        "scenario": report.scenario,
        "checks": report.checks,
        "metrics": {k: _json_safe(v) for k, v in report.metrics.items()},
        "stages_completed": report.stages_completed,
        "stages_skipped": report.stages_skipped,
        "passed": report.passed,
        "thresholds": asdict(thr)})
    artifacts.append("report.json")
    manifest(True)
    return report


def _current_stage(completed: list) -> str:
    order = list(STAGES)
    if not completed:
        return order[0]
    last = order.index(completed[-1])
    return order[min(last + 1, len(order) - 1)]


def _run_stage(stage, config, grid, nl, out, state, metrics, checks,
               skipped, artifacts):
    thr = config.thresholds
    if stage == "evolve":
        if config.recipe == "custom_samples":
            params = dict(config.recipe_params)
            params["values"] = random_smooth_field(grid, config.seed)
            initial = make_initial_condition("custom_samples", params, grid)
        else:
            initial = make_initial_condition(config.recipe,
                                             config.recipe_params, grid)
        traj = evolve(initial, nl, config.solver_config())
        state["traj"] = traj
        mass0 = traj.conserved[0].mass
        metrics["mass0"] = mass0
        mass = np.array([c.mass for c in traj.conserved])
        energy = np.array([c.energy for c in traj.conserved])
        metrics["mass_drift"] = float(np.max(np.abs(mass - mass[0])) / mass[0])
        metrics["energy_drift"] = float(
            np.max(np.abs(energy - energy[0])) / abs(energy[0]))
        checks["mass_drift"] = metrics["mass_drift"] <= thr.mass_drift
        checks["energy_drift"] = metrics["energy_drift"] <= thr.energy_drift
        write_trajectory_csv(out / "trajectory.csv", traj, config.csv_stride)
        write_conserved_csv(out / "conserved.csv", traj)
        artifacts.extend(["trajectory.csv", "conserved.csv"])

    elif stage == "hydro":
        traj = state["traj"]
        iwc_rows = []
        split_rows = []
        worst_split = 0.0
        for snap in traj.snapshots:
            frame = hydro_frame(snap)
            worst, ok = iwc_indicator(frame)
            iwc_rows.append((snap.time, worst, int(ok)))
            nodeless = is_nodeless(frame)
            if nodeless:
                g2, ge2, ev2, rel = kinetic_splitting(snap)
                worst_split = max(worst_split, rel)
            else:
                g2 = ge2 = ev2 = rel = float("nan")
            split_rows.append((snap.time, g2, ge2, ev2, rel, int(nodeless)))
        write_csv(out / "iwc.csv", ["t", "worst", "satisfied"], iwc_rows)
        write_csv(out / "splitting.csv",
                  ["t", "grad_psi_sq", "grad_eta_sq", "eta_v_sq",
                   "rel_error", "nodeless"], split_rows)
        artifacts.extend(["iwc.csv", "splitting.csv"])
        metrics["splitting_worst"] = worst_split
        metrics["iwc_initial_ok"] = bool(iwc_rows[0][2])
        checks["splitting"] = worst_split <= thr.splitting
        for t_want in config.frame_times:
            k = int(np.argmin(np.abs(traj.times - t_want)))
            name = f"frame_{k:06d}.csv"
            write_frame_csv(out / name, hydro_frame(traj.snapshots[k]))
            artifacts.append(name)

    elif stage == "flux":
        traj = state["traj"]
        if not config.radii:
            skipped["flux"] = "no diagnostic radii configured"
            return
        series = flux_series(traj, np.array(config.radii))
        state["series"] = series
        write_flux_csv(out / "flux.csv", series)
        write_ballmass_csv(out / "ballmass.csv", series)
        artifacts.extend(["flux.csv", "ballmass.csv"])
        mass0 = series.mass_total
        metrics["flux_balance_error"] = series.balance_error()
        metrics["flux_balance_rel"] = series.balance_error() / mass0
        metrics["iwc_horizon_time"] = float(
            series.times[min(series.iwc_horizon, len(series.times) - 1)])
        metrics["iwc_bound_ok"] = series.iwc_bound_ok
        metrics["stride_warning"] = series.stride_warning
        checks["flux_balance"] = metrics["flux_balance_rel"] <= thr.flux_balance
        checks["iwc_bound"] = series.iwc_bound_ok
        l1_tol = config.l1_tol if config.l1_tol > 0 else 1e-3 * mass0
        metrics["l1_tol"] = l1_tol
        metrics["flux_verdict"] = classify_flux(series, l1_tol)
        try:
            exterior = restrict_radii(series, config.exterior_radii_from)
            metrics["flux_verdict_exterior"] = classify_flux(exterior, l1_tol)
        except ValueError:
            metrics["flux_verdict_exterior"] = None
        # finite-horizon surrogate for integrable flux: report the tail trend
        tail = np.abs(series.flux[-max(2, len(traj) // 10):]).max()
        metrics["flux_tail_sup"] = float(tail)

    elif stage == "boxes":
        traj = state["traj"]
        delta = config.delta
        if delta <= 0.0:
            sel = ((traj.grid.nodes >= config.interval[0])
                   & (traj.grid.nodes <= config.interval[1]))
            late = np.abs(traj.snapshots[-1].values[sel])
            delta = 0.5 * float(late.max()) if late.size else 0.0
        metrics["box_delta"] = delta
        boxes = find_good_boxes(traj, delta, config.min_width,
                                config.lift_t_start) if delta > 0 else []
        state["boxes"] = boxes
        metrics["num_boxes"] = len(boxes)
        if not boxes:
            skipped["lift"] = skipped["slope"] = skipped["residuals"] = \
                skipped["profile"] = "no stable box at the configured floor"

    elif stage == "lift":
        if "lift" in skipped:
            return
        traj = state["traj"]
        boxes = state["boxes"]
        mid = 0.5 * (config.interval[0] + config.interval[1])
        box = min(boxes, key=lambda b: abs(0.5 * (b.interval[0]
                                                  + b.interval[1]) - mid))
        sheet = lift_phase(traj, box)
        state["sheet"] = sheet
        write_phase_csv(out / "phase.csv", sheet, config.csv_stride)
        artifacts.append("phase.csv")
        metrics["box_interval"] = list(box.interval)
        metrics["reconstruction_error"] = reconstruction_error(sheet, traj)
        metrics["max_plaquette_winding"] = int(
            np.abs(sheet.plaquette_windings()).max())
        checks["reconstruction"] = (metrics["reconstruction_error"]
                                    <= thr.reconstruction)
        checks["plaquettes"] = metrics["max_plaquette_winding"] == 0

    elif stage == "slope":
        if "slope" in skipped:
            return
        ps = phase_slope(state["sheet"])
        metrics["E_hat"] = ps.E_hat
        metrics["r_spread"] = ps.r_spread
        metrics["slope_fit_residual"] = ps.fit_residual
        metrics["slope_fit_ok"] = ps.fit_ok
        metrics["periods_covered"] = ps.periods_covered

    elif stage == "residuals":
        if "residuals" in skipped:
            return
        traj = state["traj"]
        sheet = state["sheet"]
        res_a, res_b = polar_residuals(sheet, traj, nl)
        metrics["res_a"] = res_a
        metrics["res_b"] = res_b
        phi = bump_on_box(sheet)
        ident = theta_average_identity(sheet, traj, nl, phi)
        metrics["identity_lhs"] = ident.lhs
        metrics["identity_rhs"] = ident.rhs
        metrics["identity_gradient_term"] = ident.gradient_term
        write_json(out / "diagnostics.json", {
            "E_hat": _json_safe(metrics.get("E_hat")),
            "r_spread": _json_safe(metrics.get("r_spread")),
            "res_a": res_a, "res_b": res_b,
            "identity_lhs": ident.lhs, "identity_rhs": ident.rhs,
            "identity_gradient_term": ident.gradient_term,
            "gradient_term_samples": list(ident.gradient_term_samples),
            "periods_covered": _json_safe(metrics.get("periods_covered")),
            "slope_fit_ok": metrics.get("slope_fit_ok")})
        artifacts.append("diagnostics.json")

    elif stage == "profile":
        if "profile" in skipped:
            return
        traj = state["traj"]
        interval = config.interval
        if grid.dimension == 3 and interval[0] < 0:
            interval = (max(grid.spacing, 0.0), interval[1])
        quarter = max(2, len(traj) // 4)
        fits = []
        for snap in traj.snapshots[-quarter:]:
            eta = np.abs(snap.values)
            try:
                fits.append(fit_profile(eta, nl, grid, interval,
                                        (config.fit_e_lo, config.fit_e_hi)))
            except Exception:
                fits.append((float("nan"), float("nan")))
        e_fits = np.array([f[0] for f in fits])
        if not np.isfinite(e_fits).any():
            skipped["profile"] = "profile fit found no bracket on any late snapshot"
            return
        e_fit = float(np.nanmedian(e_fits))
        metrics["E_fit"] = e_fit
        metrics["fit_distance_final"] = fits[-1][1]
        target = scaled_profile(e_fit, nl, grid)
        write_csv(out / "profile.csv", ["r", "u"],
                  zip(map(float, grid.nodes), map(float, target.u)))
        write_json(out / "profile.json", {
            "E": target.energy_param,
            "ode_residual": _json_safe(target.ode_residual),
            "node_count": target.node_count,
            "u0": target.u0})
        artifacts.extend(["profile.csv", "profile.json"])
        dist_rows = []
        for snap in traj.snapshots:
            d = profile_distance(np.abs(snap.values), target, interval, "l2")
            dist_rows.append((snap.time, d))
        write_csv(out / "distances.csv", ["t", "distance"], dist_rows)
        artifacts.append("distances.csv")
        dists = np.array([d for _, d in dist_rows])
        metrics["distance_max"] = float(dists.max())
        metrics["distance_final"] = float(dists[-1])
        drop = float(dists.max() / dists[-1]) if dists[-1] > 0 else float("inf")
        metrics["distance_drop"] = float(min(drop, 1e300))
        soliton_run = config.recipe in ("exact_soliton", "lens_soliton")
        if soliton_run:
            checks["distance_drop"] = drop >= thr.distance_drop
        e_hat = metrics.get("E_hat")
        if e_hat is not None and e_fit > 0:
            gap = abs(e_hat - e_fit) / e_fit
            metrics["e_gap"] = gap
            if soliton_run:
                checks["e_gap"] = gap <= thr.e_gap

    elif stage == "report":
        return  # assembled by run() after the loop


# ----------------------------------------------------------------------------
# report regeneration from saved artifacts
# ----------------------------------------------------------------------------

def regenerate_report(run_dir) -> dict:
    """Recompute the pass/fail verdicts of a finished run from its artifacts
    alone (conserved.csv, flux.csv, ballmass.csv, report.json metrics).

    Returns {'checks': ..., 'passed': ..., 'consistent': bool} where
    consistent says the recomputed verdicts match the stored report.
    """
    run_dir = Path(run_dir)
    stored = json.loads((run_dir / "report.json").read_text())
    cfg = ExperimentConfig.from_file(run_dir / "config.cfg")
    thr = cfg.thresholds
    checks = dict(stored["checks"])

    conserved = np.genfromtxt(run_dir / "conserved.csv", delimiter=",",
                              names=True)
    mass = np.atleast_1d(conserved["mass"])
    energy = np.atleast_1d(conserved["energy"])
    checks["mass_drift"] = bool(
        np.max(np.abs(mass - mass[0])) / mass[0] <= thr.mass_drift)
    checks["energy_drift"] = bool(
        np.max(np.abs(energy - energy[0])) / abs(energy[0]) <= thr.energy_drift)

    flux_path = run_dir / "flux.csv"
    if flux_path.exists() and "flux_balance" in checks:
        flux = np.genfromtxt(flux_path, delimiter=",", names=True)
        ball = np.genfromtxt(run_dir / "ballmass.csv", delimiter=",",
                             names=True)
        radii = np.unique(flux["R"])
        err = 0.0
        for r in radii:
            sel = flux["R"] == r
            cum = flux["cumulative"][sel]
            m = ball["mass_in_ball"][np.atleast_1d(ball["R"]) == r]
            err = max(err, float(np.max(np.abs(2.0 * cum + (m - m[0])))))
        checks["flux_balance"] = bool(err / mass[0] <= thr.flux_balance)

    passed = all(checks.values())
    return {"checks": checks, "passed": passed,
            "consistent": checks == stored["checks"]
            and passed == stored["passed"]}
