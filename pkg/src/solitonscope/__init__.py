"""Radial NLS simulation with hydrodynamic, flux and phase diagnostics."""

from .core import (ConservedSet, NonlinearitySpec, RadialGrid, WaveField,
                   conserved_set, make_initial_condition,
                   soliton_profile_closed_form, weighted_norm)
from .hydro import (FluxSeries, HydroFrame, flux_series, flux_limit_checks,
                    hydro_frame, iwc_indicator, kinetic_splitting,
                    velocity_decay_on_interval)
from .phase import (GoodBox, PhaseSheet, find_good_boxes, lift_phase,
                    phase_slope, polar_residuals, theta_average_identity)
from .profile import (SolitonProfile, fit_profile, profile_distance,
                      solve_profile_1d, solve_profile_3d, weak_form_residuals)
from .solver import SolverConfig, Trajectory, evolve, step_once
from .experiment import ExperimentConfig, classify_flux, default_config, run

__version__ = "0.1.0"

__all__ = [
    "ConservedSet", "NonlinearitySpec", "RadialGrid", "WaveField",
    "conserved_set", "make_initial_condition", "soliton_profile_closed_form",
    "weighted_norm", "FluxSeries", "HydroFrame", "flux_series",
    "flux_limit_checks", "hydro_frame", "iwc_indicator", "kinetic_splitting",
    "velocity_decay_on_interval", "GoodBox", "PhaseSheet", "find_good_boxes",
    "lift_phase", "phase_slope", "polar_residuals", "theta_average_identity",
    "SolitonProfile", "fit_profile", "profile_distance", "solve_profile_1d",
    "solve_profile_3d", "weak_form_residuals", "SolverConfig", "Trajectory",
    "evolve", "step_once", "ExperimentConfig", "classify_flux",
    "default_config", "run",
]
