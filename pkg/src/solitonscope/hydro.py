"""Hydrodynamic observables: density, current, velocity, sphere flux, IWC.

The current J = -(i/2)(psi* grad psi - psi grad psi*) = Im(psi* grad psi) is
computed with the solver's own derivative operator, so the discrete
continuity equation pairs exactly with the ball-mass quadrature used in the
flux checks:

* 1D: spectral current at the nodes; mass in [-R, R] from the spectral
  antiderivative of rho.  The two-point sphere {-R, +R} carries flux
  J(R) - J(-R) (outward normals, c_1 = 1 per side).
* 3D: the Crank-Nicolson scheme conserves 4 pi dr sum |w_j|^2 cell-wise with
  flux (4 pi / dr) Im(w_j* w_{j+1}) through the half-node sphere r_{j+1/2};
  fluxes are sampled on those half-nodes and interpolated between them.

Sign convention: outward normal, so the incoming-wave condition reads
eta^2 (r_hat . v) <= 0 and cumulative flux is non-increasing under IWC.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .core import RadialGrid, WaveField, antiderivative_1d, gradient
from .solver import Trajectory

EPS_ZERO_RELATIVE = 1e-12   # zero-set mask threshold relative to max rho
IWC_TOL_RELATIVE = 1e-12    # indicator tolerance relative to max |flux density|


# ----------------------------------------------------------------------------
# single-snapshot observables
# ----------------------------------------------------------------------------

@dataclass
class HydroFrame:
    """Real observables of one snapshot: eta = |psi|, rho = eta^2, radial
    current J, velocity v = J/rho zero-extended over the masked zero set."""

    grid: RadialGrid
    time: float
    eta: np.ndarray
    rho: np.ndarray
    current: np.ndarray
    velocity: np.ndarray
    zero_set_mask: np.ndarray


def radial_current(field: WaveField) -> np.ndarray:
    """Radial component of J at the nodes, solver-consistent (see module doc)."""
    grid = field.grid
    psi = field.values
    if grid.dimension == 1:
        return np.imag(np.conj(psi) * gradient(psi, grid))
    w = grid.nodes * psi
    g = np.imag(np.conj(w[:-1]) * w[1:])  # half-node pairing
    current = np.zeros(grid.num_points)
    r = grid.nodes
    current[1:-1] = (g[:-1] + g[1:]) / (2.0 * grid.spacing * r[1:-1] ** 2)
    return current


def hydro_frame(field: WaveField, eps_zero: float | None = None) -> HydroFrame:
    """Madelung variables of one snapshot.

    eps_zero masks the numerical zero set (default 1e-12 * max rho); velocity
    is J/rho off the mask and 0 on it.
    """
    rho = np.abs(field.values) ** 2
    if eps_zero is None:
        eps_zero = EPS_ZERO_RELATIVE * float(rho.max()) if rho.any() else 0.0
    elif eps_zero <= 0.0:
        raise ValueError("eps_zero must be positive")
    mask = rho < eps_zero
    current = radial_current(field)
    velocity = np.zeros_like(current)
    with np.errstate(divide="ignore", invalid="ignore"):
        np.divide(current, rho, out=velocity, where=~mask)
    return HydroFrame(field.grid, field.time, np.sqrt(rho), rho, current,
                      velocity, mask)


def outward_flux_density(frame: HydroFrame) -> np.ndarray:
    """eta^2 r_hat . v at the nodes (the IWC integrand; <= 0 when incoming)."""
    if frame.grid.dimension == 1:
        return np.sign(frame.grid.nodes) * frame.current
    return frame.current.copy()


def iwc_indicator(frame: HydroFrame, iwc_tol: float | None = None
                  ) -> tuple[float, bool]:
    """worst = max over nodes of eta^2 r_hat.v; satisfied when <= tolerance
    (default 1e-12 * max |flux density|)."""
    signed = outward_flux_density(frame)
    worst = float(signed.max()) if signed.size else 0.0
    if iwc_tol is None:
        iwc_tol = IWC_TOL_RELATIVE * float(np.abs(signed).max())
    return worst, worst <= iwc_tol


def is_nodeless(field_or_frame, floor: float = 1e-8,
                curvature_limit: float = 0.25) -> bool:
    """True when the snapshot has no interior (near-)node and its amplitude
    is resolved on the grid.

    Two conditions: (a) the near-zero set rho < floor * max rho touches only
    the domain ends (exponentially localized states always have sub-floor
    tails on a large grid, so a global minimum test would be vacuous --
    interior gaps are what rule out the splitting identity); (b) on the
    remaining nodes the relative second difference of eta stays below
    curvature_limit.  Interference dips produce modulus cusps whose width
    scales with the dip depth; once that width falls under the grid spacing
    the cell-wise curvature |eta_{j+1} - 2 eta_j + eta_{j-1}| / eta_j becomes
    O(1) and derivative-based identities lose accuracy.
    """
    if isinstance(field_or_frame, WaveField):
        rho = np.abs(field_or_frame.values) ** 2
        dim = field_or_frame.grid.dimension
    else:
        rho = field_or_frame.rho
        dim = field_or_frame.grid.dimension
    if not rho.any():
        return False
    low = rho < floor * rho.max()
    idx = np.flatnonzero(~low)
    interior_low = int(np.sum(low[idx[0]:idx[-1] + 1]))
    if interior_low > 0 or (dim == 3 and low[0]):
        return False
    eta = np.sqrt(rho)
    j = np.arange(max(idx[0], 1), min(idx[-1] + 1, eta.size - 1))
    if j.size == 0:
        return True
    curvature = np.abs(eta[j + 1] - 2.0 * eta[j] + eta[j - 1]) / eta[j]
    return bool(curvature.max() <= curvature_limit)


def kinetic_splitting(field: WaveField, eps_zero: float | None = None
                      ) -> tuple[float, float, float, float]:
    """Decomposition int |grad psi|^2 = int |grad eta|^2 + int eta^2 v^2.

    Returns (grad_psi_sq, grad_eta_sq, eta_v_sq, relative_error).  All three
    integrals use the solver derivative; the velocity part is summed off the
    zero-set mask only.
    """
    grid = field.grid
    frame = hydro_frame(field, eps_zero)
    grad_psi_sq = float(grid.integrate(np.abs(gradient(field.values, grid)) ** 2))
    grad_eta_sq = float(grid.integrate(gradient(frame.eta, grid) ** 2))
    ev2 = np.zeros_like(frame.rho)
    with np.errstate(divide="ignore", invalid="ignore"):
        np.divide(frame.current**2, frame.rho, out=ev2,
                  where=~frame.zero_set_mask)
    eta_v_sq = float(grid.integrate(ev2))
    rel = abs(grad_psi_sq - grad_eta_sq - eta_v_sq) / grad_psi_sq \
        if grad_psi_sq > 0.0 else 0.0
    return grad_psi_sq, grad_eta_sq, eta_v_sq, rel


# ----------------------------------------------------------------------------
# ball masses and sphere fluxes
# ----------------------------------------------------------------------------

def _flux_sample_points(grid: RadialGrid) -> np.ndarray:
    """Abscissae where the discrete flux is exactly paired with ball masses:
    nodes in 1D, half-nodes in 3D."""
    if grid.dimension == 1:
        return grid.nodes
    return grid.nodes[:-1] + 0.5 * grid.spacing


def _snapshot_flux(field: WaveField):
    """(sample points, sphere flux at them, ball mass at them)."""
    grid = field.grid
    if grid.dimension == 1:
        current = radial_current(field)
        primitive = antiderivative_1d(np.abs(field.values) ** 2, grid)
        return grid.nodes, current, primitive
    w = grid.nodes * field.values
    g = 4.0 * np.pi / grid.spacing * np.imag(np.conj(w[:-1]) * w[1:])
    mass_cum = 4.0 * np.pi * grid.spacing * np.cumsum(np.abs(w[:-1]) ** 2)
    return _flux_sample_points(grid), g, mass_cum


def ball_mass(field: WaveField, radius: float) -> float:
    """Mass inside the ball (1D: the interval [-R, R]), quadrature-paired
    with the discrete flux (spectral antiderivative / cell sums)."""
    grid = field.grid
    pts, _, primitive = _snapshot_flux(field)
    if grid.dimension == 1:
        return float(np.interp(radius, pts, primitive)
                     - np.interp(-radius, pts, primitive))
    return float(np.interp(radius, pts, primitive))


@dataclass
class FluxSeries:
    """Sphere flux per (snapshot time, radius), its running time integral,
    and the paired ball masses.

    flux[k, i] = c_n R_i^{n-1} eta^2 v . N_hat at time t_k (outward normal);
    cumulative is the trapezoid running integral over t; ball_mass[k, i] the
    mass inside radius R_i.  iwc_horizon counts the leading snapshots through
    which the IWC indicator holds.
    """

    radii: np.ndarray
    times: np.ndarray
    flux: np.ndarray
    cumulative: np.ndarray
    ball_mass: np.ndarray
    mass_total: float
    iwc_horizon: int
    iwc_bound_ok: bool
    stride_warning: bool = False

    def balance_error(self) -> float:
        """max over (T, R) of |2 cumulative + (ball_mass(T) - ball_mass(0))|.

        The continuity equation gives d/dt mass_ball = -2 * outward flux, so
        the time-integrated outward flux equals minus half the mass change.
        """
        change = self.ball_mass - self.ball_mass[0]
        return float(np.max(np.abs(2.0 * self.cumulative + change)))


def flux_series(traj: Trajectory, radii) -> FluxSeries:
    """Sample the sphere flux of every snapshot at the given radii.

    Radii must lie strictly inside the grid, sorted increasing.  Flux values
    are interpolated linearly between the exactly-paired sample abscissae.
    Also accumulates the IWC horizon and checks the cumulative-flux bound
    0 <= -cumulative <= mass(0)/2 + 1e-9 while the IWC holds.
    """
    radii = np.asarray(radii, dtype=float)
    grid = traj.grid
    if radii.size == 0 or np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be nonempty and strictly increasing")
    r_inner = 0.0 if grid.dimension == 3 else grid.nodes[0]
    if radii[0] <= max(r_inner, 0.0) or radii[-1] >= grid.r_max:
        raise ValueError(f"radii must lie strictly inside the grid "
                         f"({max(r_inner, 0.0):g}, {grid.r_max:g})")

    n_t, n_r = len(traj), radii.size
    flux = np.empty((n_t, n_r))
    masses = np.empty((n_t, n_r))
    iwc_ok = np.empty(n_t, dtype=bool)
    for k, snap in enumerate(traj.snapshots):
        pts, sampled, primitive = _snapshot_flux(snap)
        if grid.dimension == 1:
            flux[k] = (np.interp(radii, pts, sampled)
                       - np.interp(-radii, pts, sampled))
            masses[k] = (np.interp(radii, pts, primitive)
                         - np.interp(-radii, pts, primitive))
        else:
            flux[k] = np.interp(radii, pts, sampled)
            masses[k] = np.interp(radii, pts, primitive)
        iwc_ok[k] = iwc_indicator(hydro_frame(snap))[1]

    times = traj.times
    cumulative = np.zeros_like(flux)
    cumulative[1:] = cumulative_trapezoid(flux, times, axis=0)
    horizon = int(np.argmin(iwc_ok)) if not iwc_ok.all() else n_t
    mass0 = traj.conserved[0].mass
    bound_ok = True
    if horizon > 1:
        c = cumulative[:horizon]
        bound_ok = bool(np.all(-c >= -1e-9) and np.all(-c <= 0.5 * mass0 + 1e-9))
    jump = np.abs(np.diff(flux, axis=0))
    scale = np.abs(flux).max() if flux.size else 0.0
    stride_warning = bool(scale > 0 and jump.max() > 0.1 * scale)
    return FluxSeries(radii, times, flux, cumulative, masses, mass0,
                      horizon, bound_ok, stride_warning)


@dataclass
class FluxLimitReport:
    """Sup over time of |flux| at the innermost and outermost sampled radii
    (discrete stand-ins for the no-flux-at-origin / at-infinity statements)."""

    sup_inner: float
    sup_outer: float
    tol: float
    passed: bool


def flux_limit_checks(series: FluxSeries, tol: float | None = None
                      ) -> FluxLimitReport:
    sup_inner = float(np.abs(series.flux[:, 0]).max())
    sup_outer = float(np.abs(series.flux[:, -1]).max())
    if tol is None:
        tol = 1e-6 * float(np.abs(series.flux).max())
    return FluxLimitReport(sup_inner, sup_outer, tol,
                           sup_inner <= tol and sup_outer <= tol)


# ----------------------------------------------------------------------------
# velocity decay on an interval
# ----------------------------------------------------------------------------

@dataclass
class VelocityDecaySeries:
    """||chi_I v||_{L2(I)} per snapshot with its running time average."""

    times: np.ndarray
    norms: np.ndarray
    running_mean: np.ndarray
    floor_ok: np.ndarray
    delta: float

    @property
    def floor_violated(self) -> bool:
        return not bool(self.floor_ok.all())


def velocity_decay_on_interval(traj: Trajectory, interval: tuple[float, float],
                               delta: float) -> VelocityDecaySeries:
    """L2(I) norm of the velocity per snapshot on a positivity interval.

    delta > 0 is the amplitude floor the interval must maintain; snapshots
    where min eta < delta are flagged (series still returned).
    """
    if delta <= 0.0:
        raise ValueError("positivity floor delta must be > 0")
    grid = traj.grid
    x = grid.nodes
    sel = (x >= interval[0]) & (x <= interval[1])
    if not sel.any():
        raise ValueError(f"interval {interval} contains no grid nodes")
    w = grid.weights[sel]
    norms = np.empty(len(traj))
    floor_ok = np.empty(len(traj), dtype=bool)
    for k, snap in enumerate(traj.snapshots):
        frame = hydro_frame(snap)
        norms[k] = math.sqrt(float(np.sum(w * frame.velocity[sel] ** 2)))
        floor_ok[k] = bool(frame.eta[sel].min() >= delta)
    times = traj.times
    running = np.zeros_like(norms)
    if len(traj) > 1:
        running[1:] = cumulative_trapezoid(norms, times) / (times[1:] - times[0])
    running[0] = norms[0]
    return VelocityDecaySeries(times, norms, running, floor_ok, delta)
