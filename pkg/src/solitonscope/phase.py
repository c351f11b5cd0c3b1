"""Continuous phase on vortex-free space-time boxes and its diagnostics.

On a good box (density floor eta >= delta/2) the unit field psi/|psi| lifts
to a continuous phase theta with psi = eta * exp(-i theta), unique up to a
global 2 pi integer fixed at a reference point.  The lift is a row-major
unwrap (space first at the earliest time, then each node forward in time);
every elementary space-time plaquette must carry zero winding, which is the
computable content of the box having trivial fundamental group.

Diagnostics: residuals of the polar-form evolution equations

    (a)  d eta / dt = 2 grad(eta).grad(theta) + eta Lap(theta)
    (b)  -Lap(eta) + F(eta) eta = (d theta/dt) eta - eta |grad theta|^2,

the phase slope theta(r0, t)/t -> -E with its spread across radii, and the
time-averaged weak identity that drives the limiting profile equation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import NonlinearitySpec, gradient, laplacian
from .solver import Trajectory

TWO_PI = 2.0 * math.pi
JUMP_GUARD = math.pi - 0.1  # adjacent-sample jumps beyond this abort the lift


class PhaseLiftError(RuntimeError):
    """Raised when the phase cannot be lifted consistently on the box."""


@dataclass(frozen=True)
class GoodBox:
    """Space-time rectangle [r_lo, r_hi] x [t_start, t_end] with density floor
    delta: every sampled eta inside is >= delta/2."""

    interval: tuple[float, float]
    t_start: float
    t_end: float
    delta: float
    reference: tuple[float, float]

    def __post_init__(self):
        if self.delta <= 0.0:
            raise ValueError("density floor delta must be positive")
        if not self.interval[0] < self.interval[1]:
            raise ValueError("empty box interval")
        if not (self.interval[0] <= self.reference[0] <= self.interval[1]):
            raise ValueError("reference radius must lie in the box interval")

    @property
    def width(self) -> float:
        return self.interval[1] - self.interval[0]

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


def _box_indices(traj: Trajectory, box: GoodBox):
    grid = traj.grid
    x = grid.nodes
    node_sel = np.flatnonzero((x >= box.interval[0] - 1e-12)
                              & (x <= box.interval[1] + 1e-12))
    times = traj.times
    time_sel = np.flatnonzero((times >= box.t_start - 1e-12)
                              & (times <= box.t_end + 1e-12))
    if node_sel.size < 3 or time_sel.size < 2:
        raise ValueError("box does not contain enough grid samples")
    return node_sel, time_sel


def find_good_boxes(traj: Trajectory, delta: float, min_width: float,
                    t_start: float = 0.0) -> list[GoodBox]:
    """Maximal node runs on which every snapshot with t >= t_start keeps
    eta >= delta/2; returned as disjoint boxes sorted by r_lo.

    In 3D the origin node is excluded (boxes must avoid r = 0).  The box time
    extent runs from the first snapshot at or after t_start to the last
    snapshot.  The reference point sits at the box mid-radius, t_start.
    """
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    grid = traj.grid
    times = traj.times
    sel = times >= t_start - 1e-12
    if not sel.any():
        return []
    eta_min = None
    for snap, use in zip(traj.snapshots, sel):
        if not use:
            continue
        eta = np.abs(snap.values)
        eta_min = eta if eta_min is None else np.minimum(eta_min, eta)
    good = eta_min >= 0.5 * delta
    if grid.dimension == 3:
        good[0] = False
    t0 = float(times[sel][0])
    t1 = float(times[-1])
    x = grid.nodes
    boxes = []
    run_start = None
    for j in range(grid.num_points + 1):
        inside = j < grid.num_points and good[j]
        if inside and run_start is None:
            run_start = j
        elif not inside and run_start is not None:
            r_lo, r_hi = float(x[run_start]), float(x[j - 1])
            if r_hi - r_lo >= min_width:
                ref_node = x[(run_start + j - 1) // 2]
                boxes.append(GoodBox((r_lo, r_hi), t0, t1, delta,
                                     (float(ref_node), t0)))
            run_start = None
    return boxes


# ----------------------------------------------------------------------------
# lifting
# ----------------------------------------------------------------------------

def _wrap(d: np.ndarray) -> np.ndarray:
    """Principal value of phase differences in (-pi, pi]."""
    return d - TWO_PI * np.round(d / TWO_PI)


@dataclass
class PhaseSheet:
    """Unwrapped continuous theta[time, node] on a good box (psi = eta e^{-i theta}).

    branch_ref is the principal-value choice at the reference point; times,
    radii and eta carry the box sampling so diagnostics need not re-slice the
    trajectory.
    """

    box: GoodBox
    theta: np.ndarray
    branch_ref: float
    times: np.ndarray
    radii: np.ndarray
    eta: np.ndarray

    def plaquette_windings(self) -> np.ndarray:
        """Winding number of every elementary space-time plaquette, from the
        wrapped phase differences around its boundary.  All zero on a lift."""
        th = self.theta
        dx = _wrap(th[:, 1:] - th[:, :-1])
        dt = _wrap(th[1:, :] - th[:-1, :])
        circ = dx[:-1, :] + dt[:, 1:] - dx[1:, :] - dt[:, :-1]
        return np.rint(circ / TWO_PI).astype(int)


def lift_phase(traj: Trajectory, box: GoodBox) -> PhaseSheet:
    """Row-major unwrap of -arg(psi) over the box samples.

    Validates the density floor, the sub-pi jump guard in both directions,
    zero plaquette windings, and pins theta(reference) to the principal
    branch (first sheet of log z, cut on the negative reals).
    """
    node_sel, time_sel = _box_indices(traj, box)
    grid = traj.grid
    values = np.stack([traj.snapshots[k].values[node_sel] for k in time_sel])
    eta = np.abs(values)
    if eta.min() < 0.5 * box.delta:
        raise PhaseLiftError(
            f"density floor violated on the box: min eta = {eta.min():g} "
            f"< delta/2 = {0.5 * box.delta:g}")

    raw = -np.angle(values)  # psi = eta e^{-i theta}
    theta = raw.copy()
    # unwrap along space at the first time, then each node forward in time
    theta[0] = raw[0, 0] + np.concatenate(
        ([0.0], np.cumsum(_wrap(np.diff(raw[0])))))
    theta[1:] = _wrap(np.diff(raw, axis=0))
    theta[1:] = theta[0] + np.cumsum(theta[1:], axis=0)

    jump_x = np.abs(np.diff(theta, axis=1)).max() if theta.shape[1] > 1 else 0.0
    jump_t = np.abs(np.diff(theta, axis=0)).max() if theta.shape[0] > 1 else 0.0
    if max(jump_x, jump_t) >= JUMP_GUARD:
        k, i = np.unravel_index(
            np.argmax(np.abs(np.diff(theta, axis=0))) if jump_t >= jump_x
            else np.argmax(np.abs(np.diff(theta, axis=1))),
            (theta.shape[0] - 1, theta.shape[1]) if jump_t >= jump_x
            else (theta.shape[0], theta.shape[1] - 1))
        raise PhaseLiftError(
            f"under-resolved phase: adjacent-sample jump >= {JUMP_GUARD:.3f} "
            f"near t = {traj.times[time_sel[k]]:g}, r = {grid.nodes[node_sel[i]]:g}; "
            "refine dt or the grid")

    times = traj.times[time_sel]
    radii = grid.nodes[node_sel]
    ref_r, ref_t = box.reference
    i_ref = int(np.argmin(np.abs(radii - ref_r)))
    k_ref = int(np.argmin(np.abs(times - ref_t)))
    branch_ref = float(-np.angle(values[k_ref, i_ref]))
    # shift by the exact 2 pi multiple that puts the reference on the
    # principal branch (preserves all differences)
    theta += branch_ref - theta[k_ref, i_ref]

    sheet = PhaseSheet(box, theta, branch_ref, times, radii, eta)
    windings = sheet.plaquette_windings()
    if windings.any():
        k, i = np.argwhere(windings != 0)[0]
        raise PhaseLiftError(
            f"nonzero plaquette winding at t = {times[k]:g}, r = {radii[i]:g}: "
            "the box encloses a vortex and admits no continuous lift")
    return sheet


def reconstruction_error(sheet: PhaseSheet, traj: Trajectory) -> float:
    """max |eta e^{-i theta} - psi| over the box, relative to max |psi|."""
    node_sel, time_sel = _box_indices(traj, sheet.box)
    values = np.stack([traj.snapshots[k].values[node_sel] for k in time_sel])
    recon = sheet.eta * np.exp(-1j * sheet.theta)
    return float(np.abs(recon - values).max() / np.abs(values).max())


# ----------------------------------------------------------------------------
# time derivatives on the sheet sampling
# ----------------------------------------------------------------------------

def _time_derivative(f: np.ndarray, dt: float) -> np.ndarray:
    """Centered differences inside, one-sided second order at the ends."""
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2.0 * dt)
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dt)
    out[-1] = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * dt)
    return out


def polar_residuals(sheet: PhaseSheet, traj: Trajectory, nl: NonlinearitySpec
                    ) -> tuple[float, float]:
    """L2(box) residuals of the polar evolution equations (a) and (b),
    normalized by the largest participating term norm.

    Spatial derivatives of eta use the solver operator on the full grid;
    derivatives of theta (defined only on the box) use centered differences,
    so one interior node margin is trimmed on each side.
    """
    node_sel, time_sel = _box_indices(traj, sheet.box)
    grid = traj.grid
    h = grid.spacing
    dt = float(sheet.times[1] - sheet.times[0])

    eta_full = np.stack([np.abs(traj.snapshots[k].values) for k in time_sel])
    d_eta = np.stack([gradient(e, grid) for e in eta_full])[:, node_sel]
    lap_eta = np.stack([laplacian(e, grid) for e in eta_full])[:, node_sel]

    th = sheet.theta
    d_th = np.empty_like(th)
    d_th[:, 1:-1] = (th[:, 2:] - th[:, :-2]) / (2.0 * h)
    d_th[:, 0] = d_th[:, 1]
    d_th[:, -1] = d_th[:, -2]
    lap_th = np.empty_like(th)
    lap_th[:, 1:-1] = (th[:, 2:] - 2.0 * th[:, 1:-1] + th[:, :-2]) / h**2
    if grid.dimension == 3:
        lap_th[:, 1:-1] += 2.0 * d_th[:, 1:-1] / sheet.radii[1:-1]
    lap_th[:, 0] = lap_th[:, 1]
    lap_th[:, -1] = lap_th[:, -2]

    eta = sheet.eta
    eta_dot = _time_derivative(eta, dt)
    theta_dot = _time_derivative(th, dt)

    # interior sample window (one node margin for the theta stencils)
    sl = (slice(1, -1), slice(1, -1))
    w = (traj.grid.weights[node_sel])[1:-1] * dt

    def box_norm(f):
        return math.sqrt(float(np.sum(w * f[sl] ** 2)))

    res_a = eta_dot - 2.0 * d_eta * d_th - eta * lap_th
    feta = nl.factor(eta) * eta
    res_b = -lap_eta + feta - theta_dot * eta + eta * d_th**2
    terms = [eta_dot, 2.0 * d_eta * d_th, eta * lap_th,
             lap_eta, feta, theta_dot * eta, eta * d_th**2]
    scale = max(box_norm(f) for f in terms)
    if scale == 0.0:
        return 0.0, 0.0
    return box_norm(res_a) / scale, box_norm(res_b) / scale


# ----------------------------------------------------------------------------
# phase slope
# ----------------------------------------------------------------------------

@dataclass
class PhaseSlope:
    """Least-squares slope of theta(r0, t) over the second half of the box.

    E_hat = -slope (the soliton e^{+iEt} has theta = -Et); r_spread is the
    worst slope deviation across box radii; fit_ok flags residuals under 10%
    of |slope * duration|; periods_covered counts 2 pi / E_hat periods.
    """

    E_hat: float
    r_spread: float
    fit_residual: float
    fit_ok: bool
    periods_covered: float


def phase_slope(sheet: PhaseSheet) -> PhaseSlope:
    times = sheet.times
    if times.size < 8 or sheet.box.duration <= 0.0:
        raise ValueError("box has too few snapshots for a phase-slope fit")
    half = times.size // 2
    t = times[half:]
    th = sheet.theta[half:]
    design = np.vstack([t - t.mean(), np.ones_like(t)]).T
    coeffs, *_ = np.linalg.lstsq(design, th, rcond=None)
    slopes = coeffs[0]
    i_ref = int(np.argmin(np.abs(sheet.radii - sheet.box.reference[0])))
    e_hat = -float(slopes[i_ref])
    r_spread = float(np.max(np.abs(slopes - slopes[i_ref])))
    fit = design @ coeffs
    residual = float(np.sqrt(np.mean((th[:, i_ref] - fit[:, i_ref]) ** 2)))
    scale = abs(e_hat) * sheet.box.duration
    fit_ok = bool(residual <= 0.1 * scale) if scale > 0.0 else False
    periods = sheet.box.duration * abs(e_hat) / TWO_PI if e_hat != 0.0 else 0.0
    return PhaseSlope(e_hat, r_spread, residual, fit_ok, float(periods))


# ----------------------------------------------------------------------------
# time-averaged weak identity
# ----------------------------------------------------------------------------

@dataclass
class ThetaAverageIdentity:
    lhs: float
    rhs: float
    gradient_term: float
    # running average of the phase-gradient term at growing horizons
    # (quarter marks of the box); expected to decay with the window
    gradient_term_samples: tuple = ()


def theta_average_identity(sheet: PhaseSheet, traj: Trajectory,
                           nl: NonlinearitySpec, testfn: np.ndarray
                           ) -> ThetaAverageIdentity:
    """Time-averaged weak form of the phase equation against a test function.

    lhs  = (1/T) int_box phi (d theta/dt) eta^2 dx dt,
    rhs  = int phi (-u Lap u + F(u) u^2) dx  with u the eta time average over
           the final quarter of the box,
    gradient_term = (1/T) int_box phi eta |grad theta|^2 dx dt, the remainder
    that must decay with the averaging window.

    For a converged soliton both sides approach -E int phi u^2 dx.  testfn is
    sampled on the box nodes and must vanish on a two-node margin.
    """
    node_sel, time_sel = _box_indices(traj, sheet.box)
    grid = traj.grid
    phi = np.asarray(testfn, dtype=float)
    if phi.shape != sheet.radii.shape:
        raise ValueError("testfn must be sampled on the box nodes")
    if phi.size >= 4 and (np.abs(phi[:2]).max() > 0 or np.abs(phi[-2:]).max() > 0):
        raise ValueError("testfn must vanish on a two-node margin of the box")

    w_x = grid.weights[node_sel]
    times = sheet.times
    duration = float(times[-1] - times[0])
    dt = float(times[1] - times[0])
    theta_dot = _time_derivative(sheet.theta, dt)
    integrand_t = (theta_dot * sheet.eta**2) @ (phi * w_x)
    lhs = float(np.trapezoid(integrand_t, times) / duration)

    quarter = max(2, times.size // 4)
    eta_late = np.stack([np.abs(traj.snapshots[k].values)
                         for k in time_sel[-quarter:]])
    u_bar = eta_late.mean(axis=0)
    lap_u = laplacian(u_bar, grid)[node_sel]
    u_box = u_bar[node_sel]
    rhs = float(np.sum(w_x * phi * (-u_box * lap_u
                                    + nl.factor(u_box) * u_box**2)))

    h = grid.spacing
    d_th = np.empty_like(sheet.theta)
    d_th[:, 1:-1] = (sheet.theta[:, 2:] - sheet.theta[:, :-2]) / (2.0 * h)
    d_th[:, 0] = d_th[:, 1]
    d_th[:, -1] = d_th[:, -2]
    grad_term_t = (sheet.eta * d_th**2) @ (phi * w_x)
    gradient_term = float(np.trapezoid(grad_term_t, times) / duration)
    samples = []
    for frac in (0.25, 0.5, 0.75, 1.0):
        k = max(2, int(round(frac * (times.size - 1))) + 1)
        window = float(times[k - 1] - times[0])
        if window > 0:
            samples.append(float(np.trapezoid(grad_term_t[:k], times[:k])
                                 / window))
    return ThetaAverageIdentity(lhs, rhs, gradient_term, tuple(samples))


def bump_on_box(sheet: PhaseSheet, margin_fraction: float = 0.15,
                center: float | None = None) -> np.ndarray:
    """A C-infinity compactly supported mollifier bump on the box nodes:
    exp(1 - 1/(1 - z^2)) inside its support, 0 outside."""
    r = sheet.radii
    r_lo, r_hi = sheet.box.interval
    span = r_hi - r_lo
    if center is None:
        center = 0.5 * (r_lo + r_hi)
    half = 0.5 * span - margin_fraction * span
    z = (r - center) / half
    phi = np.zeros_like(r)
    inside = np.abs(z) < 1.0
    phi[inside] = np.exp(1.0 - 1.0 / (1.0 - z[inside] ** 2))
    return phi
