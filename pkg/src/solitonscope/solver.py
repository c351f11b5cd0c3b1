"""Time integration of the radial NLS with conservation monitoring.

Two schemes, one per geometry:

* split_step_fourier (1D): Strang splitting, FFT kinetic half-steps and exact
  pointwise integration of the nonlinear phase.  Unitary in L2, so mass is
  conserved to roundoff.
* crank_nicolson_radial (3D): Crank-Nicolson on w = r*psi (the radial
  Laplacian becomes w''), Picard iteration for the nonlinear potential.
  The tridiagonal Cayley step is unitary for the converged real potential.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .core import ConservedSet, NonlinearitySpec, RadialGrid, WaveField, conserved_set

METHODS = ("split_step_fourier", "crank_nicolson_radial")

BLOWUP_MASS_DRIFT = 1e-3  # solver-health heuristic, not physics


class BlowUpError(RuntimeError):
    """Raised when the run develops non-finite values or loses mass."""


class PicardConvergenceError(RuntimeError):
    """Raised when the Crank-Nicolson nonlinear iteration stalls."""


@dataclass(frozen=True)
class SolverConfig:
    method: str
    dt: float
    t_final: float
    output_stride: int = 1
    picard_tol: float = 1e-12
    picard_max_iter: int = 25

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.dt <= 0.0 or self.t_final <= 0.0:
            raise ValueError("dt and t_final must be positive")
        if self.output_stride < 1:
            raise ValueError("output_stride must be >= 1")
        if not (0.0 < self.picard_tol <= 1e-6):
            raise ValueError("picard_tol must lie in (0, 1e-6]")
        if self.picard_max_iter < 3:
            raise ValueError("picard_max_iter must be >= 3")

    def num_steps(self) -> int:
        n = round(self.t_final / self.dt)
        if abs(n * self.dt - self.t_final) > 1e-9 * self.t_final or n < 1:
            raise ValueError("t_final must be an integer number of dt steps")
        if n % self.output_stride != 0:
            raise ValueError("num_steps must be divisible by output_stride "
                             "(uniform snapshot spacing)")
        return n

    def validate_against(self, grid: RadialGrid):
        if grid.dimension == 1 and self.method != "split_step_fourier":
            raise ValueError("1D grids evolve with split_step_fourier")
        if grid.dimension == 3 and self.method != "crank_nicolson_radial":
            raise ValueError("3D radial grids evolve with crank_nicolson_radial")
        if self.method == "crank_nicolson_radial" and self.dt > 0.5 * grid.spacing**2:
            warnings.warn(
                f"dt = {self.dt:g} exceeds the advisory 0.5*spacing^2 = "
                f"{0.5 * grid.spacing**2:g} accuracy margin for Crank-Nicolson",
                stacklevel=2)


@dataclass
class Trajectory:
    """Snapshots at a uniform output stride plus their conserved quantities."""

    snapshots: list[WaveField]
    conserved: list[ConservedSet]

    def __post_init__(self):
        times = self.times
        if len(times) > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("snapshot time stamps must be strictly increasing")

    @property
    def times(self) -> np.ndarray:
        return np.array([snap.time for snap in self.snapshots])

    @property
    def grid(self) -> RadialGrid:
        return self.snapshots[0].grid

    @property
    def mass_drift(self) -> np.ndarray:
        """Relative mass drift per snapshot against the initial mass."""
        mass = np.array([c.mass for c in self.conserved])
        if mass[0] == 0.0:
            return np.abs(mass)
        return np.abs(mass - mass[0]) / mass[0]

    def __len__(self) -> int:
        return len(self.snapshots)


# ----------------------------------------------------------------------------
# 1D split-step Fourier
# ----------------------------------------------------------------------------

def _kinetic_phase(grid: RadialGrid, dt: float) -> np.ndarray:
    k = grid.wavenumbers
    return np.exp(-1j * k**2 * dt)


def _nonlinear_step(values: np.ndarray, nl: NonlinearitySpec, dt: float) -> np.ndarray:
    if nl.coefficient == 0.0:
        return values
    return values * np.exp(-1j * dt * nl.factor(np.abs(values)))


def _split_step_block(values: np.ndarray, nl: NonlinearitySpec, dt: float,
                      grid: RadialGrid, nsteps: int) -> np.ndarray:
    """nsteps Strang steps with the inner kinetic half-steps fused."""
    half = _kinetic_phase(grid, 0.5 * dt)
    full = _kinetic_phase(grid, dt)
    v = np.fft.ifft(half * np.fft.fft(values))
    for _ in range(nsteps - 1):
        v = _nonlinear_step(v, nl, dt)
        v = np.fft.ifft(full * np.fft.fft(v))
    v = _nonlinear_step(v, nl, dt)
    return np.fft.ifft(half * np.fft.fft(v))


# ----------------------------------------------------------------------------
# 3D Crank-Nicolson on w = r psi
# ----------------------------------------------------------------------------

def _psi_to_w(field: WaveField) -> np.ndarray:
    return field.grid.nodes * field.values


def _w_to_psi(w: np.ndarray, grid: RadialGrid) -> np.ndarray:
    psi = np.empty_like(w)
    psi[1:] = w[1:] / grid.nodes[1:]
    # even-parity extrapolation to the origin (psi'(0) = 0)
    psi[0] = (4.0 * psi[1] - psi[2]) / 3.0
    return psi


def _cn_step(w: np.ndarray, grid: RadialGrid, nl: NonlinearitySpec, dt: float,
             picard_tol: float, picard_max_iter: int) -> np.ndarray:
    """One Crank-Nicolson step with Picard iteration on the midpoint density.

    Interior unknowns w_1 .. w_{N-2}; w_0 = 0 (origin) and w_{N-1} = 0
    (Dirichlet wall) are fixed.  For a real potential the step is a Cayley
    transform of a Hermitian tridiagonal matrix, hence mass conserving.
    """
    h = grid.spacing
    r_int = grid.nodes[1:-1]
    w_int = w[1:-1]
    n = w_int.size
    lam = 1j * dt / 2.0
    off = -lam / h**2 * np.ones(n)  # A = I + lam*H, H offdiag = -1/h^2

    w_new = w_int.copy()
    norm = np.linalg.norm(w_int)
    ab = np.empty((3, n), dtype=np.complex128)
    for iteration in range(picard_max_iter):
        mid_psi_abs = np.abs((w_int + w_new) / (2.0 * r_int))
        potential = nl.factor(mid_psi_abs)
        diag_h = 2.0 / h**2 + potential
        # rhs = (I - lam*H) w
        rhs = (1.0 - lam * diag_h) * w_int
        rhs[:-1] += lam / h**2 * w_int[1:]
        rhs[1:] += lam / h**2 * w_int[:-1]
        ab[0, :] = np.concatenate(([0.0], off[:-1]))
        ab[1, :] = 1.0 + lam * diag_h
        ab[2, :] = np.concatenate((off[1:], [0.0]))
        solution = solve_banded((1, 1), ab, rhs)
        delta = np.linalg.norm(solution - w_new)
        w_new = solution
        if delta <= picard_tol * max(norm, 1e-300):
            break
    else:
        raise PicardConvergenceError(
            f"Picard iteration did not reach tol {picard_tol:g} within "
            f"{picard_max_iter} iterations (last delta {delta:g})")
    out = np.zeros_like(w)
    out[1:-1] = w_new
    return out


# ----------------------------------------------------------------------------
# public stepping API
# ----------------------------------------------------------------------------

def step_once(field: WaveField, nl: NonlinearitySpec, dt: float, method: str,
              picard_tol: float = 1e-12, picard_max_iter: int = 25) -> WaveField:
    """Advance one step.  Deterministic: identical inputs give identical output."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    grid = field.grid
    if method == "split_step_fourier":
        if grid.dimension != 1:
            raise ValueError("split_step_fourier requires a 1D grid")
        values = _split_step_block(field.values, nl, dt, grid, 1)
    else:
        if grid.dimension != 3:
            raise ValueError("crank_nicolson_radial requires a 3D grid")
        w = _cn_step(_psi_to_w(field), grid, nl, dt, picard_tol, picard_max_iter)
        values = _w_to_psi(w, grid)
    if not np.all(np.isfinite(values.view(np.float64))):
        raise BlowUpError(f"non-finite values after one step from t = {field.time:g}")
    return field.with_values(values, time=field.time + dt)


def evolve(initial: WaveField, nl: NonlinearitySpec, cfg: SolverConfig) -> Trajectory:
    """Run the configured scheme, returning snapshots at the output stride.

    Aborts with BlowUpError naming the first bad step if values go non-finite
    or the relative mass drift exceeds 1e-3 (solver-health heuristic).
    """
    grid = initial.grid
    cfg.validate_against(grid)
    n_steps = cfg.num_steps()
    stride = cfg.output_stride

    snapshots = [initial]
    conserved = [conserved_set(initial, nl)]
    mass0 = conserved[0].mass

    if cfg.method == "split_step_fourier":
        values = initial.values
        for block in range(n_steps // stride):
            values = _split_step_block(values, nl, cfg.dt, grid, stride)
            t = initial.time + (block + 1) * stride * cfg.dt
            _record(snapshots, conserved, grid, values, t, nl, mass0, block, stride, cfg.dt)
    else:
        w = _psi_to_w(initial)
        for block in range(n_steps // stride):
            for _ in range(stride):
                w = _cn_step(w, grid, nl, cfg.dt, cfg.picard_tol, cfg.picard_max_iter)
            values = _w_to_psi(w, grid)
            t = initial.time + (block + 1) * stride * cfg.dt
            _record(snapshots, conserved, grid, values, t, nl, mass0, block, stride, cfg.dt)

    return Trajectory(snapshots, conserved)


def _record(snapshots, conserved, grid, values, t, nl, mass0, block, stride, dt):
    if not np.all(np.isfinite(values.view(np.float64))):
        raise BlowUpError(
            f"non-finite values first detected at step {(block + 1) * stride} (t = {t:g})")
    snap = WaveField(grid, values, time=t)
    cons = conserved_set(snap, nl)
    if mass0 > 0.0 and abs(cons.mass - mass0) / mass0 > BLOWUP_MASS_DRIFT:
        raise BlowUpError(
            f"relative mass drift {abs(cons.mass - mass0) / mass0:.3e} exceeded "
            f"{BLOWUP_MASS_DRIFT:g} at step {(block + 1) * stride} (t = {t:g})")
    snapshots.append(snap)
    conserved.append(cons)
