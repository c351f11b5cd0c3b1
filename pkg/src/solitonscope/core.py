"""Grids, fields, nonlinearities and the conserved functionals of the radial NLS.

The model equation is  i dpsi/dt = -Lap(psi) + F(|psi|) psi  on a uniform 1D
line (periodic, spectral derivatives) or a radial 3D half-line (finite
differences).  Everything downstream (solver, hydrodynamics, phase lifting)
builds on the types defined here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping

import numpy as np

RECIPES = ("exact_soliton", "lens_soliton", "gaussian_lens", "custom_samples")
NORM_KINDS = ("l2", "h1", "lp", "hs", "weighted_x2")


# ----------------------------------------------------------------------------
# grids
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class RadialGrid:
    """Uniform spatial grid, either a symmetric 1D line or a 3D radial ray.

    dimension 1: periodic nodes r_min + j*spacing, j = 0..num_points-1, with
    r_min = -r_max so the grid is symmetric about the origin (r_max itself is
    identified with r_min).  Quadrature weight is spacing.

    dimension 3: nodes j*spacing covering [0, r_max] inclusive.  Quadrature
    weight at r is 4*pi*r^2*spacing with trapezoid end correction, so that
    integrating 1 over the ball reproduces (4/3)*pi*r_max^3 to O(spacing^2).
    """

    dimension: int
    r_min: float
    r_max: float
    num_points: int

    def __post_init__(self):
        if self.dimension not in (1, 3):
            raise ValueError(f"dimension must be 1 or 3, got {self.dimension}")
        if self.num_points < 16:
            raise ValueError(f"num_points must be >= 16, got {self.num_points}")
        if not self.r_max > self.r_min:
            raise ValueError("r_max must exceed r_min")
        if self.dimension == 3 and self.r_min != 0.0:
            raise ValueError("3D radial grid must start at r = 0")
        if self.dimension == 1 and not math.isclose(self.r_min, -self.r_max):
            raise ValueError("1D grid must be symmetric about 0 (r_min = -r_max)")

    @classmethod
    def line(cls, extent: float, num_points: int) -> "RadialGrid":
        """Symmetric periodic 1D grid on [-extent, extent)."""
        return cls(dimension=1, r_min=-float(extent), r_max=float(extent),
                   num_points=int(num_points))

    @classmethod
    def radial(cls, r_max: float, num_points: int) -> "RadialGrid":
        """3D radial grid on [0, r_max]."""
        return cls(dimension=3, r_min=0.0, r_max=float(r_max),
                   num_points=int(num_points))

    @property
    def spacing(self) -> float:
        if self.dimension == 1:
            # periodic: r_max is excluded (identified with r_min)
            return (self.r_max - self.r_min) / self.num_points
        return (self.r_max - self.r_min) / (self.num_points - 1)

    @property
    def nodes(self) -> np.ndarray:
        return _grid_nodes(self)

    @property
    def weights(self) -> np.ndarray:
        return _grid_weights(self)

    @property
    def wavenumbers(self) -> np.ndarray:
        if self.dimension != 1:
            raise ValueError("wavenumbers are defined for 1D periodic grids only")
        return _grid_wavenumbers(self)

    def integrate(self, values: np.ndarray) -> float | complex:
        """Quadrature of nodal samples against the grid's volume weights."""
        out = np.sum(self.weights * values)
        return out.item()


@lru_cache(maxsize=128)
def _grid_nodes(grid: RadialGrid) -> np.ndarray:
    x = grid.r_min + grid.spacing * np.arange(grid.num_points)
    x.setflags(write=False)
    return x


@lru_cache(maxsize=128)
def _grid_weights(grid: RadialGrid) -> np.ndarray:
    if grid.dimension == 1:
        w = np.full(grid.num_points, grid.spacing)
    else:
        r = _grid_nodes(grid)
        w = 4.0 * np.pi * r**2 * grid.spacing
        w[0] *= 0.5
        w[-1] *= 0.5
    w.setflags(write=False)
    return w


@lru_cache(maxsize=128)
def _grid_wavenumbers(grid: RadialGrid) -> np.ndarray:
    k = 2.0 * np.pi * np.fft.fftfreq(grid.num_points, d=grid.spacing)
    k.setflags(write=False)
    return k


# ----------------------------------------------------------------------------
# derivative operators (shared by solver and all diagnostics)
# ----------------------------------------------------------------------------

def gradient(values: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """d/dr of nodal samples: spectral in 1D, centered 2nd order FD in 3D."""
    if grid.dimension == 1:
        k = grid.wavenumbers
        mult = 1j * k
        if grid.num_points % 2 == 0:
            mult[grid.num_points // 2] = 0.0  # unpaired Nyquist mode
        out = np.fft.ifft(mult * np.fft.fft(values))
        return out if np.iscomplexobj(values) else out.real
    h = grid.spacing
    out = np.empty_like(values, dtype=np.result_type(values, float))
    out[1:-1] = (values[2:] - values[:-2]) / (2.0 * h)
    out[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h)
    out[-1] = (3.0 * values[-1] - 4.0 * values[-2] + values[-3]) / (2.0 * h)
    return out


def laplacian(values: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """Radial Laplacian: d2/dx2 in 1D (spectral), u'' + (2/r)u' in 3D (FD).

    The 3D origin value uses the regular-limit form 3*u''(0) implied by
    u'(0) = 0; the outer boundary uses one-sided second differences.
    """
    if grid.dimension == 1:
        k = grid.wavenumbers
        vhat = np.fft.fft(values)
        out = np.fft.ifft(-(k**2) * vhat)
        return out if np.iscomplexobj(values) else out.real
    h = grid.spacing
    r = grid.nodes
    out = np.empty_like(values, dtype=np.result_type(values, float))
    d2 = (values[2:] - 2.0 * values[1:-1] + values[:-2]) / h**2
    d1 = (values[2:] - values[:-2]) / (2.0 * h)
    out[1:-1] = d2 + 2.0 * d1 / r[1:-1]
    # regularity at the origin: lim (u'' + 2u'/r) = 3 u''(0)
    out[0] = 6.0 * (values[1] - values[0]) / h**2
    out[-1] = (values[-1] - 2.0 * values[-2] + values[-3]) / h**2 \
        + 2.0 * (3.0 * values[-1] - 4.0 * values[-2] + values[-3]) / (2.0 * h * r[-1])
    return out


def antiderivative_1d(values: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """Spectral antiderivative P with P' = values - mean(values), plus mean*x.

    Nodal values of the primitive of a periodic-resolved sample set; used to
    evaluate mass inside an interval to spectral accuracy.
    """
    if grid.dimension != 1:
        raise ValueError("antiderivative_1d requires a 1D grid")
    k = grid.wavenumbers
    vhat = np.fft.fft(values)
    mean = vhat[0].real / grid.num_points
    inv = np.zeros_like(vhat)
    nz = k != 0.0
    inv[nz] = vhat[nz] / (1j * k[nz])
    if grid.num_points % 2 == 0:
        inv[grid.num_points // 2] = 0.0
    return np.fft.ifft(inv).real + mean * grid.nodes


# ----------------------------------------------------------------------------
# nonlinearity
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class NonlinearitySpec:
    """Power nonlinearity F(s) = coefficient * s**power acting as F(|psi|)psi.

    The induced potential energy density is potential_density(s) = F~(s)*s^2 =
    coefficient * s**(power+2) / (power+2), normalized so that
    d/dt [ 0.5*int |grad psi|^2 + int F~(|psi|)|psi|^2 ] = 0 along the flow
    (checked by the solver conservation tests rather than trusted).
    """

    kind: str = "focusing_power"
    power: float = 2.0
    coefficient: float = -1.0

    def __post_init__(self):
        if self.kind != "focusing_power":
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}")
        if self.power < 1.0:
            raise ValueError("power exponent must be >= 1")
        if not np.isfinite(self.coefficient):
            raise ValueError("coefficient must be finite")

    @classmethod
    def cubic_focusing(cls) -> "NonlinearitySpec":
        return cls(power=2.0, coefficient=-1.0)

    @classmethod
    def free(cls) -> "NonlinearitySpec":
        return cls(power=2.0, coefficient=0.0)

    @property
    def is_cubic(self) -> bool:
        return self.power == 2.0

    def factor(self, amplitude: np.ndarray) -> np.ndarray:
        """F evaluated at |psi|; multiplies psi in the equation."""
        return self.coefficient * amplitude**self.power

    def potential_density(self, amplitude: np.ndarray) -> np.ndarray:
        """F~(s)*s^2, the potential energy density at amplitude s."""
        return self.coefficient * amplitude**(self.power + 2.0) / (self.power + 2.0)


# ----------------------------------------------------------------------------
# fields
# ----------------------------------------------------------------------------

@dataclass(eq=False)
class WaveField:
    """Complex psi samples on a RadialGrid at a single time."""

    grid: RadialGrid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.complex128)
        if v.shape != (self.grid.num_points,):
            raise ValueError(
                f"values shape {v.shape} does not match grid ({self.grid.num_points},)")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def mass(self) -> float:
        return float(self.grid.integrate(np.abs(self.values) ** 2))

    def with_values(self, values: np.ndarray, time: float | None = None) -> "WaveField":
        return WaveField(self.grid, values, self.time if time is None else time)


@dataclass(frozen=True)
class ConservedSet:
    """Mass, energy, variance, dilation and H1 norm of one snapshot."""

    mass: float
    energy: float
    variance: float
    dilation: float
    h1_norm: float

    def as_tuple(self) -> tuple:
        return (self.mass, self.energy, self.variance, self.dilation, self.h1_norm)


def kinetic_gradient_sq(field: WaveField) -> float:
    """int |grad psi|^2 in the solver's own discretization.

    1D: spectral, exactly the split-step kinetic quadratic form.  3D: forward
    differences of w = r psi, since 4 pi int |w'|^2 dr equals the Cartesian
    gradient integral and -w'' is the Crank-Nicolson operator; measuring the
    energy in the same form keeps its drift at the O(dt^2) scheme level
    instead of picking up O(h^2) discretization mismatch.
    """
    grid = field.grid
    psi = field.values
    if grid.dimension == 1:
        return float(grid.integrate(np.abs(gradient(psi, grid)) ** 2))
    w = grid.nodes * psi
    return float(4.0 * np.pi / grid.spacing * np.sum(np.abs(np.diff(w)) ** 2))


def conserved_set(field: WaveField, nl: NonlinearitySpec) -> ConservedSet:
    """All five monitored functionals by grid quadrature.

    mass = int rho, energy = 0.5 int |grad psi|^2 + int F~ rho,
    variance = int |x|^2 rho, dilation = (psi, A psi) = int x . J,
    h1 = sqrt(mass + int |grad psi|^2).
    """
    grid = field.grid
    psi = field.values
    rho = np.abs(psi) ** 2
    dpsi = gradient(psi, grid)
    grad_sq = kinetic_gradient_sq(field)
    mass = float(grid.integrate(rho))
    eta = np.sqrt(rho)
    energy = 0.5 * grad_sq + float(grid.integrate(nl.potential_density(eta)))
    x = grid.nodes
    variance = float(grid.integrate(x**2 * rho))
    current = np.imag(np.conj(psi) * dpsi)
    dilation = float(grid.integrate(x * current))
    h1 = math.sqrt(mass + grad_sq)
    vals = (mass, energy, variance, dilation, h1)
    if not all(np.isfinite(v) for v in vals):
        raise FloatingPointError(f"non-finite conserved quantities {vals}; solver blow-up?")
    return ConservedSet(*vals)


def weighted_norm(field: WaveField, kind: str, order: float | None = None) -> float:
    """Norms used by the convergence diagnostics.

    kind: 'l2', 'h1', 'weighted_x2' (= || |x| psi ||), 'lp' (needs order p >= 1),
    or 'hs' (needs order s >= 0; 1D grids only, Fourier multiplier
    (1+k^2)^(s/2)).  hs(0) agrees with l2 to roundoff by Parseval.
    """
    grid = field.grid
    psi = field.values
    if kind == "l2":
        return math.sqrt(float(grid.integrate(np.abs(psi) ** 2)))
    if kind == "h1":
        grad_sq = float(grid.integrate(np.abs(gradient(psi, grid)) ** 2))
        return math.sqrt(float(grid.integrate(np.abs(psi) ** 2)) + grad_sq)
    if kind == "weighted_x2":
        return math.sqrt(float(grid.integrate(grid.nodes**2 * np.abs(psi) ** 2)))
    if kind == "lp":
        if order is None or order < 1.0:
            raise ValueError("lp norm needs order p >= 1")
        return float(grid.integrate(np.abs(psi) ** order)) ** (1.0 / order)
    if kind == "hs":
        if order is None or order < 0.0:
            raise ValueError("hs norm needs order s >= 0")
        if grid.dimension != 1:
            raise ValueError("fractional hs norms are computed on 1D grids only; "
                             "radial data goes through the windowed even extension "
                             "(see profile.profile_distance)")
        k = grid.wavenumbers
        psihat = np.fft.fft(psi)
        # Parseval: dx * sum |psi_j|^2 = dx/N * sum |psihat_k|^2
        norm_sq = grid.spacing / grid.num_points * np.sum(
            (1.0 + k**2) ** order * np.abs(psihat) ** 2)
        return math.sqrt(float(norm_sq))
    raise ValueError(f"unknown norm kind {kind!r}; expected one of {NORM_KINDS}")


# ----------------------------------------------------------------------------
# initial conditions
# ----------------------------------------------------------------------------

def soliton_profile_closed_form(E: float, x: np.ndarray) -> np.ndarray:
    """1D cubic ground state sqrt(2E) sech(sqrt(E) x) of -u'' - u^3 = -E u."""
    if E <= 0.0:
        raise ValueError("soliton energy parameter E must be positive")
    # sech via decaying exponentials (cosh overflows for large arguments)
    s = np.exp(-np.abs(np.sqrt(E) * x))
    return np.sqrt(2.0 * E) * 2.0 * s / (1.0 + s**2)


def _require(params: Mapping, keys: tuple, recipe: str) -> list:
    out = []
    for key in keys:
        if key not in params:
            raise ValueError(f"recipe {recipe!r} needs parameter {key!r}")
        val = params[key]
        if np.ndim(val) == 0 and not np.isfinite(val):
            raise ValueError(f"parameter {key!r} of recipe {recipe!r} is not finite")
        out.append(val)
    return out


def _check_width_resolved(width: float, grid: RadialGrid):
    if width / grid.spacing < 8.0:
        raise ValueError(
            f"grid too coarse: {width / grid.spacing:.2f} points per width "
            f"(need >= 8) for feature width {width}")


def make_initial_condition(recipe: str, params: Mapping, grid: RadialGrid) -> WaveField:
    """Constructors for the supported initial states.

    exact_soliton: ground state for parameter E (closed form in 1D, shooting
    solution in 3D).  Lens recipes multiply a real nodeless envelope by
    exp(-i b x^2), which makes the initial current strictly incoming for b > 0.
    custom_samples passes explicit complex samples through params['values'].
    """
    if recipe not in RECIPES:
        raise ValueError(f"unknown recipe {recipe!r}; expected one of {RECIPES}")
    x = grid.nodes

    if recipe == "exact_soliton":
        (E,) = _require(params, ("E",), recipe)
        if E <= 0.0:
            raise ValueError("exact_soliton needs E > 0")
        _check_width_resolved(1.0 / math.sqrt(E), grid)
        envelope = _soliton_envelope(E, grid)
        values = envelope.astype(np.complex128)

    elif recipe == "lens_soliton":
        E, b = _require(params, ("E", "b"), recipe)
        if E <= 0.0:
            raise ValueError("lens_soliton needs E > 0")
        if b < 0.0:
            raise ValueError("lens focusing strength b must be >= 0")
        _check_width_resolved(1.0 / math.sqrt(E), grid)
        envelope = _soliton_envelope(E, grid)
        amp = float(params.get("perturb_amplitude", 0.0))
        if amp != 0.0:
            pw = float(params.get("perturb_width", 2.0))
            _check_width_resolved(pw, grid)
            envelope = envelope * (1.0 + amp * np.exp(-(x**2) / (2.0 * pw**2)))
        values = envelope * np.exp(-1j * b * x**2)

    elif recipe == "gaussian_lens":
        b, width, amplitude = _require(params, ("b", "width", "amplitude"), recipe)
        if b < 0.0:
            raise ValueError("lens focusing strength b must be >= 0")
        if width <= 0.0 or amplitude < 0.0:
            raise ValueError("gaussian_lens needs width > 0 and amplitude >= 0")
        _check_width_resolved(width, grid)
        envelope = amplitude * np.exp(-(x**2) / (2.0 * width**2))
        values = envelope * np.exp(-1j * b * x**2)

    else:  # custom_samples
        if "values" not in params:
            raise ValueError("recipe 'custom_samples' needs parameter 'values'")
        values = np.asarray(params["values"], dtype=np.complex128)

    out = WaveField(grid, values, time=float(params.get("time", 0.0)))
    for norm_kind in ("l2", "h1", "weighted_x2"):
        if not np.isfinite(weighted_norm(out, norm_kind)):
            raise ValueError(f"initial condition has non-finite {norm_kind} norm")
    return out


def _soliton_envelope(E: float, grid: RadialGrid) -> np.ndarray:
    if grid.dimension == 1:
        return soliton_profile_closed_form(E, grid.nodes)
    from .profile import solve_profile_3d  # local import: profile builds on core

    return solve_profile_3d(E, NonlinearitySpec.cubic_focusing(), grid).u
