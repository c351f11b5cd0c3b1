"""Time integration and its conservation properties.

1D uses Strang split-step with FFT kinetic half-steps (mass conserved to
roundoff); 3D uses Crank-Nicolson on w = r psi with Picard iteration.  The
script evolves a soliton for ten periods, tabulates the drifts, and shows the
second-order local error with a Richardson pair.
"""

import time
import warnings

import numpy as np

from solitonscope import (NonlinearitySpec, RadialGrid, make_initial_condition,
                          soliton_profile_closed_form)
from solitonscope.solver import SolverConfig, evolve, step_once

warnings.filterwarnings("ignore", message="dt = .*advisory")

nl = NonlinearitySpec.cubic_focusing()
grid = RadialGrid.line(20.0 * np.pi, 2048)
psi0 = make_initial_condition("exact_soliton", {"E": 1.0}, grid)

print("== soliton, T = 10, dt = 1e-3 ==")
start = time.perf_counter()
traj = evolve(psi0, nl, SolverConfig("split_step_fourier", 1e-3, 10.0, 500))
print(f"({time.perf_counter() - start:.1f}s)")
mass = np.array([c.mass for c in traj.conserved])
energy = np.array([c.energy for c in traj.conserved])
print(f"{'t':>6} {'mass drift':>12} {'energy drift':>13}")
for k in range(0, len(traj), 4):
    print(f"{traj.times[k]:6.1f} {abs(mass[k] - mass[0]) / mass[0]:12.2e} "
          f"{abs(energy[k] - energy[0]) / abs(energy[0]):13.2e}")

u = soliton_profile_closed_form(1.0, grid.nodes)
err = np.sqrt(grid.integrate((np.abs(traj.snapshots[-1].values) - u) ** 2))
print(f"|| |psi(10)| - sqrt2 sech ||_L2 = {err:.2e}  (profile is stationary)")

print("\n== Richardson pair: one step vs two half steps ==")
dt = 2e-2
exact = psi0.values * np.exp(1j * dt)
e_full = np.sqrt(grid.integrate(np.abs(
    step_once(psi0, nl, dt, "split_step_fourier").values - exact) ** 2))
half = step_once(step_once(psi0, nl, dt / 2, "split_step_fourier"),
                 nl, dt / 2, "split_step_fourier")
e_half = np.sqrt(grid.integrate(np.abs(half.values - exact) ** 2))
print(f"error ratio {e_full / e_half:.3f} (about 4: local error is O(dt^3))")

print("\n== 3D Crank-Nicolson, defocusing run ==")
grid3 = RadialGrid.radial(40.0, 2048)
lens3 = make_initial_condition(
    "gaussian_lens", {"b": 0.3, "width": 2.0, "amplitude": 1.0}, grid3)
traj3 = evolve(lens3, NonlinearitySpec(power=2.0, coefficient=1.0),
               SolverConfig("crank_nicolson_radial", 5e-4, 1.0, 400))
mass3 = np.array([c.mass for c in traj3.conserved])
energy3 = np.array([c.energy for c in traj3.conserved])
print(f"mass drift {np.max(np.abs(mass3 - mass3[0])) / mass3[0]:.2e} "
      f"(unitary Cayley step), energy drift "
      f"{np.max(np.abs(energy3 - energy3[0])) / abs(energy3[0]):.2e} (O(dt^2))")
