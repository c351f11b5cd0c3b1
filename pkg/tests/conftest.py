import warnings

import numpy as np
import pytest

from solitonscope.core import (NonlinearitySpec, RadialGrid,
                               make_initial_condition)
from solitonscope.solver import SolverConfig, evolve

warnings.filterwarnings("ignore", message="dt = .* exceeds the advisory")


@pytest.fixture(scope="session")
def grid_1d():
    return RadialGrid.line(20.0 * np.pi, 2048)


@pytest.fixture(scope="session")
def nl_cubic():
    return NonlinearitySpec.cubic_focusing()


@pytest.fixture(scope="session")
def nl_free():
    return NonlinearitySpec.free()


@pytest.fixture(scope="session")
def soliton_traj(grid_1d, nl_cubic):
    """Exact soliton evolved to T = 10 at the reference resolution."""
    psi0 = make_initial_condition("exact_soliton", {"E": 1.0}, grid_1d)
    cfg = SolverConfig("split_step_fourier", dt=1e-3, t_final=10.0,
                       output_stride=50)
    return evolve(psi0, nl_cubic, cfg)


@pytest.fixture(scope="session")
def lens_traj(nl_cubic):
    """Incoming gaussian lens (b = 0.5) on the wide grid, short horizon."""
    grid = RadialGrid.line(32.0 * np.pi, 2048)
    psi0 = make_initial_condition(
        "gaussian_lens", {"b": 0.5, "width": 1.0, "amplitude": 0.8}, grid)
    cfg = SolverConfig("split_step_fourier", dt=1e-3, t_final=2.0,
                       output_stride=2)
    return evolve(psi0, nl_cubic, cfg)
