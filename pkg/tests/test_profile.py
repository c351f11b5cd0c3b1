import math

import numpy as np
import pytest

from solitonscope.core import (NonlinearitySpec, RadialGrid,
                               soliton_profile_closed_form)
from solitonscope.profile import (BracketError, fit_profile, profile_distance,
                                  scaled_profile, solve_profile_1d,
                                  solve_profile_3d, weak_form_residuals)

GROUND_STATE_3D_U0 = 4.33738768  # dual-integrator regression constant


@pytest.fixture(scope="module")
def grid_3d():
    # the production 3D resolution: the ode_residual bound is quoted there
    return RadialGrid.radial(40.0, 4096)


@pytest.fixture(scope="module")
def profile_3d(grid_3d, nl_cubic):
    return solve_profile_3d(1.0, nl_cubic, grid_3d)


class TestProfile1D:
    def test_closed_form_values(self, grid_1d, nl_cubic):
        p1 = solve_profile_1d(1.0, nl_cubic, grid_1d)
        assert p1.u0 == pytest.approx(math.sqrt(2.0), rel=1e-14)
        assert p1.node_count == 0
        assert p1.ode_residual < 1e-8
        p4 = solve_profile_1d(4.0, nl_cubic, grid_1d)
        assert p4.u0 == pytest.approx(2.0 * math.sqrt(2.0), rel=1e-14)
        # width scales as 1/sqrt(E): u_4(x) = 2 sqrt2 sech(2x)
        expected = 2.0 * math.sqrt(2.0) / np.cosh(2.0 * grid_1d.nodes)
        np.testing.assert_allclose(p4.u, expected, atol=1e-14)

    def test_shooting_reproduces_closed_form(self, grid_1d, nl_cubic):
        shot = solve_profile_1d(1.0, nl_cubic, grid_1d, use_closed_form=False)
        exact = soliton_profile_closed_form(1.0, grid_1d.nodes)
        assert np.max(np.abs(shot.u - exact)) < 1e-8
        assert shot.ode_residual < 1e-8

    def test_general_power_against_closed_form(self, grid_1d):
        # -u'' + c u^{p+1} = -Eu has u = A sech^{2/p}(p sqrt(E) x / 2),
        # A = (E (p+2)/2)^{1/p} for c = -1
        p = 3.0
        nl = NonlinearitySpec(power=p, coefficient=-1.0)
        shot = solve_profile_1d(1.0, nl, grid_1d)
        A = (1.0 * (p + 2.0) / 2.0) ** (1.0 / p)
        exact = A * np.cosh(p * grid_1d.nodes / 2.0) ** (-2.0 / p)
        assert np.max(np.abs(shot.u - exact)) < 1e-6

    def test_invalid_inputs(self, grid_1d, nl_cubic):
        with pytest.raises(ValueError):
            solve_profile_1d(-1.0, nl_cubic, grid_1d)
        with pytest.raises(ValueError):
            solve_profile_1d(1.0, NonlinearitySpec(coefficient=1.0), grid_1d)


class TestProfile3D:
    def test_regression_value_and_residual(self, profile_3d):
        assert profile_3d.u0 == pytest.approx(GROUND_STATE_3D_U0, abs=1e-6)
        assert profile_3d.ode_residual < 1e-8
        assert profile_3d.node_count == 0
        assert np.all(profile_3d.u[:-1] > 0.0)

    def test_scaling_symmetry(self, grid_3d, nl_cubic, profile_3d):
        # u_E(r) = sqrt(E) u_1(sqrt(E) r) for the cubic nonlinearity
        p4 = solve_profile_3d(4.0, nl_cubic, grid_3d)
        r = grid_3d.nodes
        sel = r <= 0.49 * grid_3d.r_max
        idx2 = np.rint(2.0 * r[sel] / grid_3d.spacing).astype(int)
        err = np.max(np.abs(p4.u[sel] - 2.0 * profile_3d.u[idx2]))
        assert err < 1e-7

    def test_delocalized_profile_raises(self, grid_3d, nl_cubic):
        with pytest.raises((BracketError, ValueError)):
            solve_profile_3d(1e-4, nl_cubic, grid_3d)


class TestProfileDistance:
    def test_exact_match_is_zero(self, grid_1d, nl_cubic):
        p = solve_profile_1d(1.0, nl_cubic, grid_1d)
        assert profile_distance(p.u, p, (-0.8, 0.8)) == 0.0

    def test_relative_scaling(self, grid_1d, nl_cubic):
        p = solve_profile_1d(1.0, nl_cubic, grid_1d)
        d = profile_distance(p.u * (1.0 + 1e-3), p, (-0.8, 0.8))
        from solitonscope.profile import interval_window

        w = interval_window(grid_1d, (-0.8, 0.8))
        ref = 1e-3 * math.sqrt(float(np.sum((w * p.u) ** 2) * grid_1d.spacing))
        assert d == pytest.approx(ref, rel=0.01)

    def test_sup_and_hs_norms(self, grid_1d, nl_cubic):
        p = solve_profile_1d(1.0, nl_cubic, grid_1d)
        bump = p.u * (1.0 + 1e-3)
        assert profile_distance(bump, p, (-0.8, 0.8), "sup") > 0.0
        d0 = profile_distance(bump, p, (-0.8, 0.8), "hs", order=0.0)
        dl2 = profile_distance(bump, p, (-0.8, 0.8), "l2")
        assert d0 == pytest.approx(dl2, rel=1e-10)
        d_half = profile_distance(bump, p, (-0.8, 0.8), "hs", order=0.5)
        assert d_half >= d0

    def test_hs_on_radial_grid_via_even_extension(self, grid_3d, nl_cubic,
                                                  profile_3d):
        bump = profile_3d.u * (1.0 + 1e-3)
        d0 = profile_distance(bump, profile_3d, (1.0, 3.0), "hs", order=0.0)
        dl2 = profile_distance(bump, profile_3d, (1.0, 3.0), "l2")
        assert d0 == pytest.approx(dl2, rel=1e-10)

    def test_interval_validation(self, grid_1d, nl_cubic):
        p = solve_profile_1d(1.0, nl_cubic, grid_1d)
        with pytest.raises(ValueError):
            profile_distance(p.u, p, (-100.0, 100.0))
        with pytest.raises(ValueError):
            profile_distance(p.u, p, (-0.8, 0.8), "hs", order=1.5)


class TestFitProfile:
    def test_recovers_exact_eigenvalues(self, grid_1d, nl_cubic):
        for E in (1.0, 2.5):
            eta = soliton_profile_closed_form(E, grid_1d.nodes)
            e_fit, dist = fit_profile(eta, nl_cubic, grid_1d, (-0.8, 0.8))
            assert e_fit == pytest.approx(E, rel=1e-6)
            assert dist < 1e-6

    def test_recovers_3d_eigenvalue(self, grid_3d, nl_cubic, profile_3d):
        e_fit, dist = fit_profile(profile_3d.u, nl_cubic, grid_3d, (0.5, 3.0))
        assert e_fit == pytest.approx(1.0, rel=1e-5)
        assert dist < 1e-5

    def test_half_amplitude_misfit_reported_honestly(self, grid_1d, nl_cubic):
        eta = 0.5 * soliton_profile_closed_form(1.0, grid_1d.nodes)
        e_fit, dist = fit_profile(eta, nl_cubic, grid_1d, (-0.8, 0.8))
        assert dist > 0.01
        assert abs(e_fit - 1.0) > 0.1

    def test_monotone_objective_raises(self, grid_1d, nl_cubic):
        eta = np.full(grid_1d.num_points, 50.0)
        with pytest.raises(BracketError):
            fit_profile(eta, nl_cubic, grid_1d, (-0.8, 0.8),
                        e_range=(0.05, 10.0))

    def test_positivity_precondition(self, grid_1d, nl_cubic):
        eta = soliton_profile_closed_form(1.0, grid_1d.nodes).copy()
        eta[grid_1d.num_points // 2] = 0.0
        with pytest.raises(ValueError):
            fit_profile(eta, nl_cubic, grid_1d, (-0.8, 0.8))


class TestWeakForm:
    def test_1d_battery(self, grid_1d, nl_cubic):
        for profile in (solve_profile_1d(1.0, nl_cubic, grid_1d),
                        solve_profile_1d(1.0, nl_cubic, grid_1d,
                                         use_closed_form=False),
                        solve_profile_1d(2.5, nl_cubic, grid_1d)):
            residuals = weak_form_residuals(profile, nl_cubic)
            assert residuals.shape == (8,)
            assert residuals.max() < 1e-6

    def test_3d_battery(self, grid_3d, nl_cubic, profile_3d):
        assert weak_form_residuals(profile_3d, nl_cubic).max() < 1e-6
        p2 = solve_profile_3d(2.5, nl_cubic, grid_3d)
        assert weak_form_residuals(p2, nl_cubic).max() < 1e-6

    def test_scaled_profile_consistency(self, grid_3d, nl_cubic, profile_3d):
        fast = scaled_profile(1.0, nl_cubic, grid_3d)
        core = grid_3d.nodes <= 10.0
        assert np.max(np.abs(fast.u[core] - profile_3d.u[core])) < 1e-5
