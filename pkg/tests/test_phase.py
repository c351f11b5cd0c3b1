import math
from dataclasses import replace

import numpy as np
import pytest

from solitonscope.core import (NonlinearitySpec, RadialGrid, WaveField,
                               conserved_set, gradient,
                               make_initial_condition)
from solitonscope.phase import (PhaseLiftError, bump_on_box,
                                find_good_boxes, lift_phase, phase_slope,
                                polar_residuals, reconstruction_error,
                                theta_average_identity)
from solitonscope.solver import SolverConfig, Trajectory, evolve


def analytic_free_gaussian_trajectory(grid, w, b, amplitude, times):
    """Closed-form free evolution of amplitude * e^{-x^2/(2w^2)} e^{-ibx^2}."""
    a0 = 1.0 / (2.0 * w**2) + 1j * b
    nl = NonlinearitySpec.free()
    snapshots = []
    conserved = []
    for t in times:
        den = 1.0 + 4.0j * a0 * t
        psi = amplitude / np.sqrt(den) * np.exp(-a0 * grid.nodes**2 / den)
        snap = WaveField(grid, psi, time=float(t))
        snapshots.append(snap)
        conserved.append(conserved_set(snap, nl))
    return Trajectory(snapshots, conserved)


class TestGoodBoxes:
    def test_soliton_box_matches_closed_form(self, soliton_traj, grid_1d):
        # eta = sqrt(2) sech(x) >= delta/2 = 1 exactly for |x| <= asech(1/sqrt2)
        boxes = find_good_boxes(soliton_traj, delta=2.0, min_width=0.5)
        assert len(boxes) == 1
        edge = math.acosh(math.sqrt(2.0))
        assert boxes[0].interval[1] <= edge + 1e-12
        assert boxes[0].interval[1] >= edge - grid_1d.spacing
        assert boxes[0].interval[0] == pytest.approx(-boxes[0].interval[1])

    def test_zero_field_no_boxes(self, grid_1d, nl_free):
        psi0 = WaveField(grid_1d, np.zeros(2048, complex))
        traj = evolve(psi0, nl_free, SolverConfig("split_step_fourier",
                                                  1e-2, 0.1, 10))
        assert find_good_boxes(traj, delta=0.1, min_width=0.1) == []

    def test_odd_data_boxes_avoid_origin(self, nl_free):
        grid = RadialGrid.line(10.0 * np.pi, 1024)
        x = grid.nodes
        psi0 = WaveField(grid, (x * np.exp(-x**2 / 8.0)).astype(complex))
        traj = evolve(psi0, nl_free, SolverConfig("split_step_fourier",
                                                  1e-3, 0.2, 20))
        boxes = find_good_boxes(traj, delta=0.2, min_width=0.3)
        assert boxes, "expected boxes on both sides of the node"
        for box in boxes:
            assert box.interval[0] > 0 or box.interval[1] < 0

    def test_3d_boxes_exclude_origin(self, nl_cubic):
        import warnings

        grid = RadialGrid.radial(20.0, 512)
        psi0 = make_initial_condition(
            "gaussian_lens", {"b": 0.0, "width": 2.0, "amplitude": 1.0}, grid)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            traj = evolve(psi0, NonlinearitySpec.free(),
                          SolverConfig("crank_nicolson_radial", 5e-4, 0.1, 20))
        boxes = find_good_boxes(traj, delta=0.5, min_width=0.5)
        assert boxes and boxes[0].interval[0] > 0.0


class TestLift:
    def test_soliton_phase_is_uniform_rotation(self, soliton_traj):
        box = find_good_boxes(soliton_traj, 2.0, 0.5)[0]
        sheet = lift_phase(soliton_traj, box)
        assert reconstruction_error(sheet, soliton_traj) < 1e-10
        assert np.abs(sheet.plaquette_windings()).max() == 0
        # theta(x, t) = -E t + const: uniform in x, linear in t
        spatial_spread = np.max(sheet.theta, axis=1) - np.min(sheet.theta, axis=1)
        assert spatial_spread.max() < 1e-6
        drift = sheet.theta[:, 0] + sheet.times - sheet.theta[0, 0]
        assert np.max(np.abs(drift)) < 1e-4

    def test_plane_wave_phase_gradient(self, nl_free):
        # psi = eta e^{-i theta} makes theta = -k x for e^{ikx} data
        grid = RadialGrid.line(10.0 * np.pi, 1024)
        k = 2.0 * np.pi * 5 / (2 * 10.0 * np.pi)  # on the fourier lattice
        psi0 = WaveField(grid, np.exp(1j * k * grid.nodes)
                         * np.exp(-grid.nodes**2 / 200.0))
        traj = evolve(psi0, nl_free,
                      SolverConfig("split_step_fourier", 1e-3, 0.05, 10))
        boxes = find_good_boxes(traj, delta=0.5, min_width=2.0)
        sheet = lift_phase(traj, boxes[0])
        slope = np.diff(sheet.theta[0]) / grid.spacing
        assert np.max(np.abs(slope + k)) < 1e-6

    def test_reference_shift_changes_lift_by_2pi_integer(self, soliton_traj,
                                                         grid_1d):
        box = find_good_boxes(soliton_traj, 2.0, 0.5)[0]
        sheet_a = lift_phase(soliton_traj, box)
        moved = replace(box, reference=(box.reference[0] + grid_1d.spacing,
                                        box.reference[1]))
        sheet_b = lift_phase(soliton_traj, moved)
        diff = sheet_b.theta - sheet_a.theta
        m = np.round(diff / (2.0 * np.pi))
        assert np.all(m == m.flat[0])
        assert np.max(np.abs(diff - 2.0 * np.pi * m)) < 1e-12

    def test_path_independence_of_unwrap(self, soliton_traj):
        # unwrap t-first then x must agree with the row-major lift
        box = find_good_boxes(soliton_traj, 2.0, 0.5)[0]
        sheet = lift_phase(soliton_traj, box)
        raw = -np.angle(sheet.eta * np.exp(-1j * sheet.theta))  # wrapped theta
        alt = raw.copy()
        wrap = lambda d: d - 2 * np.pi * np.round(d / (2 * np.pi))
        alt[:, 0] = raw[0, 0] + np.concatenate(
            ([0.0], np.cumsum(wrap(np.diff(raw[:, 0])))))
        alt[:, 1:] = wrap(np.diff(raw, axis=1))
        alt[:, 1:] = alt[:, [0]] + np.cumsum(alt[:, 1:], axis=1)
        alt += sheet.theta[0, 0] - alt[0, 0]
        assert np.max(np.abs(alt - sheet.theta)) < 1e-8

    def test_under_resolved_phase_aborts(self, nl_cubic):
        grid = RadialGrid.line(10.0 * np.pi, 512)
        psi0 = make_initial_condition("exact_soliton", {"E": 1.0}, grid)
        traj = evolve(psi0, nl_cubic, SolverConfig("split_step_fourier",
                                                   1e-2, 31.0, 310))
        box = find_good_boxes(traj, 2.0, 0.5)[0]
        with pytest.raises(PhaseLiftError, match="under-resolved"):
            lift_phase(traj, box)

    def test_gradient_consistency(self, nl_free):
        # grad psi = (grad eta - i eta grad theta) e^{-i theta} on the box
        grid = RadialGrid.line(20.0 * np.pi, 2048)
        times = np.linspace(0.0, 1.0, 101)
        traj = analytic_free_gaussian_trajectory(grid, 1.5, 0.3, 1.0, times)
        boxes = find_good_boxes(traj, delta=0.4, min_width=1.0)
        sheet = lift_phase(traj, boxes[0])
        node_sel = np.flatnonzero(
            (grid.nodes >= sheet.radii[0] - 1e-12)
            & (grid.nodes <= sheet.radii[-1] + 1e-12))
        h = grid.spacing
        worst = 0.0
        for k in (0, len(times) // 2, len(times) - 1):
            psi = traj.snapshots[k].values
            dpsi = gradient(psi, grid)[node_sel]
            eta_full = np.abs(traj.snapshots[k].values)
            deta = gradient(eta_full, grid)[node_sel]
            dtheta = np.gradient(sheet.theta[k], h)
            recon = (deta - 1j * sheet.eta[k] * dtheta) * np.exp(
                -1j * sheet.theta[k])
            err = np.sqrt(np.sum(np.abs(recon[1:-1] - dpsi[1:-1]) ** 2)
                          * h)
            scale = np.sqrt(np.sum(np.abs(dpsi[1:-1]) ** 2) * h)
            worst = max(worst, err / scale)
        # dominated by the O(h^2) centered difference of theta on the box
        assert worst < 50.0 * h**2


class TestPhaseSlope:
    def test_soliton_slope(self, soliton_traj):
        box = find_good_boxes(soliton_traj, 2.0, 0.5)[0]
        ps = phase_slope(lift_phase(soliton_traj, box))
        assert ps.E_hat == pytest.approx(1.0, rel=1e-3)
        assert ps.r_spread < 1e-8
        assert ps.fit_ok

    def test_plane_wave_slope_is_minus_k_squared(self, nl_free):
        # e^{i(kx - k^2 t)} rotates opposite to a soliton: theta/t -> +k^2,
        # so E_hat = -k^2 under the soliton sign convention
        grid = RadialGrid.line(10.0 * np.pi, 512)
        k = 2.0 * np.pi * 10 / (2 * 10.0 * np.pi)
        psi0 = WaveField(grid, np.exp(1j * k * grid.nodes).astype(complex))
        traj = evolve(psi0, nl_free, SolverConfig("split_step_fourier",
                                                  1e-3, 40.0, 400))
        box = find_good_boxes(traj, delta=1.0, min_width=2.0)[0]
        ps = phase_slope(lift_phase(traj, box))
        assert ps.E_hat == pytest.approx(-k**2, rel=1e-6)

    def test_slope_invariant_under_spatial_refinement(self, nl_cubic):
        # the slope depends on t-sampling only: exact on analytic
        # trajectories; evolved runs add FFT rounding accumulation (~1e-12)
        from solitonscope.core import (conserved_set,
                                       make_initial_condition,
                                       soliton_profile_closed_form)
        from solitonscope.solver import SolverConfig, Trajectory, evolve

        analytic, evolved = [], []
        times = np.linspace(0.0, 10.0, 201)
        for n in (2048, 4096):
            grid = RadialGrid.line(20.0 * np.pi, n)
            u = soliton_profile_closed_form(1.0, grid.nodes)
            snaps = [WaveField(grid, u * np.exp(1j * t), time=float(t))
                     for t in times]
            traj = Trajectory(snaps,
                              [conserved_set(s, nl_cubic) for s in snaps])
            sheet = lift_phase(traj, find_good_boxes(traj, 2.0, 0.5)[0])
            analytic.append(phase_slope(sheet).E_hat)
            psi0 = make_initial_condition("exact_soliton", {"E": 1.0}, grid)
            run = evolve(psi0, nl_cubic,
                         SolverConfig("split_step_fourier", 1e-3, 5.0, 25))
            sheet = lift_phase(run, find_good_boxes(run, 2.0, 0.5)[0])
            evolved.append(phase_slope(sheet).E_hat)
        assert abs(analytic[0] - analytic[1]) <= 1e-12
        assert abs(evolved[0] - evolved[1]) <= 1e-11

    def test_degenerate_box_rejected(self, soliton_traj):
        box = find_good_boxes(soliton_traj, 2.0, 0.5)[0]
        sheet = lift_phase(soliton_traj, box)
        short = replace(sheet, theta=sheet.theta[:3], times=sheet.times[:3],
                        eta=sheet.eta[:3])
        with pytest.raises(ValueError):
            phase_slope(short)


class TestPolarResiduals:
    def test_soliton_residuals(self, soliton_traj, nl_cubic):
        box = find_good_boxes(soliton_traj, 2.0, 0.5)[0]
        sheet = lift_phase(soliton_traj, box)
        res_a, res_b = polar_residuals(sheet, soliton_traj, nl_cubic)
        assert res_a <= 1e-8
        assert res_b <= 1e-6

    def test_free_gaussian_closed_form_residuals(self, nl_free):
        grid = RadialGrid.line(20.0 * np.pi, 2048)
        times = np.linspace(0.0, 2.0, 401)
        traj = analytic_free_gaussian_trajectory(grid, 1.5, 0.3, 1.0, times)
        boxes = find_good_boxes(traj, delta=0.4, min_width=1.0)
        sheet = lift_phase(traj, boxes[0])
        res_a, res_b = polar_residuals(sheet, traj, nl_free)
        assert res_a <= 1e-4
        assert res_b <= 1e-4


class TestThetaAverageIdentity:
    def test_soliton_identity(self, soliton_traj, nl_cubic, grid_1d):
        box = find_good_boxes(soliton_traj, 2.0, 0.5)[0]
        sheet = lift_phase(soliton_traj, box)
        phi = bump_on_box(sheet)
        ident = theta_average_identity(sheet, soliton_traj, nl_cubic, phi)
        # both sides approach -E int phi u^2 dx
        from solitonscope.core import soliton_profile_closed_form

        sel = np.flatnonzero((grid_1d.nodes >= sheet.radii[0] - 1e-12)
                             & (grid_1d.nodes <= sheet.radii[-1] + 1e-12))
        u = soliton_profile_closed_form(1.0, grid_1d.nodes)[sel]
        expected = -1.0 * float(np.sum(grid_1d.weights[sel] * phi * u**2))
        assert ident.lhs == pytest.approx(expected, rel=1e-4)
        assert ident.rhs == pytest.approx(ident.lhs, rel=1e-4)
        assert abs(ident.gradient_term) < 1e-12

    def test_zero_testfn(self, soliton_traj, nl_cubic):
        box = find_good_boxes(soliton_traj, 2.0, 0.5)[0]
        sheet = lift_phase(soliton_traj, box)
        ident = theta_average_identity(sheet, soliton_traj, nl_cubic,
                                       np.zeros(sheet.radii.size))
        assert ident.lhs == 0.0 and ident.rhs == 0.0

    def test_dispersive_run_decays(self, nl_free):
        grid = RadialGrid.line(20.0 * np.pi, 2048)
        psi0 = make_initial_condition(
            "gaussian_lens", {"b": 0.0, "width": 2.0, "amplitude": 1.0}, grid)
        values = []
        for T in (2.0, 6.0):
            traj = evolve(psi0, nl_free, SolverConfig("split_step_fourier",
                                                      1e-3, T, 20))
            boxes = find_good_boxes(traj, delta=0.2, min_width=1.0)
            sheet = lift_phase(traj, boxes[0])
            ident = theta_average_identity(sheet, traj, nl_free,
                                           bump_on_box(sheet))
            values.append(abs(ident.lhs))
        assert values[1] < values[0]

    def test_margin_validation(self, soliton_traj, nl_cubic):
        box = find_good_boxes(soliton_traj, 2.0, 0.5)[0]
        sheet = lift_phase(soliton_traj, box)
        bad = np.ones(sheet.radii.size)
        with pytest.raises(ValueError, match="margin"):
            theta_average_identity(sheet, soliton_traj, nl_cubic, bad)
