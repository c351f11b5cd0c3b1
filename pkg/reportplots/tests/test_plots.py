"""Secondary-component tests: figures from a completed run directory.

The fixture produces a real run directory through the primary's external
interfaces only (a config file and the `solitonscope run` CLI); plots.py then
consumes the CSV/JSON artifacts.
"""

import shutil
import subprocess
import sys
from pathlib import Path

import pytest

PLOTS = Path(__file__).resolve().parents[1] / "plots.py"

RUN_CONFIG = """\
[experiment]
scenario = soliton_regression
seed = 20240801

[grid]
dimension = 1
extent = 62.831853071795862
num_points = 2048

[solver]
method = split_step_fourier
dt = 0.001
t_final = 12
output_stride = 50

[recipe]
name = lens_soliton
E = 1
b = 0.02
perturb_amplitude = 0.05
perturb_width = 2

[diagnostics]
radii = 2, 5, 10, 20, 30
interval = -0.8, 0.8
delta = 2
min_width = 0.5

[output]
output_dir = {out}
csv_stride = 25
frame_times = 0, 6, 12

[thresholds]
mass_drift = 1e-9
energy_drift = 1e-6
flux_balance = 1e-4
distance_drop = 1
e_gap = 0.05
"""


@pytest.fixture(scope="session")
def run_dir(tmp_path_factory):
    base = tmp_path_factory.mktemp("rundir")
    out = base / "perturbed"
    cfg = base / "run.cfg"
    cfg.write_text(RUN_CONFIG.format(out=out))
    proc = subprocess.run([sys.executable, "-m", "solitonscope.cli", "run",
                           str(cfg)], capture_output=True, text=True)
    assert proc.returncode in (0, 1), proc.stderr
    assert (out / "MANIFEST").exists()
    return out


def plots_cli(*args):
    return subprocess.run([sys.executable, str(PLOTS), *args],
                          capture_output=True, text=True)


class TestRender:
    def test_all_four_figures_png(self, run_dir):
        proc = plots_cli(str(run_dir), "--figures", "flux", "profile",
                         "phase_slope", "residuals", "--format", "png")
        assert proc.returncode == 0, proc.stderr
        for name in ("flux", "profile", "phase_slope", "residuals"):
            path = run_dir / f"fig_{name}.png"
            assert path.exists() and path.stat().st_size > 2000, name

    def test_svg_format(self, run_dir):
        proc = plots_cli(str(run_dir), "--figures", "flux", "--format", "svg")
        assert proc.returncode == 0, proc.stderr
        assert (run_dir / "fig_flux.svg").exists()

    def test_rerender_is_idempotent(self, run_dir):
        assert plots_cli(str(run_dir), "--figures", "residuals").returncode == 0
        assert plots_cli(str(run_dir), "--figures", "residuals").returncode == 0

    def test_empty_figure_set_is_noop(self, run_dir):
        proc = plots_cli(str(run_dir), "--figures")
        assert proc.returncode == 0
        assert proc.stdout.strip() == ""


class TestFailures:
    def test_missing_flux_csv_names_file(self, run_dir, tmp_path):
        broken = tmp_path / "no_flux"
        shutil.copytree(run_dir, broken)
        (broken / "flux.csv").unlink()
        proc = plots_cli(str(broken), "--figures", "flux")
        assert proc.returncode == 2
        assert "flux.csv" in proc.stderr

    def test_truncated_csv_fails_with_line_number(self, run_dir, tmp_path):
        broken = tmp_path / "truncated"
        shutil.copytree(run_dir, broken)
        path = broken / "flux.csv"
        lines = path.read_text().splitlines(keepends=True)
        cut = lines[40][: len(lines[40]) // 2].rstrip("\n")
        path.write_text("".join(lines[:40]) + cut + "\n")
        proc = plots_cli(str(broken), "--figures", "flux")
        assert proc.returncode == 2
        assert "flux.csv" in proc.stderr and "line 41" in proc.stderr

    def test_not_a_run_dir(self, tmp_path):
        proc = plots_cli(str(tmp_path), "--figures", "flux")
        assert proc.returncode == 2
        assert "MANIFEST" in proc.stderr

    def test_unknown_figure_rejected(self, run_dir):
        proc = plots_cli(str(run_dir), "--figures", "hologram")
        assert proc.returncode == 2
