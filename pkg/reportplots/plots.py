#!/usr/bin/env python3
"""Static figures from a solitonscope run directory.

    python plots.py <run_dir> [--figures flux profile phase_slope residuals]
                    [--format png|svg]

Reads only the documented CSV/JSON artifacts (flux.csv, frame_*.csv,
profile.csv, phase.csv, diagnostics.json, MANIFEST) and never recomputes any
physics; the run directory is the single source of truth.  Re-rendering
overwrites the same files.  Exit codes: 0 success, 2 on missing/malformed
inputs (errors name the offending file and line).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

FIGURES = ("flux", "profile", "phase_slope", "residuals")


class ArtifactError(RuntimeError):
    """A required artifact is missing or malformed."""


@dataclass
class PlotSpec:
    run_dir: Path
    figures: tuple = FIGURES
    format: str = "png"

    def __post_init__(self):
        self.run_dir = Path(self.run_dir)
        if self.format not in ("png", "svg"):
            raise ArtifactError(f"unsupported format {self.format!r}")
        unknown = set(self.figures) - set(FIGURES)
        if unknown:
            raise ArtifactError(f"unknown figures {sorted(unknown)}; "
                                f"expected a subset of {FIGURES}")
        if not (self.run_dir / "MANIFEST").exists():
            raise ArtifactError(f"{self.run_dir} is not a run directory "
                                "(no MANIFEST)")


def read_csv_columns(path: Path, expected: list[str]) -> dict:
    """Strict reader for the run artifacts: named float columns, errors carry
    the file name and 1-based line number."""
    if not path.exists():
        raise ArtifactError(f"missing artifact: {path.name}")
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        names = header.split(",")
        for want in expected:
            if want not in names:
                raise ArtifactError(
                    f"{path.name} line 1: expected column {want!r}, "
                    f"header is {header!r}")
        rows = []
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split(",")
            if len(parts) != len(names):
                raise ArtifactError(
                    f"{path.name} line {lineno}: {len(parts)} fields, "
                    f"expected {len(names)}")
            try:
                rows.append([float(v) for v in parts])
            except ValueError as exc:
                raise ArtifactError(
                    f"{path.name} line {lineno}: {exc}") from None
    if not rows:
        raise ArtifactError(f"{path.name}: no data rows")
    table = np.asarray(rows)
    return {name: table[:, k] for k, name in enumerate(names)}


def read_diagnostics(run_dir: Path) -> dict:
    path = run_dir / "diagnostics.json"
    if not path.exists():
        raise ArtifactError(f"missing artifact: {path.name}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"{path.name}: {exc}") from None


def _save(fig, path: Path):
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_flux(run_dir: Path, out: Path) -> None:
    data = read_csv_columns(run_dir / "flux.csv",
                            ["t", "R", "flux", "cumulative"])
    radii = np.unique(data["R"])
    fig, ax = plt.subplots(figsize=(7.5, 4.5))
    ax2 = ax.twinx()
    colors = plt.cm.viridis(np.linspace(0.0, 0.85, radii.size))
    for color, r in zip(colors, radii):
        sel = data["R"] == r
        ax.plot(data["t"][sel], data["flux"][sel], color=color,
                label=f"R = {r:g}")
        ax2.plot(data["t"][sel], data["cumulative"][sel], color=color,
                 linestyle="--", alpha=0.6)
    ax.axhline(0.0, color="0.6", linewidth=0.8)
    ax.set_xlabel("t")
    ax.set_ylabel("sphere flux (outward)")
    ax2.set_ylabel("cumulative flux (dashed)")
    ax.legend(loc="best", fontsize=8)
    ax.set_title("sphere flux per radius with cumulative overlay")
    fig.tight_layout()
    _save(fig, out)


def render_profile(run_dir: Path, out: Path) -> None:
    profile = read_csv_columns(run_dir / "profile.csv", ["r", "u"])
    frames = sorted(run_dir.glob("frame_*.csv"))
    if not frames:
        raise ArtifactError("missing artifact: frame_*.csv (no snapshots)")
    fig, ax = plt.subplots(figsize=(7.5, 4.5))
    colors = plt.cm.plasma(np.linspace(0.0, 0.8, len(frames)))
    for color, path in zip(colors, frames):
        frame = read_csv_columns(path, ["r", "eta"])
        ax.plot(frame["r"], frame["eta"], color=color, alpha=0.8,
                label=path.stem.replace("frame_", "snapshot "))
    ax.plot(profile["r"], profile["u"], "k--", linewidth=1.6,
            label="fitted profile")
    span = np.abs(profile["r"][np.abs(profile["u"])
                               > 1e-3 * np.max(np.abs(profile["u"]))])
    lim = max(5.0, 1.5 * float(span.max())) if span.size else 5.0
    ax.set_xlim(profile["r"].min() if profile["r"].min() > -lim else -lim, lim)
    ax.set_xlabel("r")
    ax.set_ylabel("amplitude eta")
    ax.legend(fontsize=8)
    ax.set_title("amplitude snapshots against the fitted profile")
    fig.tight_layout()
    _save(fig, out)


def render_phase_slope(run_dir: Path, out: Path) -> None:
    data = read_csv_columns(run_dir / "phase.csv", ["t", "r", "theta"])
    diag = read_diagnostics(run_dir)
    radii = np.unique(data["r"])
    r0 = radii[radii.size // 2]
    sel = (data["r"] == r0) & (data["t"] > 0)
    t = data["t"][sel]
    ratio = data["theta"][sel] / t
    fig, ax = plt.subplots(figsize=(7.5, 4.5))
    ax.plot(t, ratio, label=f"theta(r0, t)/t at r0 = {r0:g}")
    e_hat = diag.get("E_hat")
    if e_hat is not None:
        ax.axhline(-e_hat, color="crimson", linestyle="--",
                   label=f"-E_hat = {-e_hat:.6g}")
    ax.set_xlabel("t")
    ax.set_ylabel("theta / t")
    ax.legend(fontsize=9)
    ax.set_title("phase slope converging to the soliton eigenvalue")
    fig.tight_layout()
    _save(fig, out)


def render_residuals(run_dir: Path, out: Path) -> None:
    diag = read_diagnostics(run_dir)
    bars = {}
    if diag.get("res_a") is not None:
        bars["continuity\nres_a"] = diag["res_a"]
    if diag.get("res_b") is not None:
        bars["eigenvalue\nres_b"] = diag["res_b"]
    lhs, rhs = diag.get("identity_lhs"), diag.get("identity_rhs")
    if lhs is not None and rhs is not None and rhs != 0:
        bars["averaged identity\n|lhs-rhs|/|rhs|"] = abs(lhs - rhs) / abs(rhs)
    if diag.get("identity_gradient_term") is not None:
        bars["phase-gradient\nremainder"] = abs(diag["identity_gradient_term"])
    if diag.get("r_spread") is not None:
        bars["slope\nr-spread"] = diag["r_spread"]
    if not bars:
        raise ArtifactError("diagnostics.json carries no residual entries")
    fig, ax = plt.subplots(figsize=(7.5, 4.5))
    names = list(bars)
    values = [max(bars[n], 1e-300) for n in names]
    ax.bar(range(len(names)), values, color="steelblue")
    ax.set_yscale("log")
    ax.set_xticks(range(len(names)), names, fontsize=8)
    ax.set_ylabel("residual magnitude")
    ax.set_title("identity residuals")
    fig.tight_layout()
    _save(fig, out)


RENDERERS = {"flux": render_flux, "profile": render_profile,
             "phase_slope": render_phase_slope, "residuals": render_residuals}


def render(spec: PlotSpec) -> list[Path]:
    """Write one figure file per requested figure; returns the paths."""
    written = []
    for name in spec.figures:
        out = spec.run_dir / f"fig_{name}.{spec.format}"
        RENDERERS[name](spec.run_dir, out)
        written.append(out)
    return written


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="render static figures from a solitonscope run directory")
    parser.add_argument("run_dir")
    parser.add_argument("--figures", nargs="*", default=list(FIGURES),
                        choices=FIGURES, metavar="FIG")
    parser.add_argument("--format", default="png", choices=("png", "svg"))
    args = parser.parse_args(argv)
    try:
        spec = PlotSpec(Path(args.run_dir), tuple(args.figures), args.format)
        written = render(spec)
    except ArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
