"""Report figures rendered to files (headless backend).

Each helper takes the run artifacts and an output path and writes one PNG.
render_all() is what the CLI report path calls; it returns the written paths
so the summary can list them.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .core import Grid, velocity
from .diagnostics import TimeSeries


def series_overview(series: TimeSeries, path: str) -> None:
    """Mass drift, weighted momentum, energy ledger, identity residuals."""
    t = series.column("t")
    fig, axes = plt.subplots(2, 2, figsize=(9, 6), sharex=True)

    ax = axes[0, 0]
    ax.plot(t, series.column("mass") - series.m0, lw=1.2)
    ax.set_ylabel("mass - mass(0)")
    ax.set_title("mass conservation")

    ax = axes[0, 1]
    ax.plot(t, series.column("M"), lw=1.2, label="M(t)")
    a, n = series.params.a, series.params.n
    ax.plot(t, series.column("M")[0] + n * a * series.m0 * t, "--", lw=1.0, label="linear floor")
    ax.set_ylabel("weighted momentum")
    ax.legend(fontsize=8)

    ax = axes[1, 0]
    kin = series.column("kinetic")
    ent = series.column("entropy")
    cum = series.column("cum_dissipation")
    ax.plot(t, kin, lw=1.2, label="kinetic")
    ax.plot(t, kin + a * ent, lw=1.2, label="kinetic + a*entropy")
    ax.plot(t, kin + a * ent + cum, lw=1.2, label="+ dissipated")
    ax.set_xlabel("t")
    ax.set_ylabel("energy")
    ax.legend(fontsize=8)

    ax = axes[1, 1]
    ax.plot(t, np.abs(series.column("mom_residual")), lw=1.2, label="momentum identity")
    ax.plot(t, np.abs(series.column("energy_residual")), lw=1.2, label="energy identity")
    ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("|residual|")
    ax.legend(fontsize=8)

    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def final_profiles(series: TimeSeries, grid: Grid, path: str) -> None:
    """Density and velocity at the final time against the grid coordinate."""
    state = series.final_state
    if state is None:
        raise ValueError("series has no final state to plot")
    x = grid.centers
    u = velocity(state, series.rho_floor)
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
    ax1.plot(x, state.rho, lw=1.2)
    ax1.set_ylabel("rho")
    ax1.set_title(f"state at t = {state.t:.4g}")
    ax2.plot(x, u, lw=1.2)
    ax2.axhline(0.0, color="k", lw=0.5)
    ax2.set_ylabel("u")
    ax2.set_xlabel("x" if grid.geometry.dim == 1 else "r")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def support_history(series: TimeSeries, path: str) -> None:
    """Support radius over time with particle tracks overlaid when available."""
    t = series.column("t")
    fig, ax = plt.subplots(figsize=(7, 4.5))
    if series.tracks is not None and series.tracks.times:
        tt = np.asarray(series.tracks.times)
        pos = np.asarray(series.tracks.positions)
        ax.plot(tt, np.abs(pos), color="0.75", lw=0.4)
    ax.plot(t, series.column("support_radius"), color="C3", lw=1.6, label="support radius")
    ax.axhline(series.R, color="k", lw=0.6, ls=":", label="initial R")
    ax.set_xlabel("t")
    ax.set_ylabel("|x|" if series.params.n == 1 else "r")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def poincare_margin(series: TimeSeries, path: str) -> None:
    """Weighted-momentum bound: lhs against rhs along the run."""
    t = series.column("t")
    lhs = series.column("poincare_lhs")
    rhs = series.column("poincare_rhs")
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(t, lhs, lw=1.2, label="(int rho u . x)^2")
    ax.plot(t, rhs, lw=1.2, label="m0^2 K int |grad u|^2")
    ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_all(series: TimeSeries, grid: Grid, outdir: str) -> list[str]:
    """Write the full figure set under outdir, returning the paths."""
    os.makedirs(outdir, exist_ok=True)
    jobs = [
        ("overview.png", lambda p: series_overview(series, p)),
        ("profiles.png", lambda p: final_profiles(series, grid, p)),
        ("support.png", lambda p: support_history(series, p)),
        ("poincare.png", lambda p: poincare_margin(series, p)),
    ]
    written = []
    for name, fn in jobs:
        path = os.path.join(outdir, name)
        fn(path)
        written.append(path)
    return written
