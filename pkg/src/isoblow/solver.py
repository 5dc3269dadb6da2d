"""Finite-volume solver for the isothermal system with vacuum.

Convective fluxes are local Lax-Friedrichs (Rusanov) with wave speed
|u| + sqrt(a); the hyperbolic part is advanced by the two-stage SSP
Runge-Kutta update at the advective CFL.  The viscous term
(lam+2*mu) * u_xx  (1D)   /   (lam+2*mu) * d_r[(1/r) d_r(r*ubar)]  (2D radial)
is advanced by a backward-Euler tridiagonal solve on the velocity: explicit
viscous stepping would demand dt ~ h^2 * rho_min near the vacuum edge, which
is unusable, while the implicit solve is L-stable.

The viscous solve acts only on contiguous above-cutoff regions of the grid.
At each end of such a region the operator is closed with the self-similar
expansion profile (u proportional to x in 1D, ubar proportional to r
radially).  That closure carries zero weighted viscous flux -- the discrete
sum of x * (u_xx) telescopes to exactly zero -- so the position-weighted
momentum integral is conserved by the viscous stage to machine precision,
and no stress is transmitted through vacuum to the domain walls.  Solving
across the vacuum instead (any wall condition) drains weighted momentum at
a rate independent of resolution, which destroys the identity the scheme
exists to exhibit.

Boundary state is vacuum (rho = mom = 0) beyond the domain; a reflecting
variant exists for steady-state checks.  Density is clipped at zero with the
clipped mass audited per step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import solve_banded

from . import diagnostics as dg
from .core import (
    FluidState,
    Geometry,
    Grid,
    InitialData,
    PhysParams,
    sample_initial,
    support_runs,
    velocity,
)
from .lagrangian import ParticleSet, ParticleTracks, TwoStateSampler, advect

CLIP_BUDGET_FRACTION = 1e-10
MAX_STEPS = 5_000_000


@dataclass(frozen=True)
class SchemeConfig:
    """Scheme knobs: CFL number, vacuum cutoff fraction, horizon, output cadence."""

    t_end: float
    cfl: float = 0.4
    rho_cut: float = 1e-10
    output_every: int = 1

    def __post_init__(self):
        if not (0.0 < self.cfl <= 1.0):
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if not (0.0 <= self.rho_cut < 1e-3):
            raise ValueError(f"rho_cut must lie in [0, 1e-3), got {self.rho_cut}")
        if self.t_end < 0.0:
            raise ValueError(f"t_end must be nonnegative, got {self.t_end}")
        if self.output_every < 1:
            raise ValueError(f"output_every must be a positive integer, got {self.output_every}")


@dataclass(frozen=True)
class Tendency:
    """Semi-discrete right-hand side for (rho, mom)."""

    d_rho: np.ndarray
    d_mom: np.ndarray


class SolverAbort(RuntimeError):
    """Raised when a run trips an audited safety budget."""


def _ghost_extend(rho, u, mom, grid: Grid, boundary: str):
    """Arrays with one ghost cell per side.

    'vacuum': zero state outside the domain.  'reflect': mirror density, odd
    velocity (wall).  The radial inner ghost is always the odd reflection
    through the origin; its face has zero area so it only feeds the stencils.
    """
    if boundary not in ("vacuum", "reflect"):
        raise ValueError(f"unknown boundary {boundary!r}")
    if grid.geometry is Geometry.SLAB_1D:
        if boundary == "vacuum":
            gl = gr = (0.0, 0.0, 0.0)
        else:
            gl = (rho[0], -u[0], -mom[0])
            gr = (rho[-1], -u[-1], -mom[-1])
    else:
        gl = (rho[0], -u[0], -mom[0])
        gr = (0.0, 0.0, 0.0) if boundary == "vacuum" else (rho[-1], -u[-1], -mom[-1])
    re = np.concatenate(([gl[0]], rho, [gr[0]]))
    ue = np.concatenate(([gl[1]], u, [gr[1]]))
    me = np.concatenate(([gl[2]], mom, [gr[2]]))
    return re, ue, me


def compute_rhs(
    state: FluidState,
    params: PhysParams,
    grid: Grid,
    rho_floor: float = 0.0,
    viscous: bool = True,
    boundary: str = "vacuum",
) -> Tendency:
    """Semi-discrete tendencies: LLF convective+pressure fluxes plus the
    viscous operator on above-cutoff runs.

    Velocity is reconstructed with the vacuum cutoff (zero below rho_floor).
    In radial geometry the pressure rides in the radial flux with the
    geometric source +a*rho/r, so mass and momentum bookkeeping both
    telescope over faces.
    """
    rho, mom = state.rho, state.mom
    u = velocity(state, rho_floor)
    a = params.a
    re, ue, me = _ghost_extend(rho, u, mom, grid, boundary)

    rl, rr = re[:-1], re[1:]
    ul, ur = ue[:-1], ue[1:]
    ml, mr = me[:-1], me[1:]
    alpha = params.sound_speed + np.maximum(np.abs(ul), np.abs(ur))
    f_rho = 0.5 * (rl * ul + rr * ur) - 0.5 * alpha * (rr - rl)
    f_mom = 0.5 * (rl * ul * ul + a * rl + rr * ur * ur + a * rr) - 0.5 * alpha * (mr - ml)

    if grid.geometry is Geometry.SLAB_1D:
        d_rho = -np.diff(f_rho) / grid.h
        d_mom = -np.diff(f_mom) / grid.h
    else:
        A = grid.face_areas
        d_rho = -np.diff(A * f_rho) / grid.volumes
        d_mom = -np.diff(A * f_mom) / grid.volumes + a * rho / grid.centers
    if viscous:
        d_mom = d_mom + _viscous_tendency(rho, u, params, grid, rho_floor, boundary)
    return Tendency(d_rho=d_rho, d_mom=d_mom)


def cfl_dt(
    state: FluidState,
    params: PhysParams,
    grid: Grid,
    cfg: SchemeConfig,
    viscous: bool = True,
) -> float:
    """Stability-bounded time step for fully explicit stepping.

    dt = cfl * min( h / max(|u|+c),  h^2 * rho_min / (2*(lam+2*mu)) )
    with the max and min over active (above-cutoff) cells.  run() calls this
    with viscous=False since its viscous update is implicit and the h^2
    branch would otherwise collapse with the smallest active density.
    """
    floor = cfg.rho_cut * float(np.max(state.rho))
    active = state.rho > floor
    if not np.any(active):
        raise ValueError("all cells are vacuum: nothing to evolve")
    u = velocity(state, floor)
    vmax = float(np.max(np.abs(u[active]))) + params.sound_speed
    dt = grid.h / vmax
    if viscous:
        rho_min = float(np.min(state.rho[active]))
        dt = min(dt, grid.h**2 * rho_min / (2.0 * params.long_visc))
    return cfg.cfl * dt


def _clip_negative(rho, mom, grid: Grid):
    """Zero out negative densities, returning the clipped mass."""
    neg = rho < 0.0
    if not np.any(neg):
        return rho, mom, 0.0
    clipped = float(np.dot(np.where(neg, -rho, 0.0), grid.volumes))
    rho = np.where(neg, 0.0, rho)
    mom = np.where(neg, 0.0, mom)
    return rho, mom, clipped


def _viscous_tendency(
    rho: np.ndarray,
    u: np.ndarray,
    params: PhysParams,
    grid: Grid,
    rho_floor: float = 0.0,
    boundary: str = "vacuum",
) -> np.ndarray:
    """Explicit viscous operator on above-cutoff runs, zero elsewhere.

    Same stencils and end closures as the implicit solve in _viscous_update:
    central second difference (1D) / face divergence differences (2D radial)
    inside each run, similarity ghosts at run ends, mirror ghosts where a run
    touches a reflecting wall.  Single-cell runs get zero (the similarity
    closure makes them exact no-ops).
    """
    nv = params.long_visc
    h = grid.h
    out = np.zeros_like(u)
    runs = support_runs(rho > max(rho_floor, 0.0))
    reflect = boundary == "reflect"
    if grid.geometry is Geometry.SLAB_1D:
        x = grid.centers
        for i0, i1 in runs:
            if i1 == i0:
                continue
            seg = u[i0 : i1 + 1]
            if reflect and i0 == 0:
                gl = -seg[0]
            else:
                gl = seg[0] * (x[i0] - h) / x[i0]
            if reflect and i1 == grid.N - 1:
                gr = -seg[-1]
            else:
                gr = seg[-1] * (x[i1] + h) / x[i1]
            ext = np.concatenate(([gl], seg, [gr]))
            out[i0 : i1 + 1] = nv * (ext[2:] - 2.0 * ext[1:-1] + ext[:-2]) / h**2
        return out
    r = grid.centers
    for i0, i1 in runs:
        if i1 == i0:
            continue
        seg = u[i0 : i1 + 1]
        rr = r[i0 : i1 + 1]
        omega = np.empty(i1 - i0 + 2)
        omega[1:-1] = (rr[1:] * seg[1:] - rr[:-1] * seg[:-1]) / (grid.edges[i0 + 1 : i1 + 1] * h)
        omega[0] = 2.0 * seg[0] / rr[0]
        if reflect and i1 == grid.N - 1:
            omega[-1] = -2.0 * seg[-1] / h
        else:
            omega[-1] = 2.0 * seg[-1] / rr[-1]
        out[i0 : i1 + 1] = nv * np.diff(omega) / h
    return out


def _viscous_update(
    rho: np.ndarray,
    mom: np.ndarray,
    params: PhysParams,
    grid: Grid,
    dt: float,
    rho_floor: float = 0.0,
    boundary: str = "vacuum",
):
    """Backward-Euler solve of rho*u' - dt*nu*L u' = mom on each active run.

    L is the viscous operator of _viscous_tendency with the same closures.
    The similarity ghost at a run end (u_g = u_f * x_g/x_f; radially, end
    face divergence 2*u_f/r_f, which at the origin is just the symmetry
    condition) makes the position-weighted momentum of the run exactly
    invariant under this solve, for any dt and any rho >= 0.  Density is
    untouched, below-cutoff cells are untouched, single-cell runs are exact
    no-ops (their closure fluxes cancel).
    """
    nv = params.long_visc
    h = grid.h
    s = dt * nv / h**2
    mom_new = np.array(mom, dtype=float, copy=True)
    runs = support_runs(rho > max(rho_floor, 0.0))
    reflect = boundary == "reflect"
    if grid.geometry is Geometry.SLAB_1D:
        x = grid.centers
        for i0, i1 in runs:
            m = i1 - i0 + 1
            if m == 1:
                continue
            ab = np.zeros((3, m))
            ab[1, :] = rho[i0 : i1 + 1] + 2.0 * s
            ab[0, 1:] = -s
            ab[2, :-1] = -s
            if reflect and i0 == 0:
                ab[1, 0] += s
            else:
                ab[1, 0] -= s * (x[i0] - h) / x[i0]
            if reflect and i1 == grid.N - 1:
                ab[1, -1] += s
            else:
                ab[1, -1] -= s * (x[i1] + h) / x[i1]
            u_new = solve_banded((1, 1), ab, mom[i0 : i1 + 1])
            mom_new[i0 : i1 + 1] = rho[i0 : i1 + 1] * u_new
        return mom_new
    r = grid.centers
    for i0, i1 in runs:
        m = i1 - i0 + 1
        if m == 1:
            continue
        rr = r[i0 : i1 + 1]
        Rf = grid.edges[i0 + 1 : i1 + 1]  # the m-1 interior faces of the run
        diag = rho[i0 : i1 + 1].astype(float).copy()
        diag[:-1] += s * rr[:-1] / Rf
        diag[1:] += s * rr[1:] / Rf
        upper = -s * rr[1:] / Rf
        lower = -s * rr[:-1] / Rf
        diag[0] += 2.0 * dt * nv / (h * rr[0])
        if reflect and i1 == grid.N - 1:
            diag[-1] += 2.0 * s
        else:
            diag[-1] -= 2.0 * dt * nv / (h * rr[-1])
        ab = np.zeros((3, m))
        ab[1, :] = diag
        ab[0, 1:] = upper
        ab[2, :-1] = lower
        u_new = solve_banded((1, 1), ab, mom[i0 : i1 + 1])
        mom_new[i0 : i1 + 1] = rho[i0 : i1 + 1] * u_new
    return mom_new


@dataclass(frozen=True)
class StepInfo:
    dt: float
    clipped: float


def step(
    state: FluidState,
    params: PhysParams,
    grid: Grid,
    cfg: SchemeConfig,
    rho_floor: float = 0.0,
    dt: Optional[float] = None,
    boundary: str = "vacuum",
) -> tuple[FluidState, StepInfo]:
    """One time step: SSP-RK2 on the hyperbolic terms, then implicit viscous.

    Returns the new state plus the step audit (dt used, clipped mass).
    Non-finite results raise through the FluidState constructor with the
    first offending cell named.
    """
    if dt is None:
        dt = cfl_dt(state, params, grid, cfg, viscous=False)
    clipped = 0.0

    t1 = compute_rhs(state, params, grid, rho_floor, viscous=False, boundary=boundary)
    rho1 = state.rho + dt * t1.d_rho
    mom1 = state.mom + dt * t1.d_mom
    rho1, mom1, c = _clip_negative(rho1, mom1, grid)
    clipped += c
    mid = FluidState(t=state.t + dt, rho=rho1, mom=np.where(rho1 > 0.0, mom1, 0.0))

    t2 = compute_rhs(mid, params, grid, rho_floor, viscous=False, boundary=boundary)
    rho2 = 0.5 * (state.rho + rho1 + dt * t2.d_rho)
    mom2 = 0.5 * (state.mom + mom1 + dt * t2.d_mom)
    rho2, mom2, c = _clip_negative(rho2, mom2, grid)
    clipped += c

    mom3 = _viscous_update(rho2, mom2, params, grid, dt, rho_floor, boundary)
    new = FluidState(t=state.t + dt, rho=rho2, mom=np.where(rho2 > 0.0, mom3, 0.0))
    return new, StepInfo(dt=dt, clipped=clipped)


def run(
    initial: InitialData,
    params: PhysParams,
    grid: Grid,
    cfg: SchemeConfig,
    sinks: Sequence[Callable[[dg.DiagnosticsRow], None]] = (),
    particles: Optional[ParticleSet] = None,
) -> dg.TimeSeries:
    """Advance the sampled initial data to t_end, streaming diagnostics rows.

    A row is emitted at t=0, every output_every steps, and at the final time;
    each row goes to every sink as it is produced.  A per-step clipped-mass
    budget of 1e-10*m0 aborts the run (reason recorded on the series).  When
    a ParticleSet is supplied it is advected through every step and its
    positions are snapshotted at the output cadence.
    """
    if params.geometry is not grid.geometry:
        raise ValueError(
            f"parameter dimension n={params.n} does not match grid geometry {grid.geometry.value}"
        )
    state = sample_initial(initial, grid)
    rho_floor = cfg.rho_cut * float(np.max(state.rho))
    series = dg.TimeSeries(params=params, R=initial.R, rho_floor=rho_floor)

    first = dg.measure(state, params, grid, initial.R, rho_floor)
    series.rows.append(first)
    for sink in sinks:
        sink(first)
    prev_row = first

    tracks = None
    if particles is not None:
        tracks = ParticleTracks()
        tracks.record(0.0, particles)

    t_end = cfg.t_end
    tiny = 1e-14 * max(t_end, 1.0)
    steps = 0
    while t_end - state.t > tiny:
        dt = cfl_dt(state, params, grid, cfg, viscous=False)
        landing = state.t + dt >= t_end - tiny
        if landing:
            dt = t_end - state.t
        new_state, info = step(state, params, grid, cfg, rho_floor, dt=dt)
        if landing:
            new_state = FluidState(t=t_end, rho=new_state.rho, mom=new_state.mom)
        series.clipped_total += info.clipped
        if info.clipped > CLIP_BUDGET_FRACTION * series.m0:
            series.aborted = (
                f"clipped mass {info.clipped:.3e} exceeded budget "
                f"{CLIP_BUDGET_FRACTION * series.m0:.3e} in one step at t={state.t:.6g}"
            )
            break
        if particles is not None:
            sampler = TwoStateSampler(grid, state, new_state, rho_floor)
            advect(particles, sampler, state.t, dt)
        state = new_state
        steps += 1
        if steps % cfg.output_every == 0 or landing:
            row = dg.measure(state, params, grid, initial.R, rho_floor, prev=prev_row, first=first)
            series.rows.append(row)
            for sink in sinks:
                sink(row)
            prev_row = row
            if particles is not None:
                tracks.record(state.t, particles)
        if steps >= MAX_STEPS:
            series.aborted = f"step budget {MAX_STEPS} exhausted at t={state.t:.6g}"
            break

    series.final_state = state
    series.steps_taken = steps
    series.tracks = tracks
    return series
