"""Particle paths through the numerical velocity field.

The support of the density is transported by the flow map, so seeds placed on
the initial support boundary should track the support radius observed on the
grid.  Particles are advected with RK4 in time; velocity between grid states
is piecewise linear in space and linear in time.

Also provides the pointwise residual of the steady viscous operator, used to
check that the velocity in the vacuum exterior relaxes onto solutions of
L u = 0 (u affine in 1D; span{r, 1/r} for the radial operator).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np

from .core import FluidState, Geometry, Grid, velocity


@dataclass
class ParticleSet:
    """Positions (1D coordinate or radius), mutated in place by advect()."""

    x0: np.ndarray
    x: np.ndarray
    frozen: np.ndarray
    kind: np.ndarray

    @property
    def n(self) -> int:
        return self.x.size


def seed_particles(
    grid: Grid,
    R: float,
    n_boundary: int = 64,
    n_interior: int = 16,
    n_exterior: int = 16,
) -> ParticleSet:
    """Deterministic seeds: support boundary, interior fill, exterior fill."""
    if not (0.0 < R < grid.L):
        raise ValueError(f"seed radius R={R} must lie inside the domain (0, {grid.L})")
    if grid.geometry is Geometry.SLAB_1D:
        k = n_boundary // 2
        boundary = np.concatenate((np.full(k, R), np.full(n_boundary - k, -R)))
        interior = np.linspace(-R, R, n_interior + 2)[1:-1]
        k = n_exterior // 2
        right = np.linspace(R, grid.L, (n_exterior - k) + 2)[1:-1]
        left = -np.linspace(R, grid.L, k + 2)[1:-1]
        exterior = np.concatenate((right, left))
    else:
        boundary = np.full(n_boundary, R)
        interior = np.linspace(0.0, R, n_interior + 2)[1:-1]
        exterior = np.linspace(R, grid.L, n_exterior + 2)[1:-1]
    x0 = np.concatenate((boundary, interior, exterior))
    kind = np.array(
        ["boundary"] * n_boundary + ["interior"] * n_interior + ["exterior"] * n_exterior
    )
    return ParticleSet(x0=x0, x=x0.copy(), frozen=np.zeros(x0.size, dtype=bool), kind=kind)


class TwoStateSampler:
    """u(x, t) from two bracketing grid states, linear in space and time.

    Outside the cell-center range the velocity tapers linearly to zero at the
    domain edge (1D) or at the origin and outer edge (radial), matching the
    vacuum boundary state and the odd symmetry at r = 0.
    """

    def __init__(self, grid: Grid, state_a: FluidState, state_b: FluidState, rho_floor: float = 0.0):
        self.grid = grid
        self.ta = state_a.t
        self.tb = state_b.t
        ua = velocity(state_a, rho_floor)
        ub = velocity(state_b, rho_floor)
        if grid.geometry is Geometry.SLAB_1D:
            pads = (-grid.L, grid.L)
        else:
            pads = (0.0, grid.L)
        self.xp = np.concatenate(([pads[0]], grid.centers, [pads[1]]))
        self.fa = np.concatenate(([0.0], ua, [0.0]))
        self.fb = np.concatenate(([0.0], ub, [0.0]))

    def __call__(self, x: np.ndarray, t: float) -> np.ndarray:
        va = np.interp(x, self.xp, self.fa, left=0.0, right=0.0)
        if self.tb <= self.ta:
            return va
        w = min(max((t - self.ta) / (self.tb - self.ta), 0.0), 1.0)
        vb = np.interp(x, self.xp, self.fb, left=0.0, right=0.0)
        return (1.0 - w) * va + w * vb


def advect(particles: ParticleSet, sampler: TwoStateSampler, t: float, dt: float) -> None:
    """One RK4 step of dx/dt = u(x, t); particles leaving the domain freeze."""
    live = ~particles.frozen
    if not np.any(live) or dt == 0.0:
        return
    x = particles.x[live]
    k1 = sampler(x, t)
    k2 = sampler(x + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = sampler(x + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = sampler(x + dt * k3, t + dt)
    x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if sampler.grid.geometry is Geometry.RADIAL_2D:
        x = np.maximum(x, 0.0)
        out = x > sampler.grid.L
    else:
        out = np.abs(x) > sampler.grid.L
    particles.x[live] = x
    idx = np.flatnonzero(live)
    particles.frozen[idx[out]] = True


@dataclass
class ParticleTracks:
    """Snapshots of particle positions at the output cadence."""

    times: List[float] = field(default_factory=list)
    positions: List[np.ndarray] = field(default_factory=list)

    def record(self, t: float, particles: ParticleSet) -> None:
        self.times.append(float(t))
        self.positions.append(particles.x.copy())


def exterior_elliptic_residual(state: FluidState, grid: Grid, radius: float) -> float:
    """Volume-weighted L2 norm of the discrete steady viscous operator on u
    over cells beyond the given radius.

    1D residual: (u[i+1] - 2 u[i] + u[i-1]) / h^2.  Radial residual: face
    divergence differences, which vanish identically on span{r, 1/r}.  Cells
    whose stencil would leave the array are excluded.  The value is not
    scaled by viscosity; it measures the shape of u only.
    """
    u = velocity(state, 0.0)
    h = grid.h
    if grid.geometry is Geometry.SLAB_1D:
        res = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / h**2
        pos = np.abs(grid.centers[1:-1])
        vols = grid.volumes[1:-1]
    else:
        r = grid.centers
        ru = r * u
        omega = (ru[1:] - ru[:-1]) / (grid.edges[1:-1] * h)
        res = (omega[1:] - omega[:-1]) / h
        pos = r[1:-1]
        vols = grid.volumes[1:-1]
    sel = pos > radius
    if not np.any(sel):
        return 0.0
    return float(np.sqrt(np.dot(res[sel] ** 2, vols[sel])))
