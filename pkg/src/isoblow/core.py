"""Core types for the isothermal compressible Navier-Stokes laboratory.

The model is the barotropic system with linear pressure P(rho) = a*rho,

    rho_t + div(rho u)            = 0
    (rho u)_t + div(rho u x u) + grad P = mu*Lap(u) + (lam+mu)*grad(div u)

posed either on a 1D slab [-L, L] or on a disk of radius L for radially
symmetric 2D flow u = ubar(r, t) * x/r.  Density is compactly supported
(vacuum outside the support), which is what all downstream identity checks
are about.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


class Geometry(enum.Enum):
    """Spatial reduction the solver runs in."""

    SLAB_1D = "slab1d"
    RADIAL_2D = "radial2d"

    @property
    def dim(self) -> int:
        return 1 if self is Geometry.SLAB_1D else 2


@dataclass(frozen=True)
class PhysParams:
    """Physical parameters: pressure slope and viscosities.

    The viscosity gate is mu > 0 and lam + (2/n)*mu > 0; constructors refuse
    anything outside it so that the dissipation functional stays nonnegative
    and the certificate's effective viscosity stays positive.
    """

    a: float
    mu: float
    lam: float
    n: int

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError(f"n must be 1 or 2, got {self.n}")
        if not (self.a > 0.0):
            raise ValueError(f"pressure coefficient a must be positive, got {self.a}")
        if not (self.mu > 0.0):
            raise ValueError(
                f"viscosity gate requires mu > 0 and lam + (2/n)*mu > 0; got mu = {self.mu}"
            )
        if not (self.lam + (2.0 / self.n) * self.mu > 0.0):
            raise ValueError(
                "viscosity gate requires mu > 0 and lam + (2/n)*mu > 0; "
                f"got lam + (2/{self.n})*mu = {self.lam + (2.0 / self.n) * self.mu}"
            )

    @property
    def sound_speed(self) -> float:
        return math.sqrt(self.a)

    @property
    def long_visc(self) -> float:
        """Longitudinal viscosity lam + 2*mu (the 1D / radial stencil coefficient)."""
        return self.lam + 2.0 * self.mu

    @property
    def geometry(self) -> Geometry:
        return Geometry.SLAB_1D if self.n == 1 else Geometry.RADIAL_2D


@dataclass(frozen=True)
class GridSpec:
    """Requested grid: geometry, half-width/radius L, cell count N."""

    geometry: Geometry
    L: float
    N: int


@dataclass(frozen=True)
class Grid:
    """Built finite-volume grid.

    1D slab: N cells on [-L, L], h = 2L/N, volume h per cell.
    2D radial: N annuli on [0, L], h = L/N, volume 2*pi*r_i*h (exact for the
    annulus since the midpoint rule is exact on r).
    """

    geometry: Geometry
    L: float
    N: int
    h: float
    edges: np.ndarray
    centers: np.ndarray
    volumes: np.ndarray
    face_areas: np.ndarray

    @property
    def domain_volume(self) -> float:
        return 2.0 * self.L if self.geometry is Geometry.SLAB_1D else math.pi * self.L**2


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=float)
    out.flags.writeable = False
    return out


def build_grid(spec: GridSpec, strict: bool = True) -> Grid:
    """Build cell edges, centers, volumes and face areas for a GridSpec.

    strict=True (the run path) refuses N < 16 and L <= 0; strict=False exists
    for small arithmetic checks.
    """
    if spec.L <= 0.0:
        raise ValueError(f"domain size L must be positive, got {spec.L}")
    if spec.N < 1 or (strict and spec.N < 16):
        raise ValueError(f"cell count N must be at least 16, got {spec.N}")

    if spec.geometry is Geometry.SLAB_1D:
        h = 2.0 * spec.L / spec.N
        edges = np.linspace(-spec.L, spec.L, spec.N + 1)
        centers = 0.5 * (edges[:-1] + edges[1:])
        volumes = np.full(spec.N, h)
        face_areas = np.ones(spec.N + 1)
    else:
        h = spec.L / spec.N
        edges = np.linspace(0.0, spec.L, spec.N + 1)
        centers = 0.5 * (edges[:-1] + edges[1:])
        volumes = 2.0 * math.pi * centers * h
        face_areas = 2.0 * math.pi * edges
    return Grid(
        geometry=spec.geometry,
        L=spec.L,
        N=spec.N,
        h=h,
        edges=_freeze(edges),
        centers=_freeze(centers),
        volumes=_freeze(volumes),
        face_areas=_freeze(face_areas),
    )


@dataclass(frozen=True)
class FluidState:
    """Cell-averaged conserved fields at one instant: density and momentum.

    Invariants: rho >= 0 everywhere, both fields finite, and mom == 0 wherever
    rho == 0 (no momentum in exact vacuum).  Arrays are read-only.
    """

    t: float
    rho: np.ndarray
    mom: np.ndarray

    def __post_init__(self):
        rho = _freeze(self.rho)
        mom = _freeze(self.mom)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "mom", mom)
        if rho.shape != mom.shape:
            raise ValueError("rho and mom must have the same shape")
        if not (np.all(np.isfinite(rho)) and np.all(np.isfinite(mom))):
            bad = int(np.argmax(~(np.isfinite(rho) & np.isfinite(mom))))
            raise ValueError(f"non-finite field value first seen in cell {bad}")
        if np.any(rho < 0.0):
            bad = int(np.argmax(rho < 0.0))
            raise ValueError(f"negative density in cell {bad}: {rho[bad]}")
        if np.any((rho == 0.0) & (mom != 0.0)):
            bad = int(np.argmax((rho == 0.0) & (mom != 0.0)))
            raise ValueError(f"momentum without mass in cell {bad}")


def velocity(state: FluidState, rho_floor: float = 0.0) -> np.ndarray:
    """Reconstructed velocity: mom/rho above the vacuum cutoff, zero below.

    rho_floor is an absolute density (callers pass rho_cut * max(rho0)).
    """
    rho = state.rho
    mask = rho > max(rho_floor, 0.0)
    u = np.zeros_like(rho)
    np.divide(state.mom, rho, out=u, where=mask)
    u[~mask] = 0.0
    return u


def support_runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Maximal runs of True in a boolean cell mask, as (first, last) index pairs.

    The solver's viscous update and the gradient diagnostics both operate on
    contiguous above-cutoff regions; this is the shared decomposition.
    """
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return []
    brk = np.flatnonzero(np.diff(idx) > 1)
    starts = np.concatenate(([idx[0]], idx[brk + 1]))
    ends = np.concatenate((idx[brk], [idx[-1]]))
    return list(zip(starts.tolist(), ends.tolist()))


@dataclass(frozen=True)
class InitialData:
    """Analytic initial profile: density and velocity callables plus support radius.

    kind identifies the catalog family; rho0/u0 take position (1D) or radius
    (2D) arrays.  u0 is the scalar velocity (ubar in 2D radial).
    """

    kind: str
    R: float
    rho0: Callable[[np.ndarray], np.ndarray]
    u0: Callable[[np.ndarray], np.ndarray]
    amplitude: float = 1.0
    speed: float = 0.0


def _bump_shape(xi: np.ndarray) -> np.ndarray:
    """Quartic bump (1 - xi^2)^2 on |xi| < 1, zero outside."""
    xi = np.asarray(xi, dtype=float)
    core = 1.0 - xi * xi
    return np.where(np.abs(xi) < 1.0, core * core, 0.0)


def quartic_bump(R: float = 1.0, amplitude: float = 1.0) -> InitialData:
    """Quartic bump density at rest: rho0 = A*(1-(x/R)^2)^2, u0 = 0."""
    if R <= 0.0 or amplitude <= 0.0:
        raise ValueError("bump radius and amplitude must be positive")

    def rho0(x):
        return amplitude * _bump_shape(np.asarray(x, dtype=float) / R)

    def u0(x):
        return np.zeros_like(np.asarray(x, dtype=float))

    return InitialData(kind="quartic_bump", R=R, rho0=rho0, u0=u0, amplitude=amplitude)


def quartic_bump_outward(R: float = 1.0, amplitude: float = 1.0, speed: float = 0.5) -> InitialData:
    """Quartic bump with outward velocity u0 = speed * x * bump(x/R).

    In radial geometry this reads ubar0(r) = speed * r * bump(r/R), so
    ubar0(0) = 0 and the field is smooth at the origin.
    """
    if R <= 0.0 or amplitude <= 0.0:
        raise ValueError("bump radius and amplitude must be positive")

    def rho0(x):
        return amplitude * _bump_shape(np.asarray(x, dtype=float) / R)

    def u0(x):
        x = np.asarray(x, dtype=float)
        return speed * x * _bump_shape(x / R)

    return InitialData(
        kind="quartic_bump_outward", R=R, rho0=rho0, u0=u0, amplitude=amplitude, speed=speed
    )


PROFILES: dict[str, Callable[..., InitialData]] = {
    "quartic_bump": quartic_bump,
    "quartic_bump_outward": quartic_bump_outward,
}


def sample_initial(data: InitialData, grid: Grid) -> FluidState:
    """Sample an analytic profile onto a grid by midpoint evaluation.

    Vacuum cells get exactly zero momentum.  Rejects profiles that are
    negative anywhere, identically zero, supported outside the domain
    (needs L > R), or, in radial geometry, with ubar0(0) != 0.
    """
    if not (grid.L > data.R):
        raise ValueError(f"domain must contain the support: need L > R, got L={grid.L}, R={data.R}")
    rho = np.asarray(data.rho0(grid.centers), dtype=float)
    u = np.asarray(data.u0(grid.centers), dtype=float)
    if rho.shape != grid.centers.shape:
        raise ValueError("rho0 must return one value per cell center")
    if np.any(rho < 0.0):
        raise ValueError("initial density is negative somewhere; profiles must be nonnegative")
    if not np.any(rho > 0.0):
        raise ValueError("initial density vanishes identically; nothing to evolve")
    if grid.geometry is Geometry.RADIAL_2D:
        u_origin = float(np.asarray(data.u0(np.array([0.0])), dtype=float)[0])
        if u_origin != 0.0:
            raise ValueError(f"radial velocity must vanish at the origin, got ubar0(0)={u_origin}")
    mom = np.where(rho > 0.0, rho * u, 0.0)
    return FluidState(t=0.0, rho=rho, mom=mom)
