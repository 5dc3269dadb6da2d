"""Shared catalog runs for the test suite.

The acceptance criteria and several unit tests all consume the same small
family of runs (quartic bump, a=1, mu=0.1, lambda=0, R=1, L=2, t_end=0.1),
so they are computed once per session here.  Keys of the catalog dict:
"1d_rest", "1d_flow", "2d_rest", "2d_flow"; the refinement ladder holds the
1d_rest run at N = 128, 256, 512 with boundary particle seeds attached.
"""

import numpy as np
import pytest

from isoblow.core import (
    Geometry,
    GridSpec,
    PhysParams,
    build_grid,
    quartic_bump,
    quartic_bump_outward,
)
from isoblow.lagrangian import seed_particles
from isoblow.solver import SchemeConfig, run

R = 1.0
T_END = 0.1


def catalog_params(n):
    return PhysParams(a=1.0, mu=0.1, lam=0.0, n=n)


def catalog_run(n, kind, N, particles=False):
    geometry = Geometry.SLAB_1D if n == 1 else Geometry.RADIAL_2D
    grid = build_grid(GridSpec(geometry, L=2.0, N=N))
    params = catalog_params(n)
    cfg = SchemeConfig(t_end=T_END, cfl=0.4, rho_cut=1e-10, output_every=1)
    if kind == "rest":
        init = quartic_bump(R=R)
    else:
        init = quartic_bump_outward(R=R, speed=0.5)
    parts = seed_particles(grid, R=R) if particles else None
    series = run(init, params, grid, cfg, particles=parts)
    return {"series": series, "grid": grid, "params": params, "particles": parts}


@pytest.fixture(scope="session")
def ladder1d():
    return {N: catalog_run(1, "rest", N, particles=True) for N in (128, 256, 512)}


@pytest.fixture(scope="session")
def catalog256(ladder1d):
    return {
        "1d_rest": ladder1d[256],
        "1d_flow": catalog_run(1, "flow", 256),
        "2d_rest": catalog_run(2, "rest", 256),
        "2d_flow": catalog_run(2, "flow", 256),
    }
