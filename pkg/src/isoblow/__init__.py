"""Isothermal compressible viscous flow with vacuum: finite-volume solver,
functional diagnostics, particle tracers, and the finite-lifespan certificate
for compactly supported density."""

from .core import (
    FluidState,
    Geometry,
    Grid,
    GridSpec,
    InitialData,
    PhysParams,
    PROFILES,
    build_grid,
    quartic_bump,
    quartic_bump_outward,
    sample_initial,
    support_runs,
    velocity,
)
from .diagnostics import (
    Certificate,
    CSV_HEADER,
    DiagnosticsRow,
    TimeSeries,
    blowup_certificate,
    certificate_consistency,
    lifespan_scan_root,
    measure,
    poincare_check,
    poincare_const,
)
from .lagrangian import ParticleSet, ParticleTracks, exterior_elliptic_residual, seed_particles
from .oracle import ValidationReport, catalog_fields, cross_validate, quad_functional
from .solver import SchemeConfig, StepInfo, Tendency, cfl_dt, compute_rhs, run, step
from .config import ConfigError, RunConfig, load_config

__version__ = "0.1.0"

__all__ = [
    "FluidState", "Geometry", "Grid", "GridSpec", "InitialData", "PhysParams",
    "PROFILES", "build_grid", "quartic_bump", "quartic_bump_outward",
    "sample_initial", "support_runs", "velocity",
    "Certificate", "CSV_HEADER", "DiagnosticsRow", "TimeSeries",
    "blowup_certificate", "certificate_consistency", "lifespan_scan_root",
    "measure", "poincare_check", "poincare_const",
    "ParticleSet", "ParticleTracks", "exterior_elliptic_residual", "seed_particles",
    "ValidationReport", "catalog_fields", "cross_validate", "quad_functional",
    "SchemeConfig", "StepInfo", "Tendency", "cfl_dt", "compute_rhs", "run", "step",
    "ConfigError", "RunConfig", "load_config",
    "__version__",
]
