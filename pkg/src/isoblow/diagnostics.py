"""Grid functionals, identity residuals, and the lifespan certificate.

The identities being monitored, for P = a*rho on a slab (n=1) or a disk with
radial symmetry (n=2), m0 = initial mass, M(t) = integral of rho*u.x:

    mass:      m(t) = m0
    momentum:  M(t) - M(0) = int_0^t int rho|u|^2 + n*a*m0*t
    energy:    [kinetic + a*entropy](t) + int_0^t D = [kinetic + a*entropy](0)
    Poincare:  (int |rho u.x|)^2 <= m0^2 * K_n * int |grad u|^2,
               K_1 = R^3, K_2 = R^2/(2*pi)

with D = mu*int|grad u|^2 + (lam+mu)*int|div u|^2 and the entropy integrand
rho*ln(rho) taken as 0 in vacuum.  Derivative stencils mirror the solver's
viscous stencils: central differences inside each contiguous above-cutoff
region, closed at region ends with the self-similar profile (u ~ x, ubar ~ r;
at the origin this reduces to the odd reflection of ubar).  A full-grid
stencil would see an O(u^2/h) jump where the reconstructed velocity drops to
zero at the vacuum cutoff, which diverges under refinement; the run-restricted
stencil is bounded and keeps every polynomial check case exact.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import FluidState, Geometry, Grid, PhysParams, support_runs, velocity

log = logging.getLogger(__name__)

CSV_HEADER = (
    "t,mass,M,kinetic,entropy,cum_kinetic,dissipation,cum_dissipation,"
    "grad_sq,mom_residual,energy_residual,support_radius,poincare_lhs,poincare_rhs"
)


# ---------------------------------------------------------------------------
# instantaneous functionals


def mass(state: FluidState, grid: Grid) -> float:
    """Total mass, sum of rho * cell volume."""
    return float(np.dot(state.rho, grid.volumes))


def weighted_momentum(state: FluidState, grid: Grid) -> float:
    """M = integral of rho*u.x (momentum weighted by position)."""
    return float(np.dot(state.mom * grid.centers, grid.volumes))


def kinetic_and_entropy(state: FluidState, grid: Grid, rho_floor: float = 0.0) -> tuple[float, float]:
    """Kinetic energy (1/2)int rho|u|^2 and entropy int rho*ln(rho).

    Vacuum cells contribute zero to both (rho*ln rho -> 0 as rho -> 0).
    """
    rho = state.rho
    active = rho > max(rho_floor, 0.0)
    ke = np.zeros_like(rho)
    np.divide(state.mom**2, rho, out=ke, where=active)
    kinetic = 0.5 * float(np.dot(ke, grid.volumes))
    ent = np.zeros_like(rho)
    pos = rho > 0.0
    np.multiply(rho, np.log(rho, out=np.zeros_like(rho), where=pos), out=ent, where=pos)
    entropy = float(np.dot(ent, grid.volumes))
    return kinetic, entropy


def entropy_regularized(state: FluidState, grid: Grid, eps: float) -> float:
    """Regularized entropy int [rho*ln(rho+eps) + eps*ln(rho+eps)].

    A vacuum region of volume V contributes V*eps*ln(eps); the distance to the
    plain entropy shrinks like |eps*ln(eps)|.
    """
    if eps <= 0.0:
        raise ValueError(f"regularization eps must be positive, got {eps}")
    rho = state.rho
    ln = np.log(rho + eps)
    return float(np.dot(rho * ln + eps * ln, grid.volumes))


def _velocity_gradients(state: FluidState, grid: Grid, rho_floor: float = 0.0):
    """Cell-centered (du, u_over_r) on above-cutoff runs, zero elsewhere.

    1D returns (u_x, None); 2D radial returns (ubar_r, ubar/r).  Inside a run
    the stencil is the plain central difference; at a run end the missing
    neighbor is the similarity ghost u_g = u_f * x_g/x_f (so linear-through-
    the-origin fields differentiate exactly, and a run starting at the first
    radial cell reproduces the odd reflection through r=0).  A single-cell
    run takes its similarity slope u/x directly.
    """
    u = velocity(state, rho_floor)
    h = grid.h
    x = grid.centers
    du = np.zeros_like(u)
    for i0, i1 in support_runs(state.rho > max(rho_floor, 0.0)):
        if i1 == i0:
            du[i0] = u[i0] / x[i0]
            continue
        seg = u[i0 : i1 + 1]
        du[i0 + 1 : i1] = (seg[2:] - seg[:-2]) / (2.0 * h)
        du[i0] = (seg[1] - seg[0] * (x[i0] - h) / x[i0]) / (2.0 * h)
        du[i1] = (seg[-1] * (x[i1] + h) / x[i1] - seg[-2]) / (2.0 * h)
    if grid.geometry is Geometry.SLAB_1D:
        return du, None
    return du, u / x


def gradient_functionals(state: FluidState, grid: Grid, rho_floor: float = 0.0) -> tuple[float, float]:
    """(int |grad u|^2, int |div u|^2) for the reconstructed velocity.

    1D: both equal int u_x^2.  2D radial: |grad u|^2 = ubar_r^2 + (ubar/r)^2
    and div u = ubar_r + ubar/r.
    """
    du, uor = _velocity_gradients(state, grid, rho_floor)
    if uor is None:
        val = float(np.dot(du * du, grid.volumes))
        return val, val
    grad = float(np.dot(du * du + uor * uor, grid.volumes))
    div = du + uor
    return grad, float(np.dot(div * div, grid.volumes))


def dissipation(state: FluidState, params: PhysParams, grid: Grid, rho_floor: float = 0.0) -> tuple[float, float]:
    """(D, grad_sq) with D = mu*int|grad u|^2 + (lam+mu)*int|div u|^2."""
    grad, div = gradient_functionals(state, grid, rho_floor)
    return params.mu * grad + (params.lam + params.mu) * div, grad


def support_radius(state: FluidState, grid: Grid, threshold: float) -> float:
    """Largest |cell center| whose density exceeds the threshold; 0 if none."""
    above = state.rho > threshold
    if not np.any(above):
        return 0.0
    return float(np.max(np.abs(grid.centers[above])))


def poincare_check(
    state: FluidState,
    params: PhysParams,
    grid: Grid,
    R: float,
    rho_floor: float = 0.0,
) -> tuple[float, float]:
    """Both sides of the weighted-momentum Poincare bound.

    lhs = (int |rho u.x|)^2, rhs = m0^2 * K_n * int |grad u|^2 with
    K_1 = R^3 and K_2 = R^2/(2*pi).  When the support reaches outside
    radius R the bound's hypothesis is void; that is flagged in the log,
    not raised.
    """
    lhs = float(np.dot(np.abs(state.mom * grid.centers), grid.volumes)) ** 2
    m = mass(state, grid)
    grad, _ = gradient_functionals(state, grid, rho_floor)
    rhs = m * m * poincare_const(params.n, R) * grad
    thresh = max(rho_floor, 0.0)
    if support_radius(state, grid, thresh) > R:
        log.debug("support exceeds radius R=%g; Poincare hypothesis void at t=%g", R, state.t)
    return lhs, rhs


def poincare_const(n: int, R: float) -> float:
    """K_n in the support-confined bound |u.x|_inf^2 <= K_n * int|grad u|^2."""
    if n == 1:
        return R**3
    return R**2 / (2.0 * math.pi)


# ---------------------------------------------------------------------------
# time series


@dataclass(frozen=True)
class DiagnosticsRow:
    """One output row: instantaneous functionals plus running integrals."""

    t: float
    mass: float
    M: float
    kinetic: float
    entropy: float
    cum_kinetic: float       # int_0^t int rho|u|^2 (twice the kinetic energy, integrated)
    dissipation: float
    cum_dissipation: float
    grad_sq: float
    mom_residual: float
    energy_residual: float
    support_radius: float
    poincare_lhs: float
    poincare_rhs: float

    def as_csv_line(self) -> str:
        vals = (
            self.t, self.mass, self.M, self.kinetic, self.entropy, self.cum_kinetic,
            self.dissipation, self.cum_dissipation, self.grad_sq, self.mom_residual,
            self.energy_residual, self.support_radius, self.poincare_lhs, self.poincare_rhs,
        )
        return ",".join(repr(float(v)) for v in vals)


@dataclass
class TimeSeries:
    """Diagnostics rows for a run plus run-level metadata.

    aborted carries the abort reason ('' for a clean run); final_state is the
    last accepted state; tracks holds particle trajectories when a ParticleSet
    was advected alongside the run.
    """

    params: PhysParams
    R: float
    rho_floor: float
    rows: list[DiagnosticsRow] = field(default_factory=list)
    aborted: str = ""
    final_state: Optional[FluidState] = None
    tracks: Optional["object"] = None
    steps_taken: int = 0
    clipped_total: float = 0.0

    @property
    def m0(self) -> float:
        return self.rows[0].mass

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def write_csv(self, fh) -> None:
        fh.write(CSV_HEADER + "\n")
        for row in self.rows:
            fh.write(row.as_csv_line() + "\n")


def measure(
    state: FluidState,
    params: PhysParams,
    grid: Grid,
    R: float,
    rho_floor: float,
    prev: Optional[DiagnosticsRow] = None,
    first: Optional[DiagnosticsRow] = None,
) -> DiagnosticsRow:
    """Assemble a DiagnosticsRow, extending the running integrals from prev.

    prev is the previous emitted row and first the initial one (they anchor
    the trapezoid accumulators and the identity baselines); omit both for the
    t=0 row.  The streamed cumulative values match a trapz over the stored
    columns exactly.
    """
    m = mass(state, grid)
    M = weighted_momentum(state, grid)
    kin, ent = kinetic_and_entropy(state, grid, rho_floor)
    D, grad = dissipation(state, params, grid, rho_floor)
    lhs, rhs = poincare_check(state, params, grid, R, rho_floor)
    supp = support_radius(state, grid, rho_floor)

    if prev is None:
        cum_kin = 0.0
        cum_diss = 0.0
        mom_res = 0.0
        energy_res = 0.0
    else:
        if first is None:
            raise ValueError("the initial row is required when extending a series")
        dt = state.t - prev.t
        cum_kin = prev.cum_kinetic + dt * (2.0 * prev.kinetic + 2.0 * kin) / 2.0
        cum_diss = prev.cum_dissipation + dt * (prev.dissipation + D) / 2.0
        mom_res = M - first.M - cum_kin - params.n * params.a * first.mass * state.t
        e0 = first.kinetic + params.a * first.entropy
        energy_res = kin + params.a * ent + cum_diss - e0
    return DiagnosticsRow(
        t=state.t, mass=m, M=M, kinetic=kin, entropy=ent, cum_kinetic=cum_kin,
        dissipation=D, cum_dissipation=cum_diss, grad_sq=grad, mom_residual=mom_res,
        energy_residual=energy_res, support_radius=supp, poincare_lhs=lhs, poincare_rhs=rhs,
    )


def momentum_identity_residual(series: TimeSeries, params: PhysParams) -> np.ndarray:
    """M(t) - M(0) - int_0^t int rho|u|^2 - n*a*m0*t recomputed from the columns."""
    t = series.column("t")
    M = series.column("M")
    kin = series.column("kinetic")
    cum = _cumtrapz(2.0 * kin, t)
    return M - M[0] - cum - params.n * params.a * series.m0 * t


def energy_identity_residual(series: TimeSeries, params: PhysParams) -> np.ndarray:
    """[kinetic + a*entropy + cum dissipation](t) - [kinetic + a*entropy](0)."""
    t = series.column("t")
    kin = series.column("kinetic")
    ent = series.column("entropy")
    diss = series.column("dissipation")
    cum = _cumtrapz(diss, t)
    e = kin + params.a * ent
    return e + cum - e[0]


def _cumtrapz(y: np.ndarray, t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(y)
    if len(y) > 1:
        out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


# ---------------------------------------------------------------------------
# lifespan certificate


@dataclass(frozen=True)
class Certificate:
    """Lifespan bound: no smooth compact-support solution past t_star.

    The cubic is c3*T^3 - c1*T - c0 with c3 = (a*m0)^2, c1 = 2*M0^2,
    c0 = 2*m0^2*K_n*C1, where C1 = energy_budget / mu_eff bounds the
    cumulative squared velocity gradient.  degenerate means both non-leading
    coefficients vanish, in which case t_star collapses to 0.
    """

    n: int
    a: float
    m0: float
    mom0: float
    poincare_const: float
    energy_budget: float
    mu_eff: float
    grad_budget: float
    cubic: tuple[float, float, float]
    t_star: float
    degenerate: bool

    def cubic_value(self, T) -> np.ndarray:
        c3, c1, c0 = self.cubic
        T = np.asarray(T, dtype=float)
        return c3 * T**3 - c1 * T - c0


def blowup_certificate(row0: DiagnosticsRow, params: PhysParams, R: float) -> Certificate:
    """Build the certificate from the initial diagnostics row alone.

    energy_budget = kinetic(0) + a*entropy(0) + a*|B_R|/e, using the pointwise
    bound rho*ln(rho) >= -1/e over the support ball; mu_eff is lam+2*mu in 1D
    and mu in 2D.
    """
    if row0.mass <= 0.0:
        raise ValueError("certificate requires positive initial mass")
    if R <= 0.0:
        raise ValueError("certificate requires a positive support radius")
    a, n = params.a, params.n
    ball = 2.0 * R if n == 1 else math.pi * R * R
    energy_budget = row0.kinetic + a * row0.entropy + a * ball / math.e
    if energy_budget < -1e-12 * max(1.0, abs(a * row0.entropy)):
        raise ValueError(f"energy budget came out negative ({energy_budget}); entropy row suspect")
    energy_budget = max(energy_budget, 0.0)
    mu_eff = params.long_visc if n == 1 else params.mu
    grad_budget = energy_budget / mu_eff
    Kn = poincare_const(n, R)
    m0, M0 = row0.mass, row0.M
    c3 = (a * m0) ** 2
    c1 = 2.0 * M0 * M0
    c0 = 2.0 * m0 * m0 * Kn * grad_budget
    degenerate = c1 == 0.0 and c0 == 0.0
    t_star = 0.0 if degenerate else _positive_root(c3, c1, c0)
    return Certificate(
        n=n, a=a, m0=m0, mom0=M0, poincare_const=Kn, energy_budget=energy_budget,
        mu_eff=mu_eff, grad_budget=grad_budget, cubic=(c3, c1, c0),
        t_star=t_star, degenerate=degenerate,
    )


def _positive_root(c3: float, c1: float, c0: float, rtol: float = 1e-12) -> float:
    """Unique positive root of c3*T^3 - c1*T - c0 by bisection.

    With c3 > 0, c1 >= 0, c0 >= 0 (not both zero) the cubic is negative at 0+
    and eventually positive, and has exactly one sign change on (0, inf).
    """
    if c3 <= 0.0:
        raise ValueError("cubic leading coefficient must be positive")

    def f(T):
        return c3 * T**3 - c1 * T - c0

    hi = max((2.0 * c0 / c3) ** (1.0 / 3.0), math.sqrt(2.0 * c1 / c3) if c1 > 0 else 0.0, 1e-30)
    while f(hi) <= 0.0:
        hi *= 2.0
    lo = 0.0
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def lifespan_scan_root(c3: float, c1: float, c0: float, t_guess: float, points: int = 1_000_000) -> float:
    """Brute-force root: sign scan on a uniform grid over [0, 10*t_guess].

    Independent check for the bisection root; the bracketing interval is
    refined once by linear interpolation, which is plenty below 1e-9 relative
    for a cubic on a 1e-6-fine grid.
    """
    T = np.linspace(0.0, 10.0 * t_guess, points)
    vals = c3 * T**3 - c1 * T - c0
    sign = np.signbit(vals)
    flips = np.nonzero(sign[:-1] & ~sign[1:])[0]
    if len(flips) == 0:
        raise RuntimeError("sign scan found no root in the window; widen t_guess")
    i = int(flips[0])
    t0, t1 = T[i], T[i + 1]
    v0, v1 = vals[i], vals[i + 1]
    return float(t0 - v0 * (t1 - t0) / (v1 - v0))


def certificate_consistency(
    series: TimeSeries, cert: Certificate, params: PhysParams
) -> tuple[float, float]:
    """Worst margins of the certificate chain over the run, both >= 0 when consistent.

    Returns (grad_margin, cubic_margin):
      grad_margin  = C1 - max_t cum grad_sq
      cubic_margin = min over row times T of
                     [2*trapz(M^2) + 2*T*M0^2] - (n^2/4)*(a*m0)^2*T^3.
    The (n^2/4) factor is what the Cauchy-Schwarz reconstruction of the T^3
    term actually yields (see THEORY.md); it equals 1 in the 2D radial case.
    """
    t = series.column("t")
    M = series.column("M")
    grad = series.column("grad_sq")
    cum_grad = _cumtrapz(grad, t)
    grad_margin = cert.grad_budget - float(np.max(cum_grad))
    cum_M2 = _cumtrapz(M * M, t)
    n = params.n
    lhs = (n * n / 4.0) * (params.a * series.m0) ** 2 * t**3
    rhs = 2.0 * cum_M2 + 2.0 * t * cert.mom0**2
    cubic_margin = float(np.min(rhs - lhs))
    return grad_margin, cubic_margin
