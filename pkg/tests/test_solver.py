"""Solver checks: tendencies, CFL bound, stepping, and the viscous stage.

The viscous stage has one property everything downstream leans on: the
backward-Euler solve on each active run keeps the position-weighted momentum
of that run exactly unchanged, for any dt, in both geometries.  Several tests
below hammer that with random multi-run states.
"""

import numpy as np
import pytest

from isoblow.core import (
    FluidState,
    Geometry,
    GridSpec,
    PhysParams,
    build_grid,
    quartic_bump,
    quartic_bump_outward,
    sample_initial,
)
from isoblow.solver import (
    SchemeConfig,
    _clip_negative,
    _viscous_tendency,
    _viscous_update,
    cfl_dt,
    compute_rhs,
    run,
    step,
)

PARAMS_1D = PhysParams(a=1.0, mu=0.1, lam=0.0, n=1)
PARAMS_2D = PhysParams(a=1.0, mu=0.1, lam=0.0, n=2)


def grid1d(N=64, L=1.0):
    return build_grid(GridSpec(Geometry.SLAB_1D, L=L, N=N))


def grid2d(N=64, L=1.0):
    return build_grid(GridSpec(Geometry.RADIAL_2D, L=L, N=N))


def weighted_mom(grid, mom):
    return float(np.sum(grid.centers * mom * grid.volumes))


def random_multirun_state(grid, seed, touch_origin=False):
    """Vacuum grid with a few disjoint positive-density runs and random momentum."""
    rng = np.random.default_rng(seed)
    rho = np.zeros(grid.N)
    mom = np.zeros(grid.N)
    runs = [(3, 11), (19, 19), (27, 48)]
    if touch_origin:
        runs[0] = (0, 11)
    for i0, i1 in runs:
        m = i1 - i0 + 1
        rho[i0 : i1 + 1] = rng.uniform(0.5, 1.5, m)
        mom[i0 : i1 + 1] = rng.normal(0.0, 1.0, m)
    return FluidState(t=0.0, rho=rho, mom=mom)


# ---------------------------------------------------------------- tendencies


def test_rhs_uniform_reflect_is_steady():
    grid = grid1d()
    st = FluidState(t=0.0, rho=np.ones(grid.N), mom=np.zeros(grid.N))
    t = compute_rhs(st, PARAMS_1D, grid, boundary="reflect")
    assert np.all(t.d_rho == 0.0)
    assert np.all(t.d_mom == 0.0)


def test_rhs_vacuum_is_inert():
    grid = grid1d()
    st = FluidState(t=0.0, rho=np.zeros(grid.N), mom=np.zeros(grid.N))
    t = compute_rhs(st, PARAMS_1D, grid)
    assert np.all(t.d_rho == 0.0) and np.all(t.d_mom == 0.0)


def test_rhs_mass_telescopes():
    # compactly supported state, vacuum boundary: total d_rho weighted by
    # volume telescopes to the (zero) boundary fluxes, in both geometries
    g1 = grid1d(N=128, L=2.0)
    st1 = sample_initial(quartic_bump_outward(R=1.0, speed=0.5), g1)
    t1 = compute_rhs(st1, PARAMS_1D, g1)
    assert abs(float(np.sum(t1.d_rho * g1.volumes))) < 1e-13

    g2 = grid2d(N=128, L=2.0)
    st2 = sample_initial(quartic_bump_outward(R=1.0, speed=0.5), g2)
    t2 = compute_rhs(st2, PARAMS_2D, g2)
    assert abs(float(np.sum(t2.d_rho * g2.volumes))) < 1e-13


def test_rhs_rejects_unknown_boundary():
    grid = grid1d()
    st = FluidState(t=0.0, rho=np.ones(grid.N), mom=np.zeros(grid.N))
    with pytest.raises(ValueError):
        compute_rhs(st, PARAMS_1D, grid, boundary="periodic")


# ------------------------------------------------------------------ CFL bound


def test_cfl_dt_advective_anchor():
    # h = 0.01, rho = 1 at rest, a = 1: dt = cfl * h / sqrt(a) = 0.4 * 0.01
    grid = grid1d(N=200, L=1.0)
    st = FluidState(t=0.0, rho=np.ones(200), mom=np.zeros(200))
    cfg = SchemeConfig(t_end=1.0, cfl=0.4)
    assert cfl_dt(st, PARAMS_1D, grid, cfg, viscous=False) == pytest.approx(0.004)


def test_cfl_dt_viscous_branch():
    # explicit viscous bound h^2 * rho_min / (2 nu) = 1e-4 * 1 / 0.4 = 2.5e-4
    grid = grid1d(N=200, L=1.0)
    st = FluidState(t=0.0, rho=np.ones(200), mom=np.zeros(200))
    cfg = SchemeConfig(t_end=1.0, cfl=0.4)
    assert cfl_dt(st, PARAMS_1D, grid, cfg, viscous=True) == pytest.approx(0.4 * 2.5e-4)


def test_cfl_dt_scales_with_h():
    cfg = SchemeConfig(t_end=1.0, cfl=0.4)
    dts = []
    for N in (100, 200):
        grid = grid1d(N=N, L=1.0)
        st = FluidState(t=0.0, rho=np.ones(N), mom=2.0 * np.ones(N))
        dts.append(cfl_dt(st, PARAMS_1D, grid, cfg, viscous=False))
    assert dts[0] == pytest.approx(2.0 * dts[1])
    # |u| + c enters the denominator: u = 2, c = 1, h = 2L/N = 0.02
    assert dts[0] == pytest.approx(0.4 * 0.02 / 3.0)


def test_cfl_dt_all_vacuum_raises():
    grid = grid1d()
    st = FluidState(t=0.0, rho=np.zeros(grid.N), mom=np.zeros(grid.N))
    with pytest.raises(ValueError):
        cfl_dt(st, PARAMS_1D, grid, SchemeConfig(t_end=1.0))


def test_scheme_config_validation():
    with pytest.raises(ValueError):
        SchemeConfig(t_end=1.0, cfl=0.0)
    with pytest.raises(ValueError):
        SchemeConfig(t_end=1.0, rho_cut=1e-2)
    with pytest.raises(ValueError):
        SchemeConfig(t_end=-1.0)
    with pytest.raises(ValueError):
        SchemeConfig(t_end=1.0, output_every=0)


# -------------------------------------------------------------- viscous stage


def test_viscous_update_preserves_weighted_momentum_1d():
    grid = grid1d()
    for seed in range(8):
        st = random_multirun_state(grid, seed)
        M0 = weighted_mom(grid, st.mom)
        for dt in (1e-4, 1e-2, 0.5):
            mom_new = _viscous_update(st.rho, st.mom, PARAMS_1D, grid, dt)
            M1 = weighted_mom(grid, mom_new)
            assert abs(M1 - M0) < 1e-12 * max(1.0, abs(M0))


def test_viscous_update_preserves_weighted_momentum_2d():
    grid = grid2d()
    for seed in range(8):
        st = random_multirun_state(grid, seed, touch_origin=(seed % 2 == 0))
        M0 = weighted_mom(grid, st.mom)
        for dt in (1e-4, 1e-2, 0.5):
            mom_new = _viscous_update(st.rho, st.mom, PARAMS_2D, grid, dt)
            M1 = weighted_mom(grid, mom_new)
            assert abs(M1 - M0) < 1e-12 * max(1.0, abs(M0))


def test_viscous_stage_linear_field_is_fixed_point():
    # u = c*x (1D) and ubar = c*r (2D) are annihilated by the viscous
    # operator with the similarity end closure, so both the explicit
    # tendency and the implicit solve leave them alone exactly
    c = 0.7
    grid = grid1d()
    rho = np.zeros(grid.N)
    rho[10:50] = 1.3
    u = np.where(rho > 0.0, c * grid.centers, 0.0)
    st = FluidState(t=0.0, rho=rho, mom=rho * u)
    assert np.max(np.abs(_viscous_tendency(rho, u, PARAMS_1D, grid))) < 1e-12
    mom_new = _viscous_update(rho, st.mom, PARAMS_1D, grid, dt=0.3)
    assert np.max(np.abs(mom_new - st.mom)) < 1e-12

    grid = grid2d()
    rho = np.zeros(grid.N)
    rho[0:40] = 0.8
    ubar = np.where(rho > 0.0, c * grid.centers, 0.0)
    mom = rho * ubar
    assert np.max(np.abs(_viscous_tendency(rho, ubar, PARAMS_2D, grid))) < 1e-12
    mom_new = _viscous_update(rho, mom, PARAMS_2D, grid, dt=0.3)
    assert np.max(np.abs(mom_new - mom)) < 1e-12


def test_viscous_update_leaves_vacuum_and_singletons_alone():
    grid = grid1d()
    rho = np.zeros(grid.N)
    mom = np.zeros(grid.N)
    rho[5] = 1.0  # singleton run
    mom[5] = 0.4
    rho[20:30] = 1.0
    mom[20:30] = np.linspace(-1.0, 1.0, 10)
    mom_new = _viscous_update(rho, mom, PARAMS_1D, grid, dt=0.1)
    assert mom_new[5] == mom[5]
    assert np.all(mom_new[rho == 0.0] == 0.0)


def test_viscous_update_respects_rho_floor():
    grid = grid1d()
    rho = np.full(grid.N, 1e-14)
    mom = np.full(grid.N, 1e-14)
    rho[20:40] = 1.0
    mom[20:40] = 0.3
    mom_new = _viscous_update(rho, mom, PARAMS_1D, grid, dt=0.1, rho_floor=1e-10)
    # sub-floor cells bypass the solve entirely
    assert np.all(mom_new[:20] == 1e-14)
    assert np.all(mom_new[40:] == 1e-14)


def test_viscous_update_matches_tendency_at_solution():
    # backward Euler means rho*(u'-u)/dt = L u', i.e. the momentum increment
    # over dt equals the explicit tendency evaluated on the updated velocity
    for grid, params in ((grid1d(), PARAMS_1D), (grid2d(), PARAMS_2D)):
        st = random_multirun_state(grid, seed=3, touch_origin=(params.n == 2))
        dt = 0.02
        mom_new = _viscous_update(st.rho, st.mom, params, grid, dt)
        u_new = np.zeros(grid.N)
        act = st.rho > 0.0
        u_new[act] = mom_new[act] / st.rho[act]
        lhs = (mom_new - st.mom) / dt
        rhs = _viscous_tendency(st.rho, u_new, params, grid)
        scale = max(1.0, float(np.max(np.abs(rhs))))
        assert np.max(np.abs(lhs - rhs)) < 1e-9 * scale


def test_clip_negative_accounting():
    grid = grid1d(N=16)
    rho = np.ones(16)
    rho[3] = -0.25
    rho[9] = -0.5
    mom = np.ones(16)
    rho2, mom2, clipped = _clip_negative(rho, mom, grid)
    assert clipped == pytest.approx(0.75 * grid.h)
    assert rho2[3] == 0.0 and mom2[3] == 0.0
    assert rho2[0] == 1.0 and mom2[0] == 1.0
    # clean input passes through with zero audit
    _, _, c0 = _clip_negative(np.ones(16), mom, grid)
    assert c0 == 0.0


# -------------------------------------------------------------------- stepping


def test_step_keeps_vacuum_vacuum():
    grid = grid1d()
    st = FluidState(t=0.0, rho=np.zeros(grid.N), mom=np.zeros(grid.N))
    new, info = step(st, PARAMS_1D, grid, SchemeConfig(t_end=1.0), dt=1e-3)
    assert np.all(new.rho == 0.0) and np.all(new.mom == 0.0)
    assert info.clipped == 0.0


def test_step_reflect_uniform_steady():
    grid = grid1d()
    st = FluidState(t=0.0, rho=np.ones(grid.N), mom=np.zeros(grid.N))
    cfg = SchemeConfig(t_end=1.0)
    for _ in range(5):
        st, _ = step(st, PARAMS_1D, grid, cfg, boundary="reflect")
    assert np.max(np.abs(st.rho - 1.0)) < 1e-14
    assert np.max(np.abs(st.mom)) < 1e-14


def test_step_preserves_slab_symmetry():
    # even density, odd momentum is an invariant subspace of the scheme
    grid = grid1d(N=128, L=2.0)
    st = sample_initial(quartic_bump_outward(R=1.0, speed=0.5), grid)
    cfg = SchemeConfig(t_end=1.0)
    floor = cfg.rho_cut * float(np.max(st.rho))
    for _ in range(20):
        st, _ = step(st, PARAMS_1D, grid, cfg, rho_floor=floor)
    assert np.max(np.abs(st.rho - st.rho[::-1])) < 1e-12
    assert np.max(np.abs(st.mom + st.mom[::-1])) < 1e-12


def test_run_geometry_mismatch_rejected():
    grid = grid2d(N=64, L=2.0)
    with pytest.raises(ValueError):
        run(quartic_bump(R=1.0), PARAMS_1D, grid, SchemeConfig(t_end=0.01))


def test_run_row_cadence_and_landing(ladder1d):
    series = ladder1d[128]["series"]
    rows = series.rows
    assert rows[0].t == 0.0
    assert rows[-1].t == 0.1  # exact landing on t_end
    assert series.aborted == ""
    # output_every=1: one row per step plus the initial row
    assert len(rows) == series.steps_taken + 1
    ts = np.array([r.t for r in rows])
    assert np.all(np.diff(ts) > 0.0)


def test_run_output_every_thins_rows():
    grid = grid1d(N=128, L=2.0)
    cfg = SchemeConfig(t_end=0.05, output_every=4)
    series = run(quartic_bump(R=1.0), PARAMS_1D, grid, cfg)
    assert len(series.rows) < series.steps_taken + 1
    assert series.rows[-1].t == pytest.approx(0.05)


def test_run_streams_rows_to_sinks():
    grid = grid1d(N=64, L=2.0)
    seen = []
    series = run(
        quartic_bump(R=1.0),
        PARAMS_1D,
        grid,
        SchemeConfig(t_end=0.02),
        sinks=[seen.append],
    )
    assert len(seen) == len(series.rows)
    assert seen[0] is series.rows[0]
