"""Command-line front end.

    isoblow run <cfg> --out <dir>      solve and write CSV/report artifacts
    isoblow verify                     oracle cross-validation + invariant battery
    isoblow certificate <cfg>          print the lifespan certificate, no solving
    isoblow sweep <cfg> --key s.k --values v1,v2,...   independent runs per value

Exit codes: 0 success, 1 usage or config error, 2 run aborted (reason lands in
summary.txt), 3 verification failure.  Runs are fully deterministic: the same
config produces byte-identical CSVs.  ISOBLOW_THREADS caps sweep parallelism.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import diagnostics as dg
from .config import ConfigError, RunConfig, build_run_config, load_config, override_entries, parse_config_text
from .core import FluidState, Geometry, GridSpec, PhysParams, build_grid, sample_initial
from .lagrangian import seed_particles
from .oracle import cross_validate
from .solver import SchemeConfig, compute_rhs, run

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ABORTED = 2
EXIT_VERIFY = 3


def _fmt(x) -> str:
    return repr(float(x))


def certificate_text(cert: dg.Certificate) -> str:
    c3, c1, c0 = cert.cubic
    lines = [
        "lifespan certificate",
        f"  dimension n         = {cert.n}",
        f"  pressure constant a = {_fmt(cert.a)}",
        f"  initial mass m0     = {_fmt(cert.m0)}",
        f"  initial M(0)        = {_fmt(cert.mom0)}",
        f"  Poincare constant K = {_fmt(cert.poincare_const)}",
        f"  effective viscosity = {_fmt(cert.mu_eff)}",
        f"  energy budget E     = {_fmt(cert.energy_budget)}",
        f"  gradient budget C1  = {_fmt(cert.grad_budget)}  (E / effective viscosity)",
        "  cubic c3*T^3 - c1*T - c0 with",
        f"    c3 = (a*m0)^2     = {_fmt(c3)}",
        f"    c1 = 2*M0^2       = {_fmt(c1)}",
        f"    c0 = 2*m0^2*K*C1  = {_fmt(c0)}",
        f"  T_star              = {_fmt(cert.t_star)}",
    ]
    if cert.degenerate:
        lines.append("  degenerate: c1 = c0 = 0, the bound collapses to T_star = 0")
    lines.append(
        "no smooth solution with compactly supported density extends past T_star"
    )
    return "\n".join(lines) + "\n"


def _write_particles_csv(path: str, series: dg.TimeSeries) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("t,particle_id,x\n")
        if series.tracks is None:
            return
        for t, pos in zip(series.tracks.times, series.tracks.positions):
            ts = _fmt(t)
            for pid, x in enumerate(pos):
                fh.write(f"{ts},{pid},{_fmt(x)}\n")


PLOT_SCRIPT = """\
# Plot script for the CSV artifacts in this directory.
# Usage:  gnuplot plot.gp   (writes PNGs next to the CSVs; needs only gnuplot)
set datafile separator ','
set key autotitle columnhead
set key top left
set terminal pngcairo size 1000,700

set output 'series_conservation.png'
set multiplot layout 2,2
set title 'mass'
plot 'series.csv' using 1:2 with lines
set title 'weighted momentum M(t)'
plot 'series.csv' using 1:3 with lines
set title 'energy ledger'
plot 'series.csv' using 1:4 with lines title 'kinetic', \\
     'series.csv' using 1:($4+$5) with lines title 'kinetic + a*entropy (a from config)', \\
     'series.csv' using 1:8 with lines title 'cumulative dissipation'
set title 'identity residuals'
set logscale y
plot 'series.csv' using 1:(abs($10)) with lines title '|momentum residual|', \\
     'series.csv' using 1:(abs($11)) with lines title '|energy residual|'
unset logscale y
unset multiplot

set output 'series_support.png'
set title 'support radius and weighted-momentum bound'
set multiplot layout 2,1
plot 'series.csv' using 1:12 with lines title 'support radius'
set logscale y
plot 'series.csv' using 1:13 with lines title 'poincare lhs', \\
     'series.csv' using 1:14 with lines title 'poincare rhs'
unset logscale y
unset multiplot

set output 'particles.png'
set title 'particle positions'
plot 'particles.csv' using 1:3 with dots notitle
"""


def execute_run(cfg: RunConfig, outdir: str) -> dict:
    """Run one configuration and write every artifact under outdir.

    Returns a small summary dict (also used by sweep aggregation).
    """
    os.makedirs(outdir, exist_ok=True)
    grid = build_grid(cfg.grid_spec)
    particles = seed_particles(grid, cfg.initial.R) if cfg.particles else None

    series_path = os.path.join(outdir, "series.csv")
    with open(series_path, "w", newline="") as fh:
        fh.write(dg.CSV_HEADER + "\n")
        sink = lambda row: fh.write(row.as_csv_line() + "\n")
        series = run(cfg.initial, cfg.params, grid, cfg.scheme, sinks=[sink], particles=particles)

    _write_particles_csv(os.path.join(outdir, "particles.csv"), series)

    cert = dg.blowup_certificate(series.rows[0], cfg.params, cfg.initial.R)
    with open(os.path.join(outdir, "certificate.txt"), "w", newline="") as fh:
        fh.write(certificate_text(cert))
    with open(os.path.join(outdir, "plot.gp"), "w", newline="") as fh:
        fh.write(PLOT_SCRIPT)

    figures = []
    if cfg.figures:
        from .figures import render_all

        figures = render_all(series, grid, os.path.join(outdir, "figs"))

    grad_margin, cubic_margin = dg.certificate_consistency(series, cert, cfg.params)
    last = series.rows[-1]
    info = {
        "status": "aborted" if series.aborted else "completed",
        "reason": series.aborted,
        "steps": series.steps_taken,
        "rows": len(series.rows),
        "t_final": last.t,
        "m0": series.m0,
        "mass_drift": last.mass - series.m0,
        "clipped_total": series.clipped_total,
        "mom_residual": last.mom_residual,
        "energy_residual": last.energy_residual,
        "support_initial": series.rows[0].support_radius,
        "support_final": last.support_radius,
        "t_star": cert.t_star,
        "grad_margin": grad_margin,
        "cubic_margin": cubic_margin,
    }

    geom = "slab (n=1)" if cfg.params.geometry is Geometry.SLAB_1D else "radial (n=2)"
    art = ["series.csv", "particles.csv", "certificate.txt", "plot.gp"]
    art += [os.path.join("figs", os.path.basename(p)) for p in figures]
    lines = [
        "run summary",
        f"  config          : {cfg.source}",
        f"  geometry        : {geom}",
        f"  a, mu, lambda   : {_fmt(cfg.params.a)}, {_fmt(cfg.params.mu)}, {_fmt(cfg.params.lam)}",
        f"  grid            : N={cfg.grid_spec.N}, L={_fmt(cfg.grid_spec.L)}, h={_fmt(grid.h)}",
        f"  profile         : {cfg.initial.kind} (R={_fmt(cfg.initial.R)}, amplitude={_fmt(cfg.initial.amplitude)}, speed={_fmt(cfg.initial.speed)})",
        f"  scheme          : cfl={_fmt(cfg.scheme.cfl)}, rho_cut={_fmt(cfg.scheme.rho_cut)}, t_end={_fmt(cfg.scheme.t_end)}, output_every={cfg.scheme.output_every}",
        f"  status          : {info['status']}" + (f" ({series.aborted})" if series.aborted else ""),
        f"  steps / rows    : {info['steps']} / {info['rows']}",
        f"  final time      : {_fmt(info['t_final'])}",
        f"  m0              : {_fmt(info['m0'])}",
        f"  mass drift      : {_fmt(info['mass_drift'])}",
        f"  clipped mass    : {_fmt(info['clipped_total'])}",
        f"  mom residual    : {_fmt(info['mom_residual'])}",
        f"  energy residual : {_fmt(info['energy_residual'])}",
        f"  support radius  : {_fmt(info['support_initial'])} -> {_fmt(info['support_final'])}",
        f"  T_star          : {_fmt(info['t_star'])}",
        f"  margins         : grad {_fmt(info['grad_margin'])}, cubic {_fmt(info['cubic_margin'])}",
        "  artifacts       : " + ", ".join(art),
    ]
    with open(os.path.join(outdir, "summary.txt"), "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
    return info


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    info = execute_run(cfg, args.out)
    print(f"{info['status']}: {info['steps']} steps to t={info['t_final']:.6g}, artifacts in {args.out}")
    if info["status"] == "aborted":
        print(f"abort reason: {info['reason']}", file=sys.stderr)
        return EXIT_ABORTED
    return EXIT_OK


def cmd_certificate(args) -> int:
    cfg = load_config(args.config)
    grid = build_grid(cfg.grid_spec)
    state = sample_initial(cfg.initial, grid)
    rho_floor = cfg.scheme.rho_cut * float(np.max(state.rho))
    row0 = dg.measure(state, cfg.params, grid, cfg.initial.R, rho_floor)
    cert = dg.blowup_certificate(row0, cfg.params, cfg.initial.R)
    sys.stdout.write(certificate_text(cert))
    return EXIT_OK


def _verify_battery(verbose: bool = True) -> list[tuple[str, bool, str]]:
    """Cheap end-to-end invariant checks used by `isoblow verify`."""
    results: list[tuple[str, bool, str]] = []

    def check(name: str, ok: bool, detail: str = ""):
        results.append((name, bool(ok), detail))

    # steady states: uniform gas between walls, and pure vacuum
    for geom, n in ((Geometry.SLAB_1D, 1), (Geometry.RADIAL_2D, 2)):
        params = PhysParams(a=1.0, mu=0.1, lam=0.0, n=n)
        grid = build_grid(GridSpec(geom, 2.0, 64))
        state = FluidState(t=0.0, rho=np.ones(64), mom=np.zeros(64))
        tend = compute_rhs(state, params, grid, viscous=True, boundary="reflect")
        worst = max(float(np.max(np.abs(tend.d_rho))), float(np.max(np.abs(tend.d_mom))))
        check(f"uniform state steady ({geom.value})", worst <= 1e-10, f"max tendency {worst:.2e}")
        empty = FluidState(t=0.0, rho=np.zeros(64), mom=np.zeros(64))
        tend = compute_rhs(empty, params, grid)
        worst = max(float(np.max(np.abs(tend.d_rho))), float(np.max(np.abs(tend.d_mom))))
        check(f"vacuum state inert ({geom.value})", worst == 0.0, f"max tendency {worst:.2e}")

    # short catalog runs: conservation, inequality rows, energy monotonicity
    from .core import quartic_bump_outward

    for n in (1, 2):
        params = PhysParams(a=1.0, mu=0.1, lam=0.0, n=n)
        grid = build_grid(GridSpec(params.geometry, 2.0, 128))
        cfgs = SchemeConfig(t_end=0.05)
        series = run(quartic_bump_outward(R=1.0, speed=0.5), params, grid, cfgs)
        drift = abs(series.rows[-1].mass - series.m0)
        check(f"mass conserved (n={n})", drift <= 1e-10 * series.m0, f"drift {drift:.2e}")
        lhs = series.column("poincare_lhs")
        rhs = series.column("poincare_rhs")
        check(f"momentum bound rows (n={n})", bool(np.all(lhs <= rhs)),
              f"max lhs-rhs {float(np.max(lhs - rhs)):.2e}")
        e = series.column("kinetic") + params.a * series.column("entropy")
        slack = 1e-9 * max(1.0, abs(e[0]))
        check(f"free energy nonincreasing (n={n})", bool(np.all(np.diff(e) <= slack)),
              f"max increase {float(np.max(np.diff(e))):.2e}")
        check(f"run not aborted (n={n})", not series.aborted, series.aborted)

    # certificate roots: bisection against the brute-force scan
    for n, a, mu, lam in ((1, 1.0, 0.1, 0.0), (2, 2.0, 0.3, -0.1), (1, 0.5, 0.05, 0.1)):
        params = PhysParams(a=a, mu=mu, lam=lam, n=n)
        grid = build_grid(GridSpec(params.geometry, 2.0, 256))
        state = sample_initial(quartic_bump_outward(R=1.0, speed=0.5), grid)
        row0 = dg.measure(state, params, grid, 1.0, 0.0)
        cert = dg.blowup_certificate(row0, params, 1.0)
        scan = dg.lifespan_scan_root(*cert.cubic, t_guess=cert.t_star)
        rel = abs(scan - cert.t_star) / cert.t_star
        check(f"certificate root (n={n}, a={a})", rel <= 1e-9, f"rel diff {rel:.2e}")

    # sharp 2D bound witness: ubar = r, rho = 1 on the unit disk.  The tight
    # link of the chain is |u.x|_sup^2 <= K_2 * grad_sq: sup of r*ubar is
    # R^2 = 1 analytically, and K_2 * grad_sq = (1/2pi) * 2pi = 1 with the
    # discrete grad_sq exact for this linear field.
    grid = build_grid(GridSpec(Geometry.RADIAL_2D, 1.0, 256))
    state = FluidState(t=0.0, rho=np.ones(256), mom=grid.centers.copy())
    from .diagnostics import gradient_functionals, poincare_const

    grad, _ = gradient_functionals(state, grid)
    bound = poincare_const(2, 1.0) * grad
    sup_sq = 1.0  # (sup_{r<=R} r*ubar)^2 = R^4 for ubar = r
    rel = abs(sup_sq - bound) / bound
    check("radial bound witness sharp", rel <= 1e-12, f"rel gap {rel:.2e}")

    if verbose:
        for name, ok, detail in results:
            tag = "[ ok ]" if ok else "[FAIL]"
            suffix = f"  ({detail})" if detail and not ok else ""
            print(f"{tag} {name}{suffix}")
    return results


def cmd_verify(args) -> int:
    print("oracle cross-validation (quadrature vs grid functionals)")
    report = cross_validate()
    print(report.to_text(), end="")
    if args.out:
        report.to_csv(args.out)
        print(f"report written to {args.out}")
    print()
    print("invariant battery")
    results = _verify_battery()
    bad = [name for name, ok, _ in results if not ok]
    if not report.passed or bad:
        print(f"verification FAILED ({'oracle' if not report.passed else ''}"
              f"{' + ' if not report.passed and bad else ''}{', '.join(bad)})")
        return EXIT_VERIFY
    print("verification passed")
    return EXIT_OK


def _sweep_worker(payload):
    entries, key, value, outdir, label = payload
    cfg = build_run_config(override_entries(entries, key, value), label)
    info = execute_run(cfg, outdir)
    info["value"] = value
    return info


def cmd_sweep(args) -> int:
    with open(args.config, "r", encoding="utf-8") as fh:
        entries = parse_config_text(fh.read(), args.config)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("--values must list at least one value")
    payloads = []
    for v in values:
        sub = os.path.join(args.out, f"{args.key}={v}")
        # validate every point before launching anything
        build_run_config(override_entries(entries, args.key, v), f"{args.config} [{args.key}={v}]")
        payloads.append((entries, args.key, v, sub, f"{args.config} [{args.key}={v}]"))

    threads = os.environ.get("ISOBLOW_THREADS")
    workers = int(threads) if threads else (os.cpu_count() or 1)
    workers = max(1, min(workers, len(payloads)))
    if workers == 1:
        infos = [_sweep_worker(p) for p in payloads]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            infos = list(pool.map(_sweep_worker, payloads))

    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "sweep.csv"), "w", newline="") as fh:
        fh.write("key,value,status,steps,t_star,mass_drift,mom_residual,energy_residual\n")
        for info in infos:
            fh.write(",".join([
                args.key, info["value"], info["status"], str(info["steps"]),
                _fmt(info["t_star"]), _fmt(info["mass_drift"]),
                _fmt(info["mom_residual"]), _fmt(info["energy_residual"]),
            ]) + "\n")
    aborted = [i["value"] for i in infos if i["status"] != "completed"]
    print(f"sweep over {args.key}: {len(infos)} runs, artifacts in {args.out}")
    if aborted:
        print(f"aborted at {args.key} in {{{', '.join(aborted)}}}", file=sys.stderr)
        return EXIT_ABORTED
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isoblow",
        description="Isothermal viscous flow with vacuum: solver, diagnostics, lifespan certificate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="solve a configuration and write artifacts")
    p.add_argument("config", help="path to a run configuration file")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="oracle cross-validation and invariant battery")
    p.add_argument("--out", default="", help="optional CSV path for the oracle report")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("certificate", help="print the lifespan certificate without solving")
    p.add_argument("config", help="path to a run configuration file")
    p.set_defaults(func=cmd_certificate)

    p = sub.add_parser("sweep", help="independent runs over one key")
    p.add_argument("config", help="path to a run configuration file")
    p.add_argument("--key", required=True, help="config entry to vary, as section.key")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--out", default="sweep_out", help="root output directory")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
