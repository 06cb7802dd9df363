"""Command-line interface.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 trapped-orbit search failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import quadratic_core as qc
from .dynamics import (
    IntegratorConfig,
    ShootingFamily,
    integrate,
    search_trapped,
    torus_drift,
    write_orbit_csv,
)
from .errors import NoBracket, ReebTorusError, SearchExhausted
from .fileio import atomic_write, write_json, write_text
from .hamiltonian import support_bounds
from .phase import from_polar
from .scenario import ScenarioConfig, default_scenario
from .verify_report import Plan, run_suite

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_SEARCH = 0, 1, 2, 3


class ConfigError(Exception):
    pass


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected a comma-separated list of numbers, got {text!r}") from exc


def _load_scenario(args) -> ScenarioConfig:
    if args.scenario is None:
        scen = default_scenario()
    else:
        if not os.path.isfile(args.scenario):
            raise ConfigError(f"scenario file not found: {args.scenario}")
        try:
            scen = ScenarioConfig.load(args.scenario)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"scenario is not valid JSON: {exc}") from exc
    if getattr(args, "b", None) is not None:
        scen = scen.with_b("auto" if args.b == "auto" else float(args.b))
    return scen


def _cfg(args, scen: ScenarioConfig) -> IntegratorConfig:
    base = scen.integrator
    return IntegratorConfig(
        rtol=args.rtol if getattr(args, "rtol", None) is not None else base.rtol,
        atol=args.atol if getattr(args, "atol", None) is not None else base.atol,
        max_step=base.max_step,
        max_steps=base.max_steps,
    )


def cmd_build(args) -> int:
    scen = _load_scenario(args)
    m = scen.build()
    box = support_bounds(m, seed=args.seed)
    out = m.to_json()
    out["support"] = {"r_max": box.r_max, "z_max": box.z_max, "lambda_min": box.lambda_min}
    out["model_hash"] = m.digest()
    write_json(args.out, out)
    print(f"b = {m.b:g}, R_max = {box.r_max:.7f}, Z_max = {box.z_max:.7f}, hash {out['model_hash'][:12]}")
    return EXIT_OK


def cmd_verify(args) -> int:
    scen = _load_scenario(args)
    plan = Plan(threads=args.threads)
    if args.samples is not None:
        plan = plan.with_samples(args.samples)
    report = run_suite(scen, seed=args.seed, plan=plan)
    write_text(args.report, report.dumps())
    failed = [c.name for c in report.checks if not c.passed]
    msg = f"{len(report.checks) - len(failed)}/{len(report.checks)} checks passed"
    print(msg + (f"; failed: {', '.join(failed)}" if failed else ""))
    return EXIT_OK if report.passed else EXIT_VERIFY


def cmd_integrate(args) -> int:
    scen = _load_scenario(args)
    m = scen.build()
    if (args.x0 is None) == (args.on_torus is None):
        raise ConfigError("give exactly one of --x0 and --on-torus")
    if args.x0 is not None:
        x0 = np.array(_floats(args.x0))
        if x0.shape != (2 * m.n + 1,):
            raise ConfigError(f"--x0 needs {2 * m.n + 1} Cartesian components")
    else:
        theta = np.array(_floats(args.on_torus))
        if theta.shape != (m.n,):
            raise ConfigError(f"--on-torus needs {m.n} angles")
        x0 = from_polar(np.ones(m.n), theta, 0.0)
    t_eval = np.linspace(0.0, args.t, args.samples) if args.samples else None
    trace = integrate(m, x0, (0.0, args.t), _cfg(args, scen), t_eval=t_eval)
    write_orbit_csv(args.out, trace, m)
    print(f"{len(trace.times)} rows, final state {np.array2string(trace.states[-1], precision=8)}")
    return EXIT_OK


def cmd_search_trapped(args) -> int:
    scen = _load_scenario(args)
    m = scen.build()
    theta0 = tuple(_floats(args.theta0)) if args.theta0 else ()
    family = ShootingFamily(m.n, radius=args.radius, theta0=theta0)
    cfg = _cfg(args, scen)
    try:
        res = search_trapped(
            m, family, (args.zmin, args.zmax), T_fwd=args.tfwd, T_bwd=args.tbwd, cfg=cfg, threads=args.threads
        )
    except (NoBracket, SearchExhausted) as exc:
        print(f"search failed: {exc}", file=sys.stderr)
        return EXIT_SEARCH
    write_orbit_csv(f"{args.out}_forward.csv", res.forward, m)
    write_orbit_csv(f"{args.out}_backward.csv", res.backward, m)
    ok = res.forward_class.stays and not res.backward_class.stays and res.monotonicity.passed
    summary = {
        "s_star": res.s_star,
        "x0": family(res.s_star).tolist(),
        "bracket": list(res.bracket),
        "width": res.width,
        "iterations": res.iterations,
        "forward": {
            "horizon": args.tfwd,
            "class": res.forward_class.label,
            "final_state": res.forward.states[-1].tolist(),
        },
        "backward": {
            "horizon": -args.tbwd,
            "class": res.backward_class.label,
            "exit_time": res.backward_class.exit_time,
        },
        "z_monotonicity": {
            "pass": res.monotonicity.passed,
            "worst_rate": res.monotonicity.worst_rate if res.monotonicity.checked else None,
            "checked": res.monotonicity.checked,
        },
        "note": "forward boundedness holds through the finite horizon only",
        "pass": ok,
    }
    write_json(f"{args.out}_summary.json", summary)
    print(
        f"s* = {res.s_star:.12g} (width {res.width:.2e}); forward {res.forward_class.label} "
        f"through t={args.tfwd:g}; backward {res.backward_class.label}"
        + (f" at t={res.backward_class.exit_time:.6g}" if res.backward_class.exit_time is not None else "")
    )
    return EXIT_OK if ok else EXIT_SEARCH


def _write_csv(path, header, rows):
    def write(fh):
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])

    atomic_write(path, write, newline="")


def cmd_diagnostics(args) -> int:
    scen = _load_scenario(args)
    m = scen.build()
    field = m.field
    rows = []
    for e in range(args.max_exponent + 1):
        b = 2.0**e
        lam_min, _ = qc.min_eig_over_torus(b, field, 16)
        cert = qc.check_lemma_L(b, m.C, field)
        rows.append((b, lam_min, cert.margin, *map(float, cert.witness_r)))
    _write_csv(
        f"{args.out}_region_L.csv",
        ["b", "min_eigenvalue", "margin"] + [f"witness_r{j + 1}" for j in range(m.n)],
        rows,
    )
    b_list = [float(b) for b in np.logspace(0, 4, 17)]
    _, theta = qc.min_eig_over_torus(m.b, field, 16)
    snaps = qc.eigen_asymptotics(b_list, field, theta)
    _write_csv(
        f"{args.out}_eigen.csv",
        ["b"] + [f"eig{i + 1}" for i in range(m.n)] + ["max_ratio", "angle"],
        [(s.b, *map(float, s.eigenvalues), float(np.max(s.ratios)), s.angle) for s in snaps],
    )
    _write_csv(
        f"{args.out}_hausdorff.csv",
        ["b", "distance"],
        [(b, qc.hausdorff_E_to_J(b, 1.0, field, theta, seed=args.seed)) for b in b_list],
    )
    dr, dz = torus_drift(m, theta, 100.0, IntegratorConfig(1e-10, 1e-10))
    print(f"b = {m.b:g}; torus drift over T=100: r {dr:.3e}, z {dz:.3e}; wrote {args.out}_*.csv")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reebtorus", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--scenario", help="scenario JSON (default: built-in n=2 scenario)")
        p.add_argument("--b", help='override b ("auto" or a number)')
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1)

    p = sub.add_parser("build", help="resolve b, G and the support box; write the model JSON")
    common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("verify", help="run every check and write the report JSON")
    common(p)
    p.add_argument("--report", required=True)
    p.add_argument("--samples", type=int)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("integrate", help="integrate one orbit and write it as CSV")
    common(p)
    p.add_argument("--x0", help="Cartesian start x1,y1,...,xn,yn,z")
    p.add_argument("--on-torus", help="start at r=1, z=0 with these angles")
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--rtol", type=float)
    p.add_argument("--atol", type=float)
    p.add_argument("--samples", type=int, default=0, help="uniform output times (default: integrator steps)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_integrate)

    p = sub.add_parser("search-trapped", help="shoot for a forward-trapped orbit")
    common(p)
    p.add_argument("--zmin", type=float, default=-0.05)
    p.add_argument("--zmax", type=float, default=-1e-6)
    p.add_argument("--radius", type=float, default=0.99)
    p.add_argument("--theta0", help="angles of the shooting line (default zeros)")
    p.add_argument("--tfwd", type=float, default=1000.0)
    p.add_argument("--tbwd", type=float, default=100.0)
    p.add_argument("--rtol", type=float)
    p.add_argument("--atol", type=float)
    p.add_argument("--out", required=True, help="output prefix")
    p.set_defaults(func=cmd_search_trapped)

    p = sub.add_parser("diagnostics", help="region-L margins, eigenvalue and Hausdorff data as CSV")
    common(p)
    p.add_argument("--max-exponent", type=int, default=6)
    p.add_argument("--out", required=True, help="output prefix")
    p.set_defaults(func=cmd_diagnostics)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NoBracket as exc:
        print(f"search failed: {exc}", file=sys.stderr)
        return EXIT_SEARCH
    except (ConfigError, ReebTorusError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
