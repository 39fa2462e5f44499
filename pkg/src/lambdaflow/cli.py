"""Command-line interface.

Exit codes: 0 success, 2 usage or configuration error, 3 a mathematical
precondition failed (for instance the input is not a solution, or a property
suite found a failure on non-adversarial input).
"""
import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dissipation import gronwall_bound, is_solution, phi_continuity_check, sug_check
from .errors import ConfigError, DomainError, LambdaFlowError, PreconditionError
from .fileio import (
    curve_to_dict,
    dump_json,
    load_curve,
    load_json,
    load_reparam,
    reparam_to_dict,
    save_curve,
    write_csv,
)
from .harness import (
    circle_family,
    run_c_hypothesis,
    run_existence_checks,
    run_h_axioms,
    run_lyapunov_checks,
    run_minimality_theorems,
)
from .metric import SampledCurve, curve_distance, metric_speed
from .mm import MMConfig, mm_curve
from .order import (
    cantor_time_change,
    extract_minimal,
    is_minimal,
    match_reparam,
    singular_dilate,
    truncate,
)
from .problems import (
    degenerate_family,
    degenerate_solution,
    make_scenario,
    quadratic_solution,
    scenario_from_config,
    uniform_grid,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MATH = 3

DEFAULT_X0 = {"quadratic": 1.0, "degenerate": 0.0, "degenerate_power": 0.0, "cantor": 0.0}


class UsageError(Exception):
    pass


def _seed(args):
    env = os.environ.get("LAMBDAFLOW_SEED")
    if env is not None and env.strip():
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"LAMBDAFLOW_SEED must be an integer, got {env!r}") from None
    return args.seed


def _scenario(args, required=True):
    if args.config:
        cfg = load_json(args.config)
        if args.scenario and cfg.get("name") != args.scenario:
            raise UsageError("--scenario disagrees with the config file")
        return scenario_from_config(cfg)
    if not args.scenario:
        if required:
            raise UsageError("--scenario (or --config) is required")
        return None
    params = {}
    name = args.scenario
    if name == "quadratic" and args.dim is not None:
        params["d"] = args.dim
    if name in ("degenerate", "degenerate_power") and args.taus is not None:
        params["tau_list"] = args.taus
    if name == "cantor":
        if args.depth is not None:
            params["depth"] = args.depth
        if args.eps_g is not None:
            params["eps_g"] = args.eps_g
    return make_scenario(name, **params)


def _emit(text, out):
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _positive(name, value):
    if value is not None and not value > 0:
        raise UsageError(f"{name} must be positive")


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args):
    sc = _scenario(args)
    _positive("--tau", args.tau)
    _positive("--horizon", args.horizon)
    x0 = args.x0 if args.x0 is not None else [DEFAULT_X0.get(sc.name, 0.0)] * sc.problem.dim
    c = mm_curve(sc.problem, MMConfig(args.tau, args.horizon, x0))
    _, rep = is_solution(sc.problem, c)
    _emit(json.dumps(curve_to_dict(c)), args.out)
    print(f"EDI max residual {rep.max_residual:.3e} (tol {rep.tolerance:.3e}): {rep.verdict}", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args):
    sc = _scenario(args)
    c = load_curve(args.input)
    p = sc.problem
    ok, rep = is_solution(p, c, args.tol)
    out = {"edi": rep.to_dict()}
    out["sug"] = sug_check(p, c)[1].to_dict()
    out["gronwall"] = gronwall_bound(p, c)[1].to_dict()
    out["phi_continuity"] = phi_continuity_check(p, c)[1].to_dict()
    if args.csv:
        Path(args.csv).write_text(rep.to_csv("consecutive"))
    _emit(json.dumps(out, sort_keys=True, indent=2), args.out)
    return EXIT_OK if ok else EXIT_MATH


def cmd_minimal(args):
    sc = _scenario(args)
    c = load_curve(args.input)
    p = sc.problem
    ok, rep = is_solution(p, c, args.tol)
    if not ok:
        print(rep.to_json(indent=2))
        print("input is not a solution", file=sys.stderr)
        return EXIT_MATH
    report = is_minimal(p, c, edi_tol=args.tol)
    w, z = extract_minimal(p, c, args.tol)
    out = {"curve": curve_to_dict(w), "reparam": reparam_to_dict(z), "report": report.to_dict()}
    _emit(json.dumps(out), args.out)
    print(f"verdict {report.verdict}; critical measure {report.critical_measure:.6g}", file=sys.stderr)
    return EXIT_OK


def cmd_order(args):
    u = load_curve(args.u)
    v = load_curve(args.v)
    z = match_reparam(u, v, eps_d=args.eps_d)
    out = {"precedes": z is not None, "witness": None if z is None else reparam_to_dict(z)}
    _emit(json.dumps(out), args.out)
    return EXIT_OK


def cmd_cantor_demo(args):
    params = {"depth": args.depth if args.depth is not None else 6}
    if args.eps_g is not None:
        params["eps_g"] = args.eps_g
    sc = make_scenario("cantor", **params)
    _positive("--dt", args.dt)
    p = sc.problem
    w = sc.oracle.minimal_curve(args.dt, p.eps_g)
    ok_w, rep_w = is_solution(p, w)
    baseline = max(abs(rep_w.max_residual), abs(rep_w.min_residual))
    beta = cantor_time_change(p, w, sc.params["depth"], args.mass)
    u = singular_dilate(w, beta)
    edi_tol = 10.0 * baseline
    ok_u, rep_u = is_solution(p, u, edi_tol)
    min_w = is_minimal(p, w)
    min_u = is_minimal(p, u, edi_tol=edi_tol)
    rec, z = extract_minimal(p, u, edi_tol)
    mass = float(beta.values[-1] - beta.grid[-1])
    summary = {
        "depth": sc.params["depth"],
        "eps_g": p.eps_g,
        "grid_step": args.dt,
        "injected_mass": mass,
        "w_solution": ok_w,
        "u_solution": ok_u,
        "baseline_residual": baseline,
        "u_max_residual": rep_u.max_residual,
        "w_critical_measure": min_w.critical_measure,
        "u_critical_measure": min_u.critical_measure,
        "w_verdict": min_w.verdict,
        "u_verdict": min_u.verdict,
        "phi_strictly_decreasing_w": bool(np.all(np.diff(p.phi(w.points)) < 0)),
        "phi_strictly_decreasing_u": bool(np.all(np.diff(p.phi(u.points)) < 0)),
        "recovered_distance": curve_distance(rec, w),
    }
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        save_curve(w, out / "w.json")
        save_curve(u, out / "u.json")
        save_curve(rec, out / "recovered.json")
        dump_json(reparam_to_dict(z), out / "recovered_z.json")
        dump_json(rep_w.to_dict(), out / "w_edi.json")
        dump_json(rep_u.to_dict(), out / "u_edi.json")
        dump_json(min_w.to_dict(), out / "w_minimality.json")
        dump_json(min_u.to_dict(), out / "u_minimality.json")
        write_csv(out / "w_phi.csv", ["t", "phi"], w.times, p.phi(w.points))
        write_csv(out / "u_phi.csv", ["t", "phi"], u.times, p.phi(u.points))
        dump_json(summary, out / "summary.json", indent=2)
    print(json.dumps(summary, sort_keys=True, indent=2))
    return EXIT_OK


def _axiom_suites(name, sc, seed, trials):
    p = sc.problem
    if name == "quadratic":
        t = uniform_grid(1.0, 1e-3)
        x0s = [np.full(p.dim, a) for a in (0.5, 1.0, 2.0)]
        family = [SampledCurve(t, quadratic_solution(x0, t)) for x0 in x0s]
        return [
            run_h_axioms(p, family, trials, seed),
            run_lyapunov_checks(p, family, seed=seed),
            run_minimality_theorems(p, family[1:2], {0: True}, trials=min(trials, 20), seed=seed),
            run_existence_checks(p, x0s, seed=seed),
        ]
    if name in ("degenerate", "degenerate_power"):
        taus = sc.params["tau_list"]
        family = degenerate_family(taus, 1.5, 1e-3)
        labels = {i: tau == 0 for i, tau in enumerate(taus)}
        t = uniform_grid(max(taus) + 2.0, 1e-3)
        ordered = sorted(taus, reverse=True)
        truncated = [truncate(SampledCurve(t, degenerate_solution(tau, t)), tau + 1.0) for tau in ordered]
        return [
            run_h_axioms(p, family, trials, seed),
            run_lyapunov_checks(p, family, seed=seed),
            run_minimality_theorems(p, family, labels, trials=min(trials, 20), seed=seed),
            run_c_hypothesis(p, truncated, seed=seed),
            run_existence_checks(p, [np.zeros(1), np.ones(1)], seed=seed),
        ]
    if name == "cantor":
        w = sc.oracle.minimal_curve(1e-3, p.eps_g)
        u = singular_dilate(w, cantor_time_change(p, w, sc.params["depth"]))
        return [
            run_h_axioms(p, [w], min(trials, 10), seed),
            run_lyapunov_checks(p, [w, u], seed=seed),
            run_minimality_theorems(p, [w, u], {0: True, 1: False}, trials=min(trials, 20), seed=seed),
        ]
    raise UsageError(f"no axiom families for scenario {name!r}")


def cmd_axioms(args):
    seed = _seed(args)
    _positive("--trials", args.trials)
    suites = []
    if args.adversarial:
        suites.append(run_h_axioms(None, circle_family(), args.trials, seed, adversarial=True))
    if args.scenario or args.config:
        sc = _scenario(args)
        suites.extend(_axiom_suites(sc.name, sc, seed, args.trials))
    if not suites:
        raise UsageError("--scenario or --adversarial is required")
    ok = all(s.ok for s in suites)
    out = {"seed": seed, "scenario": args.scenario, "ok": ok, "suites": [s.to_dict() for s in suites]}
    _emit(json.dumps(out, sort_keys=True, indent=2), args.out)
    return EXIT_OK if ok else EXIT_MATH


def cmd_plotdata(args):
    sc = _scenario(args)
    p = sc.problem
    c = load_curve(args.input)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "phi.csv", ["t", "phi"], c.times, p.phi(c.points))
    write_csv(out / "g.csv", ["t", "g"], c.times, p.g(c.points))
    mid = 0.5 * (c.times[1:] + c.times[:-1])
    write_csv(out / "speed.csv", ["t", "speed"], mid, metric_speed(c, p.space))
    if args.reparam:
        z = load_reparam(args.reparam)
        write_csv(out / "z.csv", ["t", "z"], z.grid, z.values)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser():
    parser = argparse.ArgumentParser(prog="lambdaflow", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"lambdaflow {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_opts(sp):
        sp.add_argument("--scenario", help="quadratic | degenerate | cantor")
        sp.add_argument("--config", help='scenario JSON {"name": ..., "params": {...}}')
        sp.add_argument("--dim", type=int, help="dimension (quadratic)")
        sp.add_argument("--taus", type=_floats, help="comma-separated waiting times (degenerate)")
        sp.add_argument("--depth", type=int, help="construction depth (cantor)")
        sp.add_argument("--eps-g", type=float, dest="eps_g", help="critical threshold for g (cantor)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", help="output file (default: stdout)")

    sp = sub.add_parser("simulate", help="minimizing-movement curve as JSON")
    scenario_opts(sp)
    sp.add_argument("--x0", type=float, nargs="+")
    sp.add_argument("--tau", type=float, default=1e-3)
    sp.add_argument("--horizon", type=float, default=1.0)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("verify", help="dissipation, upper-gradient, Gronwall and continuity checks")
    scenario_opts(sp)
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--tol", type=float)
    sp.add_argument("--csv", help="write consecutive residuals as CSV")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("minimal", help="extract the minimal solution and report")
    scenario_opts(sp)
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--tol", type=float, help="dissipation tolerance")
    sp.set_defaults(func=cmd_minimal)

    sp = sub.add_parser("order", help="decide whether u is a slowed-down copy of v")
    sp.add_argument("--u", required=True)
    sp.add_argument("--v", required=True)
    sp.add_argument("--eps-d", type=float, dest="eps_d", default=1e-6)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_order)

    sp = sub.add_parser("cantor-demo", help="strictly decreasing energy without minimality")
    sp.add_argument("--depth", type=int, default=6)
    sp.add_argument("--eps-g", type=float, dest="eps_g")
    sp.add_argument("--dt", type=float, default=1e-3)
    sp.add_argument("--mass", type=float, help="injected dwell time (default: horizon of w)")
    sp.add_argument("--out-dir", dest="out_dir")
    sp.set_defaults(func=cmd_cantor_demo)

    sp = sub.add_parser("axioms", help="run the property suites as JSON")
    scenario_opts(sp)
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--adversarial", action="store_true", help="also run the periodic counterexample family")
    sp.set_defaults(func=cmd_axioms)

    sp = sub.add_parser("plotdata", help="CSV series of phi, g, speed and z")
    scenario_opts(sp)
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--reparam")
    sp.add_argument("--out-dir", dest="out_dir", required=True)
    sp.set_defaults(func=cmd_plotdata)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "out", None) and getattr(args, "input", None) and \
            Path(args.out).resolve() == Path(args.input).resolve():
        print("error: input and output paths must differ", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PreconditionError, DomainError) as exc:
        print(f"precondition failed: {exc}", file=sys.stderr)
        return EXIT_MATH
    except LambdaFlowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MATH


if __name__ == "__main__":
    sys.exit(main())
