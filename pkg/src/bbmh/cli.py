"""Command-line entry point: ``bbmh <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import experiments, waves
from .errors import ConfigurationError
from .imex import evolve, load_tableau
from .models import BBMHModel, BBMModel, SplittingParams, well_prepared_init
from .sbp import FourierOperator, GridSpec, build_upwind_operators


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _pair(text: str) -> tuple[float, float]:
    vals = _floats(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError("expected two comma-separated numbers 'u,w'")
    return vals[0], vals[1]


def _fmt_for(path) -> str:
    return "json" if str(path).endswith(".json") else "csv"


def cmd_ap_table(args) -> int:
    rows = experiments.run_ap_table(args.tableau, args.v_init, args.n, args.dt, args.t_end,
                                    args.eps2, w_op=args.w_op, order=args.order,
                                    workers=args.workers)
    experiments.emit(rows, args.out, _fmt_for(args.out))
    for r in rows:
        flag = "  FAILED: " + r.message if r.failed else ""
        eocs = " ".join("  -  " if x is None else f"{x:5.2f}" for x in (r.eoc_u, r.eoc_v, r.eoc_w))
        print(f"{r.eps_sq:.2e}  u {r.err_u:.3e}  v {r.err_v:.3e}  w {r.err_w:.3e}  eoc {eocs}{flag}")
    return 0


def cmd_error_growth(args) -> int:
    series = experiments.run_error_growth(args.mode, args.eps, args.tableau,
                                          args.relaxation == "on", args.n, args.dt,
                                          args.t_end, model=args.model, window=args.window)
    experiments.emit([series], args.out, _fmt_for(args.out))
    print(f"{series.label}: slope {series.fitted_slope:.3f}, final error "
          f"{series.errors[-1]:.3e}, max invariant drift {series.energy_drift:.2e}")
    return 0


def cmd_petviashvili(args) -> int:
    grid = GridSpec(args.x_min, args.x_max, args.n)
    prof = waves.petviashvili_solve(args.c, args.eps, FourierOperator(grid), tol=args.tol,
                                    max_iter=args.max_iter)
    waves.export_profile_csv(prof, args.out)
    print(f"converged in {prof.iterations} iterations, residual {prof.final_residual:.3e}")
    return 0


def cmd_traveling_ode(args) -> int:
    eps = float(np.sqrt(args.eps2))
    orbit = waves.integrate_phase_plane(args.start, args.c, eps, args.step, args.steps)
    waves.export_profile_csv(orbit, args.out)
    status = "stopped at the singular line" if orbit.singular else "completed"
    print(f"{orbit.u.size - 1} steps, {status}")
    return 0


SOLVE_DEFAULTS = {
    "tableau": "ARS443", "n": "256", "order": "4", "dt": "0.5", "t_end": "10",
    "eps": "1e-3", "c": "1.2", "x_min": "-90", "x_max": "90", "relaxation": "off",
    "v_init": "consistent", "w_op": "minus", "stride": "0", "out": "solve.csv",
}


def read_config(path) -> dict:
    """Plain ``key = value`` file; ``#`` starts a comment, dashes equal underscores."""
    cfg = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in SOLVE_DEFAULTS:
            raise ConfigurationError(f"{path}:{lineno}: unknown key {key!r}")
        cfg[key] = value
    return {**SOLVE_DEFAULTS, **cfg}


def cmd_solve(args) -> int:
    cfg = read_config(args.config)
    grid = GridSpec(float(cfg["x_min"]), float(cfg["x_max"]), int(cfg["n"]))
    op = build_upwind_operators(grid, int(cfg["order"]))
    c = float(cfg["c"])
    eta0 = waves.bbm_soliton(waves.SolitonParams(c, grid), grid.nodes())
    if args.model == "bbm":
        model, q0 = BBMModel(op), eta0
    else:
        sp = SplittingParams(eps=float(cfg["eps"]))
        model = BBMHModel(op, sp)
        q0 = well_prepared_init(eta0, op, cfg["v_init"], sp.eps, c, w_op=cfg["w_op"])
    rec = evolve(q0, float(cfg["t_end"]), float(cfg["dt"]), load_tableau(cfg["tableau"]),
                 model, relaxation=cfg["relaxation"] == "on", stride=int(cfg["stride"]))
    out = Path(cfg["out"])
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "t_nominal", "linear_u", "energy", "gamma"])
        gammas = [None] + list(rec.gammas) if rec.gammas else [None] * len(rec.times)
        for row in zip(rec.times, rec.nominal_times, rec.linear_u, rec.energy, gammas):
            writer.writerow(["" if v is None else f"{float(v):.17g}" for v in row])
    state_path = out.with_suffix(".state.csv")
    final = np.atleast_2d(rec.final_state)
    with open(state_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "eta"] if args.model == "bbm" else ["x", "u", "v", "w"])
        for j, x in enumerate(grid.nodes()):
            writer.writerow([f"{x:.17g}"] + [f"{comp[j]:.17g}" for comp in final])
    drift = float(np.max(rec.relative_energy_drift()))
    print(f"{rec.steps} steps to t = {rec.final_time:.6g}; max relative invariant drift {drift:.2e}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bbmh", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    ap = sub.add_parser("ap-table", help="asymptotic-preserving error table")
    ap.add_argument("--tableau", default="ARS443")
    ap.add_argument("--n", type=int, default=512)
    ap.add_argument("--dt", type=float, default=0.01)
    ap.add_argument("--t-end", type=float, default=19.5)
    ap.add_argument("--eps2", type=_floats, default=list(experiments.DEFAULT_EPS_SQ))
    ap.add_argument("--v-init", choices=["consistent", "zero"], default="consistent")
    ap.add_argument("--w-op", choices=["central", "minus"], default="minus")
    ap.add_argument("--order", type=int, default=4)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="ap_table.csv")
    ap.set_defaults(func=cmd_ap_table)

    eg = sub.add_parser("error-growth", help="long-time error growth against a traveling wave")
    eg.add_argument("--mode", choices=["petviashvili", "analytic"], default="petviashvili")
    eg.add_argument("--eps", type=float, default=1e-3)
    eg.add_argument("--tableau", default="ARS443")
    eg.add_argument("--relaxation", choices=["on", "off"], default="on")
    eg.add_argument("--model", choices=["bbmh", "bbm"], default="bbmh")
    eg.add_argument("--n", type=int, default=256)
    eg.add_argument("--dt", type=float, default=0.5)
    eg.add_argument("--t-end", type=float, default=1071.0)
    eg.add_argument("--window", type=float, default=0.5)
    eg.add_argument("--out", default="error_growth.csv")
    eg.set_defaults(func=cmd_error_growth)

    pv = sub.add_parser("petviashvili", help="BBMH solitary wave by Petviashvili iteration")
    pv.add_argument("--c", type=float, default=1.2)
    pv.add_argument("--eps", type=float, default=1e-3)
    pv.add_argument("--n", type=int, default=1024)
    pv.add_argument("--tol", type=float, default=1e-12)
    pv.add_argument("--max-iter", type=int, default=1000)
    pv.add_argument("--x-min", type=float, default=-90.0)
    pv.add_argument("--x-max", type=float, default=90.0)
    pv.add_argument("--out", default="petviashvili.csv")
    pv.set_defaults(func=cmd_petviashvili)

    to = sub.add_parser("traveling-ode", help="phase-plane orbit of the traveling-wave ODE")
    to.add_argument("--c", type=float, required=True)
    to.add_argument("--eps2", type=float, required=True)
    to.add_argument("--start", type=_pair, required=True)
    to.add_argument("--step", type=float, default=1e-3)
    to.add_argument("--steps", type=int, default=10000)
    to.add_argument("--out", default="orbit.csv")
    to.set_defaults(func=cmd_traveling_ode)

    so = sub.add_parser("solve", help="single run configured by a key=value file")
    so.add_argument("--model", choices=["bbm", "bbmh"], required=True)
    so.add_argument("--config", required=True)
    so.set_defaults(func=cmd_solve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, ArithmeticError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
