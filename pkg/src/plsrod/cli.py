"""Command line entry point: ``plsrod <command> --config <path> --out <dir>``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from . import kinematics
from .config import ScenarioConfig, load_config, resolve_path
from .dynamics import TensionInput, simulate
from .errors import PlsRodError
from .identification import (
    DEFAULT_BOUNDS,
    IdentificationProblem,
    identify,
    load_experiments,
    validate,
)
from .reduction import make_selection
from .statics import StaticProblem, load_sweep, solve_static

COMMANDS = ("static", "sweep", "dynamic", "compare", "identify", "validate")
CENTERLINE_HEADER = ["X", "x", "y", "z", "qw", "qx", "qy", "qz"]


def fmt(v):
    """Fixed numeric format for every CSV cell: 9 significant digits."""
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if v == 0.0:
        v = 0.0  # drop the sign of negative zero
    return f"{v:.9g}"


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    return str(o)


def emit_centerline(rod, q, samples, model="pls"):
    return kinematics.centerline(rod, q, samples, model)


class Context:
    def __init__(self, cfg: ScenarioConfig, base_dir, out: Path, seed, quadrature, segments):
        self.cfg = cfg
        self.base_dir = base_dir
        self.out = out
        self.seed = seed
        self.rod = cfg.build_rod(segments, quadrature)

    def problem(self, loads=None, mode=None, model=None):
        run = self.cfg.run
        mode = run.mode if mode is None else mode
        model = run.model if model is None else model
        sel = None if (model == "pcs" or mode == "full") else make_selection(mode)
        return StaticProblem(
            self.rod,
            self.cfg.build_loads(self.rod) if loads is None else loads,
            selection=sel,
            model=model,
            tol=run.tol,
            max_iter=run.max_iter,
        )


def _solution_record(rod, sol, model):
    tip = kinematics.end_effector(rod, sol.q, model)
    return {
        "converged": bool(sol.converged),
        "iterations": int(sol.iterations),
        "residual_norm": float(sol.residual_norm),
        "seconds": float(sol.seconds),
        "tip_m": tip,
        "q": sol.q,
    }


def cmd_static(ctx: Context):
    p = ctx.problem()
    sol = solve_static(p)
    rec = _solution_record(ctx.rod, sol, p.model)
    rec["model"] = p.model
    rec["mode"] = ctx.cfg.run.mode
    write_json(ctx.out / "solution.json", rec)
    write_csv(ctx.out / "centerline.csv", CENTERLINE_HEADER,
              emit_centerline(ctx.rod, sol.q, ctx.cfg.run.samples, p.model))
    return rec


def cmd_sweep(ctx: Context):
    sc = ctx.cfg.run.sweep
    if sc is None:
        raise ValueError("run.sweep section is required for the sweep command")
    base = ctx.problem()
    if sc.tip_forces is not None:
        sols = load_sweep(base, sc.tip_forces)
        labels = [np.atleast_1d(f).tolist() for f in sc.tip_forces]
    else:
        sols, guess = [], None
        for T in sc.tensions:
            p = base.with_loads(base.loads.with_tensions(T))
            p.q_init = guess
            s = solve_static(p, raise_on_failure=False)
            sols.append(s)
            if not s.converged:
                break
            guess = s.q
        labels = [list(T) for T in sc.tensions]
    rows = []
    for k, s in enumerate(sols):
        tip = kinematics.end_effector(ctx.rod, s.q, base.model)
        rows.append([k, s.converged, s.iterations, *tip])
        if s.converged:
            write_csv(ctx.out / f"sweep_{k:03d}.csv", CENTERLINE_HEADER,
                      emit_centerline(ctx.rod, s.q, sc.samples, base.model))
    write_csv(ctx.out / "sweep_summary.csv", ["index", "converged", "iterations", "x", "y", "z"], rows)
    write_json(ctx.out / "sweep_loads.json", {"loads": labels[: len(sols)]})
    if len(sols) < len(labels) or not sols[-1].converged:
        raise PlsRodError("sweep halted at a failed step", completed=len(sols) - 1)
    return {"steps": len(sols)}


def cmd_dynamic(ctx: Context):
    dc = ctx.cfg.run.dynamic
    if dc is None:
        raise ValueError("run.dynamic section is required for the dynamic command")
    loads = ctx.cfg.build_loads(ctx.rod)
    inputs = None
    if loads.layout is not None:
        T = loads.tensions
        inputs = {
            "constant": lambda: TensionInput.constant(T),
            "step": lambda: TensionInput.step(T, dc.t_on),
            "ramp": lambda: TensionInput.ramp(T, dc.ramp_time),
        }[dc.input]()
    q_init = None
    if dc.initial == "static":
        q_init = solve_static(StaticProblem(ctx.rod, loads.with_tensions(inputs(0.0)[0]) if inputs else loads)).q
    tr = simulate(ctx.rod, loads, dc.t_end, dc.dt, q_init=q_init, inputs=inputs,
                  sample_every=dc.sample_every, blowup=dc.blowup)
    n = tr.q.shape[1]
    rows = [[t, *tip, *q] for t, tip, q in zip(tr.t, tr.tip, tr.q)]
    write_csv(ctx.out / "trajectory.csv", ["t", "x", "y", "z"] + [f"q{i}" for i in range(n)], rows)
    inc = tr.energy_increments
    rec = {
        "t": tr.energy_t,
        "energy": tr.energy,
        "max_increment": float(inc.max()) if inc.size else 0.0,
        "boundary_drift": tr.boundary_drift,
        "max_condition": tr.max_condition,
    }
    write_json(ctx.out / "energy.json", rec)
    return {"samples": len(tr.t), "max_increment": rec["max_increment"]}


ROW_NAMES = {
    "pls": "PLS",
    "pcs": "PCS",
    "euler_bernoulli": "E-B",
    "extensible_kirchhoff": "E-K",
    "timoshenko": "Timoshenko",
}


def cmd_compare(ctx: Context):
    cc = ctx.cfg.run.compare
    from .config import CompareConfig

    cc = CompareConfig() if cc is None else cc
    ref = None if cc.reference is None else np.array(cc.reference.tip_cm)
    rows, timing = [], {}
    for r in cc.rows:
        if r in ("pls", "full"):
            p = ctx.problem(mode="full", model="pls")
        elif r == "pcs":
            p = ctx.problem(mode="full", model="pcs")
        else:
            p = ctx.problem(mode=r, model="pls")
        sol = solve_static(p)
        tip = kinematics.end_effector(ctx.rod, sol.q, p.model) * 100.0
        row = [ROW_NAMES.get(r, r), *tip]
        if ref is not None:
            err = tip - ref
            rel = np.linalg.norm(err) / np.linalg.norm(ref)
            row += [*err, rel]
        rows.append(row)
        timing[ROW_NAMES.get(r, r)] = {"seconds": sol.seconds, "iterations": sol.iterations}
    header = ["model", "x_cm", "y_cm", "z_cm"]
    if ref is not None:
        header += ["dx_cm", "dy_cm", "dz_cm", "rel_error"]
        rows.insert(0, [cc.reference.name, *ref, 0.0, 0.0, 0.0, 0.0])
    write_csv(ctx.out / "compare.csv", header, rows)
    write_json(ctx.out / "compare_timing.json", timing)
    return {"rows": len(rows)}


def _id_problem(ctx: Context, path):
    exps = load_experiments(resolve_path(path, ctx.base_dir))
    layout = ctx.cfg.build_layout(ctx.rod)
    if layout is None:
        raise ValueError("identification needs a cables section")
    return IdentificationProblem(ctx.rod, layout, exps, np.array(ctx.cfg.environment.gravity, float))


def _theta_of(ctx):
    m = ctx.rod.material
    return [m.young_modulus, m.shear_modulus, m.density]


def cmd_identify(ctx: Context):
    ic = ctx.cfg.run.identify
    if ic is None:
        raise ValueError("run.identify section is required for the identify command")
    prob = _id_problem(ctx, ic.experiments)
    th0 = ic.theta_init or _theta_of(ctx)
    bounds = DEFAULT_BOUNDS if ic.bounds is None else tuple(tuple(b) for b in ic.bounds)
    res = identify(prob, th0, bounds, n_starts=ic.n_starts, seed=ctx.seed, spread=ic.spread,
                   max_nfev=ic.max_nfev)
    rec = {
        "theta": {"E": res.theta.E, "G": res.theta.G, "rho": res.theta.rho},
        "objective_m": res.objective,
        "objective_init_m": res.objective_init if np.isfinite(res.objective_init) else None,
        "errors_m": res.errors,
        "tips_m": res.tips,
        "singular_values": res.singular_values,
        "rank": res.rank,
        "rank_deficient": res.rank_deficient,
        "starts": res.starts,
        "evaluations": res.evaluations,
        "seconds": res.seconds,
        "seed": ctx.seed,
    }
    write_json(ctx.out / "theta.json", rec)
    return {"theta": rec["theta"], "objective_m": res.objective}


def cmd_validate(ctx: Context):
    vc = ctx.cfg.run.validate_
    if vc is None:
        raise ValueError("run.validate section is required for the validate command")
    prob = _id_problem(ctx, vc.experiments)
    th = vc.theta or _theta_of(ctx)
    errors, tips, converged = validate(prob, th)
    rows = []
    for e, err, tip, ok in zip(prob.experiments, errors, tips, converged):
        rows.append([e.name, *e.tensions, *tip, *e.tip, err, ok])
    nc = prob.layout.n_cables
    header = (["name"] + [f"T{i + 1}" for i in range(nc)]
              + ["x", "y", "z", "x_meas", "y_meas", "z_meas", "error", "converged"])
    write_csv(ctx.out / "validation.csv", header, rows)
    if not converged.all():
        failed = [e.name for e, ok in zip(prob.experiments, converged) if not ok]
        raise PlsRodError("static solve failed for some validation inputs", failed=failed)
    return {"max_error_m": float(errors.max())}


HANDLERS = {
    "static": cmd_static,
    "sweep": cmd_sweep,
    "dynamic": cmd_dynamic,
    "compare": cmd_compare,
    "identify": cmd_identify,
    "validate": cmd_validate,
}


def build_parser():
    p = argparse.ArgumentParser(prog="plsrod", description="Discrete Cosserat rod solver")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="YAML scenario file (or a bundled config name)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0, help="seed for multi-start draws")
    p.add_argument("--quadrature", type=int, default=None, help="Gauss points per segment")
    p.add_argument("--segments", type=int, default=None, help="segments per section")
    return p


def _error_record(exc, kind):
    rec = {"error": type(exc).__name__, "kind": kind, "message": str(exc)}
    if isinstance(exc, PlsRodError):
        rec["details"] = exc.details
    if isinstance(exc, ValidationError):
        rec["fields"] = [
            {"path": ".".join(str(x) for x in e["loc"]), "message": e["msg"]} for e in exc.errors()
        ]
    return rec


def main(argv=None):
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    t0 = time.perf_counter()
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(json.dumps(_error_record(exc, "io")), file=sys.stderr)
        return 3
    try:
        cfg, base_dir = load_config(args.config)
        if args.quadrature is not None and args.quadrature < 1:
            raise ValueError("--quadrature must be >= 1")
        if args.segments is not None and args.segments < 1:
            raise ValueError("--segments must be >= 1")
        ctx = Context(cfg, base_dir, out, args.seed, args.quadrature, args.segments)
    except (ValidationError, ValueError, FileNotFoundError, OSError) as exc:
        rec = _error_record(exc, "config")
        write_json(out / "error.json", rec)
        print(json.dumps(rec, default=_json_default), file=sys.stderr)
        return 2
    try:
        summary = HANDLERS[args.command](ctx)
    except (PlsRodError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        rec = _error_record(exc, "solver")
        write_json(out / "error.json", rec)
        print(json.dumps(rec, default=_json_default), file=sys.stderr)
        return 1
    summary = dict(summary or {})
    summary["command"] = args.command
    summary["seconds"] = time.perf_counter() - t0
    print(json.dumps(summary, default=_json_default))
    return 0


if __name__ == "__main__":
    sys.exit(main())
