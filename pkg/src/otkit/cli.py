"""``otkit`` command line.

Exit codes: 0 success, 2 invalid input, 1 internal failure.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .beckmann import build_grid_graph, lipschitz_dual_check, equivalence_gap, snap_measure
from .config import load_config
from .costs import CostSpec, c_transform_full, cost_matrix
from .errors import ParseError, UnknownSubcommand, ValidationError
from .functionals import FunctionalSpec, GridDensity, convexity_report
from .geodesics import continuity_residual, geodesic_path, path_velocities, speed_profile
from .io import (
    load_json,
    load_json_arg,
    measure_to_obj,
    parse_density_csv,
    parse_measure,
    parse_numbers,
    serialize_measure,
    sha256_file,
)
from .monge_ampere import Density1D, ma_residual, monotone_rearrangement
from .solver import DualPotentials, TransportPlan, extract_duals, solve_primal, verify_optimality
from .wasserstein import wasserstein_p

SUBCOMMANDS = ("solve", "duals", "wasserstein", "interpolate", "convexity", "beckmann", "ma-check", "ctransform", "verify")


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so errors map to our exit codes."""

    def error(self, message):
        raise ValidationError(message)


def _p_value(text: str) -> float:
    if text.lower() in ("inf", "infinity"):
        return math.inf
    try:
        return float(text)
    except ValueError:
        raise ValidationError(f"invalid exponent {text!r}") from None


def _cost(text: str) -> CostSpec:
    return CostSpec.from_json(load_json_arg(text))


def _bbox(text: str):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise ValidationError(f"invalid bbox {text!r}") from None
    if len(vals) % 2:
        raise ValidationError("bbox needs lo,hi pairs per axis")
    return [(vals[k], vals[k + 1]) for k in range(0, len(vals), 2)]


def _density(path) -> Density1D:
    a, b, v = parse_density_csv(path)
    h = (b - a) / v.size
    if v.sum() <= 0:
        raise ValidationError(f"{path}: density has no mass")
    return Density1D(a, b, v / (v.sum() * h))


def _grid(path) -> GridDensity:
    a, b, v = parse_density_csv(path)
    h = (b - a) / v.size
    if v.sum() <= 0:
        raise ValidationError(f"{path}: density has no mass")
    return GridDensity.from_masses([a], h, v)


def _plan_obj(plan: TransportPlan, C=None) -> dict:
    return plan.to_json(C)


# subcommand handlers: each returns (result dict, input paths)


def cmd_solve(args, cfg):
    mu, nu = parse_measure(args.mu), parse_measure(args.nu)
    spec = _cost(args.cost)
    C = cost_matrix(spec, mu.points, nu.points)
    plan, duals = solve_primal(mu, nu, C, return_duals=True)
    out = _plan_obj(plan, C)
    if args.duals:
        out["duals"] = duals.to_json()
    return out, [args.mu, args.nu]


def cmd_duals(args, cfg):
    mu, nu = parse_measure(args.mu), parse_measure(args.nu)
    spec = _cost(args.cost)
    C = cost_matrix(spec, mu.points, nu.points)
    inputs = [args.mu, args.nu]
    if args.plan:
        plan = TransportPlan.from_json(load_json(args.plan), mu, nu)
        inputs.append(args.plan)
    else:
        plan = solve_primal(mu, nu, C)
    duals = extract_duals(plan, C, cfg.optimality_tol)
    rep = verify_optimality(plan, duals, C, cfg.optimality_tol)
    return {"duals": duals.to_json(), "report": rep.to_json()}, inputs


def cmd_verify(args, cfg):
    mu, nu = parse_measure(args.mu), parse_measure(args.nu)
    spec = _cost(args.cost)
    C = cost_matrix(spec, mu.points, nu.points)
    plan = TransportPlan.from_json(load_json(args.plan), mu, nu)
    inputs = [args.mu, args.nu, args.plan]
    if args.duals:
        obj = load_json(args.duals)
        try:
            duals = DualPotentials(np.asarray(obj["phi"], dtype=float), np.asarray(obj["psi"], dtype=float))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{args.duals}: expected 'phi' and 'psi' lists") from exc
        if duals.phi.shape != (mu.size,) or duals.psi.shape != (nu.size,):
            raise ValidationError("dual vectors do not match the measures")
        inputs.append(args.duals)
    else:
        duals = extract_duals(plan, C, cfg.optimality_tol)
    rep = verify_optimality(plan, duals, C, cfg.optimality_tol)
    return {"report": rep.to_json()}, inputs


def cmd_wasserstein(args, cfg):
    mu, nu = parse_measure(args.mu), parse_measure(args.nu)
    rep = wasserstein_p(mu, nu, _p_value(args.p))
    if args.plan_out:
        Path(args.plan_out).write_text(_dumps(rep.plan.to_json()))
    return rep.to_json(), [args.mu, args.nu]


def cmd_interpolate(args, cfg):
    mu, nu = parse_measure(args.mu), parse_measure(args.nu)
    p = _p_value(args.p)
    path = geodesic_path(mu, nu, p, args.samples)
    diag = {"times": path.times, "canonical": path.canonical}
    diag["speeds"] = speed_profile(path) if len(path) > 2 else []
    if p == 2:
        vel = path_velocities(path)
        diag["residuals"] = continuity_residual(path, vel).to_json()
    files = []
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        width = len(str(len(path) - 1))
        for k, m in enumerate(path.measures):
            name = f"sample_{k:0{width}d}.json"
            serialize_measure(m, out / name)
            files.append(name)
        (out / "diagnostics.json").write_text(_dumps(diag))
    diag["samples"] = files if files else [measure_to_obj(m) for m in path.measures]
    return diag, [args.mu, args.nu]


def cmd_convexity(args, cfg):
    spec = FunctionalSpec.from_json(load_json_arg(args.functional))
    if args.grid:
        mu, nu = _grid(args.mu), _grid(args.nu)
    else:
        mu, nu = parse_measure(args.mu), parse_measure(args.nu)
    table = convexity_report(spec, mu, nu, _p_value(args.p), args.samples)
    return table.to_json(), [args.mu, args.nu]


def cmd_beckmann(args, cfg):
    g = build_grid_graph(_bbox(args.bbox), args.res, args.diagonals)
    a = snap_measure(parse_measure(args.mu), g)
    b = snap_measure(parse_measure(args.nu), g)
    rep = equivalence_gap(g, a, b)
    out = rep.flow.to_json()
    out["kantorovich_value"] = rep.kantorovich_value
    out["gap"] = rep.gap
    out["max_divergence_residual"] = float(rep.flow.divergence_residual(a, b).max())
    if args.phi:
        dc = lipschitz_dual_check(g, a, b, parse_numbers(args.phi), rep.beckmann_value)
        out["dual_check"] = {"gradient_bound": dc.gradient_bound, "objective": dc.objective, "feasible": dc.feasible}
    return out, [args.mu, args.nu]


def cmd_ma_check(args, cfg):
    u, v = _density(args.u), _density(args.v)
    levels = []
    for k in range(args.refine + 1):
        if k:
            # refine by splitting each cell; the piecewise-constant density is unchanged
            u = Density1D(u.a, u.b, np.repeat(u.values, 2))
            v = Density1D(v.a, v.b, np.repeat(v.values, 2))
        T = monotone_rearrangement(u, v)
        rep = ma_residual(T, u, v).to_json()
        rep["n"] = u.n
        rep["monotone"] = T.is_monotone()
        levels.append(rep)
    ratios = [
        levels[k]["max_residual"] / levels[k + 1]["max_residual"] if levels[k + 1]["max_residual"] > 0 else None
        for k in range(len(levels) - 1)
    ]
    return {"levels": levels, "ratios": ratios}, [args.u, args.v]


def cmd_ctransform(args, cfg):
    X, Y = parse_measure(args.x), parse_measure(args.y)
    chi = parse_numbers(args.chi)
    spec = _cost(args.cost)
    res = c_transform_full(chi, spec, X.points, Y.points)
    return {"values": res.values.tolist(), "argmins": [list(a) for a in res.argmins]}, [args.x, args.y]


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="otkit", description="Discrete optimal transport toolkit")
    ap.add_argument("--version", action="version", version=f"otkit {__version__}")
    ap.add_argument("--config", help="config JSON (default: $OT_KERNEL_CONFIG)")
    ap.add_argument("--out-file", help="write the report here instead of stdout")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    def pair(sp):
        sp.add_argument("--mu", required=True)
        sp.add_argument("--nu", required=True)

    sp = sub.add_parser("solve", help="optimal plan for a cost")
    pair(sp)
    sp.add_argument("--cost", required=True, help='cost JSON, e.g. {"kind":"power","p":2}')
    sp.add_argument("--duals", action="store_true", help="include basis potentials")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("duals", help="Kantorovich potentials and optimality report")
    pair(sp)
    sp.add_argument("--cost", required=True)
    sp.add_argument("--plan", help="plan JSON to certify (default: solve first)")
    sp.set_defaults(func=cmd_duals)

    sp = sub.add_parser("verify", help="check a plan (and optional duals) for optimality")
    pair(sp)
    sp.add_argument("--cost", required=True)
    sp.add_argument("--plan", required=True)
    sp.add_argument("--duals")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("wasserstein", help="W_p distance, p >= 1 or inf")
    pair(sp)
    sp.add_argument("--p", required=True)
    sp.add_argument("--plan-out")
    sp.set_defaults(func=cmd_wasserstein)

    sp = sub.add_parser("interpolate", help="sampled displacement interpolation")
    pair(sp)
    sp.add_argument("--p", default="2")
    sp.add_argument("--samples", type=int, default=5)
    sp.add_argument("--out", help="directory for per-sample measures and diagnostics")
    sp.set_defaults(func=cmd_interpolate)

    sp = sub.add_parser("convexity", help="second differences of a functional along a geodesic")
    pair(sp)
    sp.add_argument("--functional", required=True)
    sp.add_argument("--p", default="2")
    sp.add_argument("--samples", type=int, default=11)
    sp.add_argument("--grid", action="store_true", help="inputs are density CSV files")
    sp.set_defaults(func=cmd_convexity)

    sp = sub.add_parser("beckmann", help="minimal flow on a grid graph vs graph-metric W_1")
    pair(sp)
    sp.add_argument("--bbox", required=True, help="lo,hi[,lo,hi]")
    sp.add_argument("--res", type=int, required=True)
    sp.add_argument("--diagonals", action="store_true")
    sp.add_argument("--phi", help="node potential (JSON list) for the dual check")
    sp.set_defaults(func=cmd_beckmann)

    sp = sub.add_parser("ma-check", help="1D Monge-Ampere residual of the monotone map")
    sp.add_argument("--u", required=True)
    sp.add_argument("--v", required=True)
    sp.add_argument("--refine", type=int, default=0)
    sp.set_defaults(func=cmd_ma_check)

    sp = sub.add_parser("ctransform", help="c-transform of a potential")
    sp.add_argument("--chi", required=True, help="JSON list of values on the points of --x")
    sp.add_argument("--x", required=True)
    sp.add_argument("--y", required=True)
    sp.add_argument("--cost", required=True)
    sp.set_defaults(func=cmd_ctransform)
    return ap


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else ("inf" if obj > 0 else "-inf" if obj < 0 else "nan")
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def _dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _to_csv(report: dict) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    result = report["result"]
    if "entries" in result:
        w.writerow(["i", "j", "mass"])
        w.writerows(result["entries"])
    else:
        w.writerow(["key", "value"])
        for k in sorted(result):
            if not isinstance(result[k], (dict, list)):
                w.writerow([k, result[k]])
    return buf.getvalue()


def dispatch(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        ap = build_parser()
        if argv and not argv[0].startswith("-") and argv[0] not in SUBCOMMANDS:
            raise UnknownSubcommand(f"unknown subcommand {argv[0]!r}; choose from {', '.join(SUBCOMMANDS)}")
        args = ap.parse_args(argv)
        if args.command is None:
            raise UnknownSubcommand(f"missing subcommand; choose from {', '.join(SUBCOMMANDS)}")
        cfg = load_config(args.config)
        result, inputs = args.func(args, cfg)
        report = {
            "tool": "otkit",
            "version": __version__,
            "command": args.command,
            "config": cfg.to_json(),
            "inputs": {str(p): sha256_file(p) for p in inputs},
            "result": result,
        }
        text = _to_csv(_clean(report)) if cfg.output_format == "csv" else _dumps(report)
        if args.out_file:
            Path(args.out_file).write_text(text)
        else:
            sys.stdout.write(text)
        return 0
    except ValidationError as exc:
        print(f"otkit: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except Exception as exc:  # noqa: BLE001
        print(f"otkit: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
