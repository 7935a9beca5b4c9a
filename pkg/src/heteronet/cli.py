"""Command-line front end: ``heteronet <subcommand> [options]``.

Every output carries the tool version, the resolved configuration and the
full parameter set, so a file is enough to rerun the experiment.  CSV
outputs put these in ``#`` comment lines; JSON outputs embed them.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from enum import Enum
from pathlib import Path

import numpy as np

from . import __version__
from .network import NetworkKind, ParamError, ParamSet, normalize_key, param_keys, parse_param_text
from .odesim import (Coordinates, OdeSystem, compare_prediction, dwell_labels, integrate, seed_state)
from .projmap import (admissibility_region, build_projected_map, continuity_report, fixed_points, iterate,
                      sample_map)
from .stability import classify_all, detect_bifurcations, scan_plane
from .transition import all_matrices, crosscheck, derived_scalars

COMMANDS = ("matrices", "map", "cobweb", "fixed-points", "bifurcations", "scan", "simulate", "verify")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# -- value formatting -------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    if x is None:
        return ""
    return format(float(x), ".17g")


def _jsonable(obj):
    if isinstance(obj, Enum):
        return obj.value
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        if hasattr(obj, "to_dict"):
            return _jsonable(obj.to_dict())
        return _jsonable(dataclasses.asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, str) or obj is None:
        return obj
    try:
        x = float(obj)
    except (TypeError, ValueError):
        return str(obj)
    # JSON has no NaN or infinity; repr of a float round-trips exactly.
    return x if math.isfinite(x) else None


def _params_record(p: ParamSet) -> dict:
    return {"network": p.kind.value, **{k: float(v) for k, v in sorted(p.values.items())}}


def _config_record(args) -> dict:
    # The output path does not change the content, so it is not recorded.
    skip = {"func", "out"}
    return {k: _jsonable(v) for k, v in sorted(vars(args).items()) if k not in skip}


def _write(args, text: str) -> None:
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)


def emit_json(args, p: ParamSet, result) -> None:
    doc = {"tool": "heteronet", "version": __version__, "command": args.command,
           "config": _config_record(args), "params": _params_record(p), "result": _jsonable(result)}
    _write(args, json.dumps(doc, indent=2) + "\n")


def emit_csv(args, p: ParamSet, columns: list[str], rows, notes: dict | None = None) -> None:
    lines = [f"# heteronet {__version__}",
             f"# command: {args.command}",
             "# config: " + json.dumps(_config_record(args), sort_keys=True),
             "# params: " + json.dumps(_params_record(p))]
    for k, v in (notes or {}).items():
        lines.append(f"# {k}: " + json.dumps(_jsonable(v)))
    lines.append(",".join(columns))
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    _write(args, "\n".join(lines) + "\n")


# -- argument parsing -------------------------------------------------------

def _axis(text: str) -> tuple[str, float, float, int]:
    parts = text.split(":")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError(f"expected key:lo:hi:steps, got {text!r}")
    try:
        return normalize_key(parts[0]), float(parts[1]), float(parts[2]), int(parts[3])
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad numbers in axis {text!r}") from None


def _path(text: str) -> tuple[str, float, float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected key:lo:hi, got {text!r}")
    try:
        return normalize_key(parts[0]), float(parts[1]), float(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad numbers in path {text!r}") from None


def _state(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad state {text!r}") from None
    if len(vals) != 4:
        raise argparse.ArgumentTypeError("a state has four comma-separated components")
    return vals


def _seed(text: str) -> dict[str, float]:
    out = {}
    for item in text.split(","):
        key, sep, val = item.partition("=")
        key = key.strip()
        if not sep or key not in ("theta", "alpha", "section"):
            raise argparse.ArgumentTypeError(f"seed items are theta=, alpha=, section=; got {item!r}")
        try:
            out[key] = float(val)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad number in seed {item!r}") from None
    if "theta" not in out:
        raise argparse.ArgumentTypeError("seed needs theta=")
    return out


def _assignment(text: str) -> tuple[str, float]:
    key, sep, val = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return normalize_key(key.strip()), float(val)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number in {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="heteronet", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"heteronet {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    common = _Parser(add_help=False)
    common.add_argument("--network", help="kirk_silber | delta_clique | tournament (aliases ks, dc, t)")
    common.add_argument("--params", help="key = value parameter file")
    common.add_argument("--set", dest="overrides", action="append", type=_assignment, default=[],
                        metavar="KEY=VALUE", help="override one parameter (repeatable)")
    common.add_argument("--out", default="-", help="output path (default stdout)")

    def add(name, func, fmt, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(func=func, format=fmt)
        return sp

    add("matrices", cmd_matrices, "json", "basic and full transition matrices with derived scalars")

    sp = add("map", cmd_map, "csv", "sample the projected map on a grid")
    sp.add_argument("--samples", type=int, default=1001)

    sp = add("cobweb", cmd_cobweb, "csv", "orbit of the projected map")
    sp.add_argument("--theta0", type=float, required=True)
    sp.add_argument("--steps", type=int, default=100)

    add("fixed-points", cmd_fixed_points, "json", "fixed points, admissibility, continuity and cycle verdicts")

    sp = add("bifurcations", cmd_bifurcations, "json", "bifurcation events along a one-parameter path")
    sp.add_argument("--path", type=_path, required=True, metavar="KEY:LO:HI")
    sp.add_argument("--samples", type=int, default=101)

    sp = add("scan", cmd_scan, "csv", "cycle verdicts on a two-parameter grid")
    sp.add_argument("--axis1", type=_axis, required=True, metavar="KEY:LO:HI:STEPS")
    sp.add_argument("--axis2", type=_axis, required=True, metavar="KEY:LO:HI:STEPS")
    sp.add_argument("--workers", type=int, default=None, help="process count (default HETERONET_THREADS)")

    sp = add("simulate", cmd_simulate, "csv", "integrate the network ODE")
    sp.add_argument("--x0", type=_state, help="initial state in the chosen coordinates")
    sp.add_argument("--x0-seed", type=_seed, metavar="theta=T[,alpha=A][,section=S]",
                    help="start on the incoming section of xi_2 with direction theta")
    sp.add_argument("--t-end", type=float, default=1000.0)
    sp.add_argument("--coords", choices=[c.value for c in Coordinates], default="log")
    sp.add_argument("--rtol", type=float, default=1e-9)
    sp.add_argument("--atol", type=float, default=1e-12)

    sp = add("verify", cmd_verify, "json", "compare projected-map and ODE itineraries")
    sp.add_argument("--x0", type=_state, help="initial state in log coordinates")
    sp.add_argument("--x0-seed", type=_seed, metavar="theta=T[,alpha=A][,section=S]")
    sp.add_argument("--horizon", type=int, default=60)
    sp.add_argument("--wall", type=float, default=50.0, help="wall-clock budget in seconds")
    return parser


def resolve_params(args) -> ParamSet:
    kind, values = None, {}
    if args.params:
        kind, values = parse_param_text(Path(args.params).read_text())
    if args.network:
        try:
            kind = NetworkKind.parse(args.network)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if kind is None:
        raise UsageError("no network kind: pass --network or put 'network = ...' in the parameter file")
    if not args.params:
        values = {k: 1.0 for k in param_keys(kind)}
    for key, val in args.overrides:
        values[key] = val
    p = ParamSet(kind, values)
    args.network = kind.value
    return p


# -- subcommands ------------------------------------------------------------

def cmd_matrices(args, p):
    checks = {k: {"generic": a, "closed_form": b, "agrees": ok} for k, (a, b, ok) in crosscheck(p).items()}
    emit_json(args, p, {"matrices": all_matrices(p), "scalars": derived_scalars(p).to_dict(),
                        "closed_form_check": checks})


def cmd_map(args, p):
    if args.samples < 2:
        raise UsageError("--samples must be at least 2")
    f = build_projected_map(p)
    emit_csv(args, p, ["theta", "f_theta", "branch_label"], sample_map(f, args.samples),
             {"switch_points": list(f.switch_points)})


def cmd_cobweb(args, p):
    if not -1.0 < args.theta0 < 0.0:
        raise UsageError("--theta0 must lie in (-1, 0)")
    f = build_projected_map(p)
    orbit = iterate(f, args.theta0, max_steps=args.steps, stop_on_convergence=False)
    rows = [(i, th, orbit.labels[i] if i < len(orbit.labels) else "") for i, th in enumerate(orbit.values)]
    emit_csv(args, p, ["step", "theta", "branch_label"], rows, {"halt_reason": orbit.halt_reason})


def cmd_fixed_points(args, p):
    f = build_projected_map(p)
    emit_json(args, p, {
        "switch_points": list(f.switch_points),
        "fixed_points": fixed_points(f),
        "admissibility": admissibility_region(p),
        "continuity": continuity_report(f),
        "classification": classify_all(p),
    })


def cmd_bifurcations(args, p):
    key, lo, hi = args.path
    events = detect_bifurcations(p, key, (lo, hi), samples=args.samples)
    emit_json(args, p, {"events": [e.to_dict() for e in events]})


def cmd_scan(args, p):
    cells = scan_plane(p, args.axis1, args.axis2, workers=args.workers)
    cycles = list(cells[0]["verdicts"]) if cells else []
    signs = list(cells[0]["signs"]) if cells else []
    columns = [args.axis1[0], args.axis2[0]] + [f"verdict_{c}" for c in cycles] + signs
    rows = [[c["axis1"], c["axis2"]] + [c["verdicts"][k] for k in cycles] + [c["signs"][k] for k in signs]
            for c in cells]
    emit_csv(args, p, columns, rows)


def _initial_state(args, p, coords: Coordinates) -> np.ndarray:
    if (args.x0 is None) == (args.x0_seed is None):
        raise UsageError("give exactly one of --x0 and --x0-seed")
    if args.x0 is not None:
        return np.array(args.x0, dtype=float)
    seed = dict(args.x0_seed)
    x = seed_state(p, seed.pop("theta"), **seed)
    return np.exp(x) if coords is Coordinates.ORIGINAL else x


def cmd_simulate(args, p):
    coords = Coordinates(args.coords)
    x0 = _initial_state(args, p, coords)
    traj = integrate(OdeSystem(p, coords), x0, args.t_end, rtol=args.rtol, atol=args.atol)
    labels = dwell_labels(traj)
    rows = [[t, *x, lab] for t, x, lab in zip(traj.times, traj.states, labels)]
    emit_csv(args, p, ["t", "X1", "X2", "X3", "X4", "dwell_label"], rows,
             {"status": traj.status, "message": traj.message})


def cmd_verify(args, p):
    if args.x0_seed is not None and args.x0 is not None:
        raise UsageError("give at most one of --x0 and --x0-seed")
    if args.x0_seed is not None:
        seed = dict(args.x0_seed)
        report = compare_prediction(p, theta0=seed["theta"], alpha=seed.get("alpha"),
                                    section=seed.get("section", 0.1), horizon=args.horizon, wall=args.wall)
    elif args.x0 is not None:
        report = compare_prediction(p, x0=np.array(args.x0), horizon=args.horizon, wall=args.wall)
    else:
        raise UsageError("give --x0 or --x0-seed")
    emit_json(args, p, report.to_dict())


# -- entry point ------------------------------------------------------------

def _fail(record: dict, code: int) -> int:
    sys.stderr.write(json.dumps(record, sort_keys=True) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        p = resolve_params(args)
        args.func(args, p)
    except UsageError as exc:
        return _fail({"error": "usage", "message": str(exc)}, 2)
    except ParamError as exc:
        return _fail({"error": "invalid parameters", "message": str(exc), "validation": exc.report.to_dict()}, 2)
    except (ValueError, KeyError, OSError, ArithmeticError) as exc:
        return _fail({"error": type(exc).__name__, "message": str(exc).strip("'\"")}, 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
