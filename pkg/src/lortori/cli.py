"""Command-line front end.

    lortori cone      --metric M [--length L] --out DIR
    lortori distance  --metric M --x X0,X1 --y Y0,Y1 [--cross-check] --out DIR
    lortori pole      --metric M --p P0,P1 [--horizon H] --out DIR
    lortori busemann  --metric M (--alpha AX,AY | --k KX,KY) --window ... --res NX,NY --tol T --out DIR
    lortori foliate   --metric M (--field field.csv | --alpha/--k ...) [--seeds ...] --out DIR
    lortori verify    [--metric M] [--only 1,2,...] --out DIR

M is a metric-spec JSON file or one of the built-in names flat, conformal,
sheared. A JSON run config (--config) supplies defaults for any flag.
Exit codes: 0 success, 1 numerical failure, 2 invalid input.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .busemann import (ConditionStarViolation, LeftWindow, NoConvergence,
                       WindowTooSmall, busemann_for_direction, check_periodicity,
                       integral_curves)
from .causal import OrientationError, estimate_cone
from .geodesic import Divergence, IntegrationError, NoBracket, pole_check
from .lines import DirectionDrift, NotClosing
from .maxdist import EmptyWindow, ScalarField, attach_gradient, lorentz_distance
from .metric import (FAMILIES, MetricSpecError, SignatureError, load_spec,
                     signature_check)

SCHEMA = "lortori/1"
FIELD_COLUMNS = ("x", "y", "u", "ux", "uy", "residual", "valid")
LEAF_COLUMNS = ("leaf_id", "t", "x", "y")

NUMERICAL = (NoConvergence, NoBracket, Divergence, IntegrationError, NotClosing,
             DirectionDrift, EmptyWindow, ConditionStarViolation, LeftWindow,
             OrientationError, FloatingPointError)

DEFAULTS = {"length": 100.0, "tol": 1e-4, "horizon": 20.0, "seed": 0,
            "window": "0,1,0,1", "res": "65,65", "n_seeds": 16,
            "leaf_horizon": None, "directions": 64}


class InvalidInput(ValueError):
    pass


# ------------------------------------------------------------------ parsing

def _floats(text, n=None, name="value"):
    try:
        vals = [float(v) for v in str(text).split(",")]
    except ValueError:
        raise InvalidInput(f"--{name}: expected comma-separated numbers, got {text!r}") from None
    if n is not None and len(vals) != n:
        raise InvalidInput(f"--{name}: expected {n} numbers, got {len(vals)}")
    return vals


def _ints(text, n, name):
    vals = _floats(text, n, name)
    if any(v != int(v) for v in vals):
        raise InvalidInput(f"--{name}: expected integers")
    return [int(v) for v in vals]


def resolve_metric(ref):
    if ref is None:
        raise InvalidInput("--metric is required")
    if ref in FAMILIES and not Path(ref).exists():
        spec = FAMILIES[ref]()
    else:
        if not Path(ref).exists():
            raise InvalidInput(f"metric spec {ref!r} not found")
        spec = load_spec(ref)
    rep = signature_check(spec)
    if not rep.passed:
        raise InvalidInput(
            f"signature_check failed: min |det g| = {rep.min_abs_det:.3g}, "
            f"min -g22 = {rep.min_neg_g22:.3g} (need det g < 0 and g22 < 0 everywhere)")
    return spec


def build_parser():
    ap = argparse.ArgumentParser(prog="lortori", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--metric", help="metric-spec JSON path or built-in family name")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--config", help="JSON run config supplying flag defaults")
        p.add_argument("--seed", type=int)
        return p

    p = common(sub.add_parser("cone", help="stable time cone"))
    p.add_argument("--length", type=float)

    p = common(sub.add_parser("distance", help="Lorentzian distance d(x, y)"))
    p.add_argument("--x", required=False)
    p.add_argument("--y", required=False)
    p.add_argument("--cross-check", action="store_true", dest="cross_check")

    p = common(sub.add_parser("pole", help="timelike pole check at p"))
    p.add_argument("--p")
    p.add_argument("--horizon", type=float)
    p.add_argument("--directions", type=int)

    for name in ("busemann", "foliate"):
        p = common(sub.add_parser(name, help="Busemann field" if name == "busemann"
                                  else "gradient foliation"))
        g = p.add_mutually_exclusive_group()
        g.add_argument("--alpha")
        g.add_argument("--k")
        p.add_argument("--p", help="base pole (default: window center)")
        p.add_argument("--window", help="x0,x1,y0,y1")
        p.add_argument("--res", help="NX,NY")
        p.add_argument("--tol", type=float)
        if name == "foliate":
            p.add_argument("--field", help="field.csv written by the busemann command")
            p.add_argument("--seeds", help="x,y;x,y;... (default: a row near the bottom)")
            p.add_argument("--n-seeds", type=int, dest="n_seeds")
            p.add_argument("--horizon", type=float, help="horizon for direction estimates")

    p = common(sub.add_parser("verify", help="run the acceptance suite"))
    p.add_argument("--only", help="comma-separated criterion numbers")
    return ap


def _settings(args):
    conf = dict(DEFAULTS)
    if args.config:
        try:
            conf.update(json.loads(Path(args.config).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidInput(f"cannot read run config: {exc}") from None
    for k, v in vars(args).items():
        if v is not None and v is not False:
            conf[k] = v
        conf.setdefault(k, v)
    return conf


# ------------------------------------------------------------------ writers

def _num(v):
    return repr(float(v)) if np.isfinite(v) else "nan"


def write_json(path: Path, doc: dict):
    doc = {"schema": SCHEMA, **doc}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(type(o))


def write_field_csv(path: Path, f: ScalarField, residual):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FIELD_COLUMNS)
        for i, x in enumerate(f.x):
            for j, y in enumerate(f.y):
                gx, gy = f.gradient[i, j]
                w.writerow([_num(x), _num(y), _num(f.values[i, j]), _num(gx), _num(gy),
                            _num(residual[i, j]), int(bool(f.valid[i, j]))])


def read_field_csv(path, spec) -> ScalarField:
    """Inverse of write_field_csv (gradients are taken from the file)."""
    if not Path(path).is_file():
        raise InvalidInput(f"{path}: no such field file")
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = tuple(next(r))
        if header != FIELD_COLUMNS:
            raise InvalidInput(f"{path}: unexpected columns {header}")
        rows = np.array([[float(v) for v in row] for row in r])
    xs, ys = np.unique(rows[:, 0]), np.unique(rows[:, 1])
    nx, ny = len(xs), len(ys)
    if nx * ny != len(rows):
        raise InvalidInput(f"{path}: rows do not form a grid")
    A = rows.reshape(nx, ny, len(FIELD_COLUMNS))
    valid = A[..., 6] > 0
    f = ScalarField((xs[0], xs[-1], ys[0], ys[-1]), (nx, ny), xs, ys, A[..., 2],
                    None, None, valid, None, {"source": str(path)})
    attach_gradient(f, spec)
    f.gradient = np.where(valid[..., None], A[..., 3:5], np.nan)
    f.valid = valid
    return f


def write_leaves_csv(path: Path, chart):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LEAF_COLUMNS)
        for leaf_id, t, x, y in chart.to_rows():
            w.writerow([leaf_id, _num(t), _num(x), _num(y)])


# ------------------------------------------------------------------ commands

def cmd_cone(spec, c, out: Path):
    cone = estimate_cone(spec, float(c["length"]))
    write_json(out / "cone.json", cone.to_dict())
    return cone.to_dict()


def cmd_distance(spec, c, out: Path):
    if c.get("x") is None or c.get("y") is None:
        raise InvalidInput("distance needs --x and --y")
    x = _floats(c["x"], 2, "x")
    y = _floats(c["y"], 2, "y")
    r = lorentz_distance(spec, x, y, cross_check=bool(c.get("cross_check")))
    doc = r.to_dict()
    write_json(out / "distance.json", doc)
    return doc


def cmd_pole(spec, c, out: Path):
    p = _floats(c.get("p") or "0,0", 2, "p")
    rep = pole_check(spec, p, n_directions=int(c["directions"]), horizon=float(c["horizon"]))
    doc = {"p": p, "is_pole_up_to_horizon": rep.is_pole_up_to_horizon,
           "first_conjugate": rep.first_conjugate, "worst_direction": rep.worst_direction,
           "n_directions": rep.n_directions, "horizon": rep.horizon,
           "jacobi_min_abs": rep.jacobi_min_abs}
    write_json(out / "pole.json", doc)
    return doc


def _direction_args(c):
    if c.get("alpha") is not None:
        a = np.array(_floats(c["alpha"], 2, "alpha"))
        return {"alpha": tuple(a / np.linalg.norm(a))}
    if c.get("k") is not None:
        return {"k": tuple(_ints(c["k"], 2, "k"))}
    raise InvalidInput("give --alpha or --k")


def _build_field(spec, c):
    window = tuple(_floats(c["window"], 4, "window"))
    if not (window[0] < window[1] and window[2] < window[3]):
        raise InvalidInput("--window must satisfy x0 < x1 and y0 < y1")
    res = _ints(c["res"], None, "res")
    if len(res) == 1:
        res = res * 2  # square grid
    if len(res) != 2 or min(res) < 2:
        raise InvalidInput("--res: expected N or NX,NY with N >= 2")
    res = tuple(res)
    if min(res) < 5:
        raise InvalidInput("--res needs at least 5 nodes per axis")
    p = _floats(c["p"], 2, "p") if c.get("p") else None
    return busemann_for_direction(spec, window, res, p=p, tol=float(c["tol"]),
                                  **_direction_args(c))


def cmd_busemann(spec, c, out: Path):
    f = _build_field(spec, c)
    write_field_csv(out / "field.csv", f, f.residual)
    m = f.valid & ~f.one_sided
    write_json(out / "history.json", {
        "direction": f.direction, "anchored": f.anchored,
        "iterations_used": f.iterations_used, "converged": f.converged,
        "convergence_history": f.convergence_history,
        "max_residual": float(np.nanmax(f.residual[m])) if m.any() else None,
        "meta": f.meta})
    try:
        per = check_periodicity(f, spec)
    except WindowTooSmall as exc:
        per = {"error": "WindowTooSmall", "message": str(exc)}
    write_json(out / "periodicity.json", per)
    return {"iterations_used": f.iterations_used, "periodicity": per}


def _seeds(c, f):
    if c.get("seeds"):
        try:
            return np.array([_floats(s, 2, "seeds") for s in c["seeds"].split(";")])
        except InvalidInput:
            raise
    n = int(c["n_seeds"])
    m = f.valid & ~f.one_sided
    cols = np.nonzero(m.any(axis=1))[0]
    rows = np.nonzero(m.any(axis=0))[0]
    if not cols.size:
        raise EmptyWindow("field has no interior valid node")
    j = rows[min(2, len(rows) - 1)]
    i = np.unique(np.linspace(cols[0] + 1, cols[-1] - 1, n).round().astype(int))
    i = i[m[i, j]]
    return np.stack([f.x[i], np.full(len(i), f.y[j])], axis=1)


def cmd_foliate(spec, c, out: Path):
    if c.get("field"):
        f = read_field_csv(c["field"], spec)
    else:
        f = _build_field(spec, c)
    seeds = _seeds(c, f)
    hy = f.y[-1] - f.y[0]
    horizon = float(c.get("leaf_horizon") or 1.5 * hy)
    dir_h = float(c["horizon"]) if c.get("horizon") is not None else 200.0
    chart = integral_curves(f, spec, seeds, horizon, step=min(1e-3, hy / 200),
                            direction_horizon=dir_h)
    write_leaves_csv(out / "leaves.csv", chart)
    write_json(out / "direction.json", {"leaves": [
        {"leaf_id": i, "seed": l.seed, "alpha": l.direction.alpha, "D": l.direction.D,
         "confidence_length": l.direction.confidence_length,
         "geodesic_deviation": l.geodesic_deviation, "left_window": l.left_window}
        for i, l in enumerate(chart.leaves)]})
    write_json(out / "disjointness.json", {"min_separation": chart.min_separation,
                                           "disjoint": chart.min_separation > 0,
                                           "n_leaves": len(chart.leaves)})
    return {"min_separation": chart.min_separation}


def cmd_verify(spec, c, out: Path):
    from .acceptance import run_suite
    only = set(_ints(c["only"], None, "only")) if c.get("only") else None
    results = run_suite(spec, only=only, echo=lambda s: print(s, flush=True))
    doc = {"metric": c.get("metric"), "results": [r.to_dict() for r in results],
           "all_passed": all(r.passed for r in results)}
    write_json(out / "verify.json", doc)
    return doc


COMMANDS = {"cone": cmd_cone, "distance": cmd_distance, "pole": cmd_pole,
            "busemann": cmd_busemann, "foliate": cmd_foliate, "verify": cmd_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        c = _settings(args)
        out = Path(c["out"])
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "verify" and not c.get("metric"):
            spec = None
        else:
            spec = resolve_metric(c.get("metric"))
        doc = COMMANDS[args.command](spec, c, out)
    except (InvalidInput, MetricSpecError, SignatureError, ValueError) as exc:
        if isinstance(exc, NUMERICAL):
            print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
            return 1
        print(f"invalid input: {exc}", file=sys.stderr)
        return 2
    except NUMERICAL as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if args.command == "verify" and not doc["all_passed"]:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
