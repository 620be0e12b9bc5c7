"""The acceptance suite as plain functions, shared by the tests and the CLI.

Each check returns a CheckResult; heavy fields are cached per process so the
foliation and calibration checks reuse the fields built by earlier checks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .busemann import (ConditionStarViolation, busemann_for_direction,
                       build_pole_sequence, calibration_check, check_condition_star,
                       check_periodicity, integral_curves, random_timelike_curves,
                       rational_direction_field)
from .causal import estimate_cone
from .geodesic import (boost_velocity, integrate_geodesic, jacobi_conjugate_scan,
                       pole_check)
from .maxdist import lorentz_distance
from .metric import (MetricSpec, anti_de_sitter, conformal, flat, is_constant,
                     sheared, signature_check, spec_to_dict)

UNIT = (0.0, 1.0, 0.0, 1.0)


@dataclass
class CheckResult:
    number: int
    title: str
    passed: bool
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        brief = ", ".join(f"{k}={_fmt(v)}" for k, v in self.details.items()
                          if not isinstance(v, (list, dict)))
        return f"[{tag}] criterion {self.number:2d} {self.title}: {brief}"

    def to_dict(self):
        return {"criterion": self.number, "title": self.title,
                "passed": self.passed, "details": _plain(self.details)}


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.3g}"
    return str(v)


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


# ------------------------------------------------------------ shared fields

def _key(spec):
    import json
    return json.dumps(spec_to_dict(spec), sort_keys=True)


_SPECS = {}


def _spec(key):
    return _SPECS[key]


def _remember(spec):
    k = _key(spec)
    _SPECS[k] = spec
    return k


@lru_cache(maxsize=None)
def _cone(key):
    return estimate_cone(_spec(key), 100.0)


@lru_cache(maxsize=None)
def _field(key, window, res, tol, k=None, alpha=None):
    spec = _spec(key)
    return busemann_for_direction(spec, window, (res, res), k=k, alpha=alpha,
                                  tol=tol, cone=_cone(key))


# ------------------------------------------------------------------ checks

def c01_flat_distance(n_pairs: int = 200, seed: int = 0) -> CheckResult:
    spec = flat()
    rng = np.random.default_rng(seed)
    worst, mism, got = 0.0, 0, 0
    while got < n_pairs:
        x, y = rng.uniform(-3, 3, 2), rng.uniform(-3, 3, 2)
        dx, dy = y - x
        if dy <= abs(dx):
            continue
        got += 1
        r = lorentz_distance(spec, x, y, with_maximizer=False)
        worst = max(worst, abs(r.value - math.sqrt(dy * dy - dx * dx)))
        mism += r.status != "timelike"
    n_space = 0
    while n_space < 50:
        x, y = rng.uniform(-3, 3, 2), rng.uniform(-3, 3, 2)
        if abs(y[1] - x[1]) >= abs(y[0] - x[0]):
            continue
        n_space += 1
        mism += lorentz_distance(spec, x, y, with_maximizer=False).status != "not-causally-related"
    ok = worst < 1e-6 and mism == 0
    return CheckResult(1, "flat closed-form distance", ok,
                       {"max_error": worst, "status_mismatches": mism,
                        "timelike_pairs": n_pairs, "spacelike_pairs": n_space})


def c02_flat_busemann() -> CheckResult:
    key = _remember(flat())
    f = _field(key, UNIT, 65, 1e-4, k=(0, 1))
    m = f.valid & ~f.one_sided
    grad_err = float(np.max(np.linalg.norm(f.gradient - [0.0, 1.0], axis=-1)[m]))
    res = float(np.nanmax(f.residual[m]))
    P = f.points()
    d = (f.values + P[..., 1])[m]
    vertical = float(np.max(np.abs(d - d.mean())))
    phi = 0.3
    g = _field(key, UNIT, 65, 1e-4, alpha=(math.sin(phi), math.cos(phi)))
    mg = g.valid & ~g.one_sided
    exact = (P[..., 0] * math.sin(phi) - P[..., 1] * math.cos(phi)) / math.sqrt(math.cos(2 * phi))
    e = (g.values - exact)[mg]
    tilt = float(np.max(np.abs(e - e.mean())))
    ok = grad_err < 1e-4 and res < 1e-5 and vertical < 1e-4 and tilt < 1e-4
    return CheckResult(2, "flat Busemann limit", ok,
                       {"grad_error": grad_err, "eikonal_residual": res,
                        "u_plus_y_deviation": vertical, "tilted_deviation": tilt,
                        "iterations": f.iterations_used,
                        "tilted_iterations": g.iterations_used})


def c03_conformal_cone() -> CheckResult:
    cone = estimate_cone(conformal(), 100.0)
    s = 1 / math.sqrt(2)
    err = max(float(np.max(np.abs(cone.m_minus - [s, s]))),
              float(np.max(np.abs(cone.m_plus - [-s, s]))))
    return CheckResult(3, "conformal cone invariance", err < 1e-6,
                       {"max_error": err, "m_minus": cone.m_minus.tolist(),
                        "m_plus": cone.m_plus.tolist()})


def c04_geodesic_integrity(specs=None, n_launch: int = 20, seed: int = 0,
                           richardson_step: float = 0.02) -> CheckResult:
    specs = specs or [flat(), conformal(), sheared()]
    rng = np.random.default_rng(seed)
    drift, ratios = 0.0, []
    for spec in specs:
        for _ in range(n_launch):
            p = rng.random(2)
            v = boost_velocity(spec, p, rng.uniform(-1.5, 1.5))
            drift = max(drift, integrate_geodesic(spec, p, v, 50.0, 1e-3).norm_drift)
        if is_constant(spec):
            continue  # straight lines: RK4 is exact, no ratio to measure
        for _ in range(3):
            p = rng.random(2)
            v = boost_velocity(spec, p, rng.uniform(-1.5, 1.5))
            h = richardson_step
            e = [integrate_geodesic(spec, p, v, 50.0, s, check=False).end
                 for s in (h, h / 2, h / 4)]
            ratios.append(float(np.linalg.norm(e[0] - e[1]) / np.linalg.norm(e[1] - e[2])))
    ok_ratio = bool(ratios) and all(13.0 <= r <= 19.0 for r in ratios)
    return CheckResult(4, "geodesic integrity", drift <= 1e-8 and ok_ratio,
                       {"max_norm_drift": drift,
                        "richardson_min": min(ratios) if ratios else float("nan"),
                        "richardson_max": max(ratios) if ratios else float("nan"),
                        "ratios": ratios})


def c05_jacobi_oracle() -> CheckResult:
    spec = anti_de_sitter()
    errs = []
    for K0 in (1.0, 4.0, 9.0):
        rep = jacobi_conjugate_scan(spec, (0.0, 0.0), (0.0, 1.0), 2 * math.pi / math.sqrt(K0),
                                    1e-3, coefficient=K0)
        t = rep.first_conjugate if rep.first_conjugate is not None else float("inf")
        errs.append(abs(t - math.pi / math.sqrt(K0)))
    pole = pole_check(flat(), (0.0, 0.0), n_directions=16, horizon=10.0)
    ok = max(errs) < 1e-6 and pole.is_pole_up_to_horizon
    return CheckResult(5, "Jacobi oracle", ok,
                       {"max_error": max(errs), "flat_pole": pole.is_pole_up_to_horizon})


def c06_sheared_eikonal(spec: MetricSpec = None) -> CheckResult:
    key = _remember(spec or sheared())
    f = _field(key, UNIT, 65, 1e-3, k=(0, 1))
    g = _field(key, UNIT, 129, 1e-3, k=(0, 1))
    last = f.convergence_history[-1]
    gap = max(last["gap_u"], last["gap_grad"])
    r65 = float(np.nanmax(f.residual[f.valid & ~f.one_sided]))
    r129 = float(np.nanmax(g.residual[g.valid & ~g.one_sided]))
    ratio = r65 / r129 if r129 > 0 else float("inf")
    ok = gap < 1e-3 and r65 < 1e-3 and 3.2 <= ratio <= 4.8
    return CheckResult(6, "nontrivial eikonal construction", ok,
                       {"final_gap": gap, "residual_65": r65, "residual_129": r129,
                        "residual_ratio": ratio, "iterations": f.iterations_used})


def c07_periodicity(spec: MetricSpec = None) -> CheckResult:
    key = _remember(spec or sheared())
    W = (0.0, 2.0, 0.0, 2.0)
    a = check_periodicity(_field(key, W, 65, 1e-3, k=(0, 1)))
    b = check_periodicity(_field(key, W, 129, 1e-3, k=(0, 1)))
    ratio = a["defect"] / b["defect"] if b["defect"] > 0 else float("inf")
    ok = a["defect"] < 1e-3 and 1.6 <= ratio <= 2.4
    return CheckResult(7, "gradient periodicity", ok,
                       {"defect_65": a["defect"], "defect_129": b["defect"],
                        "halving_ratio": ratio})


def _seeds(n=16):
    return np.stack([np.linspace(0.05, 0.95, n), np.full(n, 0.08)], axis=1)


@lru_cache(maxsize=None)
def _chart(key):
    spec = _spec(key)
    f = _field(key, UNIT, 65, 1e-3, k=(0, 1))
    return integral_curves(f, spec, _seeds(), horizon=0.85, cone=_cone(key))


def c08_foliation(spec: MetricSpec = None) -> CheckResult:
    key = _remember(spec or sheared())
    chart = _chart(key)
    dev = max(l.geodesic_deviation for l in chart.leaves)
    derr = max(float(np.linalg.norm(l.direction.alpha - [0.0, 1.0])) for l in chart.leaves)
    ok = dev < 1e-4 and chart.min_separation > 0 and derr < 2e-3
    return CheckResult(8, "gradient foliation", ok,
                       {"max_geodesic_deviation": dev, "min_separation": chart.min_separation,
                        "max_direction_error": derr, "leaves": len(chart.leaves)})


def c09_calibration(spec: MetricSpec = None, n_curves: int = 100, seed: int = 0) -> CheckResult:
    out = {}
    ok = True
    for name, s, tol in (("flat", flat(), 1e-4), ("curved", spec or sheared(), 1e-3)):
        key = _remember(s)
        f = _field(key, UNIT, 65, tol, k=(0, 1))
        chart = _chart(key)
        ident = max(calibration_check(f, s, l.points, integral=True)["residual"]
                    for l in chart.leaves)
        curves = random_timelike_curves(f, s, n_curves, np.random.default_rng(seed))
        slack = min(calibration_check(f, s, c)["slack"] for c in curves)
        ok &= ident < 2 * tol and slack >= -1e-4 and len(curves) == n_curves
        out[f"{name}_identity_residual"] = ident
        out[f"{name}_min_slack"] = slack
    return CheckResult(9, "calibration", ok, out)


def c10_order_properties(spec: MetricSpec = None, n_triples: int = 1000,
                         n_shift: int = 200, seed: int = 0) -> CheckResult:
    spec = spec or sheared()
    rng = np.random.default_rng(seed)

    def hop(p):
        v = boost_velocity(spec, p, rng.uniform(-1.2, 1.2))
        L = rng.uniform(0.3, 2.0)
        return integrate_geodesic(spec, p, v, L, 1e-2).end

    def d(a, b):
        return lorentz_distance(spec, a, b, step=1e-3, n_sweep=128,
                                with_maximizer=False).value

    worst = 0.0
    for _ in range(n_triples):
        x = rng.uniform(-1, 1, 2)
        y = hop(x)
        z = hop(y)
        worst = max(worst, d(x, y) + d(y, z) - d(x, z))
    shift = 0.0
    for _ in range(n_shift):
        x = rng.uniform(-1, 1, 2)
        y = hop(x)
        k = rng.integers(-5, 6, 2)
        shift = max(shift, abs(d(x + k, y + k) - d(x, y)))
    ok = worst < 1e-6 and shift < 1e-8
    return CheckResult(10, "order and metric properties", ok,
                       {"max_reverse_triangle_violation": max(worst, 0.0),
                        "max_translation_defect": shift, "triples": n_triples,
                        "shifted_pairs": n_shift})


def c11_condition_star() -> CheckResult:
    spec = flat()
    cone = estimate_cone(spec, 100.0)
    ray = integrate_geodesic(spec, (0.0, 0.0), (0.0, 1.0), 60.0, 0.05)
    seq = build_pole_sequence(spec, (0.0, 0.0), (0.0, 1.0), 6, ray, cone=cone)
    lattice = bool(np.array_equal(seq.deck_shifts, [[0, -5 * (i + 1)] for i in range(6)]))
    spacing = max(abs(d - 5.0) for d in seq.pole_distances)
    shuffled = seq.poles[[0, 2, 1, 3, 4, 5]]
    try:
        check_condition_star(spec, shuffled, cone)
        raised = False
    except ConditionStarViolation:
        raised = True
    ok = lattice and spacing < 1e-9 and seq.Q <= seq.rounding_radius and raised
    return CheckResult(11, "condition (*) machinery", ok,
                       {"exact_lattice": lattice, "spacing_error": spacing, "Q": seq.Q,
                        "shuffled_raises": raised})


def c12_rational_routes(spec: MetricSpec = None) -> CheckResult:
    out, ok = {}, True
    for name, s, tol in (("flat", flat(), 1e-4), ("curved", spec or sheared(), 1e-3)):
        r = rational_direction_field(s, None, (0, 1), UNIT, (65, 65), tol=tol,
                                     cone=_cone(_remember(s)))
        ok &= r.route_gap < 5e-3
        out[f"{name}_route_gap"] = r.route_gap
        out[f"{name}_nearest_direction_gap"] = r.route_gap_last
    return CheckResult(12, "rational two-route agreement", ok, out)


CHECKS = {1: c01_flat_distance, 2: c02_flat_busemann, 3: c03_conformal_cone,
          4: c04_geodesic_integrity, 5: c05_jacobi_oracle, 6: c06_sheared_eikonal,
          7: c07_periodicity, 8: c08_foliation, 9: c09_calibration,
          10: c10_order_properties, 11: c11_condition_star, 12: c12_rational_routes}

SPEC_AWARE = {6, 7, 8, 9, 10, 12}


def run_suite(spec: MetricSpec = None, only=None, echo=print):
    """Run the checks; with `spec`, the curved-metric checks use it."""
    if spec is not None:
        sig = signature_check(spec)
        if not sig.passed:
            r = CheckResult(0, "signature_check gate", False,
                            {"min_abs_det": sig.min_abs_det, "min_neg_g22": sig.min_neg_g22})
            echo(r.line())
            return [r]
    results = []
    for n, fn in CHECKS.items():
        if only and n not in only:
            continue
        r = fn(spec) if (spec is not None and n in SPEC_AWARE) else fn()
        echo(r.line())
        results.append(r)
    return results
