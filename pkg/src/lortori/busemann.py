"""Busemann-type eikonal solutions, their gradient foliation and checks.

The construction: pick poles p_i = p + k_i receding to the past along a ray
of direction alpha, form u_i = t_i - d(p_i, .) on a window, and stop once
successive iterates (values and gradients) agree to a tolerance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .causal import (ConeEstimate, DirectionEstimate, asymptotic_direction,
                     cone_margin, cross, estimate_cone, ray_distance)
from .geodesic import Geodesic, integrate_geodesic
from .lines import PeriodicLine, find_periodic_line, ray_toward, strictly_inside
from .maxdist import (EmptyWindow, ScalarField, distance_field, lorentz_distance,
                      reachable, verify_eikonal)
from .metric import MetricSpec, metric_matrix


class OutOfChart(RuntimeError):
    pass


class ConditionStarViolation(RuntimeError):
    pass


class NoConvergence(RuntimeError):
    def __init__(self, msg, history=None):
        super().__init__(msg)
        self.history = history or []


class WindowTooSmall(ValueError):
    pass


class LeftWindow(RuntimeError):
    pass


class MaskMargin(ValueError):
    pass


# ------------------------------------------------------------ angular domain

@dataclass
class AngularDomain:
    pole: np.ndarray
    line_minus: PeriodicLine
    line_plus: PeriodicLine
    side: str  # future | past
    spec: MetricSpec = None


def angular_domain(spec: MetricSpec, pole, k_minus, k_plus, side: str = "future",
                   periods: float = 3.0, cone: ConeEstimate = None) -> AngularDomain:
    """Domain between the periodic lines through `pole` with decks k_minus, k_plus."""
    if side not in ("future", "past"):
        raise ValueError("side must be 'future' or 'past'")
    cone = cone or estimate_cone(spec, 100.0)
    if not cross(np.asarray(k_minus, float), np.asarray(k_plus, float)) > 0:
        raise ValueError("k_minus must precede k_plus in the cone orientation")
    lines = [find_periodic_line(spec, pole, k, cone=cone, margin_periods=periods)
             for k in (k_minus, k_plus)]
    return AngularDomain(np.asarray(pole, float), lines[0], lines[1], side, spec)


def _abscissa_at(line: PeriodicLine, y: float) -> float:
    pts = line.geodesic.points
    if not pts[0, 1] <= y <= pts[-1, 1]:
        raise OutOfChart(f"level y={y} is beyond the integrated boundary line")
    return float(np.interp(y, pts[:, 1], pts[:, 0]))


def domain_membership(domain: AngularDomain, x, spec: MetricSpec = None) -> bool:
    spec = spec or domain.spec
    x = np.asarray(x, float)
    dy = x[1] - domain.pole[1]
    if (domain.side == "future" and dy <= 0) or (domain.side == "past" and dy >= 0):
        # still validate the chart extent for a clean error
        _abscissa_at(domain.line_minus, x[1])
        return False
    a = _abscissa_at(domain.line_minus, x[1])
    b = _abscissa_at(domain.line_plus, x[1])
    if not min(a, b) < x[0] < max(a, b):
        return False
    if domain.side == "future":
        return reachable(spec, domain.pole, x)
    return reachable(spec, x, domain.pole)


# ------------------------------------------------------------- pole sequence

@dataclass
class PoleSequence:
    base: np.ndarray
    poles: np.ndarray          # (n, 2)
    deck_shifts: np.ndarray    # (n, 2) integers
    direction: np.ndarray
    times: np.ndarray
    Q: float
    pole_distances: list       # d(p_{i+1}, p_i)
    distance_kind: list        # "exact" or "chord-lower-bound"
    rounding_radius: float

    def __len__(self):
        return len(self.times)

    def truncated(self, n: int) -> "PoleSequence":
        return PoleSequence(self.base, self.poles[:n], self.deck_shifts[:n],
                            self.direction, self.times[:n], self.Q,
                            self.pole_distances[:max(n - 1, 0)],
                            self.distance_kind[:max(n - 1, 0)], self.rounding_radius)


def pole_times(n: int, spacing: float = 5.0, growth: float = 1.0,
               period: float = None) -> np.ndarray:
    """t_i = spacing * i (growth 1) or spacing * growth**(i-1); snapped up to
    whole periods when the ray is a periodic line."""
    if growth < 1:
        raise ValueError("growth must be >= 1")
    i = np.arange(1, n + 1, dtype=float)
    t = spacing * i if growth == 1 else spacing * growth ** (i - 1)
    if period:
        out = []
        for ti in t:
            m = math.ceil(ti / period - 1e-12)
            while out and (m * period - out[-1] < spacing - 1e-12):
                m += 1
            out.append(m * period)
        t = np.array(out)
    return t


def chord_length_bound(spec: MetricSpec, a, b, n: int = None) -> float:
    """g-length of the straight segment a -> b: a lower bound for d(a, b)."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    c = b - a
    n = n or max(64, int(64 * np.linalg.norm(c)))
    s = (np.arange(n) + 0.5) / n
    P = a + s[:, None] * c
    g = metric_matrix(spec, P[:, 0], P[:, 1])
    q = -np.einsum("i,kij,j->k", c, g, c)
    if np.any(q <= 0):
        return 0.0
    return float(np.mean(np.sqrt(q)))


def check_condition_star(spec: MetricSpec, poles, cone: ConeEstimate,
                         epsilon: float = 0.05, exact_below: float = 50.0):
    """Validate p_{i+1} in the past domain of p_i with d(p_{i+1}, p_i) >= 1.

    Domain membership uses the cone surrogate: the chord p_i - p_{i+1} must lie
    in the epsilon-interior of the stable cone. Distances are computed exactly
    for short chords and bounded below by the straight-chord g-length otherwise.
    """
    dists, kinds = [], []
    for i in range(len(poles) - 1):
        a, b = np.asarray(poles[i + 1], float), np.asarray(poles[i], float)
        chord = b - a
        if cone_margin(cone, chord) < epsilon:
            raise ConditionStarViolation(
                f"pair ({i}, {i + 1}): p_{i + 1} not in the past cone domain of p_{i}")
        if np.linalg.norm(chord) <= exact_below:
            d = lorentz_distance(spec, a, b, step=1e-2, n_sweep=128,
                                 with_maximizer=False).value
            kinds.append("exact")
        else:
            d = chord_length_bound(spec, a, b)
            kinds.append("chord-lower-bound")
        if d < 1.0:
            raise ConditionStarViolation(
                f"pair ({i}, {i + 1}): d(p_{i + 1}, p_{i}) = {d:.6g} < 1")
        dists.append(float(d))
    return dists, kinds


def build_pole_sequence(spec: MetricSpec, p, alpha, n: int, ray: Geodesic,
                        spacing: float = 5.0, growth: float = 1.0,
                        period: float = None, cone: ConeEstimate = None,
                        epsilon: float = 0.05) -> PoleSequence:
    if n < 3:
        raise ValueError("a pole sequence needs n >= 3")
    cone = cone or estimate_cone(spec, 100.0)
    p = np.asarray(p, float)
    times = pole_times(n, spacing, growth, period)
    if times[-1] > ray.t[-1] + 1e-9:
        raise ValueError(f"ray horizon {ray.t[-1]:.6g} is shorter than t_n={times[-1]:.6g}")
    disp = np.stack([np.interp(times, ray.t, ray.points[:, j]) for j in range(2)], 1)
    disp -= ray.points[0]
    ks = -np.rint(disp).astype(int)
    poles = p + ks
    dists, kinds = check_condition_star(spec, poles, cone, epsilon)
    alpha = np.asarray(alpha, float)
    alpha = alpha / np.linalg.norm(alpha)
    i, j = np.triu_indices(n, 1)
    Q = float(np.max(ray_distance(poles[i] - poles[j], alpha)))
    return PoleSequence(p, poles, ks, alpha, times, Q, dists, kinds,
                        math.sqrt(2) / 2)


# ------------------------------------------------------------ busemann field

@dataclass
class BusemannField(ScalarField):
    direction: np.ndarray = None
    convergence_history: list = field(default_factory=list)
    iterations_used: int = 0
    anchored: bool = False
    converged: bool = True
    residual: np.ndarray = None


def _negate_distance(f: ScalarField, t: float) -> dict:
    return {"values": t - f.values, "differential": -f.differential,
            "gradient": -f.gradient, "valid": f.valid, "one_sided": f.one_sided}


def _anchor_node(f: ScalarField):
    mask = f.valid & ~f.one_sided
    if not mask.any():
        mask = f.valid
    P = f.points()
    c = np.array([0.5 * (f.x[0] + f.x[-1]), 0.5 * (f.y[0] + f.y[-1])])
    d = np.where(mask, np.linalg.norm(P - c, axis=-1), np.inf)
    return np.unravel_index(np.argmin(d), d.shape)


def busemann_field(spec: MetricSpec, seq: PoleSequence, window, resolution,
                   tol: float = 1e-4, epsilon_margin: float = 0.05,
                   cone: ConeEstimate = None, step: float = 0.05,
                   fan_factor: int = 2, strict: bool = True) -> BusemannField:
    """Iterate u_i = t_i - d(p_i, .) until the sup gaps of u and grad u drop below tol."""
    cone = cone or estimate_cone(spec, 100.0)
    history, prev, anchor, anchored = [], None, None, False
    offset_prev = 0.0
    cur = None
    for i, (pole, t) in enumerate(zip(seq.poles, seq.times)):
        f = distance_field(spec, pole, window, resolution, epsilon_margin, cone,
                           step, fan_factor)
        cur = _negate_distance(f, float(t))
        if anchor is None:
            anchor = _anchor_node(f)
        if prev is None:
            prev, base = cur, f
            continue
        mask = prev["valid"] & cur["valid"] & ~prev["one_sided"] & ~cur["one_sided"]
        if not mask.any():
            raise EmptyWindow("successive iterates share no interior node")
        drift = abs(cur["values"][anchor] - prev["values"][anchor])
        if not anchored and drift > 10 * tol:
            anchored = True
        off_cur = cur["values"][anchor] if anchored else 0.0
        off_prev = prev["values"][anchor] if anchored else 0.0
        gap_u = float(np.max(np.abs((cur["values"] - off_cur) - (prev["values"] - off_prev))[mask]))
        gap_g = float(np.max(np.linalg.norm(cur["gradient"] - prev["gradient"], axis=-1)[mask]))
        history.append({"i": i, "t": float(t), "gap_u": gap_u, "gap_grad": gap_g,
                        "anchor_drift": float(drift)})
        base = f
        prev = cur
        if gap_u < tol and gap_g < tol:
            break
    converged = bool(history) and history[-1]["gap_u"] < tol and history[-1]["gap_grad"] < tol
    if not converged and strict:
        raise NoConvergence(f"sequence exhausted with gaps {history[-1] if history else None}",
                            history)
    values = cur["values"] - (cur["values"][anchor] if anchored else 0.0)
    out = BusemannField(base.window, base.resolution, base.x, base.y, values,
                        cur["differential"], cur["gradient"], cur["valid"],
                        cur["one_sided"],
                        {**base.meta, "tol": tol, "anchor_node": [int(a) for a in anchor]},
                        direction=seq.direction, convergence_history=history,
                        iterations_used=len(history) + 1, anchored=anchored,
                        converged=converged)
    out.residual = eikonal_residual(out, spec)
    return out


def eikonal_residual(f: ScalarField, spec: MetricSpec) -> np.ndarray:
    P = f.points()
    g = metric_matrix(spec, P[..., 0], P[..., 1])
    q = np.einsum("...i,...ij,...j->...", f.gradient, g, f.gradient)
    return np.where(f.valid, np.abs(q + 1.0), np.nan)


def default_pole(window):
    x0, x1, y0, y1 = map(float, window)
    return np.array([0.5 * (x0 + x1), 0.5 * (y0 + y1)])


def busemann_for_direction(spec: MetricSpec, window, resolution, alpha=None, k=None,
                           p=None, tol: float = 1e-4, n_poles: int = 8,
                           spacing: float = 5.0, growth: float = 4.0,
                           cone: ConeEstimate = None, strict: bool = True,
                           **kw) -> BusemannField:
    """Convenience driver: ray (or periodic line), pole sequence, field."""
    cone = cone or estimate_cone(spec, 100.0)
    p = default_pole(window) if p is None else np.asarray(p, float)
    if (alpha is None) == (k is None):
        raise ValueError("give exactly one of alpha or k")
    if k is not None:
        line = find_periodic_line(spec, p, k, cone=cone)
        times = pole_times(n_poles, spacing, growth, line.period_length)
        # whole periods: gamma(N a) = p + N k exactly
        N = np.rint(times / line.period_length).astype(int)
        kv = np.asarray(k, int)
        ks = -N[:, None] * kv
        poles = p + ks
        dists, kinds = check_condition_star(spec, poles, cone)
        direction = kv / np.linalg.norm(kv)
        seq = PoleSequence(p, poles, ks, direction, times, 0.0, dists, kinds,
                           math.sqrt(2) / 2)
    else:
        times = pole_times(n_poles, spacing, growth)
        ray = ray_toward(spec, p, alpha, float(times[-1]), cone=cone,
                         step=kw.pop("ray_step", 0.05))
        seq = build_pole_sequence(spec, p, alpha, n_poles, ray.geodesic, spacing,
                                  growth, cone=cone)
    return busemann_field(spec, seq, window, resolution, tol, cone=cone,
                          strict=strict, **kw)


# --------------------------------------------------------------- periodicity

def check_periodicity(field: ScalarField, spec: MetricSpec = None) -> dict:
    """sup |grad u(x + e) - grad u(x)| over node pairs related by a unit shift."""
    hx, hy = field.spacing
    mask = field.valid & ~field.one_sided
    defects = {}
    for name, h, axis in (("e1", hx, 0), ("e2", hy, 1)):
        s = 1.0 / h
        m = int(round(s))
        if abs(s - m) > 1e-9 * s or m >= field.values.shape[axis]:
            continue
        G = field.gradient
        if axis == 0:
            a, b, ma, mb = G[m:], G[:-m], mask[m:], mask[:-m]
        else:
            a, b, ma, mb = G[:, m:], G[:, :-m], mask[:, m:], mask[:, :-m]
        both = ma & mb
        if both.any():
            defects[name] = float(np.max(np.linalg.norm(a - b, axis=-1)[both]))
    if not defects:
        raise WindowTooSmall("no unit lattice shift maps grid nodes onto grid nodes")
    converged = getattr(field, "converged", True)
    tol = field.meta.get("tol", 0.0)
    d = max(defects.values())
    return {"defect": d, "per_shift": defects, "resolution": list(field.resolution),
            "converged": converged, "flagged": (not converged) or d > max(tol, 1e-3)}


# ------------------------------------------------------------- integral curves

@dataclass
class Leaf:
    t: np.ndarray
    points: np.ndarray
    seed: np.ndarray
    left_window: bool
    geodesic_deviation: float
    direction: Optional[DirectionEstimate] = None


@dataclass
class FoliationChart:
    leaves: list
    seeds: np.ndarray
    window: tuple
    min_separation: float = float("nan")

    def to_rows(self):
        for i, leaf in enumerate(self.leaves):
            for t, (x, y) in zip(leaf.t, leaf.points):
                yield i, float(t), float(x), float(y)


def _interpolators(field: ScalarField):
    G = np.where(field.valid[..., None], field.gradient, np.nan)
    gx = RegularGridInterpolator((field.x, field.y), G[..., 0], bounds_error=False)
    gy = RegularGridInterpolator((field.x, field.y), G[..., 1], bounds_error=False)
    return gx, gy


def integral_curves(field: ScalarField, spec: MetricSpec, seeds, horizon: float,
                    step: float = 1e-3, direction_horizon: float = 200.0,
                    cone: ConeEstimate = None, strict: bool = False) -> FoliationChart:
    """Integral curves of the gridded gradient (bilinear interpolation, RK4)."""
    seeds = np.atleast_2d(np.asarray(seeds, float))
    gx, gy = _interpolators(field)

    def F(P):
        return np.stack([gx(P), gy(P)], axis=-1)

    V0 = F(seeds)
    if np.any(~np.isfinite(V0)):
        raise ValueError("every seed must lie inside the valid mask")
    n = int(math.ceil(horizon / step))
    P = seeds.copy()
    traj = np.full((n + 1, len(seeds), 2), np.nan)
    traj[0] = P
    alive = np.ones(len(seeds), bool)
    for s in range(n):
        k1 = F(P)
        k2 = F(P + 0.5 * step * k1)
        k3 = F(P + 0.5 * step * k2)
        k4 = F(P + step * k3)
        Pn = P + step / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        bad = ~np.isfinite(Pn).all(axis=1)
        alive &= ~bad
        if not alive.any():
            break
        P = np.where(alive[:, None], Pn, P)
        traj[s + 1, alive] = Pn[alive]
    leaves = []
    for j, seed in enumerate(seeds):
        ok = np.isfinite(traj[:, j, 0])
        m = int(np.nonzero(ok)[0][-1]) + 1
        t = np.arange(m) * step
        pts = traj[:m, j]
        left = m < n + 1
        if left and strict:
            raise LeftWindow(f"leaf {j} exits the valid region at t={t[-1]:.4g}")
        dev = 0.0
        if m > 1:
            geo = integrate_geodesic(spec, seed, V0[j], t[-1], step)
            dev = float(np.max(np.linalg.norm(geo.points - pts, axis=1)))
        direction = None
        if direction_horizon:
            far = integrate_geodesic(spec, seed, V0[j], direction_horizon,
                                     max(step, 1e-2))
            direction = asymptotic_direction(far.points, cone)
        leaves.append(Leaf(t, pts, seed, left, dev, direction))
    chart = FoliationChart(leaves, seeds, field.window)
    chart.min_separation = min_leaf_separation(chart)
    return chart


def min_leaf_separation(chart: FoliationChart) -> float:
    """Smallest distance between distinct leaves at matched parameter values."""
    best = np.inf
    L = chart.leaves
    for a in range(len(L)):
        for b in range(a + 1, len(L)):
            m = min(len(L[a].t), len(L[b].t))
            if m:
                d = np.linalg.norm(L[a].points[:m] - L[b].points[:m], axis=1)
                best = min(best, float(d.min()))
    return float(best)


# ----------------------------------------------------------------- calibration

def field_value_interpolator(field: ScalarField):
    V = np.where(field.valid, field.values, np.nan)
    return RegularGridInterpolator((field.x, field.y), V, method="cubic",
                                   bounds_error=False)


def curve_length(spec: MetricSpec, points) -> float:
    """g-length of a polyline, midpoint rule per segment."""
    P = np.asarray(points, float)
    d = np.diff(P, axis=0)
    m = 0.5 * (P[1:] + P[:-1])
    g = metric_matrix(spec, m[:, 0], m[:, 1])
    q = -np.einsum("ki,kij,kj->k", d, g, d)
    return float(np.sum(np.sqrt(np.maximum(q, 0.0))))


def calibration_check(field: ScalarField, spec: MetricSpec, curve,
                      integral: bool = False, interp=None) -> dict:
    """Drop of u minus g-length along a future timelike curve.

    For integral curves the identity residual |drop - length| is reported,
    for other curves the slack drop - length (expected >= 0).
    """
    P = np.asarray(curve, float)
    interp = interp or field_value_interpolator(field)
    ua, ub = interp(P[[0, -1]])
    if not np.all(np.isfinite([ua, ub])):
        raise ValueError("curve endpoints must lie inside the valid mask")
    drop = float(ua - ub)
    L = curve_length(spec, P)
    if integral:
        return {"drop": drop, "length": L, "residual": abs(drop - L)}
    return {"drop": drop, "length": L, "slack": drop - L}


def random_timelike_curves(field: ScalarField, spec: MetricSpec, n: int,
                           rng: np.random.Generator, n_points: int = 200,
                           wiggle: float = 0.05):
    """Perturbed straight future timelike curves inside the window's valid nodes."""
    x0, x1, y0, y1 = field.window
    out = []
    inside = field_value_interpolator(field)
    tries = 0
    while len(out) < n and tries < 100 * n:
        tries += 1
        a = np.array([rng.uniform(x0, x1), rng.uniform(y0, y0 + 0.5 * (y1 - y0))])
        dy = rng.uniform(0.2, 1.0) * (y1 - a[1])
        dx = rng.uniform(-0.5, 0.5) * dy
        s = np.linspace(0, 1, n_points)
        P = a + s[:, None] * np.array([dx, dy])
        P[:, 0] += wiggle * dy * np.sin(np.pi * s * rng.integers(1, 4)) * rng.uniform(-1, 1)
        d = np.diff(P, axis=0)
        m = 0.5 * (P[1:] + P[:-1])
        g = metric_matrix(spec, m[:, 0], m[:, 1])
        q = np.einsum("ki,kij,kj->k", d, g, d)
        if np.all(q < 0) and np.all(np.isfinite(inside(P[[0, -1]]))):
            out.append(P)
    return out


# ----------------------------------------------------------------- hessian

def hessian_probe(field: ScalarField, point) -> np.ndarray:
    """Coordinate Hessian from central second differences at the nearest node."""
    i = int(np.argmin(np.abs(field.x - point[0])))
    j = int(np.argmin(np.abs(field.y - point[1])))
    nx, ny = field.values.shape
    if i < 2 or j < 2 or i > nx - 3 or j > ny - 3 or not field.valid[i - 2:i + 3, j - 2:j + 3].all():
        raise MaskMargin("the probe needs a two-node valid margin")
    u = field.values
    hx, hy = field.spacing
    uxx = (u[i + 1, j] - 2 * u[i, j] + u[i - 1, j]) / hx ** 2
    uyy = (u[i, j + 1] - 2 * u[i, j] + u[i, j - 1]) / hy ** 2
    uxy = (u[i + 1, j + 1] - u[i + 1, j - 1] - u[i - 1, j + 1] + u[i - 1, j - 1]) / (4 * hx * hy)
    return np.array([[uxx, uxy], [uxy, uyy]])


# ---------------------------------------------------------- rational direction

def _rotate(v, a):
    c, s = math.cos(a), math.sin(a)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])


@dataclass
class RationalComparison:
    direct: BusemannField
    limit_fields: list
    limit_values: np.ndarray
    offsets: list
    successive_gaps: list
    route_gap: float
    route_gap_last: float


def rational_direction_field(spec: MetricSpec, p, k, window, resolution,
                             tol: float = 1e-4, offsets=(1 / 16.3, 1 / 32.3, 1 / 64.3),
                             cone: ConeEstimate = None, **kw) -> RationalComparison:
    """Route (a): poles along the periodic line. Route (b): fields for nearby
    generic directions, anchored at a common node and extrapolated to the limit."""
    cone = cone or estimate_cone(spec, 100.0)
    kv = np.asarray(k, float)
    if not strictly_inside(cone, kv):
        raise ValueError(f"direction of {tuple(k)} is not inside the open cone arc")
    direct = busemann_for_direction(spec, window, resolution, k=k, p=p, tol=tol,
                                    cone=cone, **kw)
    anchor = tuple(direct.meta["anchor_node"])
    khat = kv / np.linalg.norm(kv)
    fields, vals = [], []
    for a in offsets:
        alpha = _rotate(khat, a)
        f = busemann_for_direction(spec, window, resolution, alpha=alpha, p=p,
                                   tol=tol, cone=cone, **kw)
        fields.append(f)
        vals.append(f.values - f.values[anchor])
    mask = direct.valid & ~direct.one_sided
    for f in fields:
        mask &= f.valid & ~f.one_sided
    gaps = [float(np.max(np.abs(vals[i + 1] - vals[i])[mask])) for i in range(len(vals) - 1)]
    # polynomial extrapolation of the anchored fields to zero offset
    off = np.asarray(offsets, float)
    w = np.array([np.prod([-off[m] / (off[j] - off[m]) for m in range(len(off)) if m != j])
                  for j in range(len(off))])
    limit = np.tensordot(w, np.stack(vals), axes=1)
    ua = direct.values - direct.values[anchor]
    gap = float(np.max(np.abs(limit - ua)[mask]))
    gap_last = float(np.max(np.abs(vals[-1] - ua)[mask]))
    return RationalComparison(direct, fields, limit, list(offsets), gaps, gap, gap_last)
