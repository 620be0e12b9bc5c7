"""Lorentzian distance, distance-function grids and empirical constants."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq, minimize

from . import _kernels as K
from .causal import (ConeEstimate, cone_margin, estimate_B, estimate_cone,
                     integrate_null_curve, ray_distance)
from .geodesic import (DEFAULT_STEP, Geodesic, boost_velocity, connections,
                       geodesic_through)
from .metric import (MetricSpec, inverse2, is_constant, kernel_args, metric_arrays,
                     metric_matrix, null_directions)

CUT_TOL = 1e-9


class AmbiguousCut(UserWarning):
    """Two connecting geodesics of (nearly) equal length: y is a cut point."""


class EmptyWindow(RuntimeError):
    pass


@dataclass
class DistanceResult:
    value: float
    status: str  # timelike | null-boundary | not-causally-related
    maximizer: Optional[Geodesic] = None
    method_agreement: Optional[float] = None
    ambiguous: bool = False
    n_connections: int = 0
    variational_value: Optional[float] = None

    def to_dict(self, polyline_points: int = 101):
        out = {"value": self.value, "status": self.status,
               "ambiguous_cut": self.ambiguous, "n_connections": self.n_connections}
        if self.maximizer is not None:
            pts = self.maximizer.points
            idx = np.linspace(0, len(pts) - 1, min(polyline_points, len(pts))).astype(int)
            out["maximizer"] = pts[idx].tolist()
        if self.method_agreement is not None:
            out["method_agreement"] = self.method_agreement
            out["variational_value"] = self.variational_value
        return out


def _null_bracket(spec, x, y):
    """True iff y lies between the two null curves from x (closed J^+ test)."""
    length = 2.0 * float(np.linalg.norm(np.asarray(y) - np.asarray(x))) + 1.0
    xs = []
    for fam in ("minus", "plus"):
        pts = integrate_null_curve(spec, x, fam, length, 1e-2)
        k = np.searchsorted(pts[:, 1], y[1])
        if k == 0 or k >= len(pts):
            return False
        a, b = pts[k - 1], pts[k]
        s = (y[1] - a[1]) / (b[1] - a[1])
        xs.append(a[0] + s * (b[0] - a[0]))
    return xs[1] - 1e-9 <= y[0] <= xs[0] + 1e-9


def lorentz_distance(spec: MetricSpec, x, y, step: float = DEFAULT_STEP,
                     n_sweep: int = 512, theta_max: float = 8.0,
                     cross_check: bool = False, variational_nodes: int = 64,
                     with_maximizer: bool = True) -> DistanceResult:
    """d(x, y) as the longest connecting future timelike geodesic."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    conns = connections(spec, x, y, step=step, n_sweep=n_sweep, theta_max=theta_max)
    if not conns:
        if y[1] > x[1] and _null_bracket(spec, x, y):
            return DistanceResult(0.0, "null-boundary")
        return DistanceResult(0.0, "not-causally-related")
    conns.sort(key=lambda c: c.arrival, reverse=True)
    best = conns[0]
    ambiguous = (len(conns) > 1 and abs(conns[1].arrival - best.arrival) < CUT_TOL
                 and abs(conns[1].theta - best.theta) > 1e-6)
    if ambiguous:
        warnings.warn(f"cut point at {tuple(y)}: two maximizers", AmbiguousCut)
    geo = geodesic_through(spec, x, best, step) if with_maximizer else None
    res = DistanceResult(best.arrival, "timelike", geo, ambiguous=ambiguous,
                         n_connections=len(conns))
    if cross_check:
        val, _ = variational_distance(spec, x, y, variational_nodes)
        res.variational_value = val
        res.method_agreement = abs(val - best.arrival)
    return res


def reachable(spec: MetricSpec, x, y, **kw) -> bool:
    kw.setdefault("with_maximizer", False)
    return lorentz_distance(spec, x, y, **kw).status == "timelike"


# ------------------------------------------------------- variational oracle

def _broken_length(spec, nodes):
    d = np.diff(nodes, axis=0)
    m = 0.5 * (nodes[1:] + nodes[:-1])
    g, dg = metric_arrays(spec, m[:, 0], m[:, 1])
    gd = np.einsum("kij,kj->ki", g, d)
    q = -np.einsum("ki,ki->k", d, gd)
    return d, gd, q, dg


def variational_distance(spec: MetricSpec, x, y, n_nodes: int = 64,
                         tol: float = 1e-10):
    """Maximize the midpoint-rule g-length of a broken path from x to y.

    Two resolutions (n_nodes and n_nodes/2) are combined by Richardson
    extrapolation, cancelling the O(1/n^2) quadrature bias.
    """
    vals = []
    path = None
    for n in (n_nodes // 2, n_nodes):
        v, path = _ascend(spec, np.asarray(x, float), np.asarray(y, float), n, tol)
        vals.append(v)
    # node counts n/2 and n give segment counts n/2+1 and n+1
    r = ((n_nodes + 1) / (n_nodes // 2 + 1)) ** 2
    return (r * vals[1] - vals[0]) / (r - 1), path


def _ascend(spec, x, y, n, tol):
    # nodes sit on equally spaced time levels; only abscissae move, which keeps
    # every segment future pointing
    s = np.linspace(0, 1, n + 2)[:, None]
    base = x + s * (y - x)

    def negL(z):
        nodes = base.copy()
        nodes[1:-1, 0] = z
        d, gd, q, dg = _broken_length(spec, nodes)
        if np.any(q <= 0):
            return 1e3, np.zeros_like(z)
        ell = np.sqrt(q)
        dq = np.einsum("ki,kmij,kj->km", d, dg, d)
        common = -dq / (4.0 * ell[:, None])
        gr = np.zeros_like(nodes)
        gr[1:] += -gd / ell[:, None] + common
        gr[:-1] += gd / ell[:, None] + common
        return -ell.sum(), -gr[1:-1, 0]

    res = minimize(negL, base[1:-1, 0].copy(), jac=True, method="L-BFGS-B",
                   options={"ftol": 1e-16, "gtol": tol, "maxiter": 10000,
                            "maxcor": 50})
    nodes = base.copy()
    nodes[1:-1, 0] = res.x
    return -float(res.fun), nodes


# ---------------------------------------------------------- distance fields

@dataclass
class ScalarField:
    window: tuple
    resolution: tuple
    x: np.ndarray
    y: np.ndarray
    values: np.ndarray          # (nx, ny), indexing ij
    differential: np.ndarray    # (nx, ny, 2) coordinate differential du
    gradient: np.ndarray        # (nx, ny, 2) g-gradient
    valid: np.ndarray           # (nx, ny) bool
    one_sided: np.ndarray       # (nx, ny) bool, gradient used one-sided stencils
    meta: dict = field(default_factory=dict)

    @property
    def spacing(self):
        return (self.x[1] - self.x[0], self.y[1] - self.y[0])

    @property
    def interior(self):
        return self.valid & ~self.one_sided

    def points(self):
        X, Y = np.meshgrid(self.x, self.y, indexing="ij")
        return np.stack([X, Y], axis=-1)

    def with_values(self, values, spec, **meta) -> "ScalarField":
        f = ScalarField(self.window, self.resolution, self.x, self.y, values,
                        None, None, self.valid.copy(), None, {**self.meta, **meta})
        attach_gradient(f, spec)
        return f


def _grid(window, resolution):
    x0, x1, y0, y1 = map(float, window)
    nx, ny = map(int, resolution)
    return np.linspace(x0, x1, nx), np.linspace(y0, y1, ny)


def _fd_axis(v, ok, h, axis):
    """Central differences where possible, second-order one-sided otherwise."""
    v = np.moveaxis(v, axis, 0)
    ok = np.moveaxis(ok, axis, 0)
    n = v.shape[0]
    d = np.full(v.shape, np.nan)
    flag = np.zeros(v.shape, bool)
    good = np.zeros(v.shape, bool)
    for i in range(n):
        if i >= 1 and i + 1 < n:
            c = ok[i] & ok[i - 1] & ok[i + 1]
            d[i] = np.where(c, (v[i + 1] - v[i - 1]) / (2 * h), d[i])
            good[i] |= c
        if i + 2 < n:
            f = ok[i] & ok[i + 1] & ok[i + 2] & ~good[i]
            d[i] = np.where(f, (-3 * v[i] + 4 * v[i + 1] - v[i + 2]) / (2 * h), d[i])
            flag[i] |= f
            good[i] |= f
        if i >= 2:
            b = ok[i] & ok[i - 1] & ok[i - 2] & ~good[i]
            d[i] = np.where(b, (3 * v[i] - 4 * v[i - 1] + v[i - 2]) / (2 * h), d[i])
            flag[i] |= b
            good[i] |= b
    return np.moveaxis(d, 0, axis), np.moveaxis(flag, 0, axis), np.moveaxis(good, 0, axis)


def attach_gradient(f: ScalarField, spec: MetricSpec):
    hx, hy = f.spacing
    dx, fx, gx = _fd_axis(f.values, f.valid, hx, 0)
    dy, fy, gy = _fd_axis(f.values, f.valid, hy, 1)
    f.valid = f.valid & gx & gy
    f.one_sided = (fx | fy) & f.valid
    du = np.stack([dx, dy], axis=-1)
    P = f.points()
    gi, _ = inverse2(metric_matrix(spec, P[..., 0], P[..., 1]))
    f.differential = du
    f.gradient = np.einsum("...ij,...j->...i", gi, du)
    f.values = np.where(f.valid, f.values, np.nan)


def _fan(spec, p, thetas, levels, spatial_step):
    V = boost_velocity(spec, p, thetas)
    speed = np.linalg.norm(V, axis=1)
    if is_constant(spec):
        # zero acceleration: RK4 is exact at any step
        spatial_step = max(spatial_step, 0.5 * (levels[-1] - p[1]) / max(len(levels), 1))
    states = np.empty((len(thetas), 4))
    states[:, 0], states[:, 1] = p[0], p[1]
    states[:, 2:] = V
    hs = spatial_step / np.maximum(speed, 1.0)
    out = np.empty((len(thetas), len(levels), 5))
    max_steps = int(20 * (levels[-1] - p[1]) / spatial_step) + 20
    K.fan_levels(*kernel_args(spec), states, hs, np.ascontiguousarray(levels),
                 max_steps, out)
    return out


def _theta_range(spec, p, levels, xlo, xhi, step, theta_max):
    """Boost interval whose rays cover [xlo, xhi] on the first and last rows."""
    ends = np.array([levels[0], levels[-1]])
    step = max(step, 0.05)

    def crossings(thetas):
        out = _fan(spec, p, np.atleast_1d(thetas), ends, step)
        return np.where(out[:, :, 4] > 0, out[:, :, 0], np.nan)

    # crossing abscissae increase with the boost on every row
    thetas = np.linspace(-theta_max, theta_max, 33)
    X = crossings(thetas)
    below = np.nonzero((X < xlo).all(axis=1))[0]
    above = np.nonzero((X > xhi).all(axis=1))[0]
    lo = thetas[below[-1]] if below.size else -theta_max
    hi = thetas[above[0]] if above.size else theta_max
    if below.size and above.size:
        def f_lo(t):
            x = crossings(t)[0]
            return 1.0 if np.isnan(x).any() else float(np.max(x) - xlo)

        def f_hi(t):
            x = crossings(t)[0]
            return -1.0 if np.isnan(x).any() else float(np.min(x) - xhi)

        a, b = thetas[below[-1]], thetas[below[-1] + 1]
        if f_lo(b) > 0:
            r = brentq(f_lo, a, b, xtol=1e-12)
            lo = r
        a, b = thetas[above[0] - 1], thetas[above[0]]
        if f_hi(a) < 0:
            r = brentq(f_hi, a, b, xtol=1e-12)
            hi = r
        pad = 0.02 * (hi - lo)
        lo, hi = max(lo - pad, -theta_max), min(hi + pad, theta_max)
    return lo, hi


def distance_field(spec: MetricSpec, p, window, resolution,
                   epsilon_margin: float = 0.05, cone: ConeEstimate = None,
                   step: float = 1e-2, fan_factor: int = 4,
                   theta_max: float = 8.0) -> ScalarField:
    """d_p on a grid over `window` = (x0, x1, y0, y1), p in the past of it.

    Nodes are evaluated row by row from one fan of geodesics out of p: each
    ray is recorded where it crosses every grid row (y is a time function),
    and d_p on a row is the cubic Hermite interpolant of arrival parameter
    against crossing abscissa, with slope -g(gamma', e_x). Nodes whose chord
    from p has cone margin below `epsilon_margin` are masked.
    """
    p = np.asarray(p, float)
    xs, ys = _grid(window, resolution)
    nx, ny = len(xs), len(ys)
    if cone is None:
        cone = estimate_cone(spec, 100.0)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    chords = np.stack([X - p[0], Y - p[1]], axis=-1)
    valid = (cone_margin(cone, chords) >= epsilon_margin) & (Y > p[1])
    values = np.full((nx, ny), np.nan)
    rows = np.nonzero(valid.any(axis=0))[0]
    if rows.size == 0:
        raise EmptyWindow("no grid node passes the cone margin")
    levels = ys[rows]
    pad = 3 * (xs[1] - xs[0]) if nx > 1 else 0.1
    lo, hi = _theta_range(spec, p, levels, xs[0] - pad, xs[-1] + pad, step, theta_max)
    n_rays = max(fan_factor * nx, 16) + 1
    thetas = np.linspace(lo, hi, n_rays)
    out = _fan(spec, p, thetas, levels, step)
    monotone = True
    for r, j in enumerate(rows):
        ok = out[:, r, 4] > 0
        Xr, Vx, Vy, Tr = out[ok, r, 0], out[ok, r, 1], out[ok, r, 2], out[ok, r, 3]
        if Xr.size < 4:
            valid[:, j] = False
            continue
        if np.any(np.diff(Xr) <= 0):
            # rays cross before reaching this row: no diffeomorphic fan
            monotone = False
            keep = np.concatenate([[True], np.diff(Xr) > 0])
            Xr, Vx, Vy, Tr = Xr[keep], Vx[keep], Vy[keep], Tr[keep]
            if np.any(np.diff(Xr) <= 0):
                valid[:, j] = False
                continue
        g = metric_matrix(spec, Xr, np.full_like(Xr, ys[j]))
        slope = -(g[:, 0, 0] * Vx + g[:, 0, 1] * Vy)
        spl = CubicHermiteSpline(Xr, Tr, slope, extrapolate=False)
        vals = spl(xs)
        values[:, j] = vals
        valid[:, j] &= np.isfinite(vals)
    if not valid.any():
        raise EmptyWindow("fan does not reach any admissible node")
    f = ScalarField(tuple(map(float, window)), (nx, ny), xs, ys, values, None,
                    None, valid, None,
                    {"pole": p.tolist(), "epsilon_margin": epsilon_margin,
                     "fan_rays": n_rays, "step": step, "fan_monotone": monotone})
    attach_gradient(f, spec)
    if not f.valid.any():
        raise EmptyWindow("no node keeps a full difference stencil")
    return f


def verify_eikonal(field: ScalarField, spec: MetricSpec, interior_only: bool = True):
    """Residual |g(grad u, grad u) + 1| over valid nodes."""
    mask = field.interior if interior_only and field.interior.any() else field.valid
    if not mask.any():
        raise ValueError("field has no valid nodes")
    P = field.points()
    g = metric_matrix(spec, P[..., 0], P[..., 1])
    q = np.einsum("...i,...ij,...j->...", field.gradient, g, field.gradient)
    r = np.abs(q + 1.0)
    r = np.where(mask, r, np.nan)
    k = np.nanargmax(r)
    i, j = np.unravel_index(k, r.shape)
    return {"max_residual": float(np.nanmax(r)), "mean_residual": float(np.nanmean(r)),
            "worst_node": [float(field.x[i]), float(field.y[j])],
            "n_nodes": int(mask.sum()), "residual": r}


# -------------------------------------------------------------- constants

def null_margin(spec: MetricSpec, p, v):
    """dist(v, future null cone at p) / |v| for future vectors v."""
    vm, vp = null_directions(spec, np.asarray(p, float))
    v = np.asarray(v, float)
    d = np.minimum(ray_distance(v, vm), ray_distance(v, vp))
    return d / np.linalg.norm(v, axis=-1)


@dataclass
class EmpiricalConstants:
    B: float
    K: float
    K_over_delta: float
    L_eps: dict
    delta_eps: dict
    Q: Optional[float] = None
    H: Optional[float] = None
    protocol: dict = field(default_factory=dict)
    witnesses: dict = field(default_factory=dict)

    def to_dict(self):
        return {"B": self.B, "K": self.K, "K_over_delta": self.K_over_delta,
                "L_eps": self.L_eps, "delta_eps": self.delta_eps, "Q": self.Q,
                "H": self.H, "protocol": self.protocol, "witnesses": self.witnesses}


def _eps_interior_direction(cone, eps, u):
    """Direction at fraction u in [0, 1] across the eps-interior arc."""
    a0 = math.atan2(cone.m_minus[1], cone.m_minus[0])
    a1 = math.atan2(cone.m_plus[1], cone.m_plus[0])
    width = a1 - a0
    # boundary distance / |h| = sin(angle to nearer boundary ray)
    inset = math.asin(min(eps, 1.0))
    if 2 * inset >= width:
        raise ValueError("epsilon leaves an empty cone interior")
    a = a0 + inset + u * (width - 2 * inset)
    return np.array([math.cos(a), math.sin(a)])


def sup_speed_times_margin(spec, n_samples, rng, theta_max=6.0):
    """K(g): sup of |v| * margin(v) over sampled unit future timelike v."""
    P = rng.random((n_samples, 2))
    best, wit = 0.0, None
    for p, th in zip(P, rng.uniform(-theta_max, theta_max, n_samples)):
        v = boost_velocity(spec, p, th)
        val = float(np.linalg.norm(v) * null_margin(spec, p, v))
        if val > best:
            best, wit = val, {"p": p.tolist(), "theta": float(th)}
    # the frame axis itself maximizes margin in near-flat metrics; include it
    for p in P[:16]:
        v = boost_velocity(spec, p, 0.0)
        best = max(best, float(np.linalg.norm(v) * null_margin(spec, p, v)))
    return best, wit


def estimate_constants(spec: MetricSpec, epsilon: float, n_samples: int = 100,
                       seed: int = 0, chord_min: float = 5.0, chord_max: float = 10.0,
                       cone: ConeEstimate = None, n_sweep: int = 128,
                       fd_offset: float = 0.05) -> EmpiricalConstants:
    """Empirical delta(eps), L(eps), K(g), K/delta and B(g) with witnesses."""
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if n_samples < 100:
        raise ValueError("n_samples must be >= 100")
    rng = np.random.default_rng(seed)
    cone = cone or estimate_cone(spec, 100.0)
    delta, L = float("inf"), 0.0
    wd = wl = None
    for _ in range(n_samples):
        x = rng.random(2)
        h = _eps_interior_direction(cone, epsilon, rng.random())
        y = x + rng.uniform(chord_min, chord_max) * h
        res = lorentz_distance(spec, x, y, step=1e-2, n_sweep=n_sweep)
        if res.status != "timelike":
            continue
        geo = res.maximizer
        m = float(np.min(null_margin(spec, geo.points, geo.velocities)))
        if m < delta:
            delta, wd = m, {"x": x.tolist(), "y": y.tolist()}
        e = rng.normal(size=2)
        e *= fd_offset / np.linalg.norm(e)
        d2 = lorentz_distance(spec, x, y + e, step=1e-2, n_sweep=n_sweep,
                              with_maximizer=False)
        if d2.status == "timelike":
            slope = abs(d2.value - res.value) / fd_offset
            if slope > L:
                L, wl = slope, {"x": x.tolist(), "y": y.tolist(), "e": e.tolist()}
    Kg, wk = sup_speed_times_margin(spec, n_samples, rng)
    B, wb = estimate_B(spec, n_samples, seed)
    return EmpiricalConstants(
        B=B, K=Kg, K_over_delta=Kg / delta, L_eps={str(epsilon): L},
        delta_eps={str(epsilon): delta},
        protocol={"epsilon": epsilon, "n_samples": n_samples, "seed": seed,
                  "chord_length": [chord_min, chord_max], "fd_offset": fd_offset,
                  "sweep": n_sweep},
        witnesses={"delta": wd, "L": wl, "K": wk, "B": wb})
