"""Periodic timelike lines and rays with a prescribed asymptotic direction."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .causal import ConeEstimate, DirectionEstimate, asymptotic_direction, cross, estimate_cone
from .geodesic import (DEFAULT_STEP, Geodesic, boost_of, boost_velocity,
                       integrate_geodesic)
from .maxdist import lorentz_distance


class NotClosing(RuntimeError):
    pass


class DirectionDrift(RuntimeError):
    pass


@dataclass
class PeriodicLine:
    base: np.ndarray
    deck: tuple
    period_length: float
    velocity: np.ndarray       # unit departure velocity at base
    geodesic: Geodesic         # parameter range [-margin, period + margin] shifted to start at 0
    t_base: float              # parameter of base inside geodesic.t
    closure_defect: float
    defects: list

    def point_at(self, s):
        """Linear interpolation at affine parameter s measured from base."""
        t = self.geodesic.t - self.t_base
        return np.stack([np.interp(s, t, self.geodesic.points[:, 0]),
                         np.interp(s, t, self.geodesic.points[:, 1])], axis=-1)


def strictly_inside(cone: ConeEstimate, direction, margin: float = 1e-12) -> bool:
    d = np.asarray(direction, float)
    d = d / np.linalg.norm(d)
    return bool(cross(cone.m_minus, d) > margin and cross(d, cone.m_plus) > margin)


def _angle(u, v):
    c = float(np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v)))
    return math.acos(max(-1.0, min(1.0, c)))


def find_periodic_line(spec, p, k, tol: float = 1e-6, cone: ConeEstimate = None,
                       step: float = DEFAULT_STEP, margin_periods: float = 1.0,
                       n_sweep: int = 512) -> PeriodicLine:
    """Periodic timelike line through p with deck vector k (primitive)."""
    k = tuple(int(c) for c in k)
    if math.gcd(*k) != 1:
        raise ValueError(f"deck vector {k} is not primitive")
    cone = cone or estimate_cone(spec, 100.0)
    if not strictly_inside(cone, k):
        raise ValueError(f"direction of {k} is not inside the open cone arc")
    p = np.asarray(p, float)
    kv = np.asarray(k, float)
    defects, best = [], None
    for N in (1, 2, 4):
        res = lorentz_distance(spec, p, p + N * kv, step=step, n_sweep=n_sweep)
        if res.status != "timelike":
            raise NotClosing(f"p + {N}k is not reachable from p")
        geo = res.maximizer
        defect = _angle(geo.velocities[0], geo.velocities[-1])
        defects.append(defect)
        best = (N, res.value, geo.velocities[0])
        if defect < tol:
            break
        if N > 1 and defect >= defects[-2]:
            raise NotClosing(f"closure defect does not decrease: {defects}")
    else:
        raise NotClosing(f"closure defect {defects[-1]:.3g} above tol {tol:.3g}")
    N, length, v0 = best
    period = length / N
    geo, t_base = _period_geodesic(spec, p, v0, period, margin_periods, step)
    return PeriodicLine(p, k, period, v0, geo, t_base, defects[-1], defects)


def _period_geodesic(spec, p, v0, period, margin_periods, step):
    a = margin_periods * period
    h = step / max(1.0, float(np.linalg.norm(v0)))
    fwd = integrate_geodesic(spec, p, v0, period + a, h)
    back = integrate_geodesic(spec, p, -v0, a, h)
    t = np.concatenate([-back.t[::-1][:-1], fwd.t]) + a
    pts = np.concatenate([back.points[::-1][:-1], fwd.points])
    vel = np.concatenate([-back.velocities[::-1][:-1], fwd.velocities])
    geo = Geodesic(t, pts, vel, back.g_length + fwd.g_length,
                   back.euclid_length + fwd.euclid_length,
                   max(back.norm_drift, fwd.norm_drift))
    return geo, a


def rational_vector(alpha, max_norm: float = 20.0, tol: float = 1e-12):
    """Primitive integer k with k/|k| == alpha (to tol), |k| <= max_norm, or None."""
    a = np.asarray(alpha, float)
    a = a / np.linalg.norm(a)
    r = int(max_norm)
    for q in range(0, r + 1):
        for m in range(-r, r + 1):
            if (m == 0 and q == 0) or math.gcd(m, q) != 1 or math.hypot(m, q) > max_norm:
                continue
            kv = np.array([m, q], float)
            if abs(cross(a, kv)) <= tol * np.linalg.norm(kv) and a @ kv > 0:
                return (m, q)
    return None


def convergents(x: float, max_norm: float = 200.0):
    """Continued-fraction convergents h/q of x with |(h, q)| <= max_norm."""
    out = []
    h0, h1, q0, q1 = 1, int(math.floor(x)), 0, 1
    frac = x - math.floor(x)
    out.append((h1, q1))
    for _ in range(64):
        if frac < 1e-15:
            break
        x = 1.0 / frac
        a = int(math.floor(x))
        frac = x - a
        h0, h1 = h1, a * h1 + h0
        q0, q1 = q1, a * q1 + q0
        if math.hypot(h1, q1) > max_norm:
            break
        out.append((h1, q1))
    return out


@dataclass
class Ray:
    geodesic: Geodesic
    direction: DirectionEstimate
    velocity: np.ndarray
    convergents: list
    gap: float


def ray_toward(spec, p, alpha, horizon: float, cone: ConeEstimate = None,
               step: float = 1e-2, max_norm: float = 200.0,
               rational_norm: float = 20.0, tol: float = 1e-6) -> Ray:
    """Timelike ray from p with asymptotic direction alpha."""
    cone = cone or estimate_cone(spec, 100.0)
    alpha = np.asarray(alpha, float)
    alpha = alpha / np.linalg.norm(alpha)
    if not strictly_inside(cone, alpha):
        raise ValueError("alpha is not inside the open cone arc")
    p = np.asarray(p, float)
    k = rational_vector(alpha, rational_norm)
    if k is not None:
        line = find_periodic_line(spec, p, k, tol, cone)
        v, used, gap = line.velocity, [k], 0.0
    else:
        used = [c for c in convergents(alpha[0] / alpha[1], max_norm)
                if math.gcd(*c) == 1 and strictly_inside(cone, c)][-3:]
        if len(used) < 3:
            raise ValueError("fewer than three usable convergents")
        phis, thetas = [], []
        for kk in used:
            line = find_periodic_line(spec, p, kk, tol, cone)
            phis.append(math.atan2(kk[0], kk[1]))
            thetas.append(boost_of(spec, p, line.velocity))
        # quadratic extrapolation of boost against lattice angle
        c = np.polyfit(phis, thetas, 2)
        v = boost_velocity(spec, p, float(np.polyval(c, math.atan2(alpha[0], alpha[1]))))
        kl = np.asarray(used[-1], float)
        gap = float(np.linalg.norm(kl / np.linalg.norm(kl) - alpha))
    h = step / max(1.0, float(np.linalg.norm(v)))
    geo = integrate_geodesic(spec, p, v, horizon, h)
    est = asymptotic_direction(geo.points, cone)
    if k is None and np.linalg.norm(est.alpha - alpha) > 10 * gap + est.D / max(
            est.confidence_length, 1e-300):
        raise DirectionDrift(f"measured direction {est.alpha} drifts from {alpha}")
    return Ray(geo, est, v, used, gap)
