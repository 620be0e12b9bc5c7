"""Geodesics, Jacobi fields, conjugate points and two-point shooting."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import brentq

from . import _kernels as K
from .metric import MetricSpec, kernel_args, lorentz_norm, metric_matrix

DEFAULT_STEP = 1e-3
DRIFT_LIMIT = 1e-6

# Sign in J'' + SIGMA*K*J = 0 for the normal Jacobi component along a unit
# timelike geodesic. Fixed by the anti-de Sitter run (K = -1, refocusing at
# proper time pi): SIGMA = -1. See tests/test_geodesic.py.
SIGMA = -1.0


class IntegrationError(RuntimeError):
    pass


class NoBracket(RuntimeError):
    pass


class Divergence(RuntimeError):
    pass


@dataclass
class Geodesic:
    t: np.ndarray
    points: np.ndarray
    velocities: np.ndarray
    g_length: float
    euclid_length: float
    norm_drift: float = 0.0

    @property
    def domain(self):
        return float(self.t[0]), float(self.t[-1])

    @property
    def start(self):
        return self.points[0]

    @property
    def end(self):
        return self.points[-1]

    def shifted(self, k) -> "Geodesic":
        return Geodesic(self.t.copy(), self.points + np.asarray(k, float),
                        self.velocities.copy(), self.g_length, self.euclid_length,
                        self.norm_drift)


@dataclass
class ConjugateReport:
    first_conjugate: Optional[float]
    horizon: float
    jacobi_min_abs: float


def _quad(t, y):
    if len(t) < 2:
        return 0.0
    if len(t) < 3:
        return float(np.trapezoid(y, t))
    return float(simpson(y, x=t))


def integrate_geodesic(spec: MetricSpec, p, v, horizon: float,
                       step: float = DEFAULT_STEP, check: bool = True) -> Geodesic:
    """Fixed-step RK4 integration of the geodesic equation on [0, horizon]."""
    v = np.asarray(v, dtype=float)
    if not np.any(v):
        raise ValueError("initial velocity must be nonzero")
    if step <= 0:
        raise ValueError("step must be positive")
    n = int(math.ceil(abs(horizon) / step - 1e-9)) if horizon else 0
    h = horizon / n if n else 0.0
    out = np.empty((n + 1, 4))
    K.integrate_path(*kernel_args(spec), float(p[0]), float(p[1]), v[0], v[1],
                     h, n, out)
    t = np.linspace(0.0, horizon, n + 1)
    pts, vel = out[:, :2], out[:, 2:]
    q = lorentz_norm(spec, pts, vel)
    drift = float(np.max(np.abs(q - q[0])))
    if check and drift > DRIFT_LIMIT * max(1.0, abs(q[0])):
        raise IntegrationError(f"norm drift {drift:.3g} exceeds {DRIFT_LIMIT}; "
                               "reduce the step")
    g_len = _quad(t, np.sqrt(np.maximum(-q, 0.0))) if q[0] < 0 else 0.0
    e_len = _quad(t, np.linalg.norm(vel, axis=1))
    return Geodesic(t, pts, vel, abs(g_len), abs(e_len), drift)


def orthonormal_frame(spec: MetricSpec, p):
    """(e0, e1): e0 future unit timelike along the time axis, e1 unit spacelike."""
    g = metric_matrix(spec, float(p[0]), float(p[1]))
    e0 = np.array([0.0, 1.0]) / math.sqrt(-g[1, 1])
    u = np.array([1.0, 0.0])
    w = u + (u @ g @ e0) * e0
    e1 = w / math.sqrt(w @ g @ w)
    return e0, e1


def boost_velocity(spec: MetricSpec, p, theta):
    """Unit future timelike vector with boost parameter theta (vectorized)."""
    e0, e1 = orthonormal_frame(spec, p)
    th = np.asarray(theta, dtype=float)[..., None]
    return np.cosh(th) * e0 + np.sinh(th) * e1


def boost_of(spec: MetricSpec, p, v) -> float:
    e0, e1 = orthonormal_frame(spec, p)
    g = metric_matrix(spec, float(p[0]), float(p[1]))
    a = -(e0 @ g @ np.asarray(v, float))
    b = e1 @ g @ np.asarray(v, float)
    return math.atanh(b / a)


def unit_timelike(spec: MetricSpec, p, v):
    v = np.asarray(v, dtype=float)
    q = float(lorentz_norm(spec, p, v))
    if q >= 0:
        raise ValueError("vector is not timelike")
    return v / math.sqrt(-q)


# ------------------------------------------------------------------ Jacobi

def _hermite_root(t0, t1, f0, f1, d0, d1, tol=1e-12):
    h = t1 - t0

    def H(t):
        s = (t - t0) / h
        h00 = 2 * s**3 - 3 * s**2 + 1
        h10 = s**3 - 2 * s**2 + s
        h01 = -2 * s**3 + 3 * s**2
        h11 = s**3 - s**2
        return h00 * f0 + h10 * h * d0 + h01 * f1 + h11 * h * d1

    a, b = t0, t1
    fa = H(a)
    while b - a > tol:
        m = 0.5 * (a + b)
        fm = H(m)
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


def jacobi_conjugate_scan(spec: MetricSpec, p, v, horizon: float,
                          step: float = DEFAULT_STEP,
                          coefficient: Optional[float] = None) -> ConjugateReport:
    """First zero of the normal Jacobi field J(0)=0, J'(0)=1 along the geodesic.

    `coefficient` replaces SIGMA*K by a constant (closed-form test hook).
    """
    if horizon <= 0:
        return ConjugateReport(None, float(horizon), float("inf"))
    v = np.asarray(v, dtype=float)
    q = float(lorentz_norm(spec, p, v))
    if coefficient is None and abs(q + 1.0) > 1e-8:
        raise ValueError("velocity must be unit timelike, g(v, v) = -1")
    n = int(math.ceil(horizon / step - 1e-9))
    h = horizon / n
    out = np.empty((n + 1, 6))
    use_const = coefficient is not None
    K.jacobi_path(*kernel_args(spec), float(p[0]), float(p[1]), v[0], v[1], h, n,
                  SIGMA, float(coefficient or 0.0), use_const, out)
    if not use_const:
        qs = lorentz_norm(spec, out[:, :2], out[:, 2:4])
        drift = float(np.max(np.abs(qs - q)))
        if drift > DRIFT_LIMIT:
            raise IntegrationError(f"norm drift {drift:.3g} in Jacobi scan")
    J, dJ = out[:, 4], out[:, 5]
    t = np.linspace(0.0, horizon, n + 1)
    sign = np.sign(J[1:])
    flips = np.nonzero(sign[1:] * sign[:-1] <= 0)[0]
    first = None
    if flips.size:
        i = flips[0] + 1
        if J[i + 1] == 0.0:
            first = float(t[i + 1])
        else:
            first = _hermite_root(t[i], t[i + 1], J[i], J[i + 1], dJ[i], dJ[i + 1])
    # min |J| away from the forced zero at t = 0
    tail = J[t >= min(1.0, 0.5 * horizon)]
    return ConjugateReport(first, float(horizon), float(np.min(np.abs(tail))))


@dataclass
class PoleReport:
    is_pole_up_to_horizon: bool
    worst_direction: Optional[list]
    first_conjugate: Optional[float]
    n_directions: int
    horizon: float
    jacobi_min_abs: float = float("inf")


def pole_check(spec: MetricSpec, p, n_directions: int = 64, horizon: float = 20.0,
               step: float = 1e-2, theta_max: float = 3.0) -> PoleReport:
    """Conjugate-point scan over future and past unit timelike directions.

    A True verdict certifies the pole property only up to `horizon` and the
    sampled directions.
    """
    if n_directions < 8:
        raise ValueError("n_directions must be >= 8")
    if horizon <= 0:
        return PoleReport(True, None, None, n_directions, float(horizon))
    thetas = np.linspace(-theta_max, theta_max, n_directions)
    best = (None, None)
    jmin = float("inf")
    for th in thetas:
        vf = boost_velocity(spec, p, th)
        for v in (vf, -vf):
            h = step / max(1.0, float(np.linalg.norm(v)))
            rep = jacobi_conjugate_scan(spec, p, v, horizon, h)
            jmin = min(jmin, rep.jacobi_min_abs)
            if rep.first_conjugate is not None and (
                    best[1] is None or rep.first_conjugate < best[1]):
                best = (v.tolist(), rep.first_conjugate)
    return PoleReport(best[1] is None, best[0], best[1], n_directions,
                      float(horizon), jmin)


# ---------------------------------------------------------------- shooting

@dataclass
class Connection:
    theta: float
    velocity: np.ndarray
    arrival: float  # unit speed, so also the g-length
    miss: float


def _level_hits(spec, x, thetas, ylev, spatial_step):
    """x-coordinate and parameter where each boosted geodesic reaches y = ylev."""
    V = boost_velocity(spec, x, thetas)
    speed = np.linalg.norm(V, axis=1)
    hs = spatial_step / np.maximum(speed, 1.0)
    states = np.empty((len(thetas), 4))
    states[:, 0], states[:, 1] = x[0], x[1]
    states[:, 2:] = V
    out = np.empty((len(thetas), 6))
    max_steps = int(20 * (ylev - x[1]) / spatial_step) + 20
    K.batch_to_level(*kernel_args(spec), states, hs, float(ylev), max_steps, out)
    X = np.where(out[:, 5] > 0, out[:, 0], np.nan)
    return X, out[:, 4]


def connections(spec: MetricSpec, x, y, tol: float = 1e-10,
                step: float = DEFAULT_STEP, n_sweep: int = 512,
                theta_max: float = 8.0, sweep_step: float = 0.05):
    """All unit future timelike geodesics from x through y found by the sweep.

    The sweep integrates at a coarse step only to bracket sign changes of the
    horizontal miss at the level y[1]; each bracket is refined at `step`.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if not y[1] > x[1]:
        return []
    thetas = np.linspace(-theta_max, theta_max, n_sweep)
    X, _ = _level_hits(spec, x, thetas, y[1], sweep_step)
    miss = X - y[0]
    found = []
    for i in range(n_sweep - 1):
        a, b = miss[i], miss[i + 1]
        if not (np.isfinite(a) and np.isfinite(b)) or a * b > 0:
            continue

        def F(th):
            return _level_hits(spec, x, np.array([th]), y[1], step)[0][0] - y[0]

        fa, fb = F(thetas[i]), F(thetas[i + 1])
        if not (np.isfinite(fa) and np.isfinite(fb)):
            continue
        if fa * fb > 0:
            # coarse and fine disagree on the bracket; probe the midpoint
            m = 0.5 * (thetas[i] + thetas[i + 1])
            fm = F(m)
            if fa * fm <= 0:
                lo, hi = thetas[i], m
            elif fm * fb <= 0:
                lo, hi = m, thetas[i + 1]
            else:
                continue
        else:
            lo, hi = thetas[i], thetas[i + 1]
        try:
            th = brentq(F, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
        except (ValueError, RuntimeError) as exc:
            raise Divergence(f"refinement failed: {exc}") from None
        Xh, T = _level_hits(spec, x, np.array([th]), y[1], step)
        found.append(Connection(float(th), boost_velocity(spec, x, th),
                                float(T[0]), float(abs(Xh[0] - y[0]))))
    # drop duplicates produced by brackets sharing an endpoint root
    uniq = []
    for c in sorted(found, key=lambda c: c.theta):
        if not uniq or abs(c.theta - uniq[-1].theta) > 1e-9:
            uniq.append(c)
    return uniq


def geodesic_through(spec, x, conn: Connection, step=DEFAULT_STEP) -> Geodesic:
    speed = float(np.linalg.norm(conn.velocity))
    h = step / max(speed, 1.0)
    return integrate_geodesic(spec, x, conn.velocity, conn.arrival, h)


def shoot_to_target(spec: MetricSpec, x, y, tol: float = 1e-8,
                    step: float = DEFAULT_STEP, n_sweep: int = 64,
                    theta_max: float = 8.0) -> Geodesic:
    """Unit-speed future timelike geodesic from x to y (the longest if several)."""
    conns = connections(spec, x, y, tol, step, n_sweep, theta_max)
    if not conns:
        raise NoBracket(f"no sign change of the miss function toward {tuple(y)}")
    best = max(conns, key=lambda c: c.arrival)
    geo = geodesic_through(spec, x, best, step)
    miss = float(np.linalg.norm(geo.end - np.asarray(y, float)))
    if miss > tol:
        raise Divergence(f"closest approach {miss:.3g} above tol {tol:.3g}")
    return geo
