"""Lightlike foliations, the stable time cone and asymptotic directions."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .geodesic import boost_velocity, integrate_geodesic
from .metric import MetricSpec, kernel_args

FAMILY_CODES = {"minus": 0, "plus": 1}


class OrientationError(RuntimeError):
    pass


@dataclass
class ConeEstimate:
    m_minus: np.ndarray
    m_plus: np.ndarray
    deviation_bound_D: float
    integration_length: float

    def to_dict(self):
        return {"m_minus": self.m_minus.tolist(), "m_plus": self.m_plus.tolist(),
                "D": self.deviation_bound_D, "length": self.integration_length}


@dataclass
class DirectionEstimate:
    alpha: np.ndarray
    D: float
    confidence_length: float
    in_cone: bool = True


def cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def ray_distance(h, alpha):
    """Euclidean distance from h to the closed ray {t*alpha : t >= 0}."""
    h = np.asarray(h, float)
    alpha = np.asarray(alpha, float)
    alpha = alpha / np.linalg.norm(alpha, axis=-1, keepdims=True)
    along = np.sum(h * alpha, axis=-1)
    perp = np.abs(cross(alpha, h))
    return np.where(along >= 0, perp, np.linalg.norm(h, axis=-1))


def integrate_null_curve(spec: MetricSpec, p, family: str, length: float,
                         step: float = 1e-2) -> np.ndarray:
    """Future lightlike curve with unit Euclidean speed; returns sample points."""
    if length <= 0:
        raise ValueError("length must be positive")
    n = int(math.ceil(length / step - 1e-9))
    out = np.empty((n + 1, 2))
    K.null_path(*kernel_args(spec), float(p[0]), float(p[1]),
                FAMILY_CODES[family], length / n, n, out)
    return out


def estimate_cone(spec: MetricSpec, length: float = 100.0, step: float = 1e-2,
                  origin=(0.0, 0.0)) -> ConeEstimate:
    if length < 10:
        raise ValueError("length must be >= 10")
    dirs, dev = [], 0.0
    for fam in ("minus", "plus"):
        pts = integrate_null_curve(spec, origin, fam, length, step)
        chord = pts[-1] - pts[0]
        m = chord / np.linalg.norm(chord)
        dev = max(dev, float(np.max(ray_distance(pts - pts[0], m))))
        dirs.append(m)
    m_minus, m_plus = dirs
    if not cross(m_minus, m_plus) > 1e-12:
        raise OrientationError("null directions are not positively oriented")
    if m_minus[1] < 0 or m_plus[1] < 0:
        raise OrientationError("null directions are not future pointing")
    return ConeEstimate(m_minus, m_plus, dev, float(length))


def boundary_distance(cone: ConeEstimate, h):
    """Distance from h to the boundary rays; negative outside the cone."""
    h = np.asarray(h, float)
    d = np.minimum(ray_distance(h, cone.m_minus), ray_distance(h, cone.m_plus))
    inside = (cross(cone.m_minus, h) >= 0) & (cross(h, cone.m_plus) >= 0)
    return np.where(inside, d, -d)


def cone_margin(cone: ConeEstimate, h):
    """Relative margin dist(h, boundary)/|h|; in the eps-interior iff >= eps."""
    h = np.asarray(h, float)
    n = np.linalg.norm(h, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(n > 0, boundary_distance(cone, h) / np.where(n > 0, n, 1), 0.0)


def cone_membership(cone: ConeEstimate, h, epsilon: float) -> bool:
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    h = np.asarray(h, float)
    inside = cross(cone.m_minus, h) >= 0 and cross(h, cone.m_plus) >= 0
    if not inside:
        return False
    return bool(boundary_distance(cone, h) >= epsilon * np.linalg.norm(h))


def in_arc(cone: ConeEstimate, alpha, tol: float = 0.0) -> bool:
    return bool(cross(cone.m_minus, alpha) >= -tol and cross(alpha, cone.m_plus) >= -tol)


def dyadic_pairs(n: int):
    """(i, j) pairs with j - i a power of two, plus all pairs with an endpoint."""
    i_all, j_all = [], []
    gap = 1
    while gap < n:
        i = np.arange(0, n - gap)
        i_all.append(i)
        j_all.append(i + gap)
        gap *= 2
    k = np.arange(1, n)
    i_all += [np.zeros(n - 1, int), k[:-1]]
    j_all += [k, np.full(n - 2, n - 1)]
    return np.concatenate(i_all), np.concatenate(j_all)


def asymptotic_direction(points, cone: ConeEstimate = None,
                         max_samples: int = 4096) -> DirectionEstimate:
    pts = np.asarray(points, float)
    if len(pts) > max_samples:
        pts = pts[np.linspace(0, len(pts) - 1, max_samples).astype(int)]
    chord = pts[-1] - pts[0]
    alpha = chord / np.linalg.norm(chord)
    i, j = dyadic_pairs(len(pts))
    D = float(np.max(ray_distance(pts[j] - pts[i], alpha))) if len(i) else 0.0
    ok = in_arc(cone, alpha, 1e-9) if cone is not None else True
    return DirectionEstimate(alpha, D, float(np.linalg.norm(chord)), ok)


def estimate_B(spec: MetricSpec, n_samples: int = 200, seed: int = 0,
               theta_max: float = 2.5, max_length: float = 10.0,
               step: float = 1e-2):
    """Largest Euclidean-length-to-chord ratio over random timelike geodesics."""
    if n_samples < 100:
        raise ValueError("n_samples must be >= 100")
    rng = np.random.default_rng(seed)
    best, witness = 0.0, None
    for _ in range(n_samples):
        p = rng.random(2)
        th = rng.uniform(-theta_max, theta_max)
        L = rng.uniform(1.0, max_length)
        v = boost_velocity(spec, p, th)
        geo = integrate_geodesic(spec, p, v, L, step / max(1.0, np.linalg.norm(v)))
        ratio = geo.euclid_length / float(np.linalg.norm(geo.end - geo.start))
        if ratio > best:
            best, witness = ratio, {"p": p.tolist(), "theta": th, "length": L}
    return best, witness
