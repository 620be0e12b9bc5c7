"""Z^2-periodic Lorentzian metrics on the plane.

Components are finite Fourier series (or exponentials of one, for the
conformal family) so that every derivative is available in closed form and
integer translations are exact isometries.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

TWO_PI = 2.0 * math.pi
NULL_TOL = 1e-10


class SignatureError(ValueError):
    """Raised when a metric is not Lorentzian (det g >= 0) at a point."""


class MetricSpecError(ValueError):
    """Malformed metric-spec document."""


@dataclass(frozen=True)
class FourierSeries:
    """Sum of a*cos(2pi(mx+ny)) + b*sin(2pi(mx+ny)) over integer (m, n)."""

    terms: tuple = ()

    def __post_init__(self):
        clean = []
        for t in self.terms:
            m, n, a, b = t
            if int(m) != m or int(n) != n:
                raise MetricSpecError(f"non-integer frequency in term {t!r}")
            clean.append((int(m), int(n), float(a), float(b)))
        object.__setattr__(self, "terms", tuple(clean))

    @classmethod
    def constant(cls, c: float) -> "FourierSeries":
        return cls(((0, 0, c, 0.0),))

    def __call__(self, x, y):
        return self.jet(x, y)[0]

    def jet(self, x, y):
        """Value and partials up to order two: (f, fx, fy, fxx, fxy, fyy)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = [np.zeros(np.broadcast(x, y).shape) for _ in range(6)]
        for m, n, a, b in self.terms:
            if m == 0 and n == 0:
                out[0] = out[0] + a
                continue
            # reduce the phase mod 1 so that f(x+j, y+k) == f(x, y) bitwise
            ph = TWO_PI * np.mod(m * x + n * y, 1.0)
            c, s = np.cos(ph), np.sin(ph)
            km, kn = TWO_PI * m, TWO_PI * n
            val = a * c + b * s
            d1 = -a * s + b * c
            out[0] = out[0] + val
            out[1] = out[1] + km * d1
            out[2] = out[2] + kn * d1
            out[3] = out[3] - km * km * val
            out[4] = out[4] - km * kn * val
            out[5] = out[5] - kn * kn * val
        return tuple(out)

    def derivative(self, dx: int = 0, dy: int = 0) -> "FourierSeries":
        """Exact partial derivative d^dx/dx d^dy/dy, term by term."""
        terms = []
        for m, n, a, b in self.terms:
            if (m == 0 and dx > 0) or (n == 0 and dy > 0):
                continue
            k = (TWO_PI * m) ** dx * (TWO_PI * n) ** dy
            # each derivative rotates (a, b) -> (b, -a)
            for _ in range(dx + dy):
                a, b = b, -a
            terms.append((m, n, k * a, k * b))
        return FourierSeries(tuple(terms))

    def to_list(self):
        return [list(t) for t in self.terms]


@dataclass(frozen=True)
class ExpFourier:
    """scale * exp(2 f) with f a FourierSeries (conformal factors)."""

    f: FourierSeries
    scale: float = 1.0

    def __call__(self, x, y):
        return self.jet(x, y)[0]

    def jet(self, x, y):
        f, fx, fy, fxx, fxy, fyy = self.f.jet(x, y)
        e = self.scale * np.exp(2.0 * f)
        return (e, 2 * fx * e, 2 * fy * e,
                (2 * fxx + 4 * fx * fx) * e,
                (2 * fxy + 4 * fx * fy) * e,
                (2 * fyy + 4 * fy * fy) * e)


@dataclass(frozen=True)
class SecantSquared:
    """scale / cos(x)^2. Not periodic; only used by the anti-de Sitter hook."""

    scale: float = 1.0

    def __call__(self, x, y):
        return self.jet(x, y)[0]

    def jet(self, x, y):
        x = np.asarray(x, dtype=float)
        z = np.zeros(np.broadcast(x, np.asarray(y)).shape)
        t = np.tan(x)
        s = self.scale / np.cos(x) ** 2 + z
        return s, 2 * s * t, z, s * (2 + 6 * t * t), z, z


@dataclass(frozen=True)
class MetricSpec:
    """Lorentzian metric g11 dx^2 + 2 g12 dx dy + g22 dy^2; (0, 1) is future."""

    g11: object
    g12: object
    g22: object
    family: str = "raw"
    params: dict = field(default_factory=dict, compare=False)

    def components(self, x, y):
        return self.g11.jet(x, y), self.g12.jet(x, y), self.g22.jet(x, y)


@dataclass
class MetricEval:
    g: np.ndarray
    g_inv: np.ndarray
    christoffel: np.ndarray  # christoffel[a, b, c] = Gamma^a_{bc}
    K: float


# ---------------------------------------------------------------- families

def flat() -> MetricSpec:
    return MetricSpec(FourierSeries.constant(1.0), FourierSeries(),
                      FourierSeries.constant(-1.0), family="flat")


def conformal(amplitude: float = 0.1) -> MetricSpec:
    """exp(2f)(dx^2 - dy^2) with f = amplitude*sin(2 pi x)sin(2 pi y)."""
    # sin(a)sin(b) = (cos(a-b) - cos(a+b))/2
    f = FourierSeries(((1, -1, amplitude / 2, 0.0), (1, 1, -amplitude / 2, 0.0)))
    return MetricSpec(ExpFourier(f, 1.0), FourierSeries(), ExpFourier(f, -1.0),
                      family="conformal", params={"amplitude": amplitude})


def sheared(amplitude: float = 0.2) -> MetricSpec:
    """dx^2 + 2 amplitude*sin(2 pi x) dx dy - dy^2."""
    return MetricSpec(FourierSeries.constant(1.0),
                      FourierSeries(((1, 0, 0.0, amplitude),)),
                      FourierSeries.constant(-1.0),
                      family="sheared", params={"amplitude": amplitude})


def raw(g11, g12, g22) -> MetricSpec:
    return MetricSpec(FourierSeries(tuple(map(tuple, g11))),
                      FourierSeries(tuple(map(tuple, g12))),
                      FourierSeries(tuple(map(tuple, g22))), family="raw")


def anti_de_sitter() -> MetricSpec:
    """(dx^2 - dy^2)/cos(x)^2 on |x| < pi/2: constant curvature K = -1.

    Internal test hook for the Jacobi sign convention; timelike geodesics
    from a point refocus after proper time pi.
    """
    return MetricSpec(SecantSquared(1.0), FourierSeries(), SecantSquared(-1.0),
                      family="anti-de-sitter")


FAMILIES = {"flat": flat, "conformal": conformal, "sheared": sheared}


def spec_from_dict(doc: dict) -> MetricSpec:
    fam = doc.get("family")
    params = doc.get("params") or {}
    if fam == "raw":
        try:
            return raw(doc["g11"], doc["g12"], doc["g22"])
        except KeyError as exc:
            raise MetricSpecError(f"raw spec missing component {exc}") from None
        except (TypeError, ValueError) as exc:
            raise MetricSpecError(str(exc)) from None
    if fam not in FAMILIES:
        raise MetricSpecError(f"unknown family {fam!r}")
    try:
        return FAMILIES[fam](**{k: float(v) for k, v in params.items()})
    except TypeError as exc:
        raise MetricSpecError(str(exc)) from None


def spec_to_dict(spec: MetricSpec) -> dict:
    if spec.family in FAMILIES:
        return {"family": spec.family, "params": dict(spec.params)}
    return {"family": "raw", "g11": spec.g11.to_list(),
            "g12": spec.g12.to_list(), "g22": spec.g22.to_list()}


def load_spec(path) -> MetricSpec:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise MetricSpecError(f"{path}: {exc}") from None
    return spec_from_dict(doc)


# ------------------------------------------------------------- evaluation

@lru_cache(maxsize=64)
def kernel_args(spec: MetricSpec):
    """Pack a spec for the compiled kernels: (kinds, scales, terms)."""
    kinds = np.zeros(3, dtype=np.int64)
    scales = np.ones(3)
    rows = []
    for c, comp in enumerate((spec.g11, spec.g12, spec.g22)):
        if isinstance(comp, ExpFourier):
            kinds[c], scales[c] = 1, comp.scale
            comp = comp.f
        elif isinstance(comp, SecantSquared):
            kinds[c], scales[c] = 2, comp.scale
            continue
        rows.extend((c, m, n, a, b) for m, n, a, b in comp.terms)
    terms = np.array(rows, dtype=float).reshape(-1, 5)
    return kinds, scales, terms


def is_constant(spec: MetricSpec) -> bool:
    """True when every component is constant (geodesics are straight lines)."""
    kinds, _, terms = kernel_args(spec)
    return bool(np.all(kinds != 2) and np.all(terms[:, 1:3] == 0))


def metric_arrays(spec: MetricSpec, x, y, order: int = 1):
    """Vectorized metric data at points (x, y).

    Returns g (..., 2, 2) and dg (..., 2, 2, 2) with dg[..., k, i, j] =
    d_k g_ij; with order=2 also ddg (..., 2, 2, 2, 2), ddg[..., k, l, i, j].
    """
    j11, j12, j22 = spec.components(x, y)
    shape = np.broadcast(np.asarray(x), np.asarray(y)).shape
    g = np.empty(shape + (2, 2))
    dg = np.empty(shape + (2, 2, 2))
    for (i, j), jet in (((0, 0), j11), ((0, 1), j12), ((1, 1), j22)):
        g[..., i, j] = g[..., j, i] = jet[0]
        dg[..., 0, i, j] = dg[..., 0, j, i] = jet[1]
        dg[..., 1, i, j] = dg[..., 1, j, i] = jet[2]
    if order < 2:
        return g, dg
    ddg = np.empty(shape + (2, 2, 2, 2))
    for (i, j), jet in (((0, 0), j11), ((0, 1), j12), ((1, 1), j22)):
        for (k, l), c in (((0, 0), 3), ((0, 1), 4), ((1, 0), 4), ((1, 1), 5)):
            ddg[..., k, l, i, j] = ddg[..., k, l, j, i] = jet[c]
    return g, dg, ddg


def inverse2(g):
    det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] ** 2
    inv = np.empty_like(g)
    inv[..., 0, 0] = g[..., 1, 1] / det
    inv[..., 1, 1] = g[..., 0, 0] / det
    inv[..., 0, 1] = inv[..., 1, 0] = -g[..., 0, 1] / det
    return inv, det


def christoffel_arrays(g, dg):
    """Gamma^a_{bc} from g and its first partials."""
    gi, _ = inverse2(g)
    # lowered: G_dbc = (d_b g_dc + d_c g_db - d_d g_bc) / 2
    low = 0.5 * (np.einsum("...bdc->...dbc", dg) + np.einsum("...cdb->...dbc", dg)
                 - dg)
    return np.einsum("...ad,...dbc->...abc", gi, low)


def gauss_curvature_arrays(g, dg, ddg):
    """Brioschi formula with E=g11, F=g12, G=g22 (valid for either signature)."""
    E, F, G = g[..., 0, 0], g[..., 0, 1], g[..., 1, 1]
    Eu, Ev = dg[..., 0, 0, 0], dg[..., 1, 0, 0]
    Fu, Fv = dg[..., 0, 0, 1], dg[..., 1, 0, 1]
    Gu, Gv = dg[..., 0, 1, 1], dg[..., 1, 1, 1]
    Evv = ddg[..., 1, 1, 0, 0]
    Fuv = ddg[..., 0, 1, 0, 1]
    Guu = ddg[..., 0, 0, 1, 1]
    return brioschi(E, F, G, Eu, Ev, Fu, Fv, Gu, Gv, Evv, Fuv, Guu)


def brioschi(E, F, G, Eu, Ev, Fu, Fv, Gu, Gv, Evv, Fuv, Guu):
    a11 = -0.5 * Evv + Fuv - 0.5 * Guu
    # Brioschi: K = (|A| - |B|) / (EG - F^2)^2
    A = np.array([[a11, 0.5 * Eu, Fu - 0.5 * Ev],
                  [Fv - 0.5 * Gu, E, F],
                  [0.5 * Gv, F, G]])
    B = np.array([[np.zeros_like(E), 0.5 * Ev, 0.5 * Gu],
                  [0.5 * Ev, E, F],
                  [0.5 * Gu, F, G]])
    detA = np.linalg.det(np.moveaxis(A, (0, 1), (-2, -1)))
    detB = np.linalg.det(np.moveaxis(B, (0, 1), (-2, -1)))
    return (detA - detB) / (E * G - F * F) ** 2


def eval_metric(spec: MetricSpec, p) -> MetricEval:
    x, y = float(p[0]), float(p[1])
    g, dg, ddg = metric_arrays(spec, x, y, order=2)
    gi, det = inverse2(g)
    if not det < 0:
        raise SignatureError(f"det g = {det:.3g} >= 0 at {(x, y)}")
    chris = christoffel_arrays(g, dg)
    K = float(gauss_curvature_arrays(g, dg, ddg))
    return MetricEval(g=g, g_inv=gi, christoffel=chris, K=K)


def gauss_curvature(spec: MetricSpec, x, y):
    g, dg, ddg = metric_arrays(spec, x, y, order=2)
    return gauss_curvature_arrays(g, dg, ddg)


def metric_matrix(spec: MetricSpec, x, y):
    return metric_arrays(spec, x, y)[0]


def inner(spec: MetricSpec, p, u, v):
    """g_p(u, v), vectorized over leading axes of p, u, v."""
    p = np.asarray(p, dtype=float)
    g = metric_matrix(spec, p[..., 0], p[..., 1])
    return np.einsum("...i,...ij,...j->...", np.asarray(u, float), g,
                     np.asarray(v, float))


def lorentz_norm(spec: MetricSpec, p, v):
    """The quadratic form g_p(v, v)."""
    return inner(spec, p, v, v)


def classify_vector(spec: MetricSpec, p, v, tol: float = NULL_TOL) -> str:
    v = np.asarray(v, dtype=float)
    if not np.any(v):
        return "zero"
    v = v / np.max(np.abs(v))  # scale-free, and safe for subnormal input
    q = float(lorentz_norm(spec, p, v))
    scale = float(v @ v)
    if q > tol * scale:
        return "spacelike"
    future = float(inner(spec, p, v, (0.0, 1.0))) < 0
    kind = "null" if abs(q) <= tol * scale else "timelike"
    return ("future-" if future else "past-") + kind


@dataclass
class SignatureReport:
    min_abs_det: float
    min_neg_g22: float
    passed: bool
    resolution: int


def signature_check(spec: MetricSpec, resolution: int = 64) -> SignatureReport:
    if resolution < 8:
        raise ValueError("resolution must be >= 8")
    s = np.arange(resolution) / resolution
    X, Y = np.meshgrid(s, s, indexing="ij")
    g = metric_matrix(spec, X, Y)
    det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] ** 2
    passed = bool(np.all(det < 0) and np.all(g[..., 1, 1] < 0))
    return SignatureReport(float(np.min(np.abs(det))), float(np.min(-g[..., 1, 1])),
                           passed, resolution)


def null_directions(spec: MetricSpec, p):
    """Euclidean-unit future null vectors (minus, plus) at points p.

    The pair is positively oriented: det[minus, plus] > 0.
    """
    p = np.asarray(p, dtype=float)
    g = metric_matrix(spec, p[..., 0], p[..., 1])
    a, b, c = g[..., 0, 0], g[..., 0, 1], g[..., 1, 1]
    # null v = (s, 1): a s^2 + 2 b s + c = 0, both roots future since v_y > 0
    disc = np.sqrt(b * b - a * c)
    # numerically stable pair of roots
    q = -(b + np.copysign(disc, b))
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = np.where(a != 0, q / np.where(a != 0, a, 1.0), -c / (2 * b))
        r2 = c / q
    s_lo, s_hi = np.minimum(r1, r2), np.maximum(r1, r2)
    # (s, 1) with larger s is further clockwise -> it is the "minus" direction
    vm = np.stack([s_hi, np.ones_like(s_hi)], axis=-1)
    vp = np.stack([s_lo, np.ones_like(s_lo)], axis=-1)
    vm /= np.linalg.norm(vm, axis=-1, keepdims=True)
    vp /= np.linalg.norm(vp, axis=-1, keepdims=True)
    return vm, vp
