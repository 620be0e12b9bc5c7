import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lortori.metric import (FourierSeries, MetricSpecError, SignatureError,
                            classify_vector, conformal, eval_metric, flat, is_constant,
                            lorentz_norm, raw, sheared, signature_check, spec_from_dict,
                            spec_to_dict)

coord = st.floats(-50, 50, allow_nan=False)
shift = st.integers(-1000, 1000)
SPECS = [flat(), conformal(0.1), sheared(0.2)]


def fd_curvature(spec, p, h=2e-4):
    """Brioschi curvature from second-order central differences of g."""
    def g(x, y):
        return eval_metric(spec, (x, y)).g

    x, y = p
    c = g(x, y)
    gx = (g(x + h, y) - g(x - h, y)) / (2 * h)
    gy = (g(x, y + h) - g(x, y - h)) / (2 * h)
    gxx = (g(x + h, y) - 2 * c + g(x - h, y)) / h**2
    gyy = (g(x, y + h) - 2 * c + g(x, y - h)) / h**2
    gxy = (g(x + h, y + h) - g(x + h, y - h) - g(x - h, y + h) + g(x - h, y - h)) / (4 * h * h)
    E, F, G = c[0, 0], c[0, 1], c[1, 1]
    Eu, Fu, Gu = gx[0, 0], gx[0, 1], gx[1, 1]
    Ev, Fv, Gv = gy[0, 0], gy[0, 1], gy[1, 1]
    Evv, Fuv, Guu = gyy[0, 0], gxy[0, 1], gxx[1, 1]
    A = np.array([[-Evv / 2 + Fuv - Guu / 2, Eu / 2, Fu - Ev / 2],
                  [Fv - Gu / 2, E, F],
                  [Gv / 2, F, G]])
    B = np.array([[0, Ev / 2, Gu / 2], [Ev / 2, E, F], [Gu / 2, F, G]])
    return (np.linalg.det(A) - np.linalg.det(B)) / (E * G - F * F) ** 2


def test_flat_eval():
    m = eval_metric(flat(), (0.3, 0.7))
    assert np.array_equal(m.g, [[1, 0], [0, -1]])
    assert np.all(m.christoffel == 0)
    assert m.K == 0


def test_conformal_value():
    m = eval_metric(conformal(0.1), (0.25, 0.25))
    e = math.exp(0.2)
    assert np.allclose(m.g, [[e, 0], [0, -e]], atol=1e-12)
    assert m.g[0, 0] == pytest.approx(1.221403, abs=1e-6)


def test_conformal_curvature_matches_fd(rng):
    spec = conformal(0.1)
    for p in rng.random((20, 2)):
        assert eval_metric(spec, p).K == pytest.approx(fd_curvature(spec, p), abs=1e-6)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.family)
def test_eval_invariants(spec, rng):
    for p in rng.random((10, 2)) * 3:
        m = eval_metric(spec, p)
        assert np.allclose(m.g @ m.g_inv, np.eye(2), atol=1e-12)
        assert np.array_equal(m.christoffel, np.swapaxes(m.christoffel, 1, 2))


@given(coord, coord, shift, shift)
def test_periodicity(x, y, j, k):
    for spec in SPECS:
        a = eval_metric(spec, (x, y))
        b = eval_metric(spec, (x + j, y + k))
        assert np.allclose(a.g, b.g, rtol=0, atol=1e-12)
        assert np.allclose(a.christoffel, b.christoffel, rtol=0, atol=1e-10)


def test_fourier_derivative_is_termwise():
    f = FourierSeries(((1, 2, 0.3, -0.4),))
    x, y, h = 0.17, 0.41, 1e-6
    _, fx, fy, *_ = f.jet(x, y)
    assert fx == pytest.approx((f(x + h, y) - f(x - h, y)) / (2 * h), rel=1e-7)
    assert fy == pytest.approx((f(x, y + h) - f(x, y - h)) / (2 * h), rel=1e-7)


@pytest.mark.parametrize("v,expected", [((0, 1), -1), ((1, 1), 0), ((1, 2), -3)])
def test_flat_norm(v, expected):
    assert lorentz_norm(flat(), (0, 0), v) == pytest.approx(expected)


@pytest.mark.parametrize("v,kind", [((0, 1), "future-timelike"), ((1, 1), "future-null"),
                                    ((0, -1), "past-timelike"), ((-1, -1), "past-null"),
                                    ((2, 1), "spacelike"), ((0, 0), "zero")])
def test_flat_classify(v, kind):
    assert classify_vector(flat(), (0, 0), v) == kind


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.01, 100))
def test_classify_scale_invariant(vx, vy, s):
    spec = sheared(0.2)
    p = (0.3, 0.1)
    if vx * vx + vy * vy < 1e-12 or abs(lorentz_norm(spec, p, (vx, vy))) < 1e-6 * (vx * vx + vy * vy):
        return
    assert classify_vector(spec, p, (vx, vy)) == classify_vector(spec, p, (s * vx, s * vy))
    flip = classify_vector(spec, p, (-vx, -vy))
    base = classify_vector(spec, p, (vx, vy))
    swap = {"future": "past", "past": "future"}
    if base != "spacelike" and base != "zero":
        head, tail = base.split("-")
        assert flip == f"{swap[head]}-{tail}"


def test_classify_subnormal():
    assert classify_vector(flat(), (0, 0), (0.0, 5e-324)) == "future-timelike"
    assert classify_vector(flat(), (0, 0), (5e-324, 0.0)) == "spacelike"


def test_signature_reports():
    r = signature_check(flat(), 64)
    assert r.passed and r.min_abs_det == pytest.approx(1.0)
    r = signature_check(sheared(0.2), 64)
    assert r.passed and r.min_abs_det == pytest.approx(1.0)
    bad = raw([(0, 0, 1, 0)], [], [(0, 0, 1, 0)])
    assert not signature_check(bad, 64).passed


def test_signature_error_on_eval():
    bad = raw([(0, 0, 1, 0)], [], [(0, 0, 1, 0)])
    with pytest.raises(SignatureError):
        eval_metric(bad, (0, 0))


def test_spec_round_trip():
    for spec in SPECS + [raw([(0, 0, 1, 0)], [(1, 0, 0, 0.1)], [(0, 0, -1, 0)])]:
        again = spec_from_dict(spec_to_dict(spec))
        assert np.allclose(eval_metric(again, (0.3, 0.8)).g, eval_metric(spec, (0.3, 0.8)).g)


def test_bad_specs():
    with pytest.raises(MetricSpecError):
        spec_from_dict({"family": "nope"})
    with pytest.raises(MetricSpecError):
        FourierSeries(((0.5, 0, 1, 0),))


def test_is_constant():
    assert is_constant(flat())
    assert not is_constant(sheared(0.2))
