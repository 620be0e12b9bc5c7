import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lortori.causal import (ConeEstimate, asymptotic_direction, cone_margin,
                            cone_membership, cross, estimate_B, estimate_cone,
                            integrate_null_curve)
from lortori.geodesic import integrate_geodesic
from lortori.lines import find_periodic_line
from lortori.metric import conformal, flat, lorentz_norm, null_directions, sheared

R2 = math.sqrt(0.5)
FLAT_CONE = ConeEstimate(np.array([R2, R2]), np.array([-R2, R2]), 0.0, 100.0)


def test_flat_null_curve_plus():
    pts = integrate_null_curve(flat(), (0, 0), "plus", 10.0)
    assert np.allclose(pts[-1], 10 * np.array([-R2, R2]), atol=1e-12)


@pytest.mark.parametrize("family", ["minus", "plus"])
def test_conformal_null_curves_match_flat(family):
    a = integrate_null_curve(flat(), (0.2, 0.1), family, 5.0)
    b = integrate_null_curve(conformal(0.1), (0.2, 0.1), family, 5.0)
    assert np.allclose(a, b, atol=1e-12)


def test_sheared_null_residual():
    spec = sheared(0.2)
    pts = integrate_null_curve(spec, (0, 0), "minus", 10.0, 1e-3)
    vm, _ = null_directions(spec, pts)
    assert np.max(np.abs(lorentz_norm(spec, pts, vm))) < 1e-10
    # the sampled curve follows the null field up to the difference stencil
    tan = np.gradient(pts, axis=0)[1:-1]
    tan /= np.linalg.norm(tan, axis=1, keepdims=True)
    assert np.max(np.abs(cross(tan, vm[1:-1]))) < 1e-5


def test_flat_cone():
    c = estimate_cone(flat(), 100.0)
    assert np.allclose(c.m_minus, (R2, R2), atol=1e-14)
    assert np.allclose(c.m_plus, (-R2, R2), atol=1e-14)


def test_conformal_cone():
    c = estimate_cone(conformal(0.1), 100.0)
    assert np.allclose(c.m_minus, (R2, R2), atol=1e-6)
    assert np.allclose(c.m_plus, (-R2, R2), atol=1e-6)


def test_sheared_cone_stable():
    a = estimate_cone(sheared(0.2), 100.0)
    b = estimate_cone(sheared(0.2), 200.0)
    assert np.allclose(a.m_minus, b.m_minus, atol=1e-3)
    assert np.allclose(a.m_plus, b.m_plus, atol=1e-3)
    assert cross(a.m_minus, a.m_plus) > 0
    # strictly between the flat null rays and the vertical
    assert 0 < a.m_minus[0] < R2 and -R2 < a.m_plus[0] < 0


def test_membership_examples():
    assert cone_membership(FLAT_CONE, (0, 1), 0.1)
    assert not cone_membership(FLAT_CONE, FLAT_CONE.m_plus, 1e-9)
    assert not cone_membership(FLAT_CONE, (1, 0), 0.0)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.01, 100))
def test_margin_scale_invariant(hx, hy, s):
    if hx * hx + hy * hy < 1e-6:
        return
    a = cone_margin(FLAT_CONE, (hx, hy))
    b = cone_margin(FLAT_CONE, (s * hx, s * hy))
    assert a == pytest.approx(b, abs=1e-12)


def test_direction_of_vertical_ray():
    pts = np.stack([np.zeros(100), np.linspace(0, 10, 100)], axis=1)
    d = asymptotic_direction(pts, FLAT_CONE)
    assert np.allclose(d.alpha, (0, 1)) and d.D == 0


def test_direction_of_flat_geodesic():
    g = integrate_geodesic(flat(), (0, 0), np.array([1, 2]) / math.sqrt(3), 50.0)
    d = asymptotic_direction(g.points, FLAT_CONE)
    assert np.allclose(d.alpha, np.array([1, 2]) / math.sqrt(5), atol=1e-12)
    assert d.D < 1e-10


def test_direction_of_periodic_line():
    spec = sheared(0.2)
    line = find_periodic_line(spec, (0, 0), (1, 2))
    pts = np.concatenate([line.point_at(np.linspace(0, line.period_length, 64)) + j * np.array([1, 2])
                          for j in range(4)])
    d = asymptotic_direction(pts)
    assert np.allclose(d.alpha, np.array([1, 2]) / math.sqrt(5), atol=1e-6)
    one = line.point_at(np.linspace(0, line.period_length, 64))
    diam = np.max(np.linalg.norm(one[:, None] - one[None], axis=-1))
    assert d.D <= diam


def test_estimate_B_flat():
    B, _ = estimate_B(flat(), 100)
    assert B == pytest.approx(1.0, abs=1e-10)


def test_estimate_B_sheared_stable():
    a, _ = estimate_B(sheared(0.2), 100, seed=1)
    b, _ = estimate_B(sheared(0.2), 200, seed=1)
    assert a >= 1 and abs(a - b) <= 0.05 * b


def test_estimate_B_precondition():
    with pytest.raises(ValueError):
        estimate_B(flat(), 0)
