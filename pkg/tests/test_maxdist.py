import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lortori.maxdist import (EmptyWindow, distance_field, estimate_constants,
                             lorentz_distance, reachable, verify_eikonal)
from lortori.metric import conformal, flat, sheared

FLAT = flat()
WIN = (-0.5, 0.5, 2.0, 3.0)


def flat_d(x, y):
    dx, dy = y[0] - x[0], y[1] - x[1]
    return math.sqrt(dy * dy - dx * dx) if dy > abs(dx) else 0.0


@pytest.fixture(scope="module")
def flat_field():
    return distance_field(FLAT, (0, 0), WIN, (33, 33))


def test_flat_timelike():
    r = lorentz_distance(FLAT, (0, 0), (1, 2))
    assert r.status == "timelike"
    assert r.value == pytest.approx(math.sqrt(3), abs=1e-10)
    assert r.maximizer.g_length == pytest.approx(r.value, abs=1e-8)


def test_flat_spacelike():
    r = lorentz_distance(FLAT, (0, 0), (2, 1))
    assert r.value == 0 and r.status == "not-causally-related"


def test_conformal_methods_agree(rng):
    spec = conformal(0.1)
    for _ in range(4):
        x = rng.random(2)
        y = x + (rng.uniform(-0.8, 0.8), 2.0)
        r = lorentz_distance(spec, x, y, cross_check=True)
        assert r.method_agreement < 1e-4


def test_reachable_examples():
    assert reachable(FLAT, (0, 0), (0, 3))
    assert not reachable(FLAT, (0, 0), (3, 0))


def test_flat_ball_reachable():
    # y - x at margin >= 3 from the cone boundary: B_1(y) lies inside
    y = np.array([0.0, 3 * math.sqrt(2) + 0.5])
    for a in np.arange(8) * math.pi / 4:
        assert reachable(FLAT, (0, 0), y + (math.cos(a), math.sin(a)))


@given(st.floats(-0.95, 0.95), st.floats(0.3, 4), st.floats(-5, 5), st.floats(-5, 5))
def test_flat_closed_form(s, dy, x0, y0):
    x = (x0, y0)
    y = (x0 + s * dy, y0 + dy)
    assert lorentz_distance(FLAT, x, y, with_maximizer=False).value == pytest.approx(
        flat_d(x, y), abs=1e-8)


@given(st.floats(0, 1), st.floats(0, 1), st.integers(-20, 20), st.integers(-20, 20))
def test_translation_invariance(px, py, j, k):
    spec = sheared(0.2)
    x = np.array([px, py])
    y = x + (0.2, 1.5)
    a = lorentz_distance(spec, x, y, with_maximizer=False).value
    b = lorentz_distance(spec, x + (j, k), y + (j, k), with_maximizer=False).value
    assert a == pytest.approx(b, abs=1e-9)


def test_reverse_triangle_sheared(rng):
    spec = sheared(0.2)
    for _ in range(5):
        x = rng.random(2)
        y = x + (rng.uniform(-0.3, 0.3), rng.uniform(1, 2))
        z = y + (rng.uniform(-0.3, 0.3), rng.uniform(1, 2))
        dxy = lorentz_distance(spec, x, y, with_maximizer=False).value
        dyz = lorentz_distance(spec, y, z, with_maximizer=False).value
        dxz = lorentz_distance(spec, x, z, with_maximizer=False).value
        assert dxz >= dxy + dyz - 1e-9
        # antisymmetry of the causal order
        assert lorentz_distance(spec, y, x, with_maximizer=False).value == 0


def test_flat_field_values(flat_field):
    P = flat_field.points()
    exact = np.sqrt(P[..., 1] ** 2 - P[..., 0] ** 2)
    ok = ~np.isnan(flat_field.values)
    assert ok.all()
    assert np.max(np.abs(flat_field.values - exact)) < 1e-8


def test_flat_field_gradient(flat_field):
    # du = (0, 1) raised by g^{-1}: the g-gradient of d_p points to the past
    i = np.argmin(np.abs(flat_field.x))
    j = np.argmin(np.abs(flat_field.y - 2.5))
    assert np.allclose(flat_field.differential[i, j], (0, 1), atol=1e-6)
    assert np.allclose(flat_field.gradient[i, j], (0, -1), atol=1e-6)


def test_flat_field_eikonal(flat_field):
    assert verify_eikonal(flat_field, FLAT)["max_residual"] < 1e-5


def test_constant_field_residual_one(flat_field):
    f = flat_field.with_values(np.zeros_like(flat_field.values), FLAT)
    r = verify_eikonal(f, FLAT)
    assert r["max_residual"] == pytest.approx(1.0) and r["mean_residual"] == pytest.approx(1.0)


def test_window_straddling_light_cone():
    f = distance_field(FLAT, (0, 0), (-2, 2, 0.5, 1.5), (33, 17))
    P = f.points()
    outside = np.abs(P[..., 0]) >= P[..., 1]
    assert not f.valid[outside].any()
    assert f.valid.any()


def test_empty_window():
    with pytest.raises(EmptyWindow):
        distance_field(FLAT, (0, 0), (3, 4, 0.5, 1.0), (9, 9))


def test_conformal_field_second_order():
    spec = conformal(0.1)
    r = [verify_eikonal(distance_field(spec, (0, 0), WIN, (n, n)), spec)["max_residual"]
         for n in (65, 129)]
    assert 3.2 < r[0] / r[1] < 4.8


def test_flat_constants():
    c = estimate_constants(FLAT, 0.2, 100)
    delta, L = c.delta_eps["0.2"], c.L_eps["0.2"]
    # straight maximizers: velocity margin equals chord margin >= eps
    assert delta >= 0.2 - 1e-9 and math.isfinite(L)
    # fastest unit velocity with chord in the 0.2-interior: boost to angle phi
    phi = math.pi / 4 - math.asin(0.2)
    assert 1 / math.sqrt(math.cos(2 * phi)) <= c.K_over_delta


def test_constants_stable():
    a = estimate_constants(FLAT, 0.2, 100, seed=3)
    b = estimate_constants(FLAT, 0.2, 200, seed=3)
    for key in ("K", "B"):
        assert abs(getattr(a, key) - getattr(b, key)) <= 0.1 * getattr(b, key)
    assert abs(a.delta_eps["0.2"] - b.delta_eps["0.2"]) <= 0.1 * b.delta_eps["0.2"]


def test_constants_precondition():
    with pytest.raises(ValueError):
        estimate_constants(FLAT, 0.0, 100)
