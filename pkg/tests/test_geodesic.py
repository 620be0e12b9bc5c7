import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lortori.geodesic import (IntegrationError, NoBracket, boost_velocity,
                              integrate_geodesic, jacobi_conjugate_scan, pole_check,
                              shoot_to_target)
from lortori.metric import anti_de_sitter, conformal, flat, lorentz_norm, sheared

S3 = math.sqrt(3.0)


def test_flat_vertical_segment():
    g = integrate_geodesic(flat(), (0, 0), (0, 1), 5.0)
    assert np.allclose(g.end, (0, 5), atol=1e-12)
    assert g.g_length == pytest.approx(5.0, abs=1e-10)


def test_flat_boosted_endpoint():
    g = integrate_geodesic(flat(), (0, 0), np.array([1, 2]) / S3, S3)
    assert np.allclose(g.end, (1, 2), atol=1e-12)


@pytest.mark.parametrize("horizon", [0.5, 50.0])
def test_conformal_richardson_at_least_fourth_order(horizon):
    # the h^4 term averages out over many cells, so long horizons read up to ~32
    spec = conformal(0.1)
    v = boost_velocity(spec, (0.1, 0.2), 0.2)
    ends = [integrate_geodesic(spec, (0.1, 0.2), v, horizon, h, check=False).end
            for h in (0.02, 0.01, 0.005)]
    ratio = np.linalg.norm(ends[0] - ends[1]) / np.linalg.norm(ends[1] - ends[2])
    assert 13 < ratio < 36


@pytest.mark.parametrize("spec", [conformal(0.1), sheared(0.2)], ids=["conformal", "sheared"])
def test_norm_conservation(spec):
    v = boost_velocity(spec, (0.3, 0.4), 0.7)
    g = integrate_geodesic(spec, (0.3, 0.4), v, 20.0, 1e-3)
    assert g.norm_drift < 1e-8
    assert lorentz_norm(spec, g.points[-1], g.velocities[-1]) == pytest.approx(-1, abs=1e-8)


def test_drift_guard():
    spec = sheared(0.2)
    v = boost_velocity(spec, (0, 0), 3.0)
    with pytest.raises(IntegrationError):
        integrate_geodesic(spec, (0, 0), v, 50.0, 0.5)


def test_flat_no_conjugate():
    rep = jacobi_conjugate_scan(flat(), (0, 0), (0, 1), 100.0, 0.05)
    assert rep.first_conjugate is None


def test_sine_hook():
    rep = jacobi_conjugate_scan(flat(), (0, 0), (0, 1), 5.0, 1e-3, coefficient=4.0)
    assert rep.first_conjugate == pytest.approx(math.pi / 2, abs=1e-6)


def test_sinh_hook():
    rep = jacobi_conjugate_scan(flat(), (0, 0), (0, 1), 20.0, 1e-2, coefficient=-1.0)
    assert rep.first_conjugate is None


def test_anti_de_sitter_refocuses():
    # curvature -1 with the Lorentzian sign: timelike geodesics refocus at pi
    rep = jacobi_conjugate_scan(anti_de_sitter(), (0, 0), (0, 1), 4.0, 1e-3)
    assert rep.first_conjugate == pytest.approx(math.pi, abs=1e-5)


def test_pole_check_flat_and_empty():
    assert pole_check(flat(), (0.3, 0.2), 8, 10.0).is_pole_up_to_horizon
    assert pole_check(conformal(0.1), (0, 0), 8, 0.0).is_pole_up_to_horizon


def test_pole_check_stable_under_doubling():
    spec = conformal(0.05)
    a = pole_check(spec, (0, 0), 16, 10.0)
    b = pole_check(spec, (0, 0), 32, 10.0)
    assert a.is_pole_up_to_horizon == b.is_pole_up_to_horizon


def test_shoot_flat():
    g = shoot_to_target(flat(), (0, 0), (1, 2))
    assert np.allclose(g.velocities[0], np.array([1, 2]) / S3, atol=1e-9)
    assert g.t[-1] == pytest.approx(S3, abs=1e-9)


def test_shoot_spacelike():
    with pytest.raises(NoBracket):
        shoot_to_target(flat(), (0, 0), (2, 1))


def test_shoot_sheared_round_trip():
    spec = sheared(0.2)
    g = shoot_to_target(spec, (0, 0), (0.3, 2.0))
    assert np.linalg.norm(g.end - (0.3, 2.0)) < 1e-8
    again = integrate_geodesic(spec, (0, 0), g.velocities[0], g.t[-1])
    assert np.linalg.norm(again.end - (0.3, 2.0)) < 1e-8


@given(st.floats(-0.9, 0.9), st.floats(0.5, 5.0), st.floats(-3, 3), st.floats(-3, 3))
def test_flat_shooting_closed_form(s, dy, x0, y0):
    x = np.array([x0, y0])
    y = x + (s * dy, dy)
    g = shoot_to_target(flat(), x, y)
    assert g.g_length == pytest.approx(math.sqrt(dy * dy - (s * dy) ** 2), abs=1e-8)
