import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lortori.causal import estimate_cone
from lortori.lines import convergents, find_periodic_line, ray_toward, rational_vector
from lortori.metric import conformal, flat, sheared

GOLDEN = (1 + math.sqrt(5)) / 2


def test_flat_vertical_line():
    line = find_periodic_line(flat(), (0, 0), (0, 1))
    assert line.period_length == pytest.approx(1.0, abs=1e-10)
    assert line.closure_defect < 1e-12


def test_flat_tilted_line():
    line = find_periodic_line(flat(), (0, 0), (1, 2))
    assert line.period_length == pytest.approx(math.sqrt(3), abs=1e-9)
    assert np.allclose(line.point_at(line.period_length), (1, 2), atol=1e-8)


def test_flat_outside_cone():
    with pytest.raises(ValueError):
        find_periodic_line(flat(), (0, 0), (1, 0))


def test_non_primitive_rejected():
    with pytest.raises(ValueError):
        find_periodic_line(flat(), (0, 0), (0, 2))


def test_sheared_line_closes():
    spec = sheared(0.2)
    line = find_periodic_line(spec, (0, 0), (1, 3))
    assert np.allclose(line.point_at(line.period_length), line.base + (1, 3), atol=1e-8)


def test_rational_vector():
    assert rational_vector(np.array([1, 2]) / math.sqrt(5)) == (1, 2)
    assert rational_vector((1 / GOLDEN, 1) / np.hypot(1 / GOLDEN, 1)) is None


@given(st.fractions(min_value=Fraction(-1), max_value=Fraction(1), max_denominator=40))
def test_convergents_end_at_rational(q):
    cs = convergents(float(q), max_norm=200)
    h, d = cs[-1]
    assert Fraction(h, d) == q


def test_flat_vertical_ray():
    r = ray_toward(flat(), (0, 0), (0, 1), 20.0)
    assert np.allclose(r.direction.alpha, (0, 1), atol=1e-12)


def test_flat_golden_ray():
    alpha = np.array([1, GOLDEN]) / math.hypot(1, GOLDEN)
    r = ray_toward(flat(), (0, 0), alpha, 100.0, max_norm=120)
    assert np.linalg.norm(r.direction.alpha - alpha) < 1e-9


def test_conformal_ray_direction():
    spec = conformal(0.1)
    alpha = np.array([1, 2]) / math.sqrt(5)
    r = ray_toward(spec, (0, 0), alpha, 100.0)
    assert np.linalg.norm(r.direction.alpha - alpha) < 1e-3
