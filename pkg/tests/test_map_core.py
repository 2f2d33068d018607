import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from saddlescope.map_core import (MapSpecError, composition, epsilon_sign, format_map_spec, henon,
                                  parse_map_spec, to_classical_chart)

coord = st.floats(-10, 10, allow_nan=False)
small = st.floats(-5, 5, allow_nan=False)


def classical(a, b, x, y):
    return a - b * y - x * x, x


def test_henon_structure(f6):
    assert f6.degree == 2
    assert f6.orientation == 1
    assert f6.determinant == pytest.approx(0.8)
    assert henon(6.0, -0.5).orientation == -1


def test_degenerate_henon_rejected():
    with pytest.raises(MapSpecError):
        henon(2.0, 0.0)


def test_eval_by_substitution(f6):
    assert f6(0.0, 0.0) == (0.0, -6.0)
    assert f6(1.0, 1.0) == pytest.approx((1.0, -5.8))
    x, y = f6(*f6(0.0, 0.0))
    assert (x, y) == (-6.0, 30.0)


def test_eval_inverse_example(f6):
    assert f6.eval_inverse(1.0, -5.8) == pytest.approx((1.0, 1.0))


def test_composition_degree_and_inverse_order():
    cubic = ((0.0, 0.0, 0.0, 1.0), 0.5)
    quad = ((-3.0, 0.0, 1.0), 2.0)
    f = composition([cubic, quad])
    assert f.degree == 6
    assert f.determinant == pytest.approx(1.0)
    g1 = composition([cubic])
    g2 = composition([quad])
    x, y = f(0.3, -0.7)
    # (f1 f2)^-1 = f2^-1 f1^-1
    assert g2.eval_inverse(*g1.eval_inverse(x, y)) == pytest.approx((0.3, -0.7), abs=1e-12)


def test_epsilon_sign_examples():
    plus = composition([((0, 0, 0, 1), 1.0)])
    minus = composition([((0, 0, 0, -1), 1.0)])
    assert epsilon_sign(henon(3.0, 0.2)) == 1
    assert epsilon_sign(plus) == 1
    assert epsilon_sign(minus) == -1
    assert epsilon_sign(plus.compose(minus)) == -1


@given(coord, coord)
def test_inverse_round_trip(x, y):
    f = henon(6.0, 0.8)
    assert f.eval_inverse(*f(x, y)) == pytest.approx((x, y), abs=1e-12)
    assert f(*f.eval_inverse(x, y)) == pytest.approx((x, y), abs=1e-12)


@given(small, small, st.floats(-2, 2), st.floats(-1.5, 1.5).filter(lambda b: abs(b) > 1e-3))
def test_composition_round_trip(x, y, c, s):
    f = composition([((c, 1.0, 0.0, -1.0), s), ((-1.0, 0.0, 1.0), 0.7)])
    u, v = f(x, y)
    if max(abs(u), abs(v)) < 1e6:
        back = f.eval_inverse(u, v)
        scale = 1 + max(abs(u), abs(v))
        assert back == pytest.approx((x, y), abs=1e-12 * scale * 1e3)


@given(coord, coord, st.floats(0.1, 10), st.floats(-1.5, 1.5).filter(lambda b: abs(b) > 1e-3))
def test_determinant_constant(x, y, a, b):
    J = henon(a, b).jacobian(x, y)
    assert np.linalg.det(J) == pytest.approx(b, rel=1e-9, abs=1e-12)


@given(small, small)
def test_jacobian_matches_finite_differences(x, y):
    f = composition([((0.5, -1.0, 0.0, 1.0), 0.4), ((-2.0, 0.0, 1.0), -0.9)])
    J = f.jacobian(x, y)
    h = 1e-6
    fd = np.empty((2, 2))
    for j, (dx, dy) in enumerate(((h, 0.0), (0.0, h))):
        p = np.array(f(x + dx, y + dy))
        m = np.array(f(x - dx, y - dy))
        fd[:, j] = (p - m) / (2 * h)
    assert np.allclose(J, fd, rtol=1e-5, atol=1e-4 * (1 + np.abs(J).max()))


@given(small, small, st.floats(0.5, 8), st.floats(-1, 1).filter(lambda b: abs(b) > 1e-3))
def test_classical_chart_conjugacy(x, y, a, b):
    f = henon(a, b)
    lhs = classical(a, b, *to_classical_chart(x, y))
    rhs = to_classical_chart(*f(x, y))
    assert lhs == pytest.approx(rhs, abs=1e-9)


def test_spec_round_trip():
    f = composition([((1.5, 0.0, 0.0, -1.0), 0.25), ((-4.0, 0.0, 1.0), 2.0)])
    lines = dict(line.split("=", 1) for line in format_map_spec(f).splitlines())
    g = parse_map_spec(lines)
    assert g.factors == f.factors
    h = parse_map_spec({"family": "henon", "a": "6", "b": "0.8"})
    assert h(1.0, 1.0) == henon(6.0, 0.8)(1.0, 1.0)


@pytest.mark.parametrize("items", [
    {"family": "henon", "a": "6"},
    {"family": "nope"},
    {"family": "composition", "factors": "1", "factor.1.coeffs": "1,2", "factor.1.shear": "1"},
    {"family": "composition", "factors": "1", "factor.1.coeffs": "0,0,1", "factor.1.shear": "0"},
    {"family": "henon", "a": "x", "b": "1"},
])
def test_bad_spec(items):
    with pytest.raises(MapSpecError):
        parse_map_spec(items)


def test_jet_matches_curve_image(f6):
    # push the parabola t -> (t, t^2) through f and compare with differentiation
    t = 0.4
    pt = (np.array([t]), np.array([t * t]))
    (x, y), (dx, dy), (ddx, ddy) = f6.jet(pt, (np.array([1.0]), np.array([2 * t])),
                                         (np.array([0.0]), np.array([2.0])))
    h = 1e-4
    c = lambda s: np.array(f6(s, s * s))
    d1 = (c(t + h) - c(t - h)) / (2 * h)
    d2 = (c(t + h) - 2 * c(t) + c(t - h)) / h ** 2
    assert np.allclose([dx[0], dy[0]], d1, atol=1e-6)
    assert np.allclose([ddx[0], ddy[0]], d2, atol=1e-4)
    assert math.isclose(x[0], c(t)[0]) and math.isclose(y[0], c(t)[1])
