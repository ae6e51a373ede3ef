from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hedlund.curves import build_curve_system
from hedlund.forms import BumpProfile, bump_eval, build_good_form, form_eval, form_potential, period, sigma
from hedlund.polytope import dot, from_vertices

from .conftest import CUBE


@pytest.fixture(scope="module")
def cube_setup(cube):
    C = build_curve_system(cube.classes)
    bump = BumpProfile(eps=C.eps, rho=C.rho)
    forms = [build_good_form(cube, C, i) for i in range(len(cube.facets))]
    return cube, C, bump, forms


def test_sigma_endpoints_and_symmetry():
    v, _ = sigma(np.array([0.0, 0.5, 1.0]))
    assert v.tolist() == [0.0, 0.5, 1.0]
    t = np.linspace(0.01, 0.99, 50)
    a, da = sigma(t)
    b, db = sigma(1 - t)
    assert np.allclose(a + b, 1.0)
    assert np.allclose(da, db)
    assert np.all(np.diff(a) > 0)


def test_sigma_derivative_by_differences():
    t = np.linspace(0.02, 0.98, 97)
    h = 1e-6
    _, d = sigma(t)
    fd = (sigma(t + h)[0] - sigma(t - h)[0]) / (2 * h)
    assert np.allclose(d, fd, atol=1e-6)


def test_bump_plateaus():
    b = BumpProfile(eps=0.1, rho=0.2)
    assert bump_eval(b, 0.05) == (1.0, 0.0)
    assert bump_eval(b, 0.1) == (1.0, 0.0)
    assert bump_eval(b, 0.25) == (0.0, 0.0)
    z, dz = bump_eval(b, 0.15)
    assert z == pytest.approx(0.5)
    assert dz < 0


def test_tube_covector_orthogonal(cube_setup):
    P, C, _, forms = cube_setup
    for f in forms:
        for j, v in enumerate(C.directions):
            assert float(f.tube_cov[j] @ v) == pytest.approx(0.0, abs=1e-15)
            lv = dot(f.lam_exact, tuple(int(c) for c in v))
            assert f.lam_v[j] == float(lv)


def test_periods_equal_functional(cube_setup):
    P, C, bump, forms = cube_setup
    for f in forms:
        for j in range(C.n):
            assert period(f, C, bump, j) == pytest.approx(f.lam_v[j], abs=1e-9)


def test_periods_skew_polytope():
    P = from_vertices([(2, 1, 0), (0, 1, 2), (1, -1, 1), ("1/2", "3/2", -1)])
    C = build_curve_system(P.classes)
    bump = BumpProfile(eps=C.eps, rho=C.rho)
    for i in (0, 5):
        f = build_good_form(P, C, i)
        for j in range(C.n):
            want = float(dot(P.facets[i].lam, P.classes[j]))
            assert period(f, C, bump, j) == pytest.approx(want, abs=1e-9)


def test_inside_and_outside_values(cube_setup):
    P, C, bump, forms = cube_setup
    f = forms[0]
    for j in range(C.n):
        p = C.curve_point(j, np.array([0.37]))
        got = form_eval(f, C, bump, p)[0]
        v = C.directions[j].astype(float)
        assert np.allclose(got, f.lam_v[j] * v / (v @ v))
    # a point far from every tube sees the constant form
    pts = np.random.default_rng(1).random((4000, 3))
    far = C.nearest_distance(pts) == np.inf
    vals = form_eval(f, C, bump, pts[far])
    assert np.allclose(vals, f.base)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 1, allow_nan=False), min_size=3, max_size=3), st.integers(0, 5))
def test_potential_is_primitive(x, i):
    P = from_vertices(CUBE)
    C = build_curve_system(P.classes, offsets=[(0, 0, 0), (0, .5, 0), (0, .5, .5), (0, 0, .5)])
    bump = BumpProfile(eps=C.eps, rho=C.rho)
    f = build_good_form(P, C, i)
    x = np.array(x)
    h = 1e-6
    grad = np.array([(form_potential(f, C, bump, (x + h * e)[None])[0]
                      - form_potential(f, C, bump, (x - h * e)[None])[0]) / (2 * h) for e in np.eye(3)])
    assert np.allclose(grad, form_eval(f, C, bump, x[None])[0], atol=1e-5)


def test_potential_lattice_increment(cube_setup):
    P, C, bump, forms = cube_setup
    x = np.random.default_rng(5).random((200, 3))
    for f in forms:
        for k in np.eye(3, dtype=int):
            diff = form_potential(f, C, bump, x + k) - form_potential(f, C, bump, x)
            assert np.allclose(diff, float(f.base @ k), atol=1e-12)


def test_lam_exact_is_fraction(cube_setup):
    _, _, _, forms = cube_setup
    assert all(isinstance(c, Fraction) for f in forms for c in f.lam_exact)
