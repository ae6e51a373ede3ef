import numpy as np
import pytest
from scipy import integrate

from hedlund.curves import build_curve_system
from hedlund.errors import SamplingTooCoarse
from hedlund.metric import (ConstantMetric, calibrate_constants, certify_calibration, certify_H1,
                            grid_points, length_factor, polyline_length)


def test_grid_points_order():
    g = grid_points(4, 3)
    assert g.shape == (64, 3)
    assert g[1].tolist() == [0, 0, 0.25]
    assert g[4].tolist() == [0, 0.25, 0]


def test_factor_is_periodic(octa_metric, rng):
    x = rng.random((500, 3))
    k = rng.integers(-3, 4, size=(500, 3))
    assert np.allclose(octa_metric.F(x), octa_metric.F(x + k), rtol=1e-12)


def test_factor_values(octa_metric):
    H = octa_metric
    C = H.curves
    on = C.curve_point(1, np.array([0.1, 0.6]))
    assert np.allclose(H.F(on), H.sq[1] / H.eps_v[1] ** 2)
    pts = np.random.default_rng(2).random((2000, 3))
    far = C.nearest_distance(pts) == np.inf
    assert far.any()
    assert np.allclose(H.F(pts[far]), 1 / H.omega)


@pytest.mark.parametrize("res", [32, 64])
def test_h1_certificate(octa_metric, res):
    rep = certify_H1(octa_metric, res)
    assert rep.passed
    assert rep.on_curve_max_error <= 1e-9
    assert rep.off_curve_worst_ratio < 1


@pytest.mark.parametrize("res", [64, 128])
def test_calibration_certificate(octa_metric, res):
    rep = certify_calibration(octa_metric, res)
    assert rep.passed
    assert max(rep.max_values) <= 1.02
    assert rep.attain_error <= 1e-6


def test_cube_certificates(cube_metric):
    assert certify_H1(cube_metric, 64).passed
    assert certify_calibration(cube_metric, 64).passed


def test_curve_lengths_equal_epsilon(octa_metric, cube_metric):
    for H in (octa_metric, cube_metric):
        for i in range(H.curves.n):
            L = polyline_length(H, H.curves.curve_point(i, np.array([0.0, 1.0])))
            assert L == pytest.approx(H.eps_v[i], abs=1e-4)


def test_polyline_length_matches_quad(octa_metric, rng):
    H = octa_metric
    for _ in range(5):
        a, b = rng.random(3), rng.random(3) + rng.integers(-1, 2, 3)
        d = b - a

        def f(t):
            return length_factor(H, a + t * d) * np.linalg.norm(d)

        want, _ = integrate.quad(f, 0, 1, limit=400, epsabs=1e-10, points=np.linspace(0, 1, 33)[1:-1])
        assert polyline_length(H, np.array([a, b])) == pytest.approx(want, rel=1e-5)


def test_homotopic_loops_not_shorter(octa_metric, rng):
    # any loop in the class of a curve is at least as long as that curve (calibration)
    H = octa_metric
    C = H.curves
    for _ in range(50):
        i = int(rng.integers(C.n))
        x0 = C.curve_point(i, np.array([rng.random()]))[0] + rng.normal(scale=0.05, size=3)
        k = int(rng.integers(2, 8))
        t = np.sort(rng.random(k))
        mids = x0 + t[:, None] * C.directions[i] + rng.normal(scale=0.1, size=(k, 3))
        pts = np.vstack([x0, mids, x0 + C.directions[i]])
        assert polyline_length(H, pts) >= H.eps_v[i] - 1e-4


def test_constant_metric_length():
    M = ConstantMetric(4.0, 3)
    assert polyline_length(M, np.array([[0, 0, 0], [3, 4, 0]])) == pytest.approx(2.5)


def test_sampling_too_coarse(octahedron):
    C = build_curve_system(octahedron.classes)
    with pytest.raises(SamplingTooCoarse):
        calibrate_constants(octahedron, C, res=8)


def test_inflation_below_one_rejected(octahedron):
    C = build_curve_system(octahedron.classes)
    with pytest.raises(ValueError):
        calibrate_constants(octahedron, C, res=64, inflation=0.9)


def test_constants_shape(octa_metric):
    H = octa_metric
    assert H.omega > 1
    assert np.all(H.omega_i > H.eps_v ** 2)
    assert np.all(H.C_i > 0)
    assert H.e_const == pytest.approx(1.01 * max(H.eps_v))
