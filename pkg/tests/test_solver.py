import math

import numpy as np
import pytest
from scipy import integrate, optimize

from hedlund.errors import OutOfMemoryBudget, TargetOutsideBox
from hedlund.metric import ConstantMetric
from hedlund.solver import backend
from hedlund.solver.grid import CoverBox, build_grid, edge_weight_table
from hedlund.solver.paths import (diameter_upper, distance_field, line_gap_D, pairwise_gaps,
                                  shortest_distance, shortest_distance_nodes)
from hedlund.solver.stencil import stencil_offsets, stencil_overhead

compiled = pytest.mark.skipif(backend.BACKEND != "compiled", reason="compiled kernel not built")


@pytest.fixture(scope="module")
def flat8():
    return build_grid(ConstantMetric(1.0, 3), 8, 2)


def stencil_cost(offs, u):
    """Cheapest nonnegative combination of stencil steps reaching u (linear program)."""
    norms = np.linalg.norm(offs, axis=1)
    r = optimize.linprog(norms, A_eq=offs.T.astype(float), b_eq=u, bounds=(0, None), method="highs")
    return r.fun


@pytest.mark.parametrize("R, count", [(1, 26), (2, 98), (3, 290)])
def test_stencil_counts(R, count):
    offs = stencil_offsets(3, R)
    assert len(offs) == count
    assert all(math.gcd(*map(abs, o)) == 1 for o in offs.tolist())


def test_overhead_matches_linear_program(rng):
    for R in (1, 2):
        offs = stencil_offsets(3, R)
        u = rng.normal(size=(300, 3))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        worst = max(stencil_cost(offs, x) for x in u) - 1
        eta = stencil_overhead(3, R)
        assert worst <= eta + 1e-9
        assert worst >= 0.8 * eta


def test_overhead_decreases():
    vals = [stencil_overhead(3, R) for R in (1, 2, 3)]
    assert vals[0] > vals[1] > vals[2]
    assert vals[1] == pytest.approx(0.0494, abs=1e-4)


def test_flat_distance_ratio(flat8, rng):
    eta = flat8.overhead
    for _ in range(100):
        G = rng.integers(-8, 9, size=3)
        if not G.any():
            continue
        d = shortest_distance_nodes(flat8, np.zeros(3, dtype=np.int64), G).distance
        ratio = d / (np.linalg.norm(G) / 8)
        assert 0.999 <= ratio <= 1 + eta + 1e-12


def test_constant_factor_scales(rng):
    g = build_grid(ConstantMetric(4.0, 3), 8, 2)
    d = shortest_distance_nodes(g, np.zeros(3, dtype=np.int64), np.array([8, 0, 0])).distance
    assert d == pytest.approx(0.5)


def test_edge_weights_match_quad(octa_metric):
    res, R = 8, 2
    table = edge_weight_table(octa_metric, res, R)
    offs = stencil_offsets(3, R)
    pick = np.random.default_rng(3)
    for _ in range(20):
        node = int(pick.integers(res ** 3))
        k = int(pick.integers(len(offs)))
        a = np.array(np.unravel_index(node, (res,) * 3)) / res
        d = offs[k] / res

        def f(t):
            return float(octa_metric.length_factor((a + t * d)[None])[0])

        want, _ = integrate.quad(f, 0, 1, limit=200, epsabs=1e-12, points=np.linspace(0, 1, 17)[1:-1])
        assert table[node, k] == pytest.approx(want * np.linalg.norm(d), rel=1e-5)


def test_weight_table_undirected(octa_graph8):
    g = octa_graph8
    res = g.res
    offs = g.offsets.tolist()
    idx = {tuple(o): k for k, o in enumerate(offs)}
    for node in range(0, res ** 3, 37):
        c = np.array(np.unravel_index(node, (res,) * 3))
        for k, o in enumerate(offs):
            end = np.ravel_multi_index(tuple((c + o) % res), (res,) * 3)
            assert g.wtable[end, idx[tuple(-np.array(o))]] == g.wtable[node, k]


def test_symmetry_and_periodicity(octa_graph8, rng):
    g = octa_graph8
    for _ in range(15):
        a = rng.integers(0, 8, 3)
        b = a + rng.integers(-10, 11, 3)
        k = rng.integers(-3, 4, 3) * 8
        d1 = shortest_distance_nodes(g, a, b).distance
        d2 = shortest_distance_nodes(g, b, a).distance
        d3 = shortest_distance_nodes(g, a + k, b + k).distance
        assert d1 == pytest.approx(d2, abs=1e-12)
        assert d1 == pytest.approx(d3, abs=1e-12)


def test_triangle_inequality(octa_graph8, rng):
    g = octa_graph8
    for _ in range(15):
        a, b, c = (rng.integers(-8, 9, 3) for _ in range(3))
        ab = shortest_distance_nodes(g, a, b).distance
        bc = shortest_distance_nodes(g, b, c).distance
        ac = shortest_distance_nodes(g, a, c).distance
        assert ac <= ab + bc + 1e-12


def test_heuristic_does_not_change_distance(octa_graph8, rng):
    g = octa_graph8
    for _ in range(10):
        a = rng.integers(0, 8, 3)
        b = a + rng.integers(-12, 13, 3)
        box = CoverBox.around([a, b], 8, 2, 1)
        d1 = shortest_distance_nodes(g, a, b, box=box, heuristic=True).distance
        d2 = shortest_distance_nodes(g, a, b, box=box, heuristic=False).distance
        assert d1 == pytest.approx(d2, abs=1e-12)


@compiled
def test_compiled_and_python_kernels_agree(octa_graph8, rng):
    g = octa_graph8
    py, cy = backend.get_search("python"), backend.get_search("compiled")
    for _ in range(4):
        a = rng.integers(0, 8, 3)
        b = a + rng.integers(-8, 9, 3)
        box = CoverBox.around([a, b], 8, 2, 1)
        for heur in (True, False):
            d1 = shortest_distance_nodes(g, a, b, box=box, heuristic=heur, kernel=py).distance
            d2 = shortest_distance_nodes(g, a, b, box=box, heuristic=heur, kernel=cy).distance
            assert d1 == d2
    box = CoverBox((0, 0, 0), (1, 1, 1), 8, 2)
    f1 = distance_field(g, [[3, 3, 3]], box, kernel=py).values
    f2 = distance_field(g, [[3, 3, 3]], box, kernel=cy).values
    assert np.array_equal(f1, f2)


def test_padding_never_increases_distance(octa_graph8):
    g = octa_graph8
    a, b = np.array([0, 0, 0]), np.array([13, 5, 2])
    prev = math.inf
    for pad in (0, 1, 2, 3):
        box = CoverBox.around([a, b], 8, 2, pad)
        d = shortest_distance_nodes(g, a, b, box=box).distance
        assert d <= prev + 1e-12
        prev = d


def test_calibration_lower_bound(octa_graph8, rng):
    g = octa_graph8
    for _ in range(20):
        a = rng.integers(0, 8, 3)
        b = a + rng.integers(-16, 17, 3)
        d = shortest_distance_nodes(g, a, b).distance
        gain = float(np.max(g.potential_at(b) - g.potential_at(a)))
        assert d >= gain - 1e-9


def test_flat_diameter_bound(flat8):
    eta = flat8.overhead
    diam = diameter_upper(flat8)
    assert diam <= 2 * (math.sqrt(3) / 2) * (1 + eta) ** 2 + 1e-12
    assert diam >= 2 * (math.sqrt(3) / 2) - 1e-12


def test_line_gaps_symmetric(octa_graph8):
    M = pairwise_gaps(octa_graph8, octa_graph8.metric.curves)
    assert np.allclose(M, M.T, atol=1e-12)
    assert np.all(np.diag(M) == 0)
    D = line_gap_D(octa_graph8, octa_graph8.metric.curves)
    assert D == pytest.approx(M.max() * (1 + octa_graph8.overhead))


def test_memory_budget(octa_metric):
    g = build_grid(octa_metric, 8, 2, budget=1000)
    with pytest.raises(OutOfMemoryBudget):
        shortest_distance(g, [0, 0, 0], [1, 1, 1])


def test_target_outside_box(octa_graph8):
    box = CoverBox((0, 0, 0), (1, 1, 1), 8, 2)
    with pytest.raises(TargetOutsideBox):
        shortest_distance_nodes(octa_graph8, np.zeros(3, dtype=np.int64), np.array([20, 0, 0]), box=box)
    with pytest.raises(TargetOutsideBox):
        distance_field(octa_graph8, [[20, 0, 0]], box)


def test_bound_cutoff(octa_graph8):
    g = octa_graph8
    a, b = np.zeros(3, dtype=np.int64), np.array([16, 8, 0])
    d = shortest_distance_nodes(g, a, b).distance
    assert shortest_distance_nodes(g, a, b, bound=d * 0.99) is None
    r = shortest_distance_nodes(g, a, b, bound=d * 1.01)
    assert r.distance == d


def test_path_endpoints(octa_graph8):
    d, path = shortest_distance(octa_graph8, [0.1, 0.1, 0.1], [1.6, 0.4, 0.9])
    assert np.allclose(path[0], np.rint(np.array([0.1, 0.1, 0.1]) * 8) / 8)
    assert np.allclose(path[-1], np.rint(np.array([1.6, 0.4, 0.9]) * 8) / 8)
    steps = np.rint(np.diff(path, axis=0) * 8).astype(int)
    allowed = {tuple(o) for o in octa_graph8.offsets.tolist()}
    assert all(tuple(s) in allowed for s in steps.tolist())
