import csv
import io
import json

import numpy as np
import pytest

from hedlund.errors import NotInIntegerCone
from hedlund.stablenorm import (Tolerances, constant_C, default_starts, estimate_f, norm_sequence,
                                sandwich_check)


@pytest.fixture(scope="module")
def octa_consts(octa_graph8):
    return constant_C(octa_graph8)


def test_constant_formula(octa_graph8, octa_consts):
    k = octa_consts
    assert k.kappa == 3
    assert k.C_hat == pytest.approx(2 * k.diam + 3 * (k.D + k.e))
    assert k.e == pytest.approx(1.01)
    assert k.overhead == octa_graph8.overhead


def test_default_starts_unique_and_reduced(octa_graph8):
    S = default_starts(octa_graph8)
    assert np.all((S >= 0) & (S < octa_graph8.res))
    assert len({tuple(s) for s in S.tolist()}) == len(S)


def test_axis_class_is_exact(octa_graph8):
    # a ride along a grid-aligned curve has exactly the curve's length
    for v in ([1, 0, 0], [0, 0, 1], [0, -1, 0]):
        est = estimate_f(octa_graph8, v)
        assert est.value == pytest.approx(1.0, abs=1e-12)
        assert est.lower == 1


@pytest.mark.parametrize("v", [(1, 1, 0), (2, 1, 0), (1, -1, 1)])
def test_reversal_symmetry(octa_graph8, v):
    a = estimate_f(octa_graph8, v).value
    b = estimate_f(octa_graph8, tuple(-c for c in v)).value
    assert a == pytest.approx(b, abs=2e-3)


@pytest.mark.parametrize("v", [(1, 1, 0), (1, 1, 1), (2, -1, 0)])
def test_estimate_above_calibration_bound(octa_graph8, v):
    est = estimate_f(octa_graph8, v)
    assert est.value >= float(est.lower) - 1e-3


def test_doubling_never_more_than_twice(octa_graph8):
    for v in ((1, 1, 0), (1, 1, 1)):
        f1 = estimate_f(octa_graph8, v).value
        f2 = estimate_f(octa_graph8, tuple(2 * c for c in v)).value
        assert f2 <= 2 * f1 + 1e-9


def test_sequence_first_entry(octa_graph8):
    seq = norm_sequence(octa_graph8, (1, 1, 0), 2)
    assert [e.n for e in seq] == [1, 2]
    assert seq[0].f_hat_over_n == estimate_f(octa_graph8, (1, 1, 0)).value
    assert seq[1].f_hat_over_n <= seq[0].f_hat_over_n + 2e-3


def test_workers_do_not_change_results(octa_graph8):
    a = estimate_f(octa_graph8, (2, 1, 1), workers=1)
    b = estimate_f(octa_graph8, (2, 1, 1), workers=4)
    assert a.value == b.value
    assert np.array_equal(a.start, b.start)
    assert np.array_equal(a.path, b.path)


def test_pruning_happens(octa_graph8):
    est = estimate_f(octa_graph8, (1, 1, 1))
    assert est.n_pruned > 0
    assert est.n_starts == len(default_starts(octa_graph8))


def test_zero_vector_rejected(octa_graph8):
    with pytest.raises(ValueError):
        estimate_f(octa_graph8, (0, 0, 0))


def test_sandwich_report(octa_graph8, octa_consts):
    rep = sandwich_check(octa_graph8, (1, 1, 0), 3, C_hat=octa_consts.C_hat)
    assert rep.lambda_w == 2
    assert rep.n_list == [1, 2, 3]
    assert rep.passed
    for f, lo, hi in zip(rep.f_hat_over_n, rep.lower, rep.upper):
        assert lo <= f <= hi
    assert rep.upper[0] == pytest.approx((1 + rep.overhead) * (2 + rep.C_hat) + 1e-2)
    json.dumps(rep.to_dict())


def test_sandwich_csv_round_trip(octa_graph8, octa_consts):
    rep = sandwich_check(octa_graph8, (1, 0, 0), 2, C_hat=octa_consts.C_hat)
    rows = list(csv.DictReader(io.StringIO(rep.to_csv())))
    assert [int(r["n"]) for r in rows] == [1, 2]
    assert [float(r["f_hat_over_n"]) for r in rows] == rep.f_hat_over_n
    assert [float(r["upper"]) for r in rows] == rep.upper
    assert all(r["pass"] == "1" for r in rows)
    assert all(r["res"] == "8" for r in rows)


def test_flat_gap_passes_trend(octa_graph8, octa_consts):
    # w on a curve has zero gap at every n; the absolute slack keeps the trend test meaningful
    rep = sandwich_check(octa_graph8, (1, 0, 0), 2, C_hat=octa_consts.C_hat)
    assert rep.f_hat_over_n == pytest.approx([1.0, 1.0], abs=1e-12)
    assert rep.trend


def test_failing_sandwich_is_reported(octa_graph8):
    tight = Tolerances(low=1e-3, quad=0.0)
    rep = sandwich_check(octa_graph8, (1, 1, 1), 1, C_hat=0.0, tolerances=tight)
    assert not rep.passed
    assert rep.pass_n == [False]


def test_not_in_integer_cone(cube_graph16):
    with pytest.raises(NotInIntegerCone):
        sandwich_check(cube_graph16, (1, 0, 0), 2, C_hat=1.0)
