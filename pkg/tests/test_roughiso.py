import math

import numpy as np
import pytest

from maxrank import gallery
from maxrank import manifold as mf
from maxrank.errors import FullnessFailed, InsufficientSamples
from maxrank.reports import Verdict
from maxrank.roughiso import (
    MetricSampleCloud,
    PointMap,
    ViolationTrend,
    check_ri2_fullness,
    compose,
    find_ri1_violation,
    fit_ri1,
    nested_boxes,
    nested_clouds,
    rough_inverse,
    sample_cloud_points,
    theorem421_epsilon,
    theorem423_constants,
)
from maxrank.submersion import fiber

from conftest import rng

TORUS_MAP = gallery.product_map(mf.circle(), mf.circle(), "torus")


def torus_cloud(n=30, seed=0):
    M = TORUS_MAP.total
    return MetricSampleCloud.build(M, sample_cloud_points(M, None, n, seed))


def test_cloud_invariants():
    c = torus_cloud()
    np.testing.assert_array_equal(c.lower, c.lower.T)
    np.testing.assert_array_equal(c.upper, c.upper.T)
    assert np.all(np.diag(c.upper) == 0) and np.all(c.lower <= c.upper)
    assert len({tuple(p) for p in np.round(c.points, 10)}) == c.size


def test_identity_fit():
    c = torus_cloud()
    fit = fit_ri1(PointMap.identity(c.space), c)
    assert fit.A == 1.0 and fit.C <= 1e-6 and fit.violations == 0


def test_identity_fit_curved():
    h = mf.hyperboloid()
    box = (None, (-1.0, 1.0))
    c = MetricSampleCloud.build(h, sample_cloud_points(h, box, 6, 0, grid=3), box)
    fit = fit_ri1(PointMap.identity(h), c)
    assert fit.A == 1.0 and fit.C <= 1e-6


def test_product_projection_fit():
    c = torus_cloud(40, 1)
    fit = fit_ri1(PointMap.from_submersion(TORUS_MAP), c)
    assert fit.A == 1.0 and fit.C <= math.pi + 1e-6 and fit.violations == 0


def test_insufficient_samples():
    M = mf.circle()
    c = MetricSampleCloud.build(M, np.linspace(0, 1, 5)[:, None])
    with pytest.raises(InsufficientSamples):
        fit_ri1(PointMap.identity(M), c)


def test_cylinder_trend_and_plane_trend():
    case = gallery.get_case("cylinder424")
    clouds = nested_clouds(case.total, case.box, 24, 0)
    assert [c.box[1] for c in clouds] == [(-5.0, 5.0), (-7.5, 7.5), (-11.25, 11.25)]
    res = fit_ri1(case.point_map(), clouds)
    assert isinstance(res, ViolationTrend)
    Cs = res.C_by_A[2.0]
    assert Cs[0] < Cs[1] < Cs[2]
    plane = gallery.get_case("plane425")
    res = fit_ri1(plane.point_map(), nested_clouds(plane.total, plane.box, 24, 0))
    assert isinstance(res, ViolationTrend)


def test_product_on_nested_boxes_has_no_trend():
    case = gallery.get_case("product-s1-r")
    res = fit_ri1(case.point_map(), nested_clouds(case.total, case.box, 24, 0))
    assert not isinstance(res, ViolationTrend)
    assert res.A == 1.0 and res.C <= math.pi + 1e-6


def test_find_violation_cylinder():
    case = gallery.get_case("cylinder424")
    rep = find_ri1_violation(case.point_map(), 2.0, 5.0, case.box)
    assert rep.verdict == Verdict.VIOLATED_RI1
    y = gallery.cylinder_ri1_witness(2.0, 5.0) + 1.0
    assert rep.witness["q"][1] == pytest.approx(y)
    assert rep.witness["d"][0] > 2.0 * rep.witness["delta"][1] + 5.0


def test_find_violation_plane():
    case = gallery.get_case("plane425")
    rep = find_ri1_violation(case.point_map(), 1.0, 1.0, case.box)
    assert rep.verdict == Verdict.VIOLATED_RI1
    assert rep.witness["p"][1] == pytest.approx(2.0)
    assert rep.witness["bound"].startswith("lower")


def test_find_violation_by_search_without_generator():
    case = gallery.get_case("plane425")
    phi = PointMap.from_submersion(case.submersion)
    rep = find_ri1_violation(phi, 1.0, 1.0, case.box, seed=3)
    assert rep.verdict == Verdict.VIOLATED_RI1
    assert rep.witness["source"] in ("random", "coordinate-ascent")


def test_identity_not_found():
    M = mf.cylinder()
    rep = find_ri1_violation(PointMap.identity(M), 1.0, 0.5, (None, (-3.0, 3.0)), budget=60)
    assert rep.verdict == Verdict.NOT_FOUND
    with pytest.raises(ValueError):
        find_ri1_violation(PointMap.identity(M), 0.5, 1.0)


def test_fullness_identity_and_monotone():
    M = mf.circle()
    dom = np.linspace(0, 2 * math.pi, 64, endpoint=False)[:, None]
    tgt = M.sample(40, rng(0))
    phi = PointMap.identity(M)
    spacing = 2 * math.pi / 64
    assert check_ri2_fullness(phi, dom, tgt, spacing).verdict == Verdict.SATISFIED
    prev = True
    for eps in (0.01, 0.03, 0.05, 0.1, 0.5):
        ok = check_ri2_fullness(phi, dom, tgt, eps).verdict == Verdict.SATISFIED
        assert ok or not prev or eps == 0.01
        prev = ok
    with pytest.raises(InsufficientSamples):
        check_ri2_fullness(phi, np.zeros((0, 1)), tgt, 1.0)


@pytest.mark.parametrize("eps", [2.0, 3.0, 6.0])
def test_fullness_hyperboloid_violated(eps, hyper):
    w = gallery.hyperboloid_ri2_witness(eps)
    f = fiber(hyper, (gallery.T_B,))
    R = abs(w.u[1]) + 1
    params = np.linspace(-R, R, 201)[:, None]
    rep = check_ri2_fullness(PointMap.inclusion(f), params, w.u[None, :], eps, (None, (-R, R)))
    assert rep.verdict == Verdict.VIOLATED_RI2
    assert rep.details["max_lower"] >= eps


def test_rough_inverse_identity():
    M = mf.circle()
    P = np.linspace(0, 2 * math.pi, 32, endpoint=False)[:, None]
    inv = rough_inverse(PointMap.identity(M), P, P, 0.1)
    assert np.max(inv.forward_displacement) == 0 and np.max(inv.backward_displacement) == 0
    np.testing.assert_allclose(inv.map(P), P)


def test_rough_inverse_product_bounds():
    M, B = TORUS_MAP.total, TORUS_MAP.base
    P = sample_cloud_points(M, None, 30, 2, grid=6)
    Q = B.sample(20, rng(3))
    eps = 0.5
    phi = PointMap.from_submersion(TORUS_MAP)
    inv = rough_inverse(phi, P, Q, eps)
    assert np.max(inv.forward_displacement) <= math.pi + 2 * eps
    assert np.max(inv.forward_displacement) <= inv.forward_bound
    assert np.max(inv.backward_displacement) <= inv.backward_bound
    comp = compose(inv.map, phi)
    cloud = MetricSampleCloud.build(M, P)
    fit = fit_ri1(comp, cloud)
    assert fit.A <= 1.0 and math.isfinite(fit.C) and fit.violations == 0


def test_rough_inverse_needs_fullness():
    M = mf.circle()
    with pytest.raises(FullnessFailed):
        rough_inverse(PointMap.identity(M), [[0.0], [0.1]], [[math.pi]], 0.5)


def test_composition_of_table_maps():
    M = mf.circle()
    P = np.linspace(0, 2 * math.pi, 24, endpoint=False)[:, None]
    double = PointMap.table(M, M, P, (P * 2) % (2 * math.pi), "double")
    Q = np.unique(np.round(double(P), 12), axis=0)
    shift = PointMap.table(M, M, Q, Q + 0.3, "shift")
    f1 = fit_ri1(double, MetricSampleCloud.build(M, P))
    f2 = fit_ri1(shift, MetricSampleCloud.build(M, Q))
    comp = compose(shift, double)
    fc = fit_ri1(comp, MetricSampleCloud.build(M, P))
    assert fc.A <= f1.A * f2.A and math.isfinite(fc.C) and fc.violations == 0


def test_theorem_constants():
    assert theorem421_epsilon(1, 0.1, math.pi) == pytest.approx(math.pi + 0.1)
    assert theorem421_epsilon(1, 0.3, 0.0) == 0.3
    assert theorem421_epsilon(2, 1, math.pi) == pytest.approx(2 * math.pi + 1)
    assert theorem423_constants(1, 0.5, math.pi) == (1.0, pytest.approx(math.pi + 0.5))
    assert theorem423_constants(2, 1, 1) == (2.0, 2.0)
    with pytest.raises(ValueError):
        theorem423_constants(0.5, 1, 1)


def test_fiber_inclusion_torus_full_at_theorem_epsilon():
    f = fiber(TORUS_MAP, (0.0,))
    params = np.linspace(0, 2 * math.pi, 128, endpoint=False)[:, None]
    tgt = TORUS_MAP.total.sample(60, rng(4))
    eps = theorem421_epsilon(1.0, 0.1, math.pi)
    rep = check_ri2_fullness(PointMap.inclusion(f), params, tgt, eps)
    assert rep.verdict == Verdict.SATISFIED and rep.details["margin"] >= 0


def test_report_csv_rows():
    case = gallery.get_case("cylinder424")
    rep = find_ri1_violation(case.point_map(), 1.0, 1.0, case.box)
    rows = rep.csv_rows()
    assert rows and set(rows[0]) >= {"p", "q", "delta", "d", "bound"}


def test_nested_boxes_schedule():
    assert nested_boxes((None, (-2.0, 2.0))) == [(None, (-2.0, 2.0)), (None, (-3.0, 3.0)), (None, (-4.5, 4.5))]
