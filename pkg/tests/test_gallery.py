import math

import numpy as np
import pytest
from scipy.optimize import brentq

from maxrank import gallery
from maxrank import manifold as mf
from maxrank.errors import NonPositiveR
from maxrank.geodesic import distance
from maxrank.reports import Verdict
from maxrank.roughiso import find_ri1_violation
from maxrank.submersion import differential, fiber, horizontal_lift_vector

# frozen with independent root finders (brentq on g, bisection on the foot equation)
Y_AC = {(1.0, 1.0): 1.1461932206205834, (2.0, 5.0): 2.374884212476875}


def test_fiber_point_and_chord():
    for r in (0.0, 0.5, 1.0, 2.0):
        xi = gallery.hyperboloid_fiber_point(gallery.T_B, r)
        np.testing.assert_allclose(xi.x, [0, -math.sqrt(r * r + 1), r], atol=1e-12)
        y = gallery.hyperboloid_fiber_point(gallery.T_BAR, r)
        assert np.linalg.norm(xi.x - y.x) == pytest.approx(gallery.hyperboloid_chord_distance(r), abs=1e-12)
    assert gallery.hyperboloid_chord_distance(0.0) == 2.0


def test_r_epsilon():
    assert gallery.hyperboloid_r_epsilon(1.0) == 7.0
    assert gallery.hyperboloid_r_epsilon(2.0) == 38.0
    assert math.sqrt(50) + math.sqrt(2) == pytest.approx(math.sqrt(2) * 6, abs=1e-12)
    for r in (0.25, 0.5, 1.0, 2.0, 3.0):
        re = gallery.hyperboloid_r_epsilon(r)
        assert re > r
        assert abs(gallery.r_epsilon_residual(r, re)) <= 1e-9
        assert gallery.r_epsilon_bisection(r) == pytest.approx(re, abs=1e-9)
    with pytest.raises(NonPositiveR):
        gallery.hyperboloid_r_epsilon(0.0)
    with pytest.raises(NonPositiveR):
        gallery.hyperboloid_perp_distance(-1.0)


def test_r_epsilon_is_chordal_foot():
    # xi_r minimizes the chord from y_eps over the fiber
    for r in (0.5, 1.0, 2.0):
        y = mf.hyperboloid().embed([gallery.T_BAR, gallery.hyperboloid_r_epsilon(r)]).x
        s = np.linspace(r - 0.5, r + 0.5, 200001)
        pts = np.stack([0 * s, -np.sqrt(s * s + 1), s], axis=-1)
        assert s[np.argmin(np.linalg.norm(pts - y, axis=-1))] == pytest.approx(r, abs=1e-5)


def test_perp_distance():
    assert gallery.hyperboloid_perp_distance(1.0) == pytest.approx(10.392304845413264, abs=1e-12)
    for r in (0.5, 1.0, 2.0):
        re = gallery.hyperboloid_r_epsilon(r)
        y = np.array([0, math.sqrt(re * re + 1), re])
        xi = np.array([0, -math.sqrt(r * r + 1), r])
        assert np.linalg.norm(y - xi) == pytest.approx(gallery.hyperboloid_perp_distance(r), abs=1e-9)
        assert gallery.hyperboloid_perp_distance(r) > gallery.hyperboloid_chord_distance(r)


def test_ri2_witness():
    w = gallery.hyperboloid_ri2_witness(2.0)
    np.testing.assert_allclose(w.x, [0, 1, 0], atol=1e-12)
    assert np.linalg.norm(w.x - gallery.hyperboloid_fiber_point(gallery.T_B, 0).x) == pytest.approx(2.0)
    w = gallery.hyperboloid_ri2_witness(0.5)
    assert w.u[1] == 0.0
    r = gallery.hyperboloid_ri2_radius(3.0)
    assert r == pytest.approx(math.sqrt(5) / 2 + 0.5)
    assert gallery.hyperboloid_perp_distance(r) > gallery.hyperboloid_chord_distance(r) > 3.0
    w = gallery.hyperboloid_ri2_witness(3.0)
    assert w.u[1] == pytest.approx(gallery.hyperboloid_r_epsilon(r))
    # any t_b
    w = gallery.hyperboloid_ri2_witness(3.0, 0.4)
    assert w.u[0] == pytest.approx(0.4 + math.pi)


def test_cylinder_f():
    assert gallery.cylinder_f(0.0) == 0.0
    assert gallery.cylinder_f(math.log(2)) == pytest.approx(1.0)
    for y in (0.3, 1.0, 4.0):
        assert gallery.cylinder_f(-y) == -gallery.cylinder_f(y)
        assert gallery.cylinder_f_inverse(gallery.cylinder_f(y)) == pytest.approx(y)
        assert gallery.cylinder_f_prime(y) == pytest.approx(math.exp(y))
    h = 1e-7
    left = (gallery.cylinder_f(0.0) - gallery.cylinder_f(-h)) / h
    right = (gallery.cylinder_f(h) - gallery.cylinder_f(0.0)) / h
    assert left == pytest.approx(1.0, abs=1e-6) and right == pytest.approx(1.0, abs=1e-6)
    assert gallery.cylinder_f_prime(0.0) == 1.0


def test_cylinder_witness_roots():
    for (A, C), y in Y_AC.items():
        root = gallery.cylinder_ri1_witness(A, C)
        assert root == pytest.approx(y, abs=1e-12)
        assert abs(gallery.cylinder_g(root, A, C)) <= 1e-10
        assert root == pytest.approx(brentq(gallery.cylinder_g, 0, 20, args=(A, C), xtol=1e-15), abs=1e-12)


def test_cylinder_distance_identities():
    M = mf.cylinder()
    for y in (0.5, 2.0, 4.0):
        assert distance(M, [1.0, 0.0], [1.0, y]).upper == pytest.approx(y, abs=1e-12)


@pytest.mark.parametrize("A,C", [(a, c) for a in (1, 2, 3, 5) for c in (0.5, 1, 5, 10)])
def test_counterexample_witnesses_on_grid(A, C):
    cyl = gallery.get_case("cylinder424")
    assert find_ri1_violation(cyl.point_map(), A, C, cyl.box, budget=1).verdict == Verdict.VIOLATED_RI1
    pl = gallery.get_case("plane425")
    assert find_ri1_violation(pl.point_map(), A, C, pl.box, budget=1).verdict == Verdict.VIOLATED_RI1
    eta = gallery.plane_ri1_witness(A, C)
    assert eta / A - C == pytest.approx(1 / A)


def test_plane_witness():
    assert gallery.plane_ri1_witness(1, 1) == 2
    assert gallery.plane_ri1_witness(3, 2) == 7
    assert 7 / 3 - 2 == pytest.approx(1 / 3)
    pairs = gallery.plane_witness_pairs(1, 1)
    assert [p[0][0] for p in pairs] == [-1.0, 0.0, 5.0]


def test_lift_ratio_oracle(hyper):
    for r in np.linspace(0, 3, 7):
        v = horizontal_lift_vector(hyper, [1.0], [0.0, r])
        assert v.norm() == pytest.approx(gallery.hyperboloid_lift_ratio(r), abs=1e-9)
        G = gallery.hyperboloid_lift(r)
        np.testing.assert_allclose(G(np.array([0.0]))[0], gallery.hyperboloid_fiber_point(0.0, r).x, atol=1e-12)


def test_gallery_metric_matches_chart():
    h = mf.hyperboloid()
    for r in (0.0, 1.0, 2.0):
        J = h.jacobian(h.embed([0.0, r]))
        np.testing.assert_allclose(J.T @ J, h.metric_at(h.embed([0.0, r])).gram, atol=1e-10)


def test_cylinder_fibers_are_circles():
    cyl = gallery.cylinder_map()
    f = fiber(cyl, (3.0,))
    U = f.chart_points(np.linspace(0, 6, 7)[:, None])
    np.testing.assert_allclose(U[:, 1], math.log(4.0))
    np.testing.assert_allclose(differential(cyl, U[0]), [[0, 4.0]])


def test_catalog_and_product_case():
    ids = list(gallery.CASES)
    assert "hyperboloid422" in ids and len(ids) >= 4
    for cid in ids:
        e = gallery.get_case(cid).catalog_entry()
        assert set(e["expected"]) == set(e["checks"])
    pc = gallery.product_case("chart = circle", "chart = line")
    assert "thm423" in pc.checks and "thm421" not in pc.checks
    assert pc.box == (None, (-5.0, 5.0))
    with pytest.raises(KeyError):
        gallery.get_case("klein")
