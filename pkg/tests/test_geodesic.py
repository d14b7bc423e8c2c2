import itertools
import math

import numpy as np
import pytest

from maxrank import gallery
from maxrank import manifold as mf
from maxrank.errors import NotCompact
from maxrank.geodesic import (
    DiscreteCurve,
    ShorteningOptions,
    curve_length,
    diameter_estimate,
    distance,
    flat_gram,
)

from conftest import rng

NO_FLAT = ShorteningOptions(use_flat=False)


def test_curve_length_examples():
    c = mf.circle()
    assert curve_length(DiscreteCurve.from_function(c, lambda t: (0.0 * t + 1.0,), 0, 1, 16)) == pytest.approx(0, abs=1e-15)
    assert curve_length(DiscreteCurve.from_function(c, lambda t: (t,), 0, math.pi)) == pytest.approx(math.pi, abs=1e-6)
    h = mf.hyperboloid()
    lift = DiscreteCurve.from_function(h, lambda t: (t, 0.0 * t + 1.0), 0, 2 * math.pi)
    assert curve_length(lift) == pytest.approx(2 * math.pi * math.sqrt(2), abs=1e-5)


def test_curve_length_from_nodes_only():
    h = mf.hyperboloid()
    t = np.linspace(0, 2 * math.pi, 257)
    c = DiscreteCurve(h, t, np.stack([t, np.ones_like(t)], axis=-1))
    assert curve_length(c) == pytest.approx(2 * math.pi * math.sqrt(2), abs=1e-5)


def test_curve_rejects_bad_params():
    with pytest.raises(ValueError):
        DiscreteCurve(mf.line(), [0.0, 0.0], [[0.0], [1.0]])
    with pytest.raises(ValueError):
        DiscreteCurve(mf.line(), [0.0], [[0.0]])


def test_distance_flat_cylinder():
    cyl = mf.cylinder()
    exact = math.sqrt(math.pi**2 / 4 + 4)
    assert flat_gram(cyl) is not None
    assert distance(cyl, [0, 0], [math.pi / 2, 2]).upper == pytest.approx(exact, abs=1e-12)
    est = distance(cyl, [0, 0], [math.pi / 2, 2], NO_FLAT)
    assert est.upper == pytest.approx(exact, abs=1e-4)
    assert est.lower <= est.upper


def test_distance_circle_antipodes():
    c = mf.circle()
    assert distance(c, [0.0], [math.pi]).upper == pytest.approx(math.pi, abs=1e-12)
    assert distance(c, [0.0], [math.pi], NO_FLAT).upper == pytest.approx(math.pi, abs=1e-6)


def test_distance_wraps_the_short_way():
    c = mf.circle()
    est = distance(c, [0.1], [2 * math.pi - 0.1], NO_FLAT)
    assert est.upper == pytest.approx(0.2, abs=1e-6)


def test_distance_coincident_points():
    est = distance(mf.hyperboloid(), [1.0, 0.5], [1.0 + 2 * math.pi, 0.5])
    assert est.upper == 0.0 and est.lower == 0.0


def test_hyperboloid_not_flat():
    assert flat_gram(mf.hyperboloid()) is None


def test_hyperboloid_antipodes_interval():
    h = mf.hyperboloid()
    est = distance(h, [1.5 * math.pi, 0.0], [0.5 * math.pi, 0.0])
    # waist geodesic is the unit circle, half of it has length pi
    assert est.upper == pytest.approx(math.pi, abs=1e-4)
    assert est.lower >= 2.0 - 1e-12
    assert est.upper >= math.pi - 1e-9


def test_symmetry_and_triangle_inequality():
    h = mf.hyperboloid()
    box = (None, (-3.0, 3.0))
    P = h.sample(6, rng(5), box)
    d = {}
    for i, j in itertools.permutations(range(len(P)), 2):
        d[i, j] = distance(h, P[i], P[j], box=box)
        assert d[i, j].lower <= d[i, j].upper + 1e-12
    for i, j in itertools.combinations(range(len(P)), 2):
        assert abs(d[i, j].upper - d[j, i].upper) <= 1e-6
    for i, j, k in itertools.permutations(range(len(P)), 3):
        assert d[i, k].upper <= d[i, j].upper + d[j, k].upper + 1e-4


def test_lower_bound_uses_intrinsic_information():
    h = mf.hyperboloid()
    est = distance(h, [0.0, 0.0], [math.pi, 0.0], box=(None, (-1.0, 1.0)))
    assert est.lower > 2.0


def test_diameter_examples():
    c = mf.circle()
    d = diameter_estimate(c, 64, seed=0)
    assert d.upper == pytest.approx(math.pi, abs=0.05)
    assert d.lower <= d.upper
    f = gallery.cylinder_map()
    from maxrank.submersion import fiber

    fm = fiber(f, (3.0,)).manifold()
    assert diameter_estimate(fm, 64, seed=1).upper == pytest.approx(math.pi, abs=0.05)
    two = diameter_estimate(mf.plane_yz(), points=np.array([[0.0, 0.0], [3.0, 4.0]]))
    assert two.upper == pytest.approx(5.0)
    with pytest.raises(NotCompact):
        diameter_estimate(mf.line(), 10)


def test_distance_report_serializes():
    import json

    est = distance(mf.hyperboloid(), [0.0, 0.0], [1.0, 1.0], box=(None, (-3, 3)))
    rec = est.to_dict()
    assert set(rec) >= {"endpoints", "lower", "upper", "iterations", "converged", "truncation_box"}
    json.dumps(rec)
