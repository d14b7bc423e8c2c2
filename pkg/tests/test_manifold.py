import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxrank import manifold as mf
from maxrank.errors import DescriptorError, DomainViolation
from maxrank.manifold import inner_product

from conftest import GALLERY_MANIFOLDS, rng


def test_embed_examples():
    np.testing.assert_allclose(mf.circle().embed([0.0]).x, [1, 0, 0], atol=1e-15)
    np.testing.assert_allclose(mf.hyperboloid().embed([1.5 * math.pi, 1.0]).x, [0, -math.sqrt(2), 1], atol=1e-12)
    np.testing.assert_allclose(mf.cylinder().embed([0.0, 5.0]).x, [1, 5, 0], atol=1e-15)


def test_periodic_canonicalization():
    c = mf.circle()
    p = c.embed([2 * math.pi + 0.5])
    assert p.u[0] == pytest.approx(0.5)
    np.testing.assert_allclose(c.embed([-0.5]).x, c.embed([2 * math.pi - 0.5]).x, atol=1e-12)


def test_domain_violation():
    seg = mf.EmbeddedManifold("segment", 1, 2, lambda u: (u[0], 0.0 * u[0]), domain=((0.0, 1.0),))
    seg.embed([0.5])
    for bad in ([1.5], [-0.1]):
        with pytest.raises(DomainViolation):
            seg.embed(bad)
    with pytest.raises(DomainViolation):
        mf.hyperboloid().embed([0.0, np.inf])
    with pytest.raises(DomainViolation):
        mf.hyperboloid().embed([0.0])


def test_jacobian_examples():
    np.testing.assert_allclose(mf.circle().jacobian(mf.circle().embed([0.0]))[:, 0], [0, 1, 0], atol=1e-15)
    h = mf.hyperboloid()
    J = h.jacobian(h.embed([0.0, 0.0]))
    np.testing.assert_allclose(J, [[0, 0], [1, 0], [0, 1]], atol=1e-15)
    J = h.jacobian(h.embed([0.0, 1.0]))
    np.testing.assert_allclose(J[:, 1], [1 / math.sqrt(2), 0, 1], atol=1e-15)


@pytest.mark.parametrize("name", sorted(GALLERY_MANIFOLDS))
def test_jacobian_matches_finite_differences(name):
    make, box = GALLERY_MANIFOLDS[name]
    m = make()
    U = m.sample(20, rng(1), box)
    J = m.jacobian_batch(U)
    h = 1e-6
    for i in range(m.intrinsic_dim):
        e = np.zeros(m.intrinsic_dim)
        e[i] = h
        fd = (m.evaluate(U + e) - m.evaluate(U - e)) / (2 * h)
        scale = np.maximum(np.linalg.norm(J[:, :, i], axis=-1, keepdims=True), 1.0)
        assert np.max(np.abs(fd - J[:, :, i]) / scale) <= 1e-7


def test_metric_examples():
    h = mf.hyperboloid()
    for r in (0.0, 0.5, 1.0, 2.0):
        G = h.metric_at(h.embed([0.3, r])).gram
        np.testing.assert_allclose(G, np.diag([r * r + 1, (2 * r * r + 1) / (r * r + 1)]), atol=1e-12)
    assert mf.circle().metric_at(mf.circle().embed([1.0])).gram == pytest.approx(np.eye(1))
    np.testing.assert_allclose(mf.plane_yz().metric_at(mf.plane_yz().embed([1.0, 2.0])).gram, np.eye(2))


@pytest.mark.parametrize("name", sorted(GALLERY_MANIFOLDS))
def test_metric_spd_on_1000_points(name):
    make, box = GALLERY_MANIFOLDS[name]
    m = make()
    G = m.gram_batch(m.sample(1000, rng(2), box))
    np.testing.assert_allclose(G, np.swapaxes(G, 1, 2), atol=1e-14)
    assert np.min(np.linalg.eigvalsh(G)) > 1e-9


def test_inner_product_examples():
    h = mf.hyperboloid()
    p = h.embed([0.0, 1.0])
    dt, dr = h.tangent_vector(p, [1, 0]), h.tangent_vector(p, [0, 1])
    assert abs(inner_product(dt, dr)) <= 1e-14
    assert inner_product(dt, h.tangent_vector(p, [0, 0])) == 0.0
    pl = mf.plane_yz()
    v = pl.tangent_vector(pl.embed([0.0, 0.0]), [0, 1])
    assert inner_product(v, v) == pytest.approx(1.0)


def test_norm_via_gram_matches_ambient():
    h = mf.hyperboloid()
    r = rng(3)
    for u in h.sample(50, r, (None, (-3, 3))):
        p = h.embed(u)
        c = r.normal(size=2)
        assert h.metric_at(p).norm(c) == pytest.approx(h.tangent_vector(p, c).norm(), rel=1e-10)


def test_tangent_project():
    c = mf.circle()
    p = c.embed([0.0])
    assert c.tangent_project(p, [1.0, 0.0, 0.0]).norm() <= 1e-14
    np.testing.assert_allclose(c.tangent_project(p, [0.0, 2.0, 0.0]).ambient_components, [0, 2, 0], atol=1e-14)
    h = mf.hyperboloid()
    p = h.embed([0.4, 1.2])
    a = rng(4).normal(size=3)
    v = h.tangent_project(p, a)
    J = h.jacobian(p)
    assert np.max(np.abs(J.T @ (a - v.ambient_components))) <= 1e-10
    w = h.tangent_project(p, v.ambient_components)
    np.testing.assert_allclose(w.ambient_components, v.ambient_components, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 2 * math.pi), st.floats(-3, 3), st.lists(st.floats(-10, 10), min_size=3, max_size=3))
def test_projection_idempotent(t, r, a):
    h = mf.hyperboloid()
    p = h.embed([t, r])
    v = h.tangent_project(p, a)
    w = h.tangent_project(p, v.ambient_components)
    assert np.max(np.abs(w.ambient_components - v.ambient_components)) <= 1e-12 * (1 + np.linalg.norm(a))


def test_descriptor():
    m = mf.manifold_from_descriptor("chart = circle  # unit\nradius = 2\n")
    np.testing.assert_allclose(m.embed([0.0]).x, [2, 0, 0])
    with pytest.raises(DescriptorError):
        mf.manifold_from_descriptor("chart = klein_bottle")
    with pytest.raises(DescriptorError):
        mf.manifold_from_descriptor("chart = line\nradius = 3")
