"""Manifolds given by a single global chart embedded in Euclidean space.

The induced metric, tangent projections and Jacobians are all derived from
the chart map.  Jacobians come from forward-mode dual numbers, so they are
exact to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import dual
from .config import TOL, NumericConfig
from .errors import BasePointMismatch, DescriptorError, DomainViolation, NotCompact, RankDeficient

TWO_PI = 2.0 * math.pi

Box = tuple  # per-coordinate (lo, hi) pairs in chart coordinates


@dataclass(frozen=True, eq=False)
class ManifoldPoint:
    chart_coords: np.ndarray
    ambient_coords: np.ndarray

    @property
    def u(self) -> np.ndarray:
        return self.chart_coords

    @property
    def x(self) -> np.ndarray:
        return self.ambient_coords

    def key(self, decimals: int = 12) -> tuple:
        return tuple(np.round(self.chart_coords, decimals).tolist())


@dataclass(frozen=True, eq=False)
class TangentVector:
    base: ManifoldPoint
    chart_components: np.ndarray
    ambient_components: np.ndarray

    def norm(self) -> float:
        return float(np.linalg.norm(self.ambient_components))


@dataclass(frozen=True, eq=False)
class MetricTensor:
    base: ManifoldPoint
    gram: np.ndarray

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.gram)

    def norm(self, chart_components) -> float:
        c = np.asarray(chart_components, dtype=float)
        return float(np.sqrt(c @ self.gram @ c))


def _same_base(p: ManifoldPoint, q: ManifoldPoint, tol: float) -> bool:
    return p is q or (
        p.ambient_coords.shape == q.ambient_coords.shape
        and np.allclose(p.ambient_coords, q.ambient_coords, rtol=0.0, atol=tol)
    )


def inner_product(v: TangentVector, w: TangentVector, tol: float = TOL.ambient_tol) -> float:
    """Induced inner product of two tangent vectors at the same point."""
    if not _same_base(v.base, w.base, tol):
        raise BasePointMismatch("tangent vectors live at different base points")
    return float(v.ambient_components @ w.ambient_components)


@dataclass(frozen=True, eq=False)
class EmbeddedManifold:
    """A manifold given by one chart ``u -> chart(u)`` from R^k into R^n.

    ``chart`` receives a sequence of ``k`` coordinate arrays (or dual numbers)
    and returns ``n`` ambient components; constants are allowed.
    """

    name: str
    intrinsic_dim: int
    ambient_dim: int
    chart: Callable
    periods: tuple = ()
    domain: tuple = ()
    config: NumericConfig = field(default=TOL)

    def __post_init__(self):
        k = self.intrinsic_dim
        if not self.periods:
            object.__setattr__(self, "periods", (None,) * k)
        if not self.domain:
            object.__setattr__(self, "domain", ((-math.inf, math.inf),) * k)
        if len(self.periods) != k or len(self.domain) != k:
            raise ValueError("periods/domain length must equal intrinsic_dim")
        if self.ambient_dim < k:
            raise ValueError("ambient dimension below intrinsic dimension")

    # -- coordinates -----------------------------------------------------------------

    @property
    def is_compact(self) -> bool:
        return all(
            p is not None or (math.isfinite(lo) and math.isfinite(hi))
            for p, (lo, hi) in zip(self.periods, self.domain)
        )

    def canonicalize(self, u) -> np.ndarray:
        """Wrap periodic coordinates into ``[0, period)``; works on ``(k,)`` or ``(N, k)``."""
        u = np.array(u, dtype=float)
        for i, p in enumerate(self.periods):
            if p is not None:
                w = np.mod(u[..., i], p)
                u[..., i] = np.where(w >= p, 0.0, w)
        return u

    def check_domain(self, u) -> None:
        u = np.atleast_2d(u)
        if not np.all(np.isfinite(u)):
            raise DomainViolation(f"{self.name}: non-finite chart coordinates")
        for i, (lo, hi) in enumerate(self.domain):
            if self.periods[i] is not None:
                continue
            slack = 1e-12 * (1.0 + max(abs(lo) if math.isfinite(lo) else 0.0, abs(hi) if math.isfinite(hi) else 0.0))
            if np.any(u[:, i] < lo - slack) or np.any(u[:, i] > hi + slack):
                raise DomainViolation(f"{self.name}: coordinate {i} outside [{lo}, {hi}]")

    def wrap_delta(self, du) -> np.ndarray:
        """Minimal-image difference for periodic coordinates."""
        du = np.array(du, dtype=float)
        for i, p in enumerate(self.periods):
            if p is not None:
                du[..., i] = du[..., i] - p * np.round(du[..., i] / p)
        return du

    def resolve_box(self, box: Optional[Box] = None) -> tuple:
        """Bounded chart box: periodic coordinates span one period, others come from ``box`` or the domain."""
        out = []
        for i in range(self.intrinsic_dim):
            if self.periods[i] is not None:
                out.append((0.0, float(self.periods[i])))
                continue
            lo, hi = self.domain[i]
            if box is not None and box[i] is not None:
                lo, hi = max(lo, box[i][0]), min(hi, box[i][1])
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise NotCompact(f"{self.name}: coordinate {i} unbounded; supply a truncation box")
            out.append((float(lo), float(hi)))
        return tuple(out)

    def sample(self, n: int, rng: np.random.Generator, box: Optional[Box] = None) -> np.ndarray:
        """``n`` chart points drawn uniformly from the (truncated) chart box."""
        b = self.resolve_box(box)
        lo = np.array([c[0] for c in b])
        hi = np.array([c[1] for c in b])
        u = lo + (hi - lo) * rng.random((n, self.intrinsic_dim))
        return self.canonicalize(u)

    # -- batch evaluation ------------------------------------------------------------

    def evaluate(self, U) -> np.ndarray:
        """Ambient coordinates for chart points ``U`` of shape ``(k,)`` or ``(N, k)``."""
        U = np.asarray(U, dtype=float)
        single = U.ndim == 1
        U2 = np.atleast_2d(U)
        comps = self.chart([U2[:, i] for i in range(self.intrinsic_dim)])
        X = np.stack([np.broadcast_to(np.asarray(c, dtype=float), (U2.shape[0],)) for c in comps], axis=-1)
        return X[0] if single else X

    def jacobian_batch(self, U) -> np.ndarray:
        """Chart Jacobians of shape ``(N, n, k)`` (or ``(n, k)``), without rank checking."""
        U = np.asarray(U, dtype=float)
        single = U.ndim == 1
        U2 = np.atleast_2d(U)
        N, k = U2.shape[0], self.intrinsic_dim
        comps = self.chart(dual.seed(U2.T))
        _, ders = dual.stack(comps, (N,), k)
        J = np.moveaxis(ders, 0, 1)
        return J[0] if single else J

    def gram_batch(self, U) -> np.ndarray:
        J = self.jacobian_batch(U)
        return np.einsum("...ai,...aj->...ij", J, J)

    # -- point-level operations ------------------------------------------------------

    def embed(self, u) -> ManifoldPoint:
        u = self.canonicalize(np.atleast_1d(np.asarray(u, dtype=float)))
        if u.shape != (self.intrinsic_dim,):
            raise DomainViolation(f"{self.name}: expected {self.intrinsic_dim} chart coordinates")
        self.check_domain(u)
        x = self.evaluate(u)
        u.setflags(write=False)
        x.setflags(write=False)
        return ManifoldPoint(u, x)

    def point_from(self, u) -> ManifoldPoint:
        return u if isinstance(u, ManifoldPoint) else self.embed(u)

    def jacobian(self, p) -> np.ndarray:
        p = self.point_from(p)
        J = self.jacobian_batch(p.u)
        if self.intrinsic_dim:
            smin = np.linalg.svd(J, compute_uv=False)[-1]
            if smin < self.config.rank_tol:
                raise RankDeficient(f"{self.name}: chart singular at {p.u} (sigma_min={smin:.3g})")
        return J

    def metric_at(self, p) -> MetricTensor:
        p = self.point_from(p)
        J = self.jacobian(p)
        return MetricTensor(p, J.T @ J)

    def tangent_vector(self, p, chart_components) -> TangentVector:
        p = self.point_from(p)
        c = np.asarray(chart_components, dtype=float)
        return TangentVector(p, c, self.jacobian_batch(p.u) @ c)

    def tangent_project(self, p, a) -> TangentVector:
        """Orthogonal projection of an ambient vector onto the tangent space at ``p``."""
        p = self.point_from(p)
        J = self.jacobian(p)
        c, *_ = np.linalg.lstsq(J, np.asarray(a, dtype=float), rcond=None)
        return TangentVector(p, c, J @ c)

    def chord(self, p, q) -> float:
        return float(np.linalg.norm(self.point_from(p).x - self.point_from(q).x))


# -- built-in charts -----------------------------------------------------------------


def circle(radius: float = 1.0) -> EmbeddedManifold:
    """Circle of given radius in the (x1, x2) plane of R^3, chart t -> (R cos t, R sin t, 0)."""

    def chart(u):
        (t,) = u
        return (radius * np.cos(t), radius * np.sin(t), 0.0)

    return EmbeddedManifold(f"circle(r={radius:g})", 1, 3, chart, (TWO_PI,), ((0.0, TWO_PI),))


def xz_circle(radius: float = 1.0) -> EmbeddedManifold:
    """Circle x^2 + z^2 = R^2 in the plane y = 0."""

    def chart(u):
        (t,) = u
        return (radius * np.cos(t), 0.0, radius * np.sin(t))

    return EmbeddedManifold(f"xz_circle(r={radius:g})", 1, 3, chart, (TWO_PI,), ((0.0, TWO_PI),))


def line() -> EmbeddedManifold:
    """The real line, embedded as itself."""

    def chart(u):
        (s,) = u
        return (s,)

    return EmbeddedManifold("line", 1, 1, chart)


def plane_yz() -> EmbeddedManifold:
    """The plane {x1 = 0} in R^3 with chart (y, z) -> (0, y, z)."""

    def chart(u):
        y, z = u
        return (0.0, y, z)

    return EmbeddedManifold("plane_yz", 2, 3, chart)


def cylinder(radius: float = 1.0) -> EmbeddedManifold:
    """Cylinder x^2 + z^2 = R^2 around the y axis, chart (theta, y) -> (R cos theta, y, R sin theta)."""

    def chart(u):
        th, y = u
        return (radius * np.cos(th), y, radius * np.sin(th))

    return EmbeddedManifold(
        f"cylinder(r={radius:g})", 2, 3, chart, (TWO_PI, None), ((0.0, TWO_PI), (-math.inf, math.inf))
    )


def hyperboloid() -> EmbeddedManifold:
    """One-sheeted hyperboloid x1^2 + x2^2 = x3^2 + 1, chart (t, r) -> (sqrt(r^2+1) cos t, sqrt(r^2+1) sin t, r)."""

    def chart(u):
        t, r = u
        s = np.sqrt(r * r + 1.0)
        return (s * np.cos(t), s * np.sin(t), r)

    return EmbeddedManifold(
        "hyperboloid", 2, 3, chart, (TWO_PI, None), ((0.0, TWO_PI), (-math.inf, math.inf))
    )


def point(coords: Sequence[float] = (0.0,)) -> EmbeddedManifold:
    """A single point; only meaningful as a factor of a product."""
    c = tuple(float(v) for v in coords)

    def chart(u):
        return c

    return EmbeddedManifold("point", 0, len(c), chart)


def product(F: EmbeddedManifold, B: EmbeddedManifold) -> EmbeddedManifold:
    """Riemannian product F x B with concatenated charts and ambient spaces."""
    kF = F.intrinsic_dim

    def chart(u):
        u = list(u)
        return tuple(F.chart(u[:kF])) + tuple(B.chart(u[kF:]))

    return EmbeddedManifold(
        f"{F.name} x {B.name}",
        kF + B.intrinsic_dim,
        F.ambient_dim + B.ambient_dim,
        chart,
        tuple(F.periods) + tuple(B.periods),
        tuple(F.domain) + tuple(B.domain),
    )


BUILTIN_CHARTS: dict[str, Callable[..., EmbeddedManifold]] = {
    "circle": circle,
    "xz_circle": xz_circle,
    "line": line,
    "plane_yz": plane_yz,
    "cylinder": cylinder,
    "hyperboloid": hyperboloid,
    "point": lambda: point(),
}

_PARAMS = {"circle": {"radius"}, "xz_circle": {"radius"}, "cylinder": {"radius"}}


def parse_descriptor(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line_ = raw.split("#", 1)[0].strip()
        if not line_:
            continue
        if "=" not in line_:
            raise DescriptorError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line_.split("=", 1))
        if not key:
            raise DescriptorError(f"line {lineno}: empty key")
        out[key] = value
    return out


def _build(chart_id: str, params: dict[str, str]) -> EmbeddedManifold:
    if chart_id not in BUILTIN_CHARTS:
        raise DescriptorError(f"unknown chart id {chart_id!r}")
    allowed = _PARAMS.get(chart_id, set())
    unknown = set(params) - allowed
    if unknown:
        raise DescriptorError(f"chart {chart_id!r} takes no parameter(s) {sorted(unknown)}")
    try:
        kwargs = {k: float(v) for k, v in params.items()}
    except ValueError as exc:
        raise DescriptorError(str(exc)) from None
    return BUILTIN_CHARTS[chart_id](**kwargs)


def manifold_from_descriptor(text: str) -> EmbeddedManifold:
    """Build a manifold from a descriptor naming a built-in chart.

    ``chart = product`` takes ``factors = a, b`` naming two built-in charts
    with default parameters.
    """
    kv = parse_descriptor(text)
    chart_id = kv.pop("chart", None)
    if chart_id is None:
        raise DescriptorError("descriptor lacks a 'chart' key")
    if chart_id == "product":
        names = [s.strip() for s in kv.pop("factors", "").split(",") if s.strip()]
        if len(names) != 2 or kv:
            raise DescriptorError("product descriptor needs exactly 'factors = F, B'")
        return product(_build(names[0], {}), _build(names[1], {}))
    return _build(chart_id, kv)
