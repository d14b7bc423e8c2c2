"""Case studies with closed-form oracles.

Three counterexamples (the hyperboloid over the circle, the exponentially
stretched cylinder over the line, the plane over the line) and the product
projections, each with witness generators and exact formulas that the
generic machinery is tested against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import bisect

from . import dual
from . import manifold as mf
from .errors import NonPositiveR
from .geodesic import DiscreteCurve
from .manifold import ManifoldPoint
from .reports import Verdict
from .roughiso import PointMap
from .submersion import SubmersionMap

TWO_PI = 2.0 * math.pi

# symmetry-reduced base angle and its antipode
T_B = 1.5 * math.pi
T_BAR = 0.5 * math.pi


# -- hyperboloid over the circle ---------------------------------------------------------


def hyperboloid_map() -> SubmersionMap:
    """Radial projection of ``x1^2 + x2^2 = x3^2 + 1`` onto the unit circle; in charts ``(t, r) -> t``."""
    return SubmersionMap(
        mf.hyperboloid(),
        mf.circle(),
        lambda u: (u[0],),
        "hyperboloid422",
        fiber_chart=lambda b, s: (0.0 * s[0] + b[0], s[0]),
    )


def hyperboloid_fiber_point(t_b: float, r: float) -> ManifoldPoint:
    """``xi_r = (sqrt(r^2+1) cos t_b, sqrt(r^2+1) sin t_b, r)`` on the fiber over angle ``t_b``."""
    return mf.hyperboloid().embed([t_b, r])


def hyperboloid_chord_distance(r: float) -> float:
    """Chord between ``xi_r`` and its antipode ``y_r``: ``2 sqrt(r^2+1)``, a lower bound for ``d_M``."""
    return 2.0 * math.sqrt(r * r + 1.0)


def r_epsilon_residual(r: float, r_eps: float) -> float:
    """Residual of ``sqrt(r_e^2+1) + sqrt(r^2+1) = (sqrt(r^2+1)/r)(r_e - r)``."""
    s = math.sqrt(r * r + 1.0)
    return math.sqrt(r_eps * r_eps + 1.0) + s - (s / r) * (r_eps - r)


def hyperboloid_r_epsilon(r: float) -> float:
    """Height ``4 r^3 + 3 r`` of the point whose chordal foot on the fiber is ``xi_r``."""
    if r <= 0:
        raise NonPositiveR("r must be positive")
    return 4.0 * r**3 + 3.0 * r


def r_epsilon_bisection(r: float, xtol: float = 1e-13) -> float:
    """Independent root of the defining equation, bracketed on ``[r, R]`` with ``R`` doubled."""
    if r <= 0:
        raise NonPositiveR("r must be positive")
    h = lambda x: -r_epsilon_residual(r, x)
    hi = 2.0 * r + 1.0
    while h(hi) <= 0:
        hi *= 2.0
    return bisect(h, r, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=500)


def hyperboloid_perp_distance(r: float) -> float:
    """Chord from ``y_eps`` (height ``r_eps``, antipodal side) to ``xi_r``: ``2 (2 r^2 + 1)^{3/2}``."""
    if r <= 0:
        raise NonPositiveR("r must be positive")
    return 2.0 * (2.0 * r * r + 1.0) ** 1.5


def hyperboloid_ri2_radius(eps: float) -> Optional[float]:
    """Fiber height used for the witness at ``eps``; ``None`` means the waist point suffices."""
    if eps <= 2.0:
        return None
    return math.sqrt(eps * eps - 4.0) / 2.0 + 0.5


def hyperboloid_ri2_witness(eps: float, t_b: float = T_B) -> ManifoldPoint:
    """A point of M at distance at least ``eps`` from the fiber over ``t_b``.

    For ``eps <= 2`` the antipodal waist point (chord 2 to the fiber); beyond,
    the antipodal point at height ``r_eps`` built from ``r = sqrt(eps^2-4)/2 + 1/2``.
    """
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    r = hyperboloid_ri2_radius(eps)
    height = 0.0 if r is None else hyperboloid_r_epsilon(r)
    return mf.hyperboloid().embed([t_b + math.pi, height])


def hyperboloid_lift(r: float, t_b: float = 0.0) -> Callable:
    """Closed-form horizontal lift of ``t -> (cos t, sin t)`` through ``xi_r``, ambient coordinates."""

    def gamma(t):
        t = np.asarray(t, dtype=float)
        s = math.sqrt(r * r + 1.0)
        return np.stack([s * np.cos(t + t_b), s * np.sin(t + t_b), np.full_like(t, r)], axis=-1)

    return gamma


def hyperboloid_lift_ratio(r: float) -> float:
    """``|v|_M / |w|_B`` for the horizontal lift at height ``r``."""
    return math.sqrt(r * r + 1.0)


# -- exponential cylinder over the line ----------------------------------------------------


def cylinder_f(y):
    """``e^y - 1`` for ``y >= 0`` and ``1 - e^{-y}`` for ``y <= 0`` (dual-number aware)."""
    if isinstance(y, dual.Dual):
        return dual.where(y.val >= 0, np.expm1(y), -np.expm1(-y))
    y = np.asarray(y, dtype=float)
    out = np.where(y >= 0, np.expm1(np.abs(y)), -np.expm1(np.abs(y)))
    return float(out) if out.ndim == 0 else out


def cylinder_f_prime(y):
    """``e^{|y|}``."""
    y = np.asarray(y, dtype=float)
    out = np.exp(np.abs(y))
    return float(out) if out.ndim == 0 else out


def cylinder_f_inverse(b):
    """``ln(1 + b)`` for ``b >= 0`` and ``-ln(1 - b)`` otherwise."""
    if isinstance(b, dual.Dual):
        return dual.where(b.val >= 0, np.log1p(b), -np.log1p(-b))
    b = np.asarray(b, dtype=float)
    out = np.sign(b) * np.log1p(np.abs(b))
    return float(out) if out.ndim == 0 else out


def cylinder_map() -> SubmersionMap:
    """``(theta, y) -> f(y)`` from the unit cylinder around the y axis onto the line."""
    return SubmersionMap(
        mf.cylinder(),
        mf.line(),
        lambda u: (cylinder_f(u[1]),),
        "cylinder424",
        fiber_chart=lambda b, s: (s[0], 0.0 * s[0] + cylinder_f_inverse(b[0])),
        fiber_periods=(TWO_PI,),
        fiber_domain=((0.0, TWO_PI),),
    )


def cylinder_g(y: float, A: float, C: float) -> float:
    return math.expm1(y) - A * y - C


def cylinder_ri1_witness(A: float, C: float) -> float:
    """Positive root ``y_AC`` of ``g(y) = e^y - 1 - A y - C``; beyond it RI.1's upper bound fails."""
    if A < 1 or C <= 0:
        raise ValueError("need A >= 1 and C > 0")
    hi = 1.0
    while cylinder_g(hi, A, C) <= 0:
        hi *= 2.0
    return bisect(cylinder_g, 0.0, hi, args=(A, C), xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def cylinder_witness_pairs(A: float, C: float, offset: float = 1.0) -> list:
    """Pairs ``(x, 0, z), (x, y, z)`` at ``y = y_AC + offset`` for a few angles."""
    y = cylinder_ri1_witness(A, C) + offset
    return [((th, 0.0), (th, y)) for th in (0.0, 0.5 * math.pi, math.pi)]


# -- plane over the line --------------------------------------------------------------------


def plane_map() -> SubmersionMap:
    """``(0, y, z) -> y``; fibers are the vertical lines ``{(0, b, z)}``."""
    return SubmersionMap(
        mf.plane_yz(),
        mf.line(),
        lambda u: (u[0],),
        "plane425",
        fiber_chart=lambda b, s: (0.0 * s[0] + b[0], s[0]),
    )


def plane_ri1_witness(A: float, C: float) -> float:
    """``eta_AC = A C + 1``; pairs ``X(mu, eta), X(mu, 0)`` with ``eta >= eta_AC`` break RI.1's lower bound."""
    if A < 1 or C <= 0:
        raise ValueError("need A >= 1 and C > 0")
    return A * C + 1.0


def plane_witness_pairs(A: float, C: float, mus=(-1.0, 0.0, 5.0)) -> list:
    eta = plane_ri1_witness(A, C)
    return [((mu, eta), (mu, 0.0)) for mu in mus]


# -- products -------------------------------------------------------------------------------


def product_map(F: mf.EmbeddedManifold, B: mf.EmbeddedManifold, label: str) -> SubmersionMap:
    """Projection ``p_B: F x B -> B`` of a Riemannian product."""
    kF = F.intrinsic_dim

    def fiber_chart(b, s):
        s = list(s)
        zero = 0.0 * s[0] if s else 0.0
        return tuple(s) + tuple(zero + bi for bi in b)

    return SubmersionMap(
        mf.product(F, B),
        B,
        lambda u: tuple(list(u)[kF:]),
        label,
        fiber_chart=fiber_chart,
        fiber_periods=tuple(F.periods),
        fiber_domain=tuple(F.domain),
    )


# -- case catalog -----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CaseStudy:
    """A gallery case: the map, default truncation, curves and the verdict each check should give.

    ``box`` truncates M; ``base_curve`` and ``x0`` feed the length checks;
    ``pair`` feeds the distance lemma.
    """

    id: str
    kind: str
    description: str
    submersion: SubmersionMap
    box: Optional[tuple]
    base_curve: Callable
    x0: tuple
    pair: tuple
    lemma_box: Optional[tuple]
    expected: dict
    checks: tuple
    oracles: dict = field(default_factory=dict)
    ri1_witnesses: Optional[Callable] = None
    fiber_base: tuple = (0.0,)
    defaults: dict = field(default_factory=dict)
    fiber_coords: tuple = (0,)

    @property
    def total(self):
        return self.submersion.total

    @property
    def base(self):
        return self.submersion.base

    def point_map(self) -> PointMap:
        return PointMap.from_submersion(self.submersion, self.ri1_witnesses)

    def catalog_entry(self) -> dict:
        return {"id": self.id, "kind": self.kind, "description": self.description,
                "checks": list(self.checks),
                "expected": {k: v.value for k, v in self.expected.items()}}


def _circle_curve():
    return DiscreteCurve.from_function(mf.circle(), lambda t: (t,), 0.0, TWO_PI, 256)


def _line_curve(t2: float = 3.0):
    return DiscreteCurve.from_function(mf.line(), lambda t: (t,), 0.0, t2, 256)


S = Verdict.SATISFIED


def _product_s1_s1() -> CaseStudy:
    s = product_map(mf.circle(), mf.circle(), "product-s1-s1")
    checks = ("S2", "lemma32", "prop34", "prop35", "ri1-fit", "ri1-search", "ri2", "thm421", "thm423")
    return CaseStudy(
        "product-s1-s1", "Product", "projection of the flat torus S1 x S1 onto its second circle factor",
        s, None, _circle_curve, (0.3, 0.0), ((0.0, 0.0), (1.0, 2.0)), None,
        {c: S for c in checks} | {"ri1-search": Verdict.NOT_FOUND}, checks,
        fiber_coords=(0,),
    )


def _product_s1_r() -> CaseStudy:
    s = product_map(mf.circle(), mf.line(), "product-s1-r")
    checks = ("S2", "lemma32", "prop34", "prop35", "ri1-fit", "ri1-search", "thm423")
    return CaseStudy(
        "product-s1-r", "Product", "projection of the flat cylinder S1 x R onto the line",
        s, (None, (-5.0, 5.0)), _line_curve, (0.3, 0.0), ((0.0, 0.0), (1.0, 2.0)), (None, (-5.0, 5.0)),
        {c: S for c in checks} | {"ri1-search": Verdict.NOT_FOUND}, checks, fiber_coords=(0,),
    )


def _product_point_s1() -> CaseStudy:
    s = product_map(mf.point(), mf.circle(), "product-point-s1")
    checks = ("S2", "lemma32", "prop34", "prop35", "ri1-fit", "ri1-search", "ri2", "thm421", "thm423")
    return CaseStudy(
        "product-point-s1", "Product", "projection of point x S1 onto S1, an isometry",
        s, None, _circle_curve, (0.0,), ((0.0,), (2.0,)), None,
        {c: S for c in checks} | {"ri1-search": Verdict.NOT_FOUND}, checks, fiber_coords=(),
    )


def _hyperboloid() -> CaseStudy:
    s = hyperboloid_map()
    expected = {
        "S2": Verdict.VIOLATED,
        "lemma32": S,
        "prop34": S,
        "prop35": S,
        "ri2": Verdict.VIOLATED_RI2,
        "thm421": Verdict.HYPOTHESIS_FAILED,
    }
    return CaseStudy(
        "hyperboloid422", "Hyperboloid422",
        "one-sheeted hyperboloid projected radially onto the unit circle; fiber inclusions are not rough isometries",
        s, (None, (-3.0, 3.0)), _circle_curve, (0.0, 1.0), ((T_B, 1.0), (T_BAR, 1.0)), (None, (-1.0, 1.0)),
        expected, tuple(expected),
        oracles={
            "fiber_point": hyperboloid_fiber_point,
            "chord_distance": hyperboloid_chord_distance,
            "r_epsilon": hyperboloid_r_epsilon,
            "perp_distance": hyperboloid_perp_distance,
            "ri2_witness": hyperboloid_ri2_witness,
            "lift": hyperboloid_lift,
            "lift_ratio": hyperboloid_lift_ratio,
        },
        fiber_base=(T_B,),
        fiber_coords=(1,),
        defaults={"epsilon": 3.0},
    )


def _cylinder() -> CaseStudy:
    s = cylinder_map()
    expected = {
        "S2": Verdict.VIOLATED,
        "lemma32": S,
        "prop34": S,
        "prop35": S,
        "ri1-fit": Verdict.VIOLATED_RI1,
        "ri1-search": Verdict.VIOLATED_RI1,
        "thm423": Verdict.HYPOTHESIS_FAILED,
    }
    return CaseStudy(
        "cylinder424", "CylinderExp424",
        "unit cylinder mapped to the line by f(y) = sign(y)(e^|y| - 1); compact fibers but no horizontal-lift control",
        s, (None, (-5.0, 5.0)), _line_curve, (0.0, 0.0), ((0.0, 0.0), (math.pi, 1.0)), (None, (-2.0, 2.0)),
        expected, tuple(expected),
        oracles={"f": cylinder_f, "f_prime": cylinder_f_prime, "f_inverse": cylinder_f_inverse,
                 "ri1_witness": cylinder_ri1_witness, "g": cylinder_g},
        ri1_witnesses=cylinder_witness_pairs,
        defaults={"A": 2.0, "C": 5.0, "udf_m": 3.2},
    )


def _plane() -> CaseStudy:
    s = plane_map()
    expected = {
        "S2": S,
        "lemma32": S,
        "prop34": S,
        "prop35": S,
        "ri1-fit": Verdict.VIOLATED_RI1,
        "ri1-search": Verdict.VIOLATED_RI1,
        "thm423": Verdict.HYPOTHESIS_FAILED,
    }
    return CaseStudy(
        "plane425", "Plane425",
        "the plane {x = 0} projected onto the y axis; horizontal lifts are controlled but fibers are unbounded",
        s, ((-5.0, 5.0), (-5.0, 5.0)), _line_curve, (0.0, 0.5), ((0.0, 0.0), (1.0, 1.0)), ((-5.0, 5.0), (-5.0, 5.0)),
        expected, tuple(expected),
        oracles={"ri1_witness": plane_ri1_witness},
        ri1_witnesses=plane_witness_pairs,
        defaults={"A": 1.0, "C": 1.0},
        fiber_coords=(1,),
    )


CASES: dict[str, Callable[[], CaseStudy]] = {
    "product-s1-s1": _product_s1_s1,
    "product-s1-r": _product_s1_r,
    "product-point-s1": _product_point_s1,
    "hyperboloid422": _hyperboloid,
    "cylinder424": _cylinder,
    "plane425": _plane,
}


def get_case(case_id: str) -> CaseStudy:
    try:
        return CASES[case_id]()
    except KeyError:
        raise KeyError(f"unknown case {case_id!r}; known: {', '.join(CASES)}") from None


def product_case(F_desc: str, B_desc: str, label: Optional[str] = None) -> CaseStudy:
    """Product case from two chart descriptors (``key = value`` text naming built-in charts)."""
    F, B = mf.manifold_from_descriptor(F_desc), mf.manifold_from_descriptor(B_desc)
    s = product_map(F, B, label or f"product-{F.name}-{B.name}")
    compactF, compactB = F.is_compact, B.is_compact
    box = None if compactF and compactB else tuple(
        None if (p is not None or math.isfinite(lo) and math.isfinite(hi)) else (-5.0, 5.0)
        for p, (lo, hi) in zip(s.total.periods, s.total.domain)
    )
    checks = ["S2", "lemma32", "prop34", "prop35", "ri1-fit", "ri1-search"]
    if compactB:
        checks += ["ri2", "thm421"]
    if compactF:
        checks.append("thm423")
    curve = _circle_curve if B.periods[0] is not None else _line_curve
    x0 = tuple([0.3] * F.intrinsic_dim + [0.0] * B.intrinsic_dim)
    pair = (tuple([0.0] * s.total.intrinsic_dim), tuple([1.0] * F.intrinsic_dim + [2.0] * B.intrinsic_dim))
    return CaseStudy(s.label, "Product", f"projection {F.name} x {B.name} -> {B.name}", s, box, curve, x0, pair, box,
                     {c: S for c in checks} | {"ri1-search": Verdict.NOT_FOUND}, tuple(checks),
                     fiber_coords=tuple(range(F.intrinsic_dim)))
