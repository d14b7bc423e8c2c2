"""Rough isometries checked on finite samples.

Sampling can corroborate or refute, never prove: a fitted ``(A, C)`` is
certified only for the sampled pairs, and a violation is reported only when
the distance intervals on both sides decide it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import FullnessFailed, InsufficientSamples
from .geodesic import DEFAULT_SHORTENING, DistanceEstimate, ShorteningOptions, distance, lower_bound
from .manifold import EmbeddedManifold
from .reports import Verdict, jsonable

A_GRID = (1.0, 1.25, 1.5, 2.0, 3.0, 5.0)
MIN_SAMPLES = 10


# -- maps and clouds -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PointMap:
    """A map between manifolds given on chart coordinates, ``(N, k_dom) -> (N, k_tgt)``.

    ``witnesses`` optionally proposes candidate RI.1 violators for given
    ``(A, C)`` as a list of chart-coordinate pairs.
    """

    domain: EmbeddedManifold
    target: EmbeddedManifold
    func: Callable
    label: str = ""
    witnesses: Optional[Callable] = None

    def __call__(self, U) -> np.ndarray:
        U = np.atleast_2d(np.asarray(U, dtype=float))
        return self.target.canonicalize(np.atleast_2d(self.func(U)).reshape(len(U), self.target.intrinsic_dim))

    @classmethod
    def identity(cls, m: EmbeddedManifold) -> "PointMap":
        return cls(m, m, lambda U: U, f"id({m.name})")

    @classmethod
    def from_submersion(cls, s, witnesses: Optional[Callable] = None) -> "PointMap":
        return cls(s.total, s.base, s.apply_batch, s.label, witnesses)

    @classmethod
    def inclusion(cls, fib) -> "PointMap":
        """Inclusion of a closed-form fiber into the total space."""
        return cls(fib.manifold(), fib.submersion.total, fib.chart_points, "fiber inclusion")

    @classmethod
    def table(cls, domain: EmbeddedManifold, target: EmbeddedManifold, keys, values, label: str = "table") -> "PointMap":
        """Map defined only on the sample points ``keys`` (rows of chart coordinates)."""
        keys = domain.canonicalize(np.atleast_2d(keys))
        values = target.canonicalize(np.atleast_2d(values))
        index = {}
        for i, k in enumerate(keys):
            index.setdefault(_key(k), i)

        def func(U):
            out = np.empty((len(U), target.intrinsic_dim))
            for n, u in enumerate(domain.canonicalize(U)):
                i = index.get(_key(u))
                if i is None:
                    raise KeyError(f"{label}: point {u} is not in the table")
                out[n] = values[i]
            return out

        return cls(domain, target, func, label)


def _key(u, decimals: int = 10) -> tuple:
    return tuple(np.round(np.asarray(u, dtype=float), decimals).tolist())


def compose(psi: PointMap, phi: PointMap) -> PointMap:
    return PointMap(phi.domain, psi.target, lambda U: psi(phi(U)), f"{psi.label} o {phi.label}")


def dedupe(m: EmbeddedManifold, U) -> np.ndarray:
    """Canonicalize and drop repeated points, keeping first occurrences."""
    U = m.canonicalize(np.atleast_2d(U))
    seen, keep = set(), []
    for i, u in enumerate(U):
        k = _key(u)
        if k not in seen:
            seen.add(k)
            keep.append(i)
    return U[keep]


@dataclass
class MetricSampleCloud:
    """Deduplicated sample points with symmetric pairwise distance intervals."""

    space: EmbeddedManifold
    box: Optional[tuple]
    points: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @classmethod
    def build(cls, space: EmbeddedManifold, points, box=None, opts: ShorteningOptions = DEFAULT_SHORTENING) -> "MetricSampleCloud":
        P = dedupe(space, points)
        n = len(P)
        lo, up = np.zeros((n, n)), np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                est = distance(space, P[i], P[j], opts, box)
                lo[i, j] = lo[j, i] = est.lower
                up[i, j] = up[j, i] = est.upper
        return cls(space, box, P, lo, up)

    @property
    def size(self) -> int:
        return len(self.points)


def sample_cloud_points(m: EmbeddedManifold, box, samples: int, seed: int, grid: int = 5) -> np.ndarray:
    """Random chart points plus a coarse grid reaching the box faces."""
    rng = np.random.Generator(np.random.Philox(seed))
    b = m.resolve_box(box)
    axes = [np.linspace(lo, hi, grid, endpoint=m.periods[i] is None) for i, (lo, hi) in enumerate(b)]
    G = np.stack([a.ravel() for a in np.meshgrid(*axes, indexing="ij")], axis=-1)
    return dedupe(m, np.vstack([G, m.sample(samples, rng, box)]))


def scale_box(box: tuple, factor: float) -> tuple:
    return tuple(None if c is None else (c[0] * factor, c[1] * factor) for c in box)


def nested_boxes(box: tuple, count: int = 3, factor: float = 1.5) -> list[tuple]:
    return [scale_box(box, factor**i) for i in range(count)]


# -- RI.1 -------------------------------------------------------------------------------


@dataclass
class RI1Fit:
    A: float
    C: float
    table: dict
    pairs: int
    violations: int
    box: Optional[tuple] = None

    def to_dict(self) -> dict:
        return jsonable({"A": self.A, "C": self.C, "C_by_A": {f"{a:g}": c for a, c in self.table.items()},
                         "pairs": self.pairs, "violations": self.violations,
                         "truncation_box": self.box})


@dataclass
class ViolationTrend:
    """Fitted ``C`` per grid ``A`` across nested boxes, growing without sign of saturation."""

    sizes: list
    C_by_A: dict
    fits: list

    def to_dict(self) -> dict:
        return jsonable({"sizes": self.sizes, "C_by_A": {f"{a:g}": c for a, c in self.C_by_A.items()},
                         "fits": [f.to_dict() for f in self.fits]})


def _image_intervals(phi: PointMap, cloud: MetricSampleCloud, opts: ShorteningOptions):
    V = phi(cloud.points)
    n = len(V)
    lo, up = np.zeros((n, n)), np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            est = distance(phi.target, V[i], V[j], opts, None)
            lo[i, j] = lo[j, i] = est.lower
            up[i, j] = up[j, i] = est.upper
    return lo, up


def ri1_residuals(A: float, dom_lo, dom_up, img_lo, img_up) -> np.ndarray:
    """Least ``C`` each pair needs at slope ``A``, from conservative interval endpoints."""
    low_side = dom_up / A - img_lo
    up_side = img_up - A * dom_lo
    return np.maximum(low_side, up_side)


def _fit_one(phi: PointMap, cloud: MetricSampleCloud, grid, max_C, opts) -> RI1Fit:
    if cloud.size < MIN_SAMPLES:
        raise InsufficientSamples(f"need at least {MIN_SAMPLES} distinct points, got {cloud.size}")
    ilo, iup = _image_intervals(phi, cloud, opts)
    iu = np.triu_indices(cloud.size, 1)
    fixed = _fixed_pairs(phi, cloud)[iu]

    def residuals(A):
        r = ri1_residuals(A, cloud.lower[iu], cloud.upper[iu], ilo[iu], iup[iu])
        # a pair the map leaves in place has one unknown distance on both sides
        return np.where(fixed, cloud.lower[iu] * (min(1.0 / A, A) - 1.0), r)

    table = {}
    for A in grid:
        table[float(A)] = max(0.0, float(np.max(residuals(A))))
    A = next((a for a in table if max_C is None or table[a] <= max_C), None)
    if A is None:
        A = min(table, key=lambda a: (table[a], a))
    C = table[A]
    # certification: recheck every pair with the chosen constants
    return RI1Fit(A, C, table, len(iu[0]), int(np.sum(residuals(A) > C)), cloud.box)


def _fixed_pairs(phi: PointMap, cloud: MetricSampleCloud) -> np.ndarray:
    """Mask of pairs whose endpoints are both fixed by ``phi`` (same space, same chart point)."""
    n = cloud.size
    if phi.target is not phi.domain:
        return np.zeros((n, n), dtype=bool)
    V = phi(cloud.points)
    same = np.all(np.abs(phi.domain.wrap_delta(V - cloud.points)) <= 1e-12, axis=1)
    return same[:, None] & same[None, :]


def fit_ri1(
    phi: PointMap,
    cloud,
    grid: Sequence[float] = A_GRID,
    max_C: Optional[float] = None,
    opts: ShorteningOptions = DEFAULT_SHORTENING,
    min_slope: float = 0.1,
):
    """Fit RI.1 constants on a cloud, or detect divergence across nested clouds.

    For each grid ``A`` the least ``C`` is the exact worst residual.  The
    reported ``A`` is the smallest grid value (whose ``C`` does not exceed
    ``max_C`` when given).  When ``cloud`` is a sequence of clouds on nested
    boxes and ``C`` keeps growing for every ``A`` (last slope at least
    ``min_slope`` and not decelerating below half the previous slope), a
    :class:`ViolationTrend` is returned instead of the last fit.
    """
    if isinstance(cloud, MetricSampleCloud):
        return _fit_one(phi, cloud, grid, max_C, opts)
    clouds = list(cloud)
    fits = [_fit_one(phi, c, grid, max_C, opts) for c in clouds]
    if len(fits) < 3:
        return fits[-1]
    sizes = [_box_size(c) for c in clouds]
    growing = True
    for A in fits[0].table:
        Cs = [f.table[A] for f in fits]
        s1 = (Cs[1] - Cs[0]) / (sizes[1] - sizes[0])
        s2 = (Cs[2] - Cs[1]) / (sizes[2] - sizes[1])
        if not (s2 >= min_slope and s2 >= 0.5 * s1):
            growing = False
    if growing:
        return ViolationTrend(sizes, {A: [f.table[A] for f in fits] for A in fits[0].table}, fits)
    return fits[-1]


def _box_size(cloud: MetricSampleCloud) -> float:
    spans = [c[1] - c[0] for c in (cloud.box or ()) if c is not None]
    return max(spans, default=0.0)


def nested_clouds(
    m: EmbeddedManifold, box: tuple, samples: int, seed: int, count: int = 3, factor: float = 1.5,
    opts: ShorteningOptions = DEFAULT_SHORTENING,
) -> list[MetricSampleCloud]:
    return [MetricSampleCloud.build(m, sample_cloud_points(m, b, samples, seed), b, opts) for b in nested_boxes(box, count, factor)]


def _pair_intervals(phi: PointMap, p, q, box, opts) -> tuple[DistanceEstimate, DistanceEstimate]:
    dom = distance(phi.domain, p, q, opts, box)
    V = phi(np.stack([p, q]))
    img = distance(phi.target, V[0], V[1], opts, None)
    return dom, img


def breach(A: float, C: float, dom: DistanceEstimate, img: DistanceEstimate) -> tuple[float, str]:
    """Decided breach margin (> 0 means violated) and which side of RI.1 it concerns."""
    upper_side = img.lower - (A * dom.upper + C)
    lower_side = (dom.lower / A - C) - img.upper
    return (upper_side, "upper") if upper_side >= lower_side else (lower_side, "lower")


@dataclass
class RoughIsometryReport:
    """Constants, verdict and witness of a rough-isometry check, with sampling metadata."""

    check: str
    verdict: Verdict
    A: Optional[float] = None
    C: Optional[float] = None
    epsilon: Optional[float] = None
    witness: Optional[dict] = None
    sampling: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)
    case: str = ""

    def to_dict(self) -> dict:
        return jsonable({"case": self.case, "check": self.check, "verdict": self.verdict, "A": self.A, "C": self.C,
                         "epsilon": self.epsilon, "witness": self.witness, "sampling": self.sampling,
                         "details": self.details})

    def csv_rows(self) -> list[dict]:
        """Witness rows: p-coords, q-coords, delta, d, breached bound."""
        w = self.witness
        if not w:
            return []
        return [{
            "case": self.case,
            "check": self.check,
            "p": " ".join(f"{v:.12g}" for v in w.get("p", [])),
            "q": " ".join(f"{v:.12g}" for v in w.get("q", [])),
            "delta": w.get("delta", ""),
            "d": w.get("d", ""),
            "bound": w.get("bound", ""),
        }]


def find_ri1_violation(
    phi: PointMap,
    A: float,
    C: float,
    box: Optional[tuple] = None,
    budget: int = 200,
    seed: int = 0,
    opts: ShorteningOptions = DEFAULT_SHORTENING,
) -> RoughIsometryReport:
    """Search for a pair whose distances are provably outside ``[(1/A) delta - C, A delta + C]``.

    Gallery witness generators are tried first, then random pairs in ``box``
    refined by coordinate ascent on the breach margin.  ``NotFound`` is not a
    proof of anything.
    """
    if A < 1 or C <= 0:
        raise ValueError("need A >= 1 and C > 0")
    D = phi.domain
    evals = 0

    def score(p, q):
        nonlocal evals
        evals += 1
        dom, img = _pair_intervals(phi, p, q, box, opts)
        m, side = breach(A, C, dom, img)
        return m, side, dom, img

    def found(p, q, m, side, dom, img, source):
        bound = A * dom.upper + C if side == "upper" else dom.lower / A - C
        w = {"p": np.asarray(p).tolist(), "q": np.asarray(q).tolist(), "delta": [dom.lower, dom.upper],
             "d": [img.lower, img.upper], "bound": f"{side}:{bound:.12g}", "margin": m, "source": source}
        return RoughIsometryReport("ri1-search", Verdict.VIOLATED_RI1, A, C, None, w,
                                   {"seed": seed, "evaluations": evals, "truncation_box": box})

    if phi.witnesses is not None:
        for p, q in phi.witnesses(A, C):
            p, q = D.canonicalize(np.asarray(p, float)), D.canonicalize(np.asarray(q, float))
            m, side, dom, img = score(p, q)
            if m > 0:
                return found(p, q, m, side, dom, img, "generator")
    rng = np.random.Generator(np.random.Philox(seed))
    b = D.resolve_box(box)
    span = np.array([hi - lo for lo, hi in b]) if b else np.zeros(0)
    best = None
    n_random = max(budget // 4, 1)
    for _ in range(n_random):
        p, q = D.sample(2, rng, box)
        res = score(p, q)
        if res[0] > 0:
            return found(p, q, *res, "random")
        if best is None or res[0] > best[0]:
            best = (res[0], p.copy(), q.copy())
    if best is not None and D.intrinsic_dim:
        _, p, q = best
        step = 0.25 * span
        cur = best[0]
        while evals < budget and np.max(step) > 1e-6:
            improved = False
            for which in (0, 1):
                for i in range(D.intrinsic_dim):
                    for sgn in (1.0, -1.0):
                        if evals >= budget:
                            break
                        pp, qq = p.copy(), q.copy()
                        tgt = pp if which == 0 else qq
                        tgt[i] = np.clip(tgt[i] + sgn * step[i], b[i][0], b[i][1])
                        res = score(D.canonicalize(pp), D.canonicalize(qq))
                        if res[0] > 0:
                            return found(D.canonicalize(pp), D.canonicalize(qq), *res, "coordinate-ascent")
                        if res[0] > cur:
                            cur, p, q, improved = res[0], pp, qq, True
            if not improved:
                step = step * 0.5
    return RoughIsometryReport("ri1-search", Verdict.NOT_FOUND, A, C, None, None,
                               {"seed": seed, "evaluations": evals, "truncation_box": box},
                               {"best_margin": None if best is None else float(max(best[0], -math.inf))})


# -- RI.2 -------------------------------------------------------------------------------


@dataclass
class Coverage:
    """Per-target distance intervals to the nearest sampled image point."""

    lower: np.ndarray
    upper: np.ndarray
    nearest: np.ndarray


def coverage(
    phi: PointMap, domain_points, target_points, box=None, opts: ShorteningOptions = DEFAULT_SHORTENING,
    cutoff: float = math.inf,
) -> Coverage:
    """Distance from each target sample to the image of the domain samples.

    Curve-shortening upper estimates are computed lazily, nearest lower
    bound first, and stop once the lower bounds exceed the best upper value
    (or ``cutoff``); ties in the nearest image go to the lowest index.
    """
    T = phi.target
    img = phi(domain_points)
    Q = T.canonicalize(np.atleast_2d(target_points))
    lo_out, up_out, near = np.empty(len(Q)), np.empty(len(Q)), np.empty(len(Q), dtype=int)
    for n, q in enumerate(Q):
        lbs = np.array([lower_bound(T, y, q, box) for y in img])
        lo_out[n] = float(np.min(lbs))
        best_up, best_i = math.inf, int(np.argmin(lbs))
        if lo_out[n] < cutoff:
            for i in np.argsort(lbs, kind="stable"):
                if lbs[i] > best_up:
                    break
                u = distance(T, img[i], q, opts, box).upper
                if u < best_up - 1e-15 or (abs(u - best_up) <= 1e-15 and i < best_i):
                    best_up, best_i = u, int(i)
        up_out[n], near[n] = best_up, best_i
    return Coverage(lo_out, up_out, near)


def check_ri2_fullness(
    phi: PointMap,
    domain_points,
    target_points,
    epsilon: float,
    box=None,
    opts: ShorteningOptions = DEFAULT_SHORTENING,
) -> RoughIsometryReport:
    """Is every target sample within ``epsilon`` of the sampled image?

    Satisfied when the worst upper estimate is at most ``epsilon``;
    ViolatedRI2 when some target's lower bound already reaches ``epsilon``
    (full means strictly closer than ``epsilon``); Indeterminate otherwise.
    """
    dom = np.atleast_2d(domain_points)
    tgt = np.atleast_2d(target_points)
    if len(tgt) == 0 or len(dom) == 0:
        raise InsufficientSamples("fullness needs nonempty domain and target samples")
    cov = coverage(phi, dom, tgt, box, opts, cutoff=epsilon)
    worst_up = int(np.argmax(cov.upper))
    worst_lo = int(np.argmax(cov.lower))
    Q = phi.target.canonicalize(tgt)
    if cov.upper[worst_up] <= epsilon:
        verdict, w = Verdict.SATISFIED, worst_up
    elif cov.lower[worst_lo] >= epsilon:
        verdict, w = Verdict.VIOLATED_RI2, worst_lo
    else:
        verdict, w = Verdict.INDETERMINATE, worst_up
    witness = {
        "q": Q[w].tolist(),
        "q_ambient": phi.target.evaluate(Q[w]).tolist(),
        "p": np.atleast_2d(dom)[cov.nearest[w]].tolist(),
        "d": [float(cov.lower[w]), float(cov.upper[w])],
        "bound": f"epsilon:{epsilon:.12g}",
    }
    return RoughIsometryReport(
        "ri2", verdict, None, None, epsilon, witness,
        {"domain_samples": len(dom), "target_samples": len(tgt), "truncation_box": box},
        {"max_upper": float(cov.upper[worst_up]), "max_lower": float(cov.lower[worst_lo]),
         "margin": float(epsilon - cov.upper[worst_up])},
    )


@dataclass
class RoughInverse:
    """Table-backed rough inverse and its displacement record."""

    map: PointMap
    table_points: np.ndarray
    choice: np.ndarray
    epsilon: float
    forward_displacement: np.ndarray
    backward_displacement: np.ndarray
    forward_bound: float
    backward_bound: float
    fit: Optional[RI1Fit] = None

    def to_dict(self) -> dict:
        return jsonable({
            "epsilon": self.epsilon,
            "max_forward_displacement": float(np.max(self.forward_displacement)),
            "max_backward_displacement": float(np.max(self.backward_displacement)),
            "forward_bound": self.forward_bound,
            "backward_bound": self.backward_bound,
            "fit": None if self.fit is None else self.fit.to_dict(),
        })


def rough_inverse(
    phi: PointMap,
    domain_points,
    target_points,
    epsilon: float,
    box=None,
    opts: ShorteningOptions = DEFAULT_SHORTENING,
    fit: Optional[RI1Fit] = None,
) -> RoughInverse:
    """Choose for each target sample (and each image of a domain sample) the nearest-mapping domain sample.

    Displacements ``delta(phi^- phi p, p)`` are bounded by ``A (epsilon + C)``
    from the RI.1 constants of ``phi`` on the domain samples, and
    ``d(phi phi^- q, q)`` by ``epsilon``.
    """
    P = dedupe(phi.domain, domain_points)
    rep = check_ri2_fullness(phi, P, target_points, epsilon, box, opts)
    if rep.verdict != Verdict.SATISFIED:
        raise FullnessFailed(f"image is not {epsilon:g}-full on the samples ({rep.verdict})")
    img = phi(P)
    Q = dedupe(phi.target, np.vstack([phi.target.canonicalize(np.atleast_2d(target_points)), img]))
    cov = coverage(phi, P, Q, box, opts)
    inv = PointMap.table(phi.target, phi.domain, Q, P[cov.nearest], f"rough inverse of {phi.label}")
    back = cov.upper
    PP = P[cov.nearest[[_row(Q, v) for v in img]]]
    fwd = np.array([distance(phi.domain, a, b, opts, box).upper for a, b in zip(PP, P)])
    if fit is None:
        fit = fit_ri1(phi, MetricSampleCloud.build(phi.domain, P, box, opts), opts=opts) if len(P) >= MIN_SAMPLES else None
    fwd_bound = math.inf if fit is None else fit.A * (epsilon + fit.C)
    return RoughInverse(inv, Q, cov.nearest, epsilon, fwd, back, fwd_bound, epsilon, fit)


def _row(Q: np.ndarray, v: np.ndarray) -> int:
    k = _key(v)
    for i, q in enumerate(Q):
        if _key(q) == k:
            return i
    raise KeyError(v)


# -- constructive constants ---------------------------------------------------------------


def theorem421_epsilon(alpha: float, beta: float, diam_b: float) -> float:
    """``epsilon = alpha * diam B + beta``, the fullness radius for fiber inclusions."""
    if alpha < 1 or beta <= 0 or diam_b < 0:
        raise ValueError("need alpha >= 1, beta > 0, diam B >= 0")
    return alpha * diam_b + beta


def theorem423_constants(alpha: float, beta: float, m: float) -> tuple[float, float]:
    """``A = alpha`` and ``C = max((beta + m) / alpha, alpha * beta)``."""
    if alpha < 1 or beta <= 0 or m <= 0:
        raise ValueError("need alpha >= 1, beta > 0, m > 0")
    return float(alpha), float(max((beta + m) / alpha, alpha * beta))
