"""Curves, lengths and two-sided geodesic distance estimates.

Distances are reported as intervals.  The upper end is the length of an
actual curve on the manifold (a spline in chart coordinates relaxed by
curve shortening), the lower end combines the ambient chord with
coordinate-Lipschitz bounds.  Nothing here claims an exact geodesic.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded

from . import dual
from .errors import NotCompact
from .manifold import EmbeddedManifold, ManifoldPoint


@dataclass(frozen=True, eq=False)
class DiscreteCurve:
    """Sampled curve ``t -> manifold`` with nodes ``coords`` (unwrapped chart coordinates).

    When ``func`` is given it is the exact chart-coordinate path (dual-number
    aware) and derivatives come from it; otherwise the nodes are joined by a
    cubic spline in chart coordinates.
    """

    manifold: EmbeddedManifold
    params: np.ndarray
    coords: np.ndarray
    func: Optional[Callable] = None

    def __post_init__(self):
        t = np.asarray(self.params, dtype=float)
        U = np.asarray(self.coords, dtype=float).reshape(len(t), self.manifold.intrinsic_dim)
        if len(t) < 2:
            raise ValueError("a curve needs at least two nodes")
        if np.any(np.diff(t) <= 0):
            raise ValueError("curve parameters must be strictly increasing")
        self.manifold.check_domain(self.manifold.canonicalize(U))
        object.__setattr__(self, "params", t)
        object.__setattr__(self, "coords", U)

    @classmethod
    def from_function(cls, m: EmbeddedManifold, func: Callable, t1: float, t2: float, n: int = 256):
        """Sample ``func(t) -> k chart components`` at ``n + 1`` equally spaced parameters."""
        t = np.linspace(t1, t2, n + 1)
        U = _eval_func(func, t, m.intrinsic_dim)[0]
        return cls(m, t, U, func)

    @property
    def t1(self) -> float:
        return float(self.params[0])

    @property
    def t2(self) -> float:
        return float(self.params[-1])

    @property
    def n_segments(self) -> int:
        return len(self.params) - 1

    @property
    def points(self) -> list[ManifoldPoint]:
        return [self.manifold.embed(u) for u in self.coords]

    def ambient(self) -> np.ndarray:
        return self.manifold.evaluate(self.coords)

    @functools.cached_property
    def _spline(self) -> CubicSpline:
        return CubicSpline(self.params, self.coords, axis=0)

    def chart_path(self, t) -> tuple[np.ndarray, np.ndarray]:
        """Chart coordinates and their parameter derivatives at ``t``; shapes ``(len(t), k)``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.func is not None:
            return _eval_func(self.func, t, self.manifold.intrinsic_dim)
        s = self._spline
        return s(t), s(t, 1)

    def velocity(self, t) -> np.ndarray:
        """Ambient velocity vectors, shape ``(len(t), n)``."""
        U, dU = self.chart_path(t)
        J = self.manifold.jacobian_batch(U)
        return np.einsum("tak,tk->ta", J, dU)

    def speed(self, t) -> np.ndarray:
        return np.linalg.norm(self.velocity(t), axis=-1)

    def sample_params(self, refine: int = 1) -> np.ndarray:
        if refine <= 1:
            return self.params
        t = self.params
        frac = np.arange(refine) / refine
        inner = (t[:-1, None] + np.diff(t)[:, None] * frac[None, :]).ravel()
        return np.append(inner, t[-1])


def _eval_func(func: Callable, t: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    out = func(dual.Dual(t, np.ones(t.shape + (1,))))
    vals, ders = dual.stack(list(out), t.shape, 1)
    return vals.T, ders[..., 0].T


def curve_length(c: DiscreteCurve, refine: int = 8) -> float:
    """Composite trapezoid approximation of the integral of the speed."""
    t = c.sample_params(refine)
    return float(np.trapezoid(c.speed(t), t))


@dataclass
class DistanceEstimate:
    p: np.ndarray
    q: np.ndarray
    lower: float
    upper: float
    converged: bool
    iterations: int
    nodes: int = 0
    box: Optional[tuple] = None
    curve: Optional[DiscreteCurve] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "endpoints": [list(map(float, self.p)), list(map(float, self.q))],
            "lower": self.lower,
            "upper": self.upper,
            "iterations": self.iterations,
            "converged": self.converged,
            "nodes": self.nodes,
            "truncation_box": None if self.box is None else [None if b is None else list(b) for b in self.box],
        }


@dataclass(frozen=True)
class ShorteningOptions:
    nodes: int = 65
    max_doublings: int = 4
    energy_rtol: float = 1e-9
    length_rtol: float = 1e-7
    max_iter: int = 400
    initial_step: float = 1.0
    refine: int = 8
    use_flat: bool = True


DEFAULT_SHORTENING = ShorteningOptions()


@functools.lru_cache(maxsize=256)
def coordinate_lipschitz(m: EmbeddedManifold, box: Optional[tuple] = None, grid: int = 41) -> Optional[np.ndarray]:
    """Largest gradient norm of each chart coordinate over the (truncated) domain, estimated on a grid.

    Returns ``None`` when the domain is unbounded and no box is supplied.
    """
    try:
        b = m.resolve_box(box)
    except NotCompact:
        return None
    axes = [np.linspace(lo, hi, grid) for lo, hi in b]
    U = np.stack([a.ravel() for a in np.meshgrid(*axes, indexing="ij")], axis=-1)
    Ginv = np.linalg.inv(m.gram_batch(U))
    return np.sqrt(np.max(np.diagonal(Ginv, axis1=1, axis2=2), axis=0))


def lower_bound(m: EmbeddedManifold, u, v, box: Optional[tuple] = None) -> float:
    """Certified-style lower bound: the chord, or a coordinate Lipschitz bound when larger.

    The Lipschitz part assumes minimizing curves stay inside ``box``; for a
    compact chart domain that holds automatically.
    """
    u, v = np.asarray(u, dtype=float), np.asarray(v, dtype=float)
    lb = float(np.linalg.norm(m.evaluate(u) - m.evaluate(v)))
    lip = coordinate_lipschitz(m, box)
    if lip is not None:
        du = np.abs(m.wrap_delta(v - u))
        lb = max(lb, float(np.max(du / lip)))
    return lb


@functools.lru_cache(maxsize=256)
def flat_gram(m: EmbeddedManifold, tol: float = 1e-12) -> Optional[np.ndarray]:
    """The constant metric matrix if the induced metric is the same at every probe point, else ``None``.

    Probes a grid over the chart box (unbounded coordinates are probed on
    [-10, 10]) plus a few scattered points.
    """
    k = m.intrinsic_dim
    if k == 0:
        return np.zeros((0, 0))
    box = tuple(None if p is not None else (max(lo, -10.0), min(hi, 10.0)) for p, (lo, hi) in zip(m.periods, m.domain))
    b = m.resolve_box(box)
    axes = [np.linspace(lo, hi, 7) for lo, hi in b]
    U = np.stack([a.ravel() for a in np.meshgrid(*axes, indexing="ij")], axis=-1)
    rng = np.random.Generator(np.random.Philox(12345))
    U = np.vstack([U, m.sample(16, rng, box)])
    G = m.gram_batch(U)
    G0 = G[0]
    if np.max(np.abs(G - G0)) <= tol * (1.0 + np.max(np.abs(G0))):
        return G0
    return None


def _flat_distance(m: EmbeddedManifold, G: np.ndarray, u: np.ndarray, v: np.ndarray) -> float:
    """Exact distance for a constant metric: shortest lattice translate of the chart displacement."""
    base = m.wrap_delta(v - u)
    shifts = [[0.0] if p is None else [-p, 0.0, p] for p in m.periods]
    best = math.inf
    for sh in itertools.product(*shifts):
        d = base + np.array(sh)
        best = min(best, float(np.sqrt(max(d @ G @ d, 0.0))))
    return best


def _chain_energy(m: EmbeddedManifold, U: np.ndarray) -> float:
    X = m.evaluate(U)
    return (len(U) - 1) * float(np.sum(np.diff(X, axis=0) ** 2))


def _clip_domain(m: EmbeddedManifold, U: np.ndarray) -> np.ndarray:
    for i, (lo, hi) in enumerate(m.domain):
        if m.periods[i] is None:
            U[:, i] = np.clip(U[:, i], lo, hi)
    return U


def _shorten(m: EmbeddedManifold, U: np.ndarray, opts: ShorteningOptions) -> tuple[np.ndarray, bool, int]:
    """Descend the discrete chord energy with fixed endpoints.

    Steps are Riemannian gradients (ambient gradient projected onto the
    tangent space, expressed in the chart) preconditioned by the inverse
    chain Laplacian, with halving backtracking.
    """
    N = len(U) - 1
    if N < 2:
        return U, True, 0
    ab = np.zeros((3, N - 1))
    ab[0, 1:] = -1.0
    ab[1, :] = 2.0
    ab[2, :-1] = -1.0
    ab *= 2.0 * N
    E = _chain_energy(m, U)
    for it in range(1, opts.max_iter + 1):
        X = m.evaluate(U)
        g = 2.0 * N * (2.0 * X[1:-1] - X[:-2] - X[2:])
        J = m.jacobian_batch(U[1:-1])
        G = np.einsum("nai,naj->nij", J, J)
        rg = np.linalg.solve(G, np.einsum("nai,na->ni", J, g)[..., None])[..., 0]
        D = solve_banded((1, 1), ab, rg)
        step = opts.initial_step
        while True:
            trial = U.copy()
            trial[1:-1] -= step * D
            _clip_domain(m, trial)
            E_new = _chain_energy(m, trial)
            if E_new < E or step < 1e-12:
                break
            step *= 0.5
        if E_new >= E:
            return U, True, it
        decrease = (E - E_new) / E if E > 0 else 0.0
        U, E = trial, E_new
        if decrease < opts.energy_rtol:
            return U, True, it
    return U, False, opts.max_iter


def _relax(m: EmbeddedManifold, u: np.ndarray, du: np.ndarray, opts: ShorteningOptions):
    n = opts.nodes
    s = np.linspace(0.0, 1.0, n)
    U = u[None, :] + s[:, None] * du[None, :]
    total = 0
    best = None
    for level in range(opts.max_doublings + 1):
        U, ok, its = _shorten(m, U, opts)
        total += its
        curve = DiscreteCurve(m, s, U)
        length = curve_length(curve, opts.refine)
        if best is not None and abs(best[0] - length) <= opts.length_rtol * (1.0 + length):
            return min(length, best[0]), curve, ok, total
        best = (length, curve, ok)
        if level == opts.max_doublings:
            break
        s_new = np.linspace(0.0, 1.0, 2 * (len(s) - 1) + 1)
        U = curve._spline(s_new)
        U[0], U[-1] = u, u + du
        s = s_new
    return best[0], best[1], best[2], total


def _wrap_candidates(m: EmbeddedManifold, du: np.ndarray) -> list[np.ndarray]:
    """Minimal-image displacement, plus the other way round for near-antipodal periodic offsets."""
    base = m.wrap_delta(du)
    alts = []
    for i, p in enumerate(m.periods):
        if p is not None and abs(base[i]) > 0.4 * p:
            alts.append(i)
    cands = [base]
    for i in alts:
        d = base.copy()
        d[i] -= math.copysign(m.periods[i], d[i])
        cands.append(d)
    return cands


def distance(
    m: EmbeddedManifold,
    p,
    q,
    opts: ShorteningOptions = DEFAULT_SHORTENING,
    box: Optional[tuple] = None,
    keep_curve: bool = False,
) -> DistanceEstimate:
    """Interval estimate of the intrinsic distance between two points.

    Charts with a constant induced metric (flat cylinders, planes, products
    of circles and lines) get the exact value; everything else is bracketed
    by :func:`lower_bound` and curve shortening.
    """
    u = m.canonicalize(np.asarray(getattr(p, "u", p), dtype=float))
    v = m.canonicalize(np.asarray(getattr(q, "u", q), dtype=float))
    # a canonical endpoint order makes the estimate exactly symmetric
    flip = tuple(v) < tuple(u)
    a, b = (v, u) if flip else (u, v)
    lower = lower_bound(m, a, b, box)
    du = m.wrap_delta(b - a)
    if np.all(np.abs(du) < 1e-15):
        return DistanceEstimate(u, v, 0.0, 0.0, True, 0, 0, box)
    G = flat_gram(m)
    if G is not None and opts.use_flat:
        d = _flat_distance(m, G, a, b)
        return DistanceEstimate(u, v, d, d, True, 0, 2, box)
    best = None
    for cand in _wrap_candidates(m, b - a):
        length, curve, ok, its = _relax(m, a, cand, opts)
        if best is None or length < best[0]:
            best = (length, curve, ok, its)
    length, curve, ok, its = best
    return DistanceEstimate(
        u, v, lower, length, ok, its,
        curve.n_segments + 1, box, curve if keep_curve else None,
    )


# -- diameter -------------------------------------------------------------------------


@dataclass
class DiameterEstimate:
    upper: float
    lower: float
    samples: int
    box: Optional[tuple]
    witness: tuple

    def to_dict(self) -> dict:
        return {
            "upper": self.upper,
            "lower": self.lower,
            "samples": self.samples,
            "truncation_box": None if self.box is None else [None if b is None else list(b) for b in self.box],
            "witness": [list(map(float, w)) for w in self.witness],
        }


def diameter_estimate(
    m: EmbeddedManifold,
    samples: int = 64,
    seed: int = 0,
    box: Optional[tuple] = None,
    opts: ShorteningOptions = DEFAULT_SHORTENING,
    points: Optional[np.ndarray] = None,
) -> DiameterEstimate:
    """Max pairwise distance over sampled points (upper ends), with the max lower end alongside."""
    if points is None:
        if not m.is_compact and box is None:
            raise NotCompact(f"{m.name} is not compact; supply a truncation box")
        rng = np.random.Generator(np.random.Philox(seed))
        points = m.sample(samples, rng, box)
    points = np.atleast_2d(points)
    up, lo, wit = 0.0, 0.0, (points[0], points[0])
    for i, j in itertools.combinations(range(len(points)), 2):
        est = distance(m, points[i], points[j], opts, box)
        if est.upper > up:
            up, wit = est.upper, (points[i], points[j])
        lo = max(lo, est.lower)
    return DiameterEstimate(up, lo, len(points), box, wit)
