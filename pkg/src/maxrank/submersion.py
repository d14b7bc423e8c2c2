"""Maximal-rank maps between embedded manifolds and their horizontal geometry.

A :class:`SubmersionMap` is given in chart coordinates.  Everything metric is
computed in orthonormal frames: with Cholesky factors ``G = L L^T`` of the
two induced metrics, the matrix ``K = L_B^T D L_M^{-T}`` represents the
differential between orthonormal frames, so its singular values are exactly
the ratios ``|dpi v|_B / |v|_M`` over horizontal ``v``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import dual
from .config import TOL
from .errors import BasePointMismatch, DriftExceeded, MaximalRankViolation, RankDeficient
from .geodesic import DiscreteCurve, ShorteningOptions, DEFAULT_SHORTENING, curve_length, distance
from .manifold import EmbeddedManifold, ManifoldPoint, TangentVector
from .reports import Report, Verdict

BETA_GRID = (0.01, 0.1, 0.5, 1.0)


@dataclass(frozen=True, eq=False)
class SubmersionMap:
    """A map ``pi: M -> B`` written in charts.

    ``map_chart`` takes the ``k_M`` chart coordinates of M (arrays or dual
    numbers) and returns ``k_B`` chart coordinates of B.  ``fiber_chart``, when
    given, is a closed form ``(b_chart, s) -> M chart`` of the fiber over ``b``
    with fiber parameters ``s`` ranging over ``fiber_domain``.
    """

    total: EmbeddedManifold
    base: EmbeddedManifold
    map_chart: Callable
    label: str = ""
    fiber_chart: Optional[Callable] = None
    fiber_periods: tuple = ()
    fiber_domain: tuple = ()

    def __post_init__(self):
        if self.total.intrinsic_dim < self.base.intrinsic_dim:
            raise ValueError("dim M must be at least dim B for a maximal-rank map")
        k = self.fiber_dim
        if not self.fiber_periods:
            object.__setattr__(self, "fiber_periods", (None,) * k)
        if not self.fiber_domain:
            object.__setattr__(self, "fiber_domain", ((-math.inf, math.inf),) * k)

    @property
    def fiber_dim(self) -> int:
        return self.total.intrinsic_dim - self.base.intrinsic_dim

    def apply_batch(self, U) -> np.ndarray:
        """B-chart coordinates of ``pi`` at M-chart points ``U`` (shape ``(N, k_M)``)."""
        U = np.atleast_2d(np.asarray(U, dtype=float))
        comps = self.map_chart([U[:, i] for i in range(U.shape[1])])
        V = np.stack([np.broadcast_to(np.asarray(c, dtype=float), (len(U),)) for c in comps], axis=-1)
        return self.base.canonicalize(V)

    def apply(self, x) -> ManifoldPoint:
        x = self.total.point_from(x)
        return self.base.embed(self.apply_batch(x.u)[0])

    def differential_batch(self, U) -> np.ndarray:
        """Chart differentials, shape ``(N, k_B, k_M)``."""
        U = np.atleast_2d(np.asarray(U, dtype=float))
        k = U.shape[1]
        comps = self.map_chart(dual.seed(U.T))
        _, ders = dual.stack(list(comps), (len(U),), k)
        return np.moveaxis(ders, 0, 1)


@dataclass
class _Frames:
    D: np.ndarray
    JM: np.ndarray
    GM: np.ndarray
    LM: np.ndarray
    K: np.ndarray
    sv: np.ndarray


def _frames(s: SubmersionMap, U) -> _Frames:
    U = np.atleast_2d(np.asarray(U, dtype=float))
    JM = s.total.jacobian_batch(U)
    GM = np.einsum("nai,naj->nij", JM, JM)
    GB = s.base.gram_batch(s.apply_batch(U))
    D = s.differential_batch(U)
    try:
        LM = np.linalg.cholesky(GM)
        LB = np.linalg.cholesky(GB)
    except np.linalg.LinAlgError:
        raise RankDeficient("induced metric not positive definite at a sampled point") from None
    # K = LB^T D LM^{-T}
    KT = np.linalg.solve(LM, np.swapaxes(D, 1, 2) @ LB)
    K = np.swapaxes(KT, 1, 2)
    sv = np.linalg.svd(K, compute_uv=False)
    return _Frames(D, JM, GM, LM, K, sv)


def _check_rank(fr: _Frames, U, tol: float) -> None:
    smin = fr.sv[:, -1] if fr.sv.shape[1] else np.ones(len(fr.sv))
    bad = np.flatnonzero(smin < tol)
    if len(bad):
        i = bad[0]
        raise MaximalRankViolation(f"differential not surjective at {np.atleast_2d(U)[i]} (sigma_min={smin[i]:.3g})")


def differential(s: SubmersionMap, x) -> np.ndarray:
    """Matrix of ``d pi`` from M-chart to B-chart components, checked for surjectivity."""
    x = s.total.point_from(x)
    fr = _frames(s, x.u)
    _check_rank(fr, x.u, s.total.config.rank_tol)
    return fr.D[0]


@dataclass(frozen=True, eq=False)
class TangentSplitting:
    base_point: ManifoldPoint
    vertical_basis: tuple
    horizontal_basis: tuple

    @property
    def vertical_matrix(self) -> np.ndarray:
        """Chart components of the vertical basis as columns."""
        return _columns(self.vertical_basis, len(self.base_point.u))

    @property
    def horizontal_matrix(self) -> np.ndarray:
        return _columns(self.horizontal_basis, len(self.base_point.u))


def _columns(vs, k: int) -> np.ndarray:
    if not vs:
        return np.zeros((k, 0))
    return np.column_stack([v.chart_components for v in vs])


def splitting(s: SubmersionMap, x) -> TangentSplitting:
    """Metric-orthonormal bases of ``ker d pi`` and its orthogonal complement at ``x``."""
    x = s.total.point_from(x)
    fr = _frames(s, x.u)
    _check_rank(fr, x.u, s.total.config.rank_tol)
    kB = s.base.intrinsic_dim
    _, _, Vt = np.linalg.svd(fr.K[0], full_matrices=True)
    # orthonormal frame vectors back to chart components: c = LM^{-T} v
    C = np.linalg.solve(fr.LM[0].T, Vt.T)
    J = fr.JM[0]
    vecs = [TangentVector(x, C[:, i], J @ C[:, i]) for i in range(C.shape[1])]
    return TangentSplitting(x, tuple(vecs[kB:]), tuple(vecs[:kB]))


def horizontal_projector_batch(s: SubmersionMap, U) -> np.ndarray:
    """Chart matrices of the metric-orthogonal projection onto the horizontal space, ``(N, k_M, k_M)``."""
    return lift_matrix_batch(s, U) @ s.differential_batch(U)


def lift_matrix_batch(s: SubmersionMap, U, check: bool = False) -> np.ndarray:
    """``G^{-1} D^T (D G^{-1} D^T)^{-1}``: B-chart vectors to their horizontal lifts, ``(N, k_M, k_B)``."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    if check:
        _check_rank(_frames(s, U), U, s.total.config.rank_tol)
    G = s.total.gram_batch(U)
    D = s.differential_batch(U)
    GiDt = np.linalg.solve(G, np.swapaxes(D, 1, 2))
    S = D @ GiDt
    return np.swapaxes(np.linalg.solve(S, np.swapaxes(GiDt, 1, 2)), 1, 2)


def horizontal_lift_vector(s: SubmersionMap, w, x) -> TangentVector:
    """The unique horizontal ``v`` at ``x`` with ``d pi(v) = w``.

    ``w`` is a :class:`TangentVector` on B (its base must be ``pi(x)``) or a
    plain array of B-chart components at ``pi(x)``.
    """
    x = s.total.point_from(x)
    b = s.apply(x)
    if isinstance(w, TangentVector):
        if np.linalg.norm(w.base.x - b.x) > max(s.base.config.fiber_tol, s.base.config.ambient_tol):
            raise BasePointMismatch("x does not lie over the base point of w")
        wc = np.asarray(w.chart_components, dtype=float)
    else:
        wc = np.atleast_1d(np.asarray(w, dtype=float))
    sp = splitting(s, x)
    H = sp.horizontal_matrix
    a = np.linalg.solve(differential(s, x) @ H, wc)
    c = H @ a
    return s.total.tangent_vector(x, c)


# -- curves ----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LiftedCurve(DiscreteCurve):
    """A horizontal lift together with its tracking record ``|pi(Gamma(t)) - gamma(t)|``."""

    drift: Optional[np.ndarray] = None
    corrected: bool = False

    @property
    def max_drift(self) -> float:
        return 0.0 if self.drift is None else float(np.max(self.drift))


def _base_residual(s: SubmersionMap, u: np.ndarray, target: np.ndarray) -> np.ndarray:
    return s.base.wrap_delta(target - s.apply_batch(u)[0])


def horizontal_lift_curve(
    s: SubmersionMap,
    gamma: DiscreteCurve,
    x0,
    steps: int = 256,
    correct: Optional[bool] = None,
) -> LiftedCurve:
    """Integrate ``Gamma' = lift(gamma')`` with classical RK4 in M-chart coordinates.

    With ``correct`` (default: whenever the fiber has a closed form) each
    step ends with a horizontal Newton step back onto the fiber over
    ``gamma(t)``; otherwise the drift is only recorded.
    """
    cfg = s.total.config
    x0 = s.total.point_from(x0)
    V0 = gamma.chart_path([gamma.t1])[0][0]
    if np.linalg.norm(s.base.evaluate(s.apply_batch(x0.u)[0]) - s.base.evaluate(V0)) > cfg.fiber_tol:
        raise BasePointMismatch("x0 is not over the initial point of the base curve")
    if correct is None:
        correct = s.fiber_chart is not None
    t = np.linspace(gamma.t1, gamma.t2, steps + 1)
    h = t[1] - t[0]
    _, dV = gamma.chart_path(np.concatenate([t, t[:-1] + 0.5 * h]))
    dV_nodes, dV_mid = dV[: steps + 1], dV[steps + 1 :]

    def rhs(u, dv):
        return lift_matrix_batch(s, u[None, :], check=True)[0] @ dv

    U = np.empty((steps + 1, s.total.intrinsic_dim))
    U[0] = x0.u
    u = x0.u.astype(float).copy()
    targets = gamma.chart_path(t)[0]
    for i in range(steps):
        k1 = rhs(u, dV_nodes[i])
        k2 = rhs(u + 0.5 * h * k1, dV_mid[i])
        k3 = rhs(u + 0.5 * h * k2, dV_mid[i])
        k4 = rhs(u + h * k3, dV_nodes[i + 1])
        u = u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if correct:
            for _ in range(2):
                u = u + lift_matrix_batch(s, u[None, :])[0] @ _base_residual(s, u, targets[i + 1])
        U[i + 1] = u
    drift = np.linalg.norm(s.base.evaluate(s.apply_batch(U)) - s.base.evaluate(targets), axis=-1)
    if np.max(drift) > cfg.drift_max:
        raise DriftExceeded(f"lift drifted {np.max(drift):.3g} away from the base curve")
    return LiftedCurve(s.total, t, U, None, drift, bool(correct))


def is_beta_long(gamma: DiscreteCurve, beta: float, refine: int = 4, tol: float = TOL.beta_long_tol) -> bool:
    """True iff the sampled speed of ``gamma`` never drops below ``beta``."""
    t = gamma.sample_params(refine)
    return bool(np.min(gamma.speed(t)) >= beta - tol)


def _min_speed(gamma: DiscreteCurve, refine: int = 4) -> float:
    return float(np.min(gamma.speed(gamma.sample_params(refine))))


def _horizontal_speeds(s: SubmersionMap, curve: DiscreteCurve, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    U, dU = curve.chart_path(t)
    P = horizontal_projector_batch(s, U)
    H = np.einsum("nij,nj->ni", P, dU)
    J = s.total.jacobian_batch(U)
    hn = np.linalg.norm(np.einsum("nai,ni->na", J, H), axis=-1)
    full = np.linalg.norm(np.einsum("nai,ni->na", J, dU), axis=-1)
    return hn, np.sqrt(np.maximum(full**2 - hn**2, 0.0))


def verify_nonvertical(
    s: SubmersionMap, gamma: DiscreteCurve, Gamma: DiscreteCurve, refine: int = 1, strict: bool = True
) -> Report:
    """Check that the horizontal part of ``Gamma'`` never vanishes along the lift."""
    tol = s.total.config.vertical_tol
    if _min_speed(gamma) <= s.total.config.beta_long_tol:
        rep = Report("nonvertical", Verdict.HYPOTHESIS_FAILED, s.label, message="base curve is not long")
        return rep.raise_for_verdict() if strict else rep
    t = Gamma.sample_params(refine)
    hn, _ = _horizontal_speeds(s, Gamma, t)
    i = int(np.argmin(hn))
    ok = hn[i] > tol
    rep = Report(
        "nonvertical",
        Verdict.SATISFIED if ok else Verdict.VIOLATED,
        s.label,
        lhs=float(hn[i]),
        rhs=tol,
        slack=0.0,
        witnesses=[] if ok else [{"t": float(t[i]), "horizontal_norm": float(hn[i])}],
        details={"min_horizontal_norm": float(hn[i]), "t_min": float(t[i])},
        message="" if ok else f"lift is vertical at t={t[i]:.6g}",
    )
    return rep.raise_for_verdict() if strict else rep


# -- hypothesis scans ------------------------------------------------------------------


HYPOTHESES = ("lemma32", "prop34", "prop35", "thm421", "hlc")


def required_alpha(kind: str, sigma_min: float, sigma_max: float, beta: float) -> float:
    """Least ``alpha >= 1`` for which the named hypothesis holds given the extreme ratios.

    ``sigma`` ranges over ``|d pi v|_B / |v|_M`` for horizontal ``v``.  The
    lemma/proposition-3.4/HLC forms test unit-normalised ``v`` (the worst
    case of ``|v|_M <= 1``); the others are homogeneous in ``v`` and force a
    bound on ``1 / sigma_min`` regardless of ``beta``.
    """
    inv_min = math.inf if sigma_min <= 0 else 1.0 / sigma_min
    if kind == "prop34":
        a = sigma_max - beta
    elif kind == "lemma32":
        a = sigma_max / (1.0 + beta)
    elif kind in ("prop35", "thm421"):
        a = inv_min
    elif kind == "hlc":
        a = max(sigma_max / (1.0 + beta), (1.0 - beta) * inv_min if beta < 1.0 else 0.0)
    else:
        raise ValueError(f"unknown hypothesis {kind!r}")
    return max(1.0, a)


@dataclass
class HypothesisScan:
    """Extreme horizontal stretch ratios of ``d pi`` over sampled points, and the least feasible alphas."""

    kind: str
    samples: int
    box: Optional[tuple]
    sigma_min: float
    sigma_max: float
    argmin: np.ndarray
    argmax: np.ndarray
    alphas: dict = field(default_factory=dict)

    def required_alpha(self, beta: float) -> float:
        return required_alpha(self.kind, self.sigma_min, self.sigma_max, beta)

    def holds(self, alpha: float, beta: float, rtol: float = 1e-12) -> bool:
        return alpha >= 1.0 and beta > 0 and alpha >= self.required_alpha(beta) * (1.0 - rtol)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "samples": self.samples,
            "truncation_box": None if self.box is None else [None if b is None else list(b) for b in self.box],
            "sigma_min": self.sigma_min,
            "sigma_max": self.sigma_max,
            "argmin": self.argmin.tolist(),
            "argmax": self.argmax.tolist(),
            "alpha_by_beta": {f"{b:g}": a for b, a in self.alphas.items()},
        }


def scan_points(m: EmbeddedManifold, box: Optional[tuple], samples: int, seed: int, grid: int = 9) -> np.ndarray:
    """Random chart samples plus a regular grid that includes the box faces."""
    rng = np.random.Generator(np.random.Philox(seed))
    b = m.resolve_box(box)
    axes = [np.linspace(lo, hi, grid) for lo, hi in b]
    G = np.stack([a.ravel() for a in np.meshgrid(*axes, indexing="ij")], axis=-1) if axes else np.zeros((1, 0))
    return m.canonicalize(np.vstack([m.sample(samples, rng, box), G]))


def hypothesis_scan(
    s: SubmersionMap,
    kind: str,
    box: Optional[tuple] = None,
    samples: int = 256,
    seed: int = 0,
    points: Optional[np.ndarray] = None,
    betas: Sequence[float] = BETA_GRID,
) -> HypothesisScan:
    """Fit the least alpha per beta on ``betas`` for one of :data:`HYPOTHESES`."""
    if kind not in HYPOTHESES:
        raise ValueError(f"unknown hypothesis {kind!r}")
    U = scan_points(s.total, box, samples, seed)
    if points is not None:
        U = np.vstack([U, np.atleast_2d(points)])
    fr = _frames(s, U)
    _check_rank(fr, U, s.total.config.rank_tol)
    smax, smin = fr.sv[:, 0], fr.sv[:, -1]
    i, j = int(np.argmin(smin)), int(np.argmax(smax))
    scan = HypothesisScan(kind, len(U), box, float(smin[i]), float(smax[j]), U[i], U[j])
    scan.alphas = {float(b): scan.required_alpha(b) for b in betas}
    return scan


def _choose(scan: HypothesisScan, alpha, beta, score: Callable[[float, float], float], allowed: Callable[[float], bool]):
    """Use the given constants, or pick the grid pair that makes the conclusion tightest."""
    if alpha is not None and beta is not None:
        return float(alpha), float(beta)
    cands = []
    for b, a in scan.alphas.items():
        if beta is not None and not math.isclose(b, beta):
            continue
        if not allowed(b) or not math.isfinite(a):
            continue
        cands.append((score(a, b), a, b))
    if beta is not None and not cands:
        a = scan.required_alpha(beta)
        if math.isfinite(a) and allowed(beta):
            return a, float(beta)
    if not cands:
        return None
    cands.sort(key=lambda c: (-c[0], c[2]))
    return cands[0][1], cands[0][2]


def _hyp_dict(scan: HypothesisScan, alpha, beta) -> dict:
    return {"alpha": alpha, "beta": beta, "scan": scan.to_dict()}


def _length_check(
    name: str,
    kind: str,
    s: SubmersionMap,
    gamma: DiscreteCurve,
    Gamma: DiscreteCurve,
    alpha,
    beta,
    box,
    samples: int,
    seed: int,
    strict: bool,
) -> Report:
    scan = hypothesis_scan(s, kind, box, samples, seed, points=s.total.canonicalize(Gamma.coords))
    lg, lG = curve_length(gamma), curve_length(Gamma)
    T = gamma.t2 - gamma.t1
    vmin = _min_speed(gamma)
    if kind == "prop34":
        score = lambda a, b: (lg - b * T) / a
    else:
        score = lambda a, b: -a * (lg + b * T)
    chosen = _choose(scan, alpha, beta, score, lambda b: vmin >= b - TOL.beta_long_tol)
    slack = 1e-4 * (1.0 + lg)
    if chosen is None:
        rep = Report(name, Verdict.HYPOTHESIS_FAILED, s.label, hypothesis=_hyp_dict(scan, alpha, beta),
                     message="no feasible (alpha, beta) for which the base curve is beta-long")
        return rep.raise_for_verdict() if strict else rep
    a, b = chosen
    hyp = _hyp_dict(scan, a, b)
    problems = []
    if not scan.holds(a, b):
        problems.append(f"hypothesis fails: alpha={a:g} < required {scan.required_alpha(b):.6g} at beta={b:g}")
    if vmin < b - TOL.beta_long_tol:
        problems.append(f"base curve is not {b:g}-long (min speed {vmin:.6g})")
    if problems:
        rep = Report(name, Verdict.HYPOTHESIS_FAILED, s.label, hypothesis=hyp, slack=slack,
                     witnesses=[{"argmin": scan.argmin.tolist(), "argmax": scan.argmax.tolist()}],
                     message="; ".join(problems))
        return rep.raise_for_verdict() if strict else rep
    if kind == "prop34":
        lhs, rhs = lG, (lg - b * T) / a
        ok = lhs >= rhs - slack
    else:
        lhs, rhs = lG, a * (lg + b * T)
        ok = lhs <= rhs + slack
    _, vert = _horizontal_speeds(s, Gamma, Gamma.sample_params(1))
    rep = Report(
        name,
        Verdict.SATISFIED if ok else Verdict.VIOLATED,
        s.label,
        lhs=lhs,
        rhs=rhs,
        slack=slack,
        hypothesis=hyp,
        details={"length_gamma": lg, "length_Gamma": lG, "t1": gamma.t1, "t2": gamma.t2,
                 "max_vertical_speed": float(np.max(vert))},
        message="" if ok else f"length bound breached: lhs={lhs:.9g} rhs={rhs:.9g}",
    )
    return rep.raise_for_verdict() if strict else rep


def verify_prop34(s, gamma, Gamma, alpha=None, beta=None, box=None, samples: int = 256, seed: int = 0, strict: bool = True) -> Report:
    """Lower length bound for any lift: ``l(Gamma) >= (1/alpha)[l(gamma) - beta (t2 - t1)]``.

    The hypothesis ``|d pi v|_B <= alpha |v|_M + beta`` (``|v|_M <= 1``) is
    scanned over the box and the lift's own points first.  Constants left as
    ``None`` are fitted from the beta grid.
    """
    return _length_check("prop34", "prop34", s, gamma, Gamma, alpha, beta, box, samples, seed, strict)


def verify_prop35(s, gamma, Gamma, alpha=None, beta=None, box=None, samples: int = 256, seed: int = 0, strict: bool = True) -> Report:
    """Upper length bound for horizontal lifts: ``l(Gamma) <= alpha [l(gamma) + beta (t2 - t1)]``.

    The hypothesis ``|d pi v|_B >= |v|_M / alpha - beta`` must hold for every
    horizontal ``v``, which amounts to ``sigma_min >= 1/alpha``.
    """
    return _length_check("prop35", "prop35", s, gamma, Gamma, alpha, beta, box, samples, seed, strict)


def verify_lemma32(
    s: SubmersionMap,
    x,
    x_prime,
    alpha=None,
    beta=None,
    box=None,
    samples: int = 256,
    seed: int = 0,
    opts: ShorteningOptions = DEFAULT_SHORTENING,
    strict: bool = True,
) -> Report:
    """Distance bound ``d_M(x, x') >= (1/alpha) d_B(pi x, pi x') - beta`` decided on intervals.

    Satisfied when the lower end of ``d_M`` clears the bound computed from the
    upper end of ``d_B``; Violated when even the upper end of ``d_M`` falls
    below the bound from the lower end of ``d_B``; Indeterminate otherwise.
    """
    M, B = s.total, s.base
    x, xp = M.point_from(x), M.point_from(x_prime)
    scan = hypothesis_scan(s, "lemma32", box, samples, seed, points=np.stack([x.u, xp.u]))
    dM = distance(M, x, xp, opts, box)
    bx, bxp = s.apply(x), s.apply(xp)
    dB = distance(B, bx, bxp, opts, _base_box(s, box))
    chosen = _choose(scan, alpha, beta, lambda a, b: dB.upper / a - b, lambda b: True)
    slack = 1e-4 * (1.0 + dB.upper)
    a, b = chosen
    hyp = _hyp_dict(scan, a, b)
    details = {"d_M": dM.to_dict(), "d_B": dB.to_dict()}
    if not scan.holds(a, b):
        rep = Report("lemma32", Verdict.HYPOTHESIS_FAILED, s.label, hypothesis=hyp, details=details,
                     message=f"hypothesis fails: alpha={a:g} < required {scan.required_alpha(b):.6g}")
        return rep.raise_for_verdict() if strict else rep
    rhs_hi = dB.upper / a - b
    rhs_lo = dB.lower / a - b
    if dM.lower >= rhs_hi - slack:
        verdict, lhs, rhs = Verdict.SATISFIED, dM.lower, rhs_hi
    elif dM.upper < rhs_lo - slack:
        verdict, lhs, rhs = Verdict.VIOLATED, dM.upper, rhs_lo
    else:
        verdict, lhs, rhs = Verdict.INDETERMINATE, dM.lower, rhs_hi
    rep = Report("lemma32", verdict, s.label, lhs=lhs, rhs=rhs, slack=slack, hypothesis=hyp, details=details,
                 witnesses=[{"x": x.u.tolist(), "x_prime": xp.u.tolist()}])
    return rep.raise_for_verdict() if strict else rep


def _base_box(s: SubmersionMap, box):
    """Truncation box for B induced by the image of the M box (bounding box of sampled images)."""
    if box is None:
        return None
    try:
        U = scan_points(s.total, box, 0, 0, grid=17)
    except Exception:
        return None
    V = s.apply_batch(U)
    out = []
    for i in range(s.base.intrinsic_dim):
        if s.base.periods[i] is not None:
            out.append(None)
        else:
            out.append((float(V[:, i].min()), float(V[:, i].max())))
    return tuple(out)


def check_submersion_axiom_S2(
    s: SubmersionMap, samples: int = 256, box: Optional[tuple] = None, seed: int = 0, points=None
) -> Report:
    """Max over samples of ``| |d pi h|_B - |h|_M |`` for unit horizontal ``h``.

    The extremes over unit horizontal vectors at a point are the largest and
    smallest singular values, so the deviation is ``max|sigma - 1|``.
    """
    U = scan_points(s.total, box, samples, seed)
    if points is not None:
        U = np.vstack([U, np.atleast_2d(points)])
    fr = _frames(s, U)
    _check_rank(fr, U, s.total.config.rank_tol)
    dev = np.max(np.abs(fr.sv - 1.0), axis=1) if fr.sv.shape[1] else np.zeros(len(U))
    i = int(np.argmax(dev))
    tol = s.total.config.s2_tol
    ok = bool(dev[i] <= tol)
    return Report(
        "S2",
        Verdict.SATISFIED if ok else Verdict.VIOLATED,
        s.label,
        lhs=float(dev[i]),
        rhs=tol,
        slack=0.0,
        witnesses=[{"x": U[i].tolist(), "deviation": float(dev[i])}],
        details={"is_submersion": ok, "max_deviation": float(dev[i]), "samples": len(U),
                 "truncation_box": None if box is None else [None if c is None else list(c) for c in box]},
    )


# -- fibers -----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Fiber:
    """The preimage of ``base_value``; sampled from a closed form when one exists."""

    submersion: SubmersionMap
    base_value: ManifoldPoint
    closed_form: Optional[Callable] = None

    def manifold(self) -> Optional[EmbeddedManifold]:
        """The fiber as an embedded manifold (only with a closed form)."""
        if self.closed_form is None:
            return None
        s, M = self.submersion, self.submersion.total
        cf = self.closed_form

        def chart(u):
            return M.chart(list(cf(u)))

        return EmbeddedManifold(
            f"fiber of {s.label or 'pi'}", s.fiber_dim, M.ambient_dim, chart, s.fiber_periods, s.fiber_domain
        )

    def chart_points(self, params) -> np.ndarray:
        """M-chart coordinates of the closed-form fiber at parameters ``params`` (shape ``(N, fiber_dim)``)."""
        P = np.atleast_2d(np.asarray(params, dtype=float))
        comps = self.closed_form([P[:, i] for i in range(P.shape[1])])
        U = np.stack([np.broadcast_to(np.asarray(c, dtype=float), (len(P),)) for c in comps], axis=-1)
        return self.submersion.total.canonicalize(U)

    def sample(self, n: int, rng: np.random.Generator, box: Optional[tuple] = None) -> np.ndarray:
        """``n`` M-chart points on the fiber (``box`` truncates M, or the fiber parameters with a closed form)."""
        if self.closed_form is not None:
            U = self.chart_points(self.manifold().sample(n, rng, box))
        else:
            U = np.empty((0, self.submersion.total.intrinsic_dim))
            for _ in range(8):
                seeds = self.submersion.total.sample(2 * n, rng, box)
                U = np.vstack([U, gauss_newton_fiber(self.submersion, self.base_value, seeds)])
                if len(U) >= n:
                    break
            U = U[:n]
        self._check(U)
        return U

    def _check(self, U: np.ndarray) -> None:
        s = self.submersion
        err = np.linalg.norm(s.base.evaluate(s.apply_batch(U)) - self.base_value.x, axis=-1)
        if len(err) and np.max(err) > s.total.config.fiber_tol:
            raise BasePointMismatch(f"fiber point off by {np.max(err):.3g}")


def fiber(s: SubmersionMap, b) -> Fiber:
    b = s.base.point_from(b)
    cf = None
    if s.fiber_chart is not None:
        bu = b.u

        def cf(params):
            return s.fiber_chart(bu, params)

    return Fiber(s, b, cf)


def gauss_newton_fiber(s: SubmersionMap, b: ManifoldPoint, seeds, max_iter: int = 100, tol: float = 1e-10) -> np.ndarray:
    """Damped Gauss-Newton on ``|pi(x) - b|^2`` from each seed; returns the converged points."""
    M, B = s.total, s.base
    U = np.atleast_2d(np.asarray(seeds, dtype=float)).copy()

    def resid(U):
        return B.evaluate(s.apply_batch(U)) - b.x

    r = resid(U)
    for _ in range(max_iter):
        nr = np.linalg.norm(r, axis=-1)
        active = nr > tol
        if not np.any(active):
            break
        Ua = U[active]
        Jr = np.einsum("nab,nbi->nai", B.jacobian_batch(s.apply_batch(Ua)), s.differential_batch(Ua))
        step = np.einsum("nia,na->ni", np.linalg.pinv(Jr), r[active])
        lam = np.ones(len(Ua))
        for _ in range(30):
            trial = Ua - lam[:, None] * step
            for i, (lo, hi) in enumerate(M.domain):
                if M.periods[i] is None:
                    trial[:, i] = np.clip(trial[:, i], lo, hi)
            rt = resid(trial)
            worse = np.linalg.norm(rt, axis=-1) >= nr[active]
            if not np.any(worse):
                break
            lam = np.where(worse, 0.5 * lam, lam)
        U[active] = trial
        r[active] = rt
    good = np.linalg.norm(r, axis=-1) <= max(tol, M.config.fiber_tol)
    return M.canonicalize(U[good])
