"""Run the named checks against gallery cases and compare with the expected verdicts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import gallery
from .errors import GeometryError
from .geodesic import diameter_estimate
from .reports import Report, Verdict, jsonable
from .roughiso import (
    A_GRID,
    MetricSampleCloud,
    PointMap,
    RoughIsometryReport,
    ViolationTrend,
    check_ri2_fullness,
    find_ri1_violation,
    fit_ri1,
    nested_boxes,
    sample_cloud_points,
    theorem421_epsilon,
    theorem423_constants,
)
from .submersion import (
    _base_box,
    check_submersion_axiom_S2,
    fiber,
    horizontal_lift_curve,
    hypothesis_scan,
    verify_lemma32,
    verify_prop34,
    verify_prop35,
)

CHECKS = ("S2", "lemma32", "prop34", "prop35", "ri1-fit", "ri1-search", "ri2", "thm421", "thm423")
DEFAULT_BETA = 0.1


@dataclass
class RunConfig:
    """Everything a verification run depends on; equal configs give identical reports."""

    seed: int
    cases: tuple = ()
    checks: Optional[tuple] = None
    samples: int = 64
    box: Optional[tuple] = None
    epsilon: Optional[float] = None
    A: Optional[float] = None
    C: Optional[float] = None
    alpha: Optional[float] = None
    beta: Optional[float] = None
    out: Optional[str] = None

    def __post_init__(self):
        if self.seed is None:
            raise ValueError("a seed is required")
        if self.samples < 10:
            raise ValueError("sample counts must be at least 10")
        if self.box is not None:
            for c in self.box:
                if c is not None and not c[1] > c[0]:
                    raise ValueError(f"box side {c} must have positive width")
        for c in self.checks or ():
            if c not in CHECKS:
                raise ValueError(f"unknown check {c!r}; known: {', '.join(CHECKS)}")


@dataclass
class CheckResult:
    case: str
    check: str
    verdict: Verdict
    expected: Optional[Verdict]
    report: dict
    rows: list = field(default_factory=list)

    @property
    def matched(self) -> bool:
        return self.expected is None or self.verdict == self.expected

    def to_dict(self) -> dict:
        return jsonable({"case": self.case, "check": self.check, "verdict": self.verdict,
                         "expected": self.expected, "matched": self.matched, "report": self.report})


def _fmt(u) -> str:
    return " ".join(f"{float(v):.12g}" for v in np.ravel(u))


def _trend(values: list, sizes: list, min_slope: float = 0.1) -> bool:
    """Same growth rule as the RI.1 fit: last slope at least ``min_slope`` and not below half the previous."""
    s1 = (values[1] - values[0]) / (sizes[1] - sizes[0])
    s2 = (values[2] - values[1]) / (sizes[2] - sizes[1])
    return s2 >= min_slope and s2 >= 0.5 * s1


def _box_span(box) -> float:
    return max((c[1] - c[0] for c in box if c is not None), default=0.0)


def _fiber_box(case: gallery.CaseStudy, box) -> Optional[tuple]:
    if box is None:
        return None
    return tuple(box[i] for i in case.fiber_coords)


def _boxes(case, cfg) -> list:
    box = cfg.box if cfg.box is not None else case.box
    return [None] if box is None else nested_boxes(box)


# -- individual checks ------------------------------------------------------------------


def _s2(case, cfg):
    return check_submersion_axiom_S2(case.submersion, cfg.samples, cfg.box or case.box, cfg.seed)


def _lemma32(case, cfg):
    box = cfg.box or case.lemma_box
    x, xp = case.pair
    return verify_lemma32(case.submersion, x, xp, cfg.alpha, cfg.beta, box, cfg.samples, cfg.seed, strict=False)


def _lift(case):
    gamma = case.base_curve()
    return gamma, horizontal_lift_curve(case.submersion, gamma, case.x0)


def _prop34(case, cfg):
    gamma, Gamma = _lift(case)
    return verify_prop34(case.submersion, gamma, Gamma, cfg.alpha, cfg.beta, cfg.box or case.box, cfg.samples, cfg.seed,
                         strict=False)


def _prop35(case, cfg):
    gamma, Gamma = _lift(case)
    return verify_prop35(case.submersion, gamma, Gamma, cfg.alpha, cfg.beta, cfg.box or case.box, cfg.samples, cfg.seed,
                         strict=False)


def _clouds(case, cfg, boxes):
    M = case.total
    return [MetricSampleCloud.build(M, sample_cloud_points(M, b, cfg.samples, cfg.seed), b) for b in boxes]


def _ri1_fit(case, cfg):
    phi = case.point_map()
    boxes = _boxes(case, cfg)
    clouds = _clouds(case, cfg, boxes)
    res = fit_ri1(phi, clouds if len(clouds) > 1 else clouds[0])
    if isinstance(res, ViolationTrend):
        return RoughIsometryReport("ri1-fit", Verdict.VIOLATED_RI1, case=case.id, details={"trend": res.to_dict()},
                                   sampling={"seed": cfg.seed, "samples": cfg.samples})
    verdict = Verdict.SATISFIED if res.violations == 0 else Verdict.VIOLATED_RI1
    return RoughIsometryReport("ri1-fit", verdict, res.A, res.C, case=case.id, details={"fit": res.to_dict()},
                               sampling={"seed": cfg.seed, "samples": cfg.samples})


def _ri1_search(case, cfg):
    A = cfg.A if cfg.A is not None else case.defaults.get("A", 2.0)
    C = cfg.C if cfg.C is not None else case.defaults.get("C", 5.0)
    rep = find_ri1_violation(case.point_map(), A, C, cfg.box or case.box, seed=cfg.seed)
    rep.case = case.id
    return rep


def _fiber_samples(case, cfg, box):
    f = fiber(case.submersion, case.fiber_base)
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    fm = f.manifold()
    if fm is None or fm.intrinsic_dim == 0:
        params = np.zeros((1, 0))
    else:
        params = fm.sample(cfg.samples, rng, _fiber_box(case, box))
        params = np.vstack([params, sample_cloud_points(fm, _fiber_box(case, box), 0, cfg.seed, grid=cfg.samples)])
    return f, fm, params, rng


def _fullness(case, cfg, epsilon: float, box, extra_targets=None):
    f, fm, params, rng = _fiber_samples(case, cfg, box)
    M = case.total
    targets = M.sample(max(cfg.samples // 4, 10), rng, box)
    if extra_targets is not None:
        targets = np.vstack([np.atleast_2d(extra_targets), targets])
    if fm is None or fm.intrinsic_dim == 0:
        phi = PointMap(fm if fm is not None else M, M, lambda U: f.chart_points(np.zeros((len(U), 0))), "fiber inclusion")
    else:
        phi = PointMap.inclusion(f)
    rep = check_ri2_fullness(phi, params, targets, epsilon, box)
    rep.case = case.id
    return rep


def _ri2(case, cfg):
    if case.id == "hyperboloid422":
        eps = cfg.epsilon if cfg.epsilon is not None else case.defaults["epsilon"]
        w = gallery.hyperboloid_ri2_witness(eps, gallery.T_B)
        R = max(3.0, abs(float(w.u[1])) + 1.0)
        box = (None, (-R, R))
        rep = _fullness(case, cfg, eps, box, extra_targets=w.u)
        rep.details["witness_oracle"] = {"u": w.u.tolist(), "x": w.x.tolist(),
                                         "radius": gallery.hyperboloid_ri2_radius(eps)}
        return rep
    eps = cfg.epsilon
    if eps is None:
        eps = theorem421_epsilon(1.0, DEFAULT_BETA, diameter_estimate(case.base, cfg.samples, cfg.seed, None).upper)
    return _fullness(case, cfg, eps, cfg.box or case.box)


def _thm421(case, cfg):
    s = case.submersion
    beta = cfg.beta if cfg.beta is not None else DEFAULT_BETA
    if not case.base.is_compact:
        return Report("thm421", Verdict.NOT_APPLICABLE, case.id, message="base is not compact")
    boxes = _boxes(case, cfg)
    scans = [hypothesis_scan(s, "thm421", b, cfg.samples, cfg.seed) for b in boxes]
    alphas = [sc.required_alpha(beta) for sc in scans]
    hyp = {"beta": beta, "alpha_by_box": alphas, "scans": [sc.to_dict() for sc in scans]}
    if not all(math.isfinite(a) for a in alphas) or (
        len(boxes) > 1 and _trend(alphas, [_box_span(b) for b in boxes])
    ):
        return Report("thm421", Verdict.HYPOTHESIS_FAILED, case.id, hypothesis=hyp,
                      message="required alpha grows with the truncation box")
    alpha = cfg.alpha if cfg.alpha is not None else alphas[-1]
    if not scans[-1].holds(alpha, beta):
        return Report("thm421", Verdict.HYPOTHESIS_FAILED, case.id, hypothesis=hyp,
                      message=f"alpha={alpha:g} below the required {alphas[-1]:.6g}")
    diam_b = diameter_estimate(case.base, cfg.samples, cfg.seed, None)
    eps = theorem421_epsilon(alpha, beta, diam_b.upper)
    rep = _fullness(case, cfg, eps, boxes[-1])
    hyp.update(alpha=alpha, diam_B=diam_b.to_dict(), epsilon=eps)
    return Report("thm421", rep.verdict, case.id, lhs=rep.details["max_upper"], rhs=eps, slack=0.0, hypothesis=hyp,
                  witnesses=[rep.witness], details=rep.details)


def _fiber_diameters(case, cfg, box) -> float:
    """Largest sampled fiber diameter over a few base points in the image of ``box``."""
    s = case.submersion
    bbox = _base_box(s, box)
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    bases = np.vstack([np.atleast_2d(case.fiber_base), s.base.sample(3, rng, bbox)])
    n = max(cfg.samples // 4, 12)
    worst = 0.0
    for b in bases:
        fm = fiber(s, b).manifold()
        if fm is None or fm.intrinsic_dim == 0:
            continue
        d = diameter_estimate(fm, n, cfg.seed, _fiber_box(case, box))
        worst = max(worst, d.upper)
    return worst


def _thm423(case, cfg):
    s = case.submersion
    beta = cfg.beta if cfg.beta is not None else DEFAULT_BETA
    boxes = _boxes(case, cfg)
    sizes = [_box_span(b) for b in boxes] if len(boxes) > 1 else None
    diams = [_fiber_diameters(case, cfg, b) for b in boxes]
    hlc = [hypothesis_scan(s, "hlc", b, cfg.samples, cfg.seed).required_alpha(beta) for b in boxes]
    hyp = {"beta": beta, "fiber_diameter_by_box": diams, "hlc_alpha_by_box": hlc,
           "boxes": [None if b is None else list(b) for b in boxes]}
    problems = []
    if sizes and _trend(diams, sizes):
        problems.append("fiber diameters grow with the box (no uniform diameter bound)")
    if not all(math.isfinite(a) for a in hlc) or (sizes and _trend(hlc, sizes)):
        problems.append("required horizontal-lift constant grows with the box")
    if problems:
        return Report("thm423", Verdict.HYPOTHESIS_FAILED, case.id, hypothesis=hyp, message="; ".join(problems))
    alpha = cfg.alpha if cfg.alpha is not None else max(hlc)
    m = case.defaults.get("udf_m", max(diams) + 0.1)
    A_thm, C_thm = theorem423_constants(alpha, beta, m)
    hyp.update(alpha=alpha, m=m, A=A_thm, C=C_thm)
    phi = case.point_map()
    grid = tuple(sorted(set(A_GRID) | {A_thm}))
    fits = [fit_ri1(phi, c, grid, max_C=C_thm) for c in _clouds(case, cfg, boxes)]
    ok = all(f.table[A_thm] <= C_thm and f.violations == 0 for f in fits)
    worst = max(f.table[A_thm] for f in fits)
    return Report("thm423", Verdict.SATISFIED if ok else Verdict.VIOLATED_RI1, case.id, lhs=worst, rhs=C_thm,
                  slack=0.0, hypothesis=hyp, details={"fits": [f.to_dict() for f in fits]})


RUNNERS = {
    "S2": _s2,
    "lemma32": _lemma32,
    "prop34": _prop34,
    "prop35": _prop35,
    "ri1-fit": _ri1_fit,
    "ri1-search": _ri1_search,
    "ri2": _ri2,
    "thm421": _thm421,
    "thm423": _thm423,
}


def _rows(case_id: str, check: str, verdict: Verdict, rep) -> list:
    rows = []
    if isinstance(rep, RoughIsometryReport):
        for r in rep.csv_rows():
            rows.append({**r, "verdict": verdict.value})
    else:
        for w in rep.witnesses:
            pts = {k: v for k, v in w.items() if isinstance(v, list)}
            p = next(iter(pts.values()), [])
            q = list(pts.values())[1] if len(pts) > 1 else []
            rows.append({"case": case_id, "check": check, "verdict": verdict.value, "p": _fmt(p) if p else "",
                         "q": _fmt(q) if q and not isinstance(q[0], list) else "",
                         "delta": "", "d": w.get("d", w.get("deviation", "")), "bound": w.get("bound", "")})
    return rows


def run_check(case: gallery.CaseStudy, check: str, cfg: RunConfig) -> CheckResult:
    if check not in RUNNERS:
        raise ValueError(f"unknown check {check!r}")
    try:
        rep = RUNNERS[check](case, cfg)
    except GeometryError as exc:
        rep = Report(check, Verdict.INDETERMINATE, case.id, message=f"{type(exc).__name__}: {exc}")
    if isinstance(rep, Report) and not rep.case:
        rep.case = case.id
    expected = case.expected.get(check)
    return CheckResult(case.id, check, rep.verdict, expected, rep.to_dict(), _rows(case.id, check, rep.verdict, rep))


def run(cfg: RunConfig) -> list[CheckResult]:
    results = []
    for cid in cfg.cases:
        case = gallery.get_case(cid)
        for check in cfg.checks or case.checks:
            results.append(run_check(case, check, cfg))
    return results


def exit_status(results: list[CheckResult]) -> int:
    """0 when every verdict matches, 3 if any check was undecided, else 2."""
    if any(r.verdict == Verdict.INDETERMINATE and not r.matched for r in results):
        return 3
    if not all(r.matched for r in results):
        return 2
    return 0
