"""Numerical checks for maximal-rank maps between embedded Riemannian manifolds.

Chart-based manifolds with interval distance estimates, Riemannian
submersion diagnostics and horizontal lifts, and sampled rough-isometry
verification, together with a gallery of closed-form case studies.
"""

from .errors import GeometryError, HypothesisFailed, Indeterminate, VerificationFailed
from .geodesic import DiscreteCurve, DistanceEstimate, ShorteningOptions, diameter_estimate, distance
from .manifold import EmbeddedManifold, ManifoldPoint, TangentVector, manifold_from_descriptor
from .reports import Report, Verdict
from .roughiso import (
    PointMap,
    check_ri2_fullness,
    find_ri1_violation,
    fit_ri1,
    rough_inverse,
    theorem421_epsilon,
    theorem423_constants,
)
from .submersion import (
    SubmersionMap,
    check_submersion_axiom_S2,
    fiber,
    horizontal_lift_curve,
    horizontal_lift_vector,
    verify_lemma32,
    verify_prop34,
    verify_prop35,
)

__version__ = "0.1.0"
