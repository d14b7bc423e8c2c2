"""Verdict-carrying reports shared by the verifiers and the rough-isometry tools."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .errors import HypothesisFailed, Indeterminate, VerificationFailed


class Verdict(str, enum.Enum):
    SATISFIED = "Satisfied"
    VIOLATED = "Violated"
    VIOLATED_RI1 = "ViolatedRI1"
    VIOLATED_RI2 = "ViolatedRI2"
    HYPOTHESIS_FAILED = "HypothesisFailed"
    INDETERMINATE = "Indeterminate"
    NOT_APPLICABLE = "NotApplicable"
    NOT_FOUND = "NotFound"

    def __str__(self) -> str:
        return self.value


def jsonable(obj: Any) -> Any:
    """Convert numpy scalars/arrays, enums and tuples into plain JSON types.

    Non-finite floats become strings so the output stays strict JSON.
    """
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if hasattr(obj, "to_dict"):
        return jsonable(obj.to_dict())
    return obj


@dataclass
class Report:
    """Outcome of one check: the two sides of the inequality, the slack used and a verdict."""

    check: str
    verdict: Verdict
    case: str = ""
    lhs: Optional[float] = None
    rhs: Optional[float] = None
    slack: Optional[float] = None
    hypothesis: Optional[dict] = None
    witnesses: list = field(default_factory=list)
    details: dict = field(default_factory=dict)
    message: str = ""

    @property
    def passed(self) -> bool:
        return self.verdict == Verdict.SATISFIED

    def to_dict(self) -> dict:
        return jsonable(
            {
                "case": self.case,
                "check": self.check,
                "hypothesis": self.hypothesis,
                "lhs": self.lhs,
                "rhs": self.rhs,
                "slack": self.slack,
                "verdict": self.verdict,
                "witnesses": self.witnesses,
                "details": self.details,
                "message": self.message,
            }
        )

    def raise_for_verdict(self) -> "Report":
        """Raise the matching exception for failing verdicts, else return self."""
        v = self.verdict
        if v == Verdict.HYPOTHESIS_FAILED:
            raise HypothesisFailed(self.message or f"{self.check}: hypothesis fails", self)
        if v == Verdict.INDETERMINATE:
            raise Indeterminate(self.message or f"{self.check}: intervals do not decide", self)
        if v in (Verdict.VIOLATED, Verdict.VIOLATED_RI1, Verdict.VIOLATED_RI2):
            raise VerificationFailed(self.message or f"{self.check}: lhs={self.lhs} rhs={self.rhs}", self)
        return self
