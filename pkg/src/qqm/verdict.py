"""Three-valued check outcomes.

A check is either proved exactly, refuted with a concrete witness, or held on
a recorded finite sample.  Combining verdicts never upgrades sampled evidence
to a proof.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable

PROVED = "proved"
REFUTED = "refuted"
SAMPLED_OK = "sampled_ok"


@dataclass(frozen=True)
class Verdict:
    status: str
    n_points: int = 0
    witness: Any = field(default=None, compare=False)
    note: str = field(default="", compare=False)

    def __post_init__(self):
        if self.status not in (PROVED, REFUTED, SAMPLED_OK):
            raise ValueError(f"unknown verdict status {self.status!r}")

    def __bool__(self) -> bool:
        return self.status != REFUTED

    @property
    def proved(self) -> bool:
        return self.status == PROVED

    @property
    def refuted(self) -> bool:
        return self.status == REFUTED

    @property
    def sampled(self) -> bool:
        return self.status == SAMPLED_OK

    @classmethod
    def proof(cls, note: str = "") -> "Verdict":
        return cls(PROVED, note=note)

    @classmethod
    def refute(cls, witness: Any, note: str = "") -> "Verdict":
        return cls(REFUTED, witness=witness, note=note)

    @classmethod
    def sampled_ok(cls, n_points: int, note: str = "") -> "Verdict":
        return cls(SAMPLED_OK, n_points=n_points, note=note)

    @classmethod
    def exact(cls, ok: bool, witness: Any = None) -> "Verdict":
        return cls.proof() if ok else cls.refute(witness)

    @classmethod
    def combine(cls, verdicts: Iterable["Verdict"]) -> "Verdict":
        """Conjunction: first refutation wins, any sampling taints a proof."""
        n = 0
        sampled = False
        for v in verdicts:
            if v.refuted:
                return v
            if v.sampled:
                sampled = True
                n += v.n_points
        return cls.sampled_ok(n) if sampled else cls.proof()

    def to_json(self) -> dict:
        out = {"status": self.status, "n_points": self.n_points}
        if self.witness is not None:
            out["witness"] = jsonable(self.witness)
        if self.note:
            out["note"] = self.note
        return out


def jsonable(obj: Any) -> Any:
    """Best-effort conversion of witnesses and report payloads to JSON data."""
    import math

    import numpy as np

    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return x
    if isinstance(obj, (str, int, bool)) or obj is None:
        return obj
    if hasattr(obj, "to_json"):
        return obj.to_json()
    return repr(obj)
