"""Quasi-quasi-metric semantics for a simply typed lambda calculus over the reals."""

from qqm.verdict import Verdict

__all__ = ["Verdict"]
__version__ = "0.1.0"
