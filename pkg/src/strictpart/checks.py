"""Assertion levels and tolerant comparisons for runtime contract checks.

Algorithms make their decisions with exact comparisons. The helpers here are
only used when *checking* guarantees, where accumulated float drift would
otherwise produce spurious failures.
"""

from __future__ import annotations

import contextlib
import contextvars

from .errors import ContractViolation, InternalInvariantError

LEVELS = ("off", "cheap", "full")
_level = contextvars.ContextVar("strictpart_assert_level", default="cheap")

ABS_TOL = 1e-9
REL_TOL = 1e-12
DECISION_TOL = 1e-12


def get_level() -> str:
    return _level.get()


def set_level(level: str) -> None:
    if level not in LEVELS:
        raise ValueError(f"unknown assertion level {level!r}; expected one of {LEVELS}")
    _level.set(level)


@contextlib.contextmanager
def assertion_level(level: str):
    """Temporarily switch the assertion level inside a ``with`` block."""
    if level not in LEVELS:
        raise ValueError(f"unknown assertion level {level!r}; expected one of {LEVELS}")
    token = _level.set(level)
    try:
        yield
    finally:
        _level.reset(token)


def enabled(kind: str = "cheap") -> bool:
    """True if checks of the given cost class should run."""
    current = _level.get()
    if current == "off":
        return False
    if kind == "full":
        return current == "full"
    return True


def slack(*scales: float) -> float:
    return ABS_TOL + REL_TOL * max([1.0] + [abs(float(s)) for s in scales])


def rel(scale: float) -> float:
    """Tolerance for algorithmic threshold decisions: proportional to ``scale``, no absolute part.

    Keeping it homogeneous means a tie that holds exactly in real arithmetic is
    decided the same way after all weights are multiplied by a constant.
    """
    return DECISION_TOL * abs(float(scale))


def le(a: float, b: float, *scales: float) -> bool:
    """``a <= b`` up to float drift."""
    return a <= b + slack(a, b, *scales)


def require(cond: bool, message: str, internal: bool = False, **witness) -> None:
    if not cond:
        cls = InternalInvariantError if internal else ContractViolation
        raise cls(message, witness)
