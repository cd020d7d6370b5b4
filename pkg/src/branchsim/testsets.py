"""Test sets: the measurable sets whose particle counts the estimators track."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from .errors import ConfigurationError
from .states import is_absorbed


@dataclass(frozen=True)
class Interval:
    """Open interval (a, b) on the real line. b may be +inf."""

    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise ConfigurationError(f"interval requires a < b, got ({self.a}, {self.b})")

    def contains(self, state) -> bool:
        if is_absorbed(state) or not isinstance(state, (int, float)):
            return False
        return self.a < state < self.b

    @property
    def bounded(self) -> bool:
        import math

        return math.isfinite(self.a) and math.isfinite(self.b)


@dataclass(frozen=True)
class FiniteSet:
    """Explicit finite collection of discrete states."""

    members: tuple

    def __init__(self, members):
        object.__setattr__(self, "members", tuple(members))

    def contains(self, state) -> bool:
        if is_absorbed(state):
            return False
        return state in self.members

    @property
    def bounded(self) -> bool:
        return True


@dataclass(frozen=True)
class Predicate:
    """Membership oracle, with an optional externally supplied nu-mass.

    The callable must be a module-level function if the set is used across
    process boundaries.
    """

    membership: Callable
    nu_mass_override: Optional[float] = None
    bounded: bool = field(default=True)

    def contains(self, state) -> bool:
        if is_absorbed(state):
            return False
        return bool(self.membership(state))


TestSet = object  # Interval | FiniteSet | Predicate


def count_in(states, test_set) -> int:
    """Number of states in an iterable that belong to the test set."""
    return sum(1 for s in states if test_set.contains(s))
