import math

import pytest

from branchsim import ABSORBED, ConfigurationError, FiniteSet, Interval, Predicate, count_in


def test_interval_membership_is_open():
    B = Interval(1.0, 2.0)
    assert B.contains(1.5)
    assert not B.contains(1.0) and not B.contains(2.0)
    assert not B.contains(ABSORBED)
    assert B.bounded
    assert not Interval(0.0, math.inf).bounded


def test_interval_requires_order():
    with pytest.raises(ConfigurationError):
        Interval(2.0, 2.0)


def test_finite_set():
    B = FiniteSet((1, 3))
    assert B.contains(3) and not B.contains(2)
    assert not B.contains(ABSORBED)
    assert B.bounded


def test_predicate_never_matches_absorbed():
    B = Predicate(lambda s: True, nu_mass_override=0.5)
    assert B.contains(123)
    assert not B.contains(ABSORBED)
    assert B.nu_mass_override == 0.5


def test_count_in():
    states = (0.5, 1.5, 1.7, ABSORBED, 3.0)
    assert count_in(states, Interval(1.0, 2.0)) == 2
