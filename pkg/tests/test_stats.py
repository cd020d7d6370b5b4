import math

import numpy as np
import pytest

from branchsim import (
    ConfigurationError,
    ContactProcessModT,
    ErgodicCTMC,
    EstimateWithError,
    FiniteSet,
    GaltonWatson,
    Interval,
    KilledDriftBM,
    PopulationSnapshot,
    SimulationConfig,
    W_ratio,
    binary_law,
    ks_distance,
    malthusian_D,
    martingale_curve,
    min_h_statistic,
    nu_ratio,
    phi_quadrature,
    run_replicas,
)
from branchsim.stats import snapshot_statistic


def snap(states, t=1.0, truncated=False):
    return PopulationSnapshot(
        time=t,
        live_states=tuple(states),
        absorbed_count=0,
        dead_count=0,
        truncated=truncated,
    )


def test_estimate_rejects_bad_std_error():
    with pytest.raises(ConfigurationError):
        EstimateWithError(1.0, -0.1, 10, 0)
    with pytest.raises(ConfigurationError):
        EstimateWithError(1.0, math.nan, 10, 0)


def test_snapshot_statistic_excludes_truncated():
    reps = [[snap((1, 2))], [snap((3,), truncated=True)], [snap((4, 5, 6))]]
    est = snapshot_statistic(reps, 0, lambda s: s.size)
    assert est.value == pytest.approx(2.5)
    assert est.n_effective == 2 and est.excluded_truncated == 1
    with pytest.raises(ConfigurationError, match="truncated"):
        snapshot_statistic([[snap((1,), truncated=True)]], 0, lambda s: s.size)


def test_malthusian_D_trivial_chain():
    # lam = 0 and h = 1: D_t is just the damped population size
    eig = ErgodicCTMC.default_example().eigen_data()
    law = binary_law(0.2, 1.0)  # growth 0.6
    s = snap((0, 1, 1, 4), t=2.0)
    assert malthusian_D(s, eig, law, 0) == pytest.approx(4 * math.exp(-1.2))


def test_malthusian_D_rejects_surrogate_h():
    m = ContactProcessModT(1, 0.5)
    law = binary_law(0.2, 1.0)
    s = snap((frozenset({(0,)}),), t=1.0)
    with pytest.raises(ConfigurationError, match="surrogate"):
        malthusian_D(s, m.eigen_data(), law, frozenset({(0,)}))
    with pytest.raises(ConfigurationError, match="eigenvalue"):
        malthusian_D(s, m.eigen_data(), law, frozenset({(0,)}), allow_surrogate=True)


def test_martingale_curve_mean_is_one():
    gw = GaltonWatson(((-1, 0.6), (1, 0.4)))  # lam = 0.2
    law = binary_law(0.2, 1.0)
    cfg = SimulationConfig(horizon=2.0, snapshot_times=(1.0, 2.0), seed=9)
    reps = run_replicas(gw, law, 3, cfg, n_replicas=3000, threads=1)
    curve = martingale_curve(reps, gw.eigen_data(), law, 3)
    assert curve.times == (1.0, 2.0)
    for mean, se in zip(curve.mean_D, curve.se_mean):
        assert abs(mean - 1.0) < 4 * se
    assert all(m2 >= 1.0 for m2 in curve.second_moment_D)


def test_W_and_nu_ratios():
    s = snap((0.5, 1.5, 1.7, 3.0))
    B, Bp = Interval(1.0, 2.0), Interval(0.0, 4.0)
    assert W_ratio(s, B, 8.0) == pytest.approx(0.25)
    with pytest.raises(ConfigurationError):
        W_ratio(s, B, 0.0)
    assert nu_ratio(s, B, Bp) == pytest.approx(0.5)
    assert nu_ratio(s, B, FiniteSet((99.0,))) is None


def test_phi_ergodic_closed_form():
    # conservative motion: E[M^2] = 1, Phi = (m2 - m1) / (m1 - 1)
    m = ErgodicCTMC.default_example()
    law = binary_law(0.2, 1.0)
    res = phi_quadrature(m, m.eigen_data(), law, 0)
    assert not res.divergent and not res.ambiguous
    assert res.value == pytest.approx(1.6 / 0.6, rel=1e-6)


def test_phi_flags_divergence_below_threshold():
    m = KilledDriftBM(1.0)  # lam = 0.5
    slow = binary_law(0.2, 1.0)  # growth 0.6 < 2 lam
    res = phi_quadrature(m, m.eigen_data(), slow, 1.0)
    assert res.divergent and res.value == math.inf and res.tail_slope >= 0

    fast = binary_law(0.2, 2.5 * 0.5 / 0.6)  # growth 2.5 lam
    res = phi_quadrature(m, m.eigen_data(), fast, 1.0)
    assert not res.divergent and math.isfinite(res.value) and res.value > 0
    assert float(res) == res.value


def test_ks_distance_dkw():
    rng = np.random.default_rng(0)
    xs = rng.uniform(size=10_000)
    assert ks_distance(xs, lambda x: x) < 0.02
    # point mass at 0.5 against a cdf with F(0.5) = 0.3
    assert ks_distance([0.5] * 100, lambda x: 0.3) == pytest.approx(0.7)
    with pytest.raises(ConfigurationError):
        ks_distance([], lambda x: x)


def test_min_h_statistic():
    eig = KilledDriftBM(1.0).eigen_data()
    assert min_h_statistic(snap(()), eig) == math.inf
    s = snap((0.5, 2.0))
    assert min_h_statistic(s, eig) == pytest.approx(eig.h(0.5))
