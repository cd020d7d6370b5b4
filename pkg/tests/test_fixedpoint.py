import math
import warnings

import pytest
from hypothesis import given
from hypothesis import strategies as st

from branchsim import (
    BranchingLaw,
    ConfigurationError,
    ErgodicCTMC,
    TransientOU,
    binary_law,
    pgf_extinction,
    sigma_estimate,
    eta_curve,
)
from branchsim.fixedpoint import wilson_se


def test_extinction_binary_quarter():
    # p0 + (1 - p0) s^2 = s has minimal root p0 / (1 - p0)
    assert pgf_extinction(binary_law(0.2, 1.0)) == pytest.approx(0.25, abs=1e-10)


@given(st.floats(0.01, 0.49))
def test_extinction_binary_closed_form(p0):
    assert pgf_extinction(binary_law(p0, 1.0)) == pytest.approx(
        p0 / (1 - p0), abs=1e-9
    )


def test_extinction_zero_without_deaths():
    law = BranchingLaw(((2, 0.5), (3, 0.5)), 1.0)
    assert pgf_extinction(law) == 0.0


def test_extinction_monotone_in_p0():
    etas = [pgf_extinction(binary_law(p, 1.0)) for p in (0.1, 0.2, 0.3, 0.4)]
    assert etas == sorted(etas)


def test_wilson_se():
    assert wilson_se(0, 100) == pytest.approx(0.5 / 101)
    assert wilson_se(50, 100) == pytest.approx(math.sqrt(25.25) / 101)
    assert wilson_se(100, 100) == wilson_se(0, 100)
    with pytest.raises(ConfigurationError):
        wilson_se(0, 0)


def test_eta_curve_converges_to_pgf_root():
    m = ErgodicCTMC.default_example()
    law = binary_law(0.2, 1.0)
    curve = eta_curve(m, law, 0, 8.0, (2.0, 5.0, 8.0), n_replicas=4000, seed=0)
    vals = [e.value for e in curve]
    assert vals == sorted(vals)  # extinction by t is monotone in t
    assert abs(vals[-1] - 0.25) < 4 * curve[-1].std_error + 0.01  # horizon bias


def test_sigma_estimate_transient_ou():
    m = TransientOU(0.2, 1.0)
    law = binary_law(0.2, 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # sweep sensitivity at small n
        res = sigma_estimate(m, law, 5.0, horizon=6.0, n_replicas=800, seed=1)
    assert res.epsilon == 1e-3
    assert set(res.sweep) >= {1e-2, 1e-3, 1e-4}
    # sigma lies strictly between eta and 1 for this escaping motion
    assert 0.25 - 0.05 < res.estimate.value < 1.0
    for eps_lo, eps_hi in zip(sorted(res.sweep), sorted(res.sweep)[1:]):
        assert res.sweep[eps_lo].value <= res.sweep[eps_hi].value


def test_sigma_warns_when_phi_diverges():
    from branchsim import KilledDriftBM

    m = KilledDriftBM(1.0)
    law = binary_law(0.2, 1.0)  # growth 0.6 < 2 lam = 1: no L2 limit
    with pytest.warns(RuntimeWarning, match="Phi diverges"):
        sigma_estimate(m, law, 1.0, horizon=3.0, n_replicas=200, seed=2)
