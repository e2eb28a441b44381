"""Collision series and the second-moment threshold."""

import math

import numpy as np
import pytest

from polymerlab.environment import DisorderSpec, lambda2
from polymerlab.errors import (ConfigError, ConvolutionBudgetError,
                               ResourceError)
from polymerlab.l2 import (CONVOLUTION_K_BUDGET, beta_l2,
                           collision_probability, collision_series_sum,
                           green_function_quadrature, single_walk_return)

GAUSS = DisorderSpec("standard_gaussian")


def test_first_terms_closed_form():
    # two walks meet at step 1 with probability 1/(2d)
    for d in (3, 4, 5):
        assert collision_probability(d, 1) == pytest.approx(1.0 / (2 * d),
                                                            rel=1e-13)
    # d=3, k=2: sum over displacement laws, 5/72
    assert collision_probability(3, 2) == pytest.approx(5.0 / 72.0, rel=1e-13)


def test_single_walk_return_basics():
    assert single_walk_return(3, 0) == 1.0
    assert single_walk_return(3, 5) == 0.0   # odd times are unreachable
    assert single_walk_return(2, 2) == pytest.approx(0.25, rel=1e-12)
    assert single_walk_return(1, 2) == pytest.approx(0.5, rel=1e-12)


def test_collision_equals_return_at_even_time():
    # the difference walk is again the simple walk: meet at k <=> return at 2k
    for d in (3, 4):
        for k in (1, 2, 3, 5, 8, 12):
            conv = collision_probability(d, k)
            ret = single_walk_return(d, 2 * k)
            assert conv == pytest.approx(ret, rel=1e-11)


def test_budget_and_validation_errors():
    with pytest.raises(ConvolutionBudgetError):
        collision_probability(3, CONVOLUTION_K_BUDGET + 1)
    with pytest.raises(ConvolutionBudgetError):
        collision_probability(6, 25)    # site budget, not index budget
    with pytest.raises(ConfigError):
        collision_probability(0, 1)
    with pytest.raises(ConfigError):
        collision_probability(3, 0)
    with pytest.raises(ConfigError):
        collision_series_sum(2, 100)    # series diverges below d=3
    with pytest.raises(ConfigError):
        collision_series_sum(3, 9)      # k_max too small for a tail bound
    with pytest.raises(ConfigError):
        collision_series_sum(3, 100, method="laplace")
    with pytest.raises(ConfigError):
        green_function_quadrature(2)


def test_fourier_site_budget():
    with pytest.raises(ResourceError):
        collision_series_sum(4, 100, method="fourier")  # 101^4 nodes


def test_convolution_vs_fourier_identical_terms():
    conv = collision_series_sum(3, 60, method="convolution")
    four = collision_series_sum(3, 60, method="fourier")
    assert conv.method == "convolution" and four.method == "fourier"
    np.testing.assert_allclose(four.terms, conv.terms, rtol=1e-12)
    assert abs(conv.partial_sum - four.partial_sum) < 1e-10


def test_combinatorial_vs_fourier_long_range():
    conv = collision_series_sum(3, 200)
    four = collision_series_sum(3, 200, method="fourier")
    np.testing.assert_allclose(four.terms, conv.terms, rtol=1e-11)
    conv4 = collision_series_sum(4, 80)
    four4 = collision_series_sum(4, 80, method="fourier")
    np.testing.assert_allclose(four4.terms, conv4.terms, rtol=1e-11)


def test_series_terms_positive_decreasing():
    s = collision_series_sum(3, 5000)
    assert np.all(s.terms > 0)
    assert np.all(np.diff(s.terms) < 0)
    # CLT envelope: k^(3/2) * t_k approaches 2*(3/(4pi))^(3/2) from below
    env = s.terms * np.arange(1, 5001) ** 1.5
    lim = 2.0 * (3.0 / (4.0 * math.pi)) ** 1.5
    assert np.all(env < lim)
    assert env[-1] > 0.995 * lim


def test_series_bracket_against_quadrature_oracle():
    g, err = green_function_quadrature(3)
    assert err < 1e-6
    assert g == pytest.approx(1.5163860591, abs=5e-6)
    s_oracle = g - 1.0
    s = collision_series_sum(3, 400_000)
    assert s.lower <= s_oracle <= s.upper
    assert s.tail_bound < 1e-3
    # default budget tightens the bracket below the documented example width
    full = collision_series_sum(3, 1_000_000)
    assert full.lower <= s_oracle <= full.upper
    assert full.upper - full.lower < 6e-4
    assert 0.5158 <= full.lower and full.upper <= 0.5170


def test_series_oracle_other_dimensions():
    for d, kmax in ((4, 60_000), (5, 4_000)):
        g, _ = green_function_quadrature(d)
        s = collision_series_sum(d, kmax)
        assert s.lower <= g - 1.0 <= s.upper, d


def test_series_decreases_with_dimension():
    s3 = collision_series_sum(3, 20_000)
    s4 = collision_series_sum(4, 20_000)
    s5 = collision_series_sum(5, 4_000)
    assert s3.lower > s4.upper
    assert s4.lower > s5.upper
    assert s5.upper < 0.156309


def test_beta_l2_gaussian_closed_form():
    res = beta_l2(GAUSS, 3)
    # gaussian lambda2(beta) = beta^2, so the threshold solves
    # (e^(b^2) - 1) * S = 1 exactly
    s_mid = 0.5 * (res.series.lower + res.series.upper)
    closed = math.sqrt(math.log1p(1.0 / s_mid))
    assert res.beta == pytest.approx(closed, abs=1e-9)
    assert res.lower < res.beta < res.upper
    assert res.upper - res.lower < 4e-3
    assert abs(res.residual) < 1e-6
    assert not res.infinite
    assert res.beta == pytest.approx(1.038012, abs=2e-4)


def test_beta_l2_poisson_and_monotonicity():
    pois = DisorderSpec("centered_poisson", rate=1.0)
    res = beta_l2(pois, 3)
    assert res.beta == pytest.approx(0.711975, abs=2e-4)
    gap_at = lambda b, s: (math.expm1(lambda2(pois, b)) * s - 1.0)
    assert gap_at(res.beta * 0.99, res.series.upper) < 0
    assert gap_at(res.beta * 1.01, res.series.lower) > 0
    # threshold grows with dimension (smaller collision sum)
    r4 = beta_l2(GAUSS, 4, k_max=20_000)
    r5 = beta_l2(GAUSS, 5, k_max=4_000)
    assert beta_l2(GAUSS, 3).beta < r4.beta < r5.beta


def test_beta_l2_series_reuse_and_guards():
    series = collision_series_sum(3, 400_000)
    res = beta_l2(GAUSS, 3, series=series)
    assert res.series is series
    with pytest.raises(ConfigError):
        beta_l2(GAUSS, 4, series=series)   # dimension mismatch
    with pytest.raises(ConfigError):
        beta_l2(GAUSS, 3, k_max=20_000)    # bracket too loose at d=3
