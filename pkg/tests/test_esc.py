import math
from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from pbalance.esc import (
    ESCModel,
    Geometric,
    Logarithmic,
    ShiftedBinomial,
    ZTBinomial,
    ZTNegBinomial,
    ZTPoisson,
    classify_mu,
    cmp_truncated_pmf,
    esc_log_eppf,
    esc_to_gibbs,
    hypergeometric_truncated_pmf,
    log_prob_En_closed,
    log_prob_En_dp,
    log_stirling1_abs,
    log_stirling2,
    mu_pmf,
    parse_mu_spec,
    stirling1_abs_exact,
    stirling2_exact,
)
from pbalance.gibbs import Balance, check_projectivity, eppf_spectrum, spectrum_total_probability
from pbalance.logmath import PrecisionError
from pbalance.partitions import IntegerPartition, enumerate_integer_partitions, set_partition_shape_counts

FAMILY_GRID = [
    ShiftedBinomial(10, 0.5), ShiftedBinomial(3, 0.2),
    ZTBinomial(10, 0.5), ZTBinomial(4, 0.7),
    ZTPoisson(0.5), ZTPoisson(5.0),
    ZTNegBinomial(5, 0.5), ZTNegBinomial(2.5, 0.3), ZTNegBinomial(1, 0.6),
    Geometric(0.3), Logarithmic(0.5), Logarithmic(0.9),
]
IDS = [repr(f) for f in FAMILY_GRID]


def composition_mass(f, n):
    """sum over compositions (s_1, ..., s_k) of n of prod mu_{s_i}."""
    total = 0.0
    for k in range(1, n + 1):
        for cuts in combinations(range(1, n), k - 1):
            edges = (0,) + cuts + (n,)
            total += math.prod(mu_pmf(f, b - a) for a, b in zip(edges, edges[1:]))
    return total


@pytest.mark.parametrize("f", FAMILY_GRID, ids=IDS)
def test_pmf_sums_to_one(f):
    s = np.arange(1, 3000)
    assert np.exp(f.log_pmf(s)).sum() == pytest.approx(1.0, abs=1e-12)


def test_pmfs_against_scipy():
    s = np.arange(1, 20)
    assert np.allclose(ZTPoisson(2.0).pmf(s), stats.poisson.pmf(s, 2.0) / stats.poisson.sf(0, 2.0))
    assert np.allclose(ShiftedBinomial(10, 0.3).pmf(s), stats.binom.pmf(s - 1, 10, 0.3))
    assert np.allclose(ZTBinomial(10, 0.3).pmf(s), stats.binom.pmf(s, 10, 0.3) / stats.binom.sf(0, 10, 0.3))
    assert np.allclose(Logarithmic(0.4).pmf(s), stats.logser.pmf(s, 0.4))
    assert np.allclose(Geometric(0.3).pmf(s), stats.geom.pmf(s, 0.3))
    # scipy counts failures before the r-th success with success prob 1-p here
    nb = stats.nbinom.pmf(s, 2.5, 0.6) / stats.nbinom.sf(0, 2.5, 0.6)
    assert np.allclose(ZTNegBinomial(2.5, 0.4).pmf(s), nb)


@pytest.mark.parametrize("f", FAMILY_GRID, ids=IDS)
def test_closed_form_matches_compositions(f):
    for n in range(1, 11):
        assert math.exp(log_prob_En_closed(f, n)) == pytest.approx(composition_mass(f, n), rel=1e-11)


@pytest.mark.parametrize("f", FAMILY_GRID, ids=IDS)
def test_closed_form_matches_dp(f):
    for n in range(1, 41):
        a, b = log_prob_En_closed(f, n), log_prob_En_dp(f, n)
        assert abs(math.expm1(a - b)) < 1e-8


@given(st.floats(0.01, 0.99))
def test_geometric_returns_p(p):
    for n in (1, 2, 7, 40):
        assert math.exp(log_prob_En_closed(Geometric(p), n)) == pytest.approx(p, rel=1e-14)


def test_zt_binomial_exact_rational():
    f = ZTBinomial(3, 0.5)
    # mu = (3/7, 3/7, 1/7); P(E_3) = mu3 + 2 mu1 mu2 + mu1^3
    mu = [Fraction(3, 7), Fraction(3, 7), Fraction(1, 7)]
    want = mu[2] + 2 * mu[0] * mu[1] + mu[0] ** 3
    assert log_prob_En_closed(f, 3) == pytest.approx(math.log(want), rel=1e-15)


def test_float_path_precision_error():
    with pytest.raises(PrecisionError):
        log_prob_En_closed(ZTNegBinomial(3, 0.3), 40, method="float")
    # the default method handles the same case
    a = log_prob_En_closed(ZTNegBinomial(3, 0.3), 40)
    assert a == pytest.approx(log_prob_En_dp(ZTNegBinomial(3, 0.3), 40), rel=1e-10)


def test_stirling_numbers():
    assert [stirling2_exact(5, k) for k in range(1, 6)] == [1, 15, 25, 10, 1]
    assert [stirling1_abs_exact(5, k) for k in range(1, 6)] == [24, 50, 35, 10, 1]
    counts = set_partition_shape_counts(8)
    by_k = {}
    for shape, c in counts.items():
        by_k[shape.k] = by_k.get(shape.k, 0) + c
    for k, c in by_k.items():
        assert stirling2_exact(8, k) == c
    for n, k in [(10, 3), (30, 7), (60, 20), (100, 50)]:
        assert log_stirling2(n, k) == pytest.approx(math.log(stirling2_exact(n, k)), rel=1e-12)
        assert log_stirling1_abs(n, k) == pytest.approx(math.log(stirling1_abs_exact(n, k)), rel=1e-12)


@pytest.mark.parametrize("f", FAMILY_GRID, ids=IDS)
def test_esc_normalization(f):
    m = ESCModel(f)
    for n in range(1, 10):
        assert spectrum_total_probability(eppf_spectrum(m, n)) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("f", FAMILY_GRID[:6], ids=IDS[:6])
def test_esc_gibbs_form(f):
    m = ESCModel(f)
    g = esc_to_gibbs(m, 12)
    for shape in enumerate_integer_partitions(9):
        a, b = esc_log_eppf(m, shape), g.log_eppf(shape)
        assert a == b or abs(a - b) < 1e-10


def test_esc_not_projective():
    assert not check_projectivity(ESCModel(ZTPoisson(2.0)), 6)


@pytest.mark.parametrize("f,kind", [
    (ShiftedBinomial(10, 0.5), Balance.SEEKING),
    (ZTBinomial(10, 0.5), Balance.SEEKING),
    (ZTPoisson(5.0), Balance.NEUTRAL),
    (ZTNegBinomial(5, 0.5), Balance.AVERSE),
    (ZTNegBinomial(0.5, 0.5), Balance.AVERSE),
    (Geometric(0.3), Balance.AVERSE),
    (Logarithmic(0.5), Balance.AVERSE),
])
def test_classify_families(f, kind):
    assert classify_mu(f) == kind


def test_classify_raw_pmfs():
    assert classify_mu(cmp_truncated_pmf(3.0, 1.5, 40)) == Balance.SEEKING
    assert classify_mu(cmp_truncated_pmf(3.0, 0.5, 40)) == Balance.AVERSE
    assert classify_mu(cmp_truncated_pmf(3.0, 1.0, 40)) == Balance.NEUTRAL
    assert classify_mu(hypergeometric_truncated_pmf(30, 8, 12), finite_support=True) == Balance.SEEKING
    with pytest.raises(ValueError):
        classify_mu([0.0, 1.0])


def test_parse_mu_spec():
    assert parse_mu_spec("ztpois:2") == ZTPoisson(2.0)
    assert parse_mu_spec("sbinom:10,0.5") == ShiftedBinomial(10, 0.5)
    assert parse_mu_spec({"family": "ztnegbin", "r": 5, "p": 0.5}) == ZTNegBinomial(5, 0.5)
    assert parse_mu_spec("geom:0.3").success == 0.3
    for bad in ("nope:1", "ztpois:1,2", {"lam": 2}):
        with pytest.raises(ValueError):
            parse_mu_spec(bad)
    with pytest.raises(ValueError):
        ZTBinomial(2.5, 0.5)
    with pytest.raises(ValueError):
        ZTPoisson(-1.0)


def test_zt_binomial_support_cap():
    f = ZTBinomial(4, 0.5)
    m = ESCModel(f)
    assert m.log_eppf(IntegerPartition((5, 1))) == -math.inf
    assert m.log_eppf(IntegerPartition((4, 2))) > -math.inf
