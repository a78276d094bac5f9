import math

import numpy as np
import pytest
from scipy import integrate, stats

from pbalance.er.data import SCENARIO_COUNTS
from pbalance.er.priors import (
    DEFAULT_BETA_PRIOR,
    ESCPrior,
    GibbsPrior,
    SamplerError,
    beta_prior_from_moments,
    log_size_ratios,
    log_target_logarithmic_p,
    log_target_negbin,
    log_target_shifted_binomial_N,
    log_target_ztbinomial_p,
    log_target_ztpoisson_lam,
    reallocation_tables,
    sample_shifted_binomial,
    slice_sample,
    update_theta_mu,
)
from pbalance.esc import (
    ESCModel,
    Geometric,
    Logarithmic,
    ShiftedBinomial,
    ZTBinomial,
    ZTNegBinomial,
    ZTPoisson,
)
from pbalance.gibbs import crp, two_parameter_model
from pbalance.partitions import IntegerPartition

SIZES = np.repeat(np.arange(1, 10), SCENARIO_COUNTS[1])
SIZES2 = np.repeat(np.arange(1, 12), SCENARIO_COUNTS[2])


def loglik(mu, sizes):
    return float(np.sum(mu.log_pmf(sizes)))


def test_beta_prior_moments():
    a, b = DEFAULT_BETA_PRIOR
    d = stats.beta(a, b)
    assert d.mean() == pytest.approx(0.005) and d.std() == pytest.approx(0.01)
    with pytest.raises(ValueError):
        beta_prior_from_moments(0.5, 0.6)


@pytest.mark.parametrize("mu", [ShiftedBinomial(10, 0.4), ZTBinomial(10, 0.4), ZTPoisson(3.0),
                                ZTNegBinomial(2.5, 0.6), Logarithmic(0.7), Geometric(0.3)], ids=repr)
def test_size_ratio_table(mu):
    lf = log_size_ratios(mu, 15)
    for s in range(1, 15):
        if float(mu.log_pmf(s)) == -math.inf:
            continue
        want = math.log(s + 1) + float(mu.log_pmf(s + 1)) - float(mu.log_pmf(s))
        assert lf[s] == want == -math.inf or lf[s] == pytest.approx(want, abs=1e-12)


@pytest.mark.parametrize("mu", [ZTPoisson(2.0), ZTNegBinomial(3, 0.4), ShiftedBinomial(6, 0.5)], ids=repr)
def test_esc_reallocation_matches_eppf_ratio(mu):
    log_f, log_g = reallocation_tables(ESCPrior(mu), 20)
    m = ESCModel(mu)
    base = [3, 2, 1]
    new = m.log_eppf(IntegerPartition.from_sizes(base + [1]))
    for j, s in enumerate(base):
        grown = list(base)
        grown[j] += 1
        joined = m.log_eppf(IntegerPartition.from_sizes(grown))
        assert joined - new == pytest.approx(log_f[s] - log_g[len(base)], abs=1e-10)


@pytest.mark.parametrize("model", [crp(1.5), two_parameter_model(0.4, 2.0)], ids=repr)
def test_gibbs_reallocation_matches_eppf_ratio(model):
    n = 7
    log_f, log_g = reallocation_tables(GibbsPrior(model), n)
    base = [3, 2, 1]  # the other six records; record seven moves
    new = model.log_eppf(IntegerPartition.from_sizes(base + [1]))
    for j, s in enumerate(base):
        grown = list(base)
        grown[j] += 1
        joined = model.log_eppf(IntegerPartition.from_sizes(grown))
        assert joined - new == pytest.approx(log_f[s] - log_g[len(base)], abs=1e-12)


def test_unknown_hyperparameter():
    with pytest.raises(ValueError):
        ESCPrior(ZTPoisson(1.0), {"a_p": 1.0})
    assert ESCPrior(ZTPoisson(1.0), {"a_lam": 2.0}).hyper == {"a_lam": 2.0, "b_lam": 1.0}


def _check_conditional(target, prior_logpdf, family, params_a, params_b, sizes):
    lhs = target(*params_a) - target(*params_b)
    rhs = (prior_logpdf(*params_a) + loglik(family(*params_a), sizes)
           - prior_logpdf(*params_b) - loglik(family(*params_b), sizes))
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)


def test_conditionals_are_prior_times_likelihood():
    _check_conditional(lambda lam: log_target_ztpoisson_lam(lam, SIZES2, 1.0, 1.0),
                       lambda lam: stats.gamma(1.0).logpdf(lam), ZTPoisson, (4.0,), (5.5,), SIZES2)
    _check_conditional(lambda p: log_target_ztbinomial_p(p, 10, SIZES, 0.5, 0.5),
                       lambda p: stats.beta(0.5, 0.5).logpdf(p), lambda p: ZTBinomial(10, p), (0.4,), (0.6,), SIZES)
    _check_conditional(lambda p: log_target_logarithmic_p(p, SIZES2, 1.0, 1.0),
                       lambda p: 0.0, Logarithmic, (0.5,), (0.8,), SIZES2)
    h = {"a_r": 1.0, "b_r": 1.0, "a_p": 2.0, "b_p": 2.0}
    _check_conditional(lambda r, p: log_target_negbin(r, p, SIZES2, h),
                       lambda r, p: stats.gamma(1.0).logpdf(r) + stats.beta(2, 2).logpdf(p),
                       ZTNegBinomial, (2.0, 0.5), (4.5, 0.3), SIZES2)


def test_shifted_binomial_N_conditional():
    sizes = np.array([1, 3, 3, 4, 6, 2])

    def by_quadrature(N):
        # N prior proportional to 1/N, p ~ Beta(1/2, 1/2), p integrated numerically
        def integrand(p):
            return math.exp(np.sum(stats.binom.logpmf(sizes - 1, N, p)) + stats.beta(0.5, 0.5).logpdf(p))
        val, _ = integrate.quad(integrand, 0, 1, limit=200, points=[0.1, 0.3, 0.5])
        return math.log(val) - math.log(N)

    Ns = np.array([5, 6, 9, 20, 60])
    got = log_target_shifted_binomial_N(Ns, sizes)
    want = np.array([by_quadrature(int(N)) for N in Ns])
    assert np.allclose(got - got[0], want - want[0], atol=1e-7)


def test_shifted_binomial_draws():
    rng = np.random.default_rng(0)
    draws = [sample_shifted_binomial(SIZES, rng) for _ in range(400)]
    assert all(d.N >= SIZES.max() - 1 for d in draws)
    mean_shift = np.mean([d.N * d.p for d in draws])
    assert 3.7 < mean_shift < 4.3  # sizes - 1 average 3.95


def test_ztpoisson_lambda_posterior():
    rng = np.random.default_rng(1)
    prior = ESCPrior(ZTPoisson(1.0))
    lam = []
    for _ in range(1500):
        prior = ESCPrior(update_theta_mu(prior, SIZES2, rng), prior.hyper)
        lam.append(prior.mu.lam)
    assert 4.0 <= np.mean(lam[200:]) <= 6.0


def test_geometric_conjugate_update():
    rng = np.random.default_rng(2)
    prior = ESCPrior(Geometric(0.5))
    ps = [update_theta_mu(prior, SIZES2, rng).success for _ in range(3000)]
    n, k = SIZES2.sum(), SIZES2.size
    assert np.mean(ps) == pytest.approx((1 + k) / (2 + n), rel=0.02)


@pytest.mark.parametrize("mu", [ZTBinomial(12, 0.3), ZTNegBinomial(2.0, 0.5), Logarithmic(0.5)], ids=repr)
def test_updates_stay_in_range(mu):
    rng = np.random.default_rng(3)
    prior = ESCPrior(mu)
    for _ in range(50):
        prior = ESCPrior(update_theta_mu(prior, SIZES, rng), prior.hyper)
        assert 0 < prior.mu.p < 1


def test_zt_binomial_cap_violation():
    with pytest.raises(SamplerError):
        update_theta_mu(ESCPrior(ZTBinomial(5, 0.5)), SIZES, np.random.default_rng(0))


def test_slice_sampler_normal():
    rng = np.random.default_rng(4)
    x, out = 0.0, []
    for _ in range(6000):
        x = slice_sample(lambda v: -0.5 * v * v, x, rng)
        out.append(x)
    assert abs(np.mean(out)) < 0.08
    assert np.std(out) == pytest.approx(1.0, abs=0.06)


def test_slice_sampler_bounds():
    rng = np.random.default_rng(5)
    x = 0.5
    for _ in range(500):
        x = slice_sample(lambda v: 0.0, x, rng, lower=0.0, upper=1.0)
        assert 0.0 < x < 1.0
    with pytest.raises(SamplerError):
        slice_sample(lambda v: -math.inf, 0.0, rng)
