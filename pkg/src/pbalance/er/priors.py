"""Partition priors for entity resolution and their hyperparameter updates.

An ESC prior reallocates record i to an existing cluster of size s (after
removing i) with weight f(s) = (s+1) mu_{s+1} / mu_s and to a new cluster with
weight g(k) = (k+1) mu_1, k being the number of other clusters.  A Gibbs-type
prior uses f(s) = W_{s+1}/W_s and g(k) = V_{n,k+1}/V_{n,k}.

The hyperparameter conditionals drop the 1/P(E_n | mu) factor, matching the
standard microclustering samplers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import betaln, gammaln

from ..esc import (
    Geometric,
    Logarithmic,
    MuFamily,
    ShiftedBinomial,
    ZTBinomial,
    ZTNegBinomial,
    ZTPoisson,
)
from ..gibbs import GibbsModel
from ..logmath import NEG_INF

DEFAULT_HYPER = {
    "shifted-binomial": {},
    "zt-binomial": {"a_p": 0.5, "b_p": 0.5},
    "zt-poisson": {"a_lam": 1.0, "b_lam": 1.0},
    "zt-negbinomial": {"a_r": 1.0, "b_r": 1.0, "a_p": 2.0, "b_p": 2.0},
    "logarithmic": {"a_p": 1.0, "b_p": 1.0},
    "geometric": {"a_p": 1.0, "b_p": 1.0},
}

SLICE_WIDTH = 1.0
SLICE_MAX_STEPS = 50
N_GRID = 4096


class SamplerError(RuntimeError):
    """A hyperparameter conditional could not be sampled."""


@dataclass
class ESCPrior:
    mu: MuFamily
    hyper: dict = field(default_factory=dict)
    fixed: bool = False

    def __post_init__(self):
        base = dict(DEFAULT_HYPER.get(self.mu.tag, {}))
        unknown = set(self.hyper) - set(base)
        if unknown:
            raise ValueError(f"unknown hyperparameters for {self.mu.tag}: {sorted(unknown)}")
        base.update(self.hyper)
        self.hyper = base

    @property
    def name(self) -> str:
        return self.mu.tag


@dataclass
class GibbsPrior:
    model: GibbsModel

    fixed: bool = True

    @property
    def name(self) -> str:
        return self.model.family


def log_size_ratios(mu: MuFamily, s_max: int) -> np.ndarray:
    """log f(s) for s = 0..s_max; index 0 unused."""
    s = np.arange(s_max + 1, dtype=float)
    out = np.full(s_max + 1, NEG_INF)
    ss = s[1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        if isinstance(mu, ShiftedBinomial):
            val = np.log((ss + 1) / ss) + np.log(np.maximum(mu.N - ss + 1, 0)) + math.log(mu.p / (1 - mu.p))
        elif isinstance(mu, ZTBinomial):
            val = np.log(np.maximum(mu.N - ss, 0)) + math.log(mu.p / (1 - mu.p))
        elif isinstance(mu, ZTPoisson):
            val = np.full(ss.shape, math.log(mu.lam))
        elif isinstance(mu, ZTNegBinomial):
            val = np.log(ss + mu.r) + math.log(mu.p)
        elif isinstance(mu, Logarithmic):
            val = np.log(ss) + math.log(mu.p)
        else:
            val = np.array([mu.log_size_ratio(int(v)) for v in ss])
    out[1:] = val
    return out


def reallocation_tables(prior, n: int) -> tuple[np.ndarray, np.ndarray]:
    """(log_f[s], log_g[k]) for s, k = 0..n."""
    if isinstance(prior, ESCPrior):
        log_f = log_size_ratios(prior.mu, n)
        k = np.arange(n + 1)
        log_g = np.log(k + 1.0) + float(prior.mu.log_pmf(1))
        return log_f, log_g
    if isinstance(prior, GibbsPrior):
        m = prior.model
        log_f = np.full(n + 1, NEG_INF)
        for s in range(1, n + 1):
            log_f[s] = m.w.log_ratio(s)
        log_g = np.full(n + 1, NEG_INF)
        log_g[0] = 0.0
        for k in range(1, n):
            log_g[k] = m.log_v(n, k + 1) - m.log_v(n, k)
        return log_f, log_g
    raise TypeError(f"unsupported prior {type(prior).__name__}")


# --------------------------------------------------------------------------
# slice sampling


def slice_sample(logpdf, x0: float, rng: np.random.Generator, width: float = SLICE_WIDTH,
                 max_steps: int = SLICE_MAX_STEPS, lower: float = -math.inf,
                 upper: float = math.inf) -> float:
    """One univariate slice-sampling update with stepping out and shrinkage."""
    f0 = logpdf(x0)
    if not math.isfinite(f0):
        raise SamplerError(f"slice sampler started at a point of zero density: {x0}")
    log_y = f0 + math.log(rng.random())
    left = x0 - width * rng.random()
    right = left + width
    j = int(max_steps * rng.random())
    k = max_steps - 1 - j
    while j > 0 and left > lower and logpdf(left) > log_y:
        left -= width
        j -= 1
    while k > 0 and right < upper and logpdf(right) > log_y:
        right += width
        k -= 1
    left, right = max(left, lower), min(right, upper)
    for _ in range(200):
        x1 = left + (right - left) * rng.random()
        if x1 > lower and x1 < upper and logpdf(x1) > log_y:
            return x1
        if x1 < x0:
            left = x1
        else:
            right = x1
    raise SamplerError("slice shrinkage did not terminate")


def _log_beta_pdf(p: float, a: float, b: float) -> float:
    if not 0.0 < p < 1.0:
        return NEG_INF
    return (a - 1) * math.log(p) + (b - 1) * math.log1p(-p)


# --------------------------------------------------------------------------
# hyperparameter conditionals, in terms of the cluster sizes


def log_target_ztbinomial_p(p: float, N: int, sizes: np.ndarray, a: float, b: float) -> float:
    if not 0.0 < p < 1.0:
        return NEG_INF
    n, k = int(sizes.sum()), sizes.size
    return (_log_beta_pdf(p, a, b) + n * math.log(p) + (N * k - n) * math.log1p(-p)
            - k * math.log(-math.expm1(N * math.log1p(-p))))


def log_target_ztpoisson_lam(lam: float, sizes: np.ndarray, a: float, b: float) -> float:
    if not lam > 0:
        return NEG_INF
    n, k = int(sizes.sum()), sizes.size
    # e^-lam / (1 - e^-lam) = 1 / expm1(lam)
    return (a - 1) * math.log(lam) - b * lam + n * math.log(lam) - k * math.log(math.expm1(lam))


def log_target_negbin(r: float, p: float, sizes: np.ndarray, hyper: dict) -> float:
    if not (r > 0 and 0.0 < p < 1.0):
        return NEG_INF
    n, k = int(sizes.sum()), sizes.size
    a = r * math.log1p(-p)
    out = (hyper["a_r"] - 1) * math.log(r) - hyper["b_r"] * r + _log_beta_pdf(p, hyper["a_p"], hyper["b_p"])
    out += n * math.log(p) + k * (a - math.log(-math.expm1(a)))
    # prod_j r (r+1) ... (r + n_j - 1)
    out += float(np.sum(gammaln(sizes + r))) - k * math.lgamma(r)
    return out


def log_target_logarithmic_p(p: float, sizes: np.ndarray, a: float, b: float) -> float:
    if not 0.0 < p < 1.0:
        return NEG_INF
    n, k = int(sizes.sum()), sizes.size
    return _log_beta_pdf(p, a, b) + n * math.log(p) - k * math.log(-math.log1p(-p))


@lru_cache(maxsize=4)
def _lgamma_table(size: int) -> np.ndarray:
    return gammaln(np.arange(size, dtype=float))


def log_target_shifted_binomial_N(N: np.ndarray, sizes: np.ndarray) -> np.ndarray:
    """log [N | sizes] up to a constant, vectorized over integer N (p integrated out)."""
    n, k = int(sizes.sum()), sizes.size
    N = np.asarray(N, dtype=np.int64)
    lg = _lgamma_table(max(int(N.max()) + 2, 1 << 13))
    Nf = N.astype(float)
    out = betaln(n - k + 0.5, Nf * k - n + k + 0.5) - np.log(Nf)
    out += float(np.sum(np.log(sizes))) + k * lg[N + 1]
    values, counts = np.unique(sizes, return_counts=True)
    for s, m in zip(values, counts):
        out -= m * lg[N - s + 2]
    return out


def sample_shifted_binomial(sizes: np.ndarray, rng: np.random.Generator) -> ShiftedBinomial:
    """Exact joint draw of (N, p): N from its discrete conditional, then p | N from a Beta.

    The N conditional decays like N^(-3/2); mass beyond the evaluated grid is
    drawn from the matching Pareto tail.
    """
    n, k = int(sizes.sum()), sizes.size
    n_lo = max(1, int(sizes.max()) - 1)
    end = n_lo + N_GRID
    logs = log_target_shifted_binomial_N(np.arange(n_lo, end), sizes)
    top = logs.max()
    if not math.isfinite(top):
        raise SamplerError("shifted-binomial N conditional has no mass on the grid")
    mass = np.exp(logs - top)
    total = mass.sum()
    # sum_{N >= end} c N^-1.5 ~ 2 c / sqrt(end), with c fitted to the last grid point
    log_tail = logs[-1] + 1.5 * math.log(end - 1) + math.log(2.0) - 0.5 * math.log(end)
    tail = math.exp(log_tail - top)
    u = rng.random() * (total + tail)
    if u < total:
        N = n_lo + int(np.searchsorted(np.cumsum(mass), u, side="right"))
        N = min(N, end - 1)
    else:
        # Pareto draw for the power-law tail beyond the grid
        N = int(end / (1.0 - rng.random()) ** 2)
    p = rng.beta(n - k + 0.5, N * k - n + k + 0.5)
    p = min(max(p, 1e-300), 1 - 1e-16)
    return ShiftedBinomial(N, p)


def update_theta_mu(prior: ESCPrior, sizes: np.ndarray, rng: np.random.Generator) -> MuFamily:
    """One draw of the size-law parameters given the current cluster sizes."""
    mu, h = prior.mu, prior.hyper
    sizes = np.asarray(sizes, dtype=np.int64)
    if isinstance(mu, ShiftedBinomial):
        return sample_shifted_binomial(sizes, rng)
    if isinstance(mu, ZTBinomial):
        if sizes.max() > mu.N:
            raise SamplerError("a cluster exceeds the binomial trial count")
        p = slice_sample(lambda q: log_target_ztbinomial_p(q, mu.N, sizes, h["a_p"], h["b_p"]),
                         mu.p, rng, lower=0.0, upper=1.0)
        return ZTBinomial(mu.N, p)
    if isinstance(mu, ZTPoisson):
        def lt(u):
            return log_target_ztpoisson_lam(math.exp(u), sizes, h["a_lam"], h["b_lam"]) + u
        return ZTPoisson(math.exp(slice_sample(lt, math.log(mu.lam), rng)))
    if isinstance(mu, Geometric):
        n, k = int(sizes.sum()), sizes.size
        return Geometric(rng.beta(h["a_p"] + k, h["b_p"] + n - k))
    if isinstance(mu, ZTNegBinomial):
        if not mu.r > 0:
            raise SamplerError("the negative-binomial sampler needs r > 0")

        def lt_r(u):
            return log_target_negbin(math.exp(u), mu.p, sizes, h) + u
        r = math.exp(slice_sample(lt_r, math.log(mu.r), rng))
        p = slice_sample(lambda q: log_target_negbin(r, q, sizes, h), mu.p, rng, lower=0.0, upper=1.0)
        return ZTNegBinomial(r, p)
    if isinstance(mu, Logarithmic):
        p = slice_sample(lambda q: log_target_logarithmic_p(q, sizes, h["a_p"], h["b_p"]),
                         mu.p, rng, lower=0.0, upper=1.0)
        return Logarithmic(p)
    raise SamplerError(f"no hyperparameter update for {mu.tag}")


def beta_prior_from_moments(mean: float, sd: float) -> tuple[float, float]:
    """Beta(a, b) with the given mean and standard deviation."""
    var = sd * sd
    common = mean * (1 - mean) / var - 1
    if common <= 0:
        raise ValueError("standard deviation too large for a Beta law with this mean")
    return mean * common, (1 - mean) * common


DEFAULT_BETA_PRIOR = beta_prior_from_moments(0.005, 0.01)

