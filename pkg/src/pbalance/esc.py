"""ESC random partitions driven by a cluster-size distribution mu.

EPPF: p(n_1..n_k | mu) = k!/n! * prod_j n_j! mu_{n_j} / P(E_n | mu), where
P(E_n | mu) = sum_k P(X_1 + ... + X_k = n) for X_i iid mu.  As a Gibbs
partition W_s = s! mu_s / mu_1, so the B-sequence vanishes exactly for the
zero-truncated Poisson.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import mpmath
import numpy as np
from scipy import stats
from scipy.special import gammaln

from .gibbs import (
    DEFAULT_S_MAX,
    BalanceClass,
    GibbsModel,
    WSequence,
    classify_balance,
)
from .logmath import (
    NEG_INF,
    PrecisionError,
    log_binom,
    log_factorial,
    logsumexp_list,
    signed_logsumexp,
)
from .partitions import IntegerPartition

EXACT_STIRLING_N = 30


# --------------------------------------------------------------------------
# Stirling numbers


@lru_cache(maxsize=None)
def _stirling_exact(n_max: int) -> tuple[tuple[tuple[int, ...], ...], tuple[tuple[int, ...], ...]]:
    s2 = [[0] * (n_max + 1) for _ in range(n_max + 1)]
    s1 = [[0] * (n_max + 1) for _ in range(n_max + 1)]
    s2[0][0] = s1[0][0] = 1
    for n in range(1, n_max + 1):
        for k in range(1, n + 1):
            s2[n][k] = k * s2[n - 1][k] + s2[n - 1][k - 1]
            s1[n][k] = (n - 1) * s1[n - 1][k] + s1[n - 1][k - 1]
    return tuple(map(tuple, s2)), tuple(map(tuple, s1))


@lru_cache(maxsize=None)
def _stirling_log_tables(n_max: int) -> tuple[np.ndarray, np.ndarray]:
    """log S2 and log |S1| by the positive-term recurrences, rows 0..n_max."""
    L2 = np.full((n_max + 1, n_max + 1), NEG_INF)
    L1 = np.full((n_max + 1, n_max + 1), NEG_INF)
    L2[0, 0] = L1[0, 0] = 0.0
    k = np.arange(n_max + 1)
    with np.errstate(divide="ignore"):
        logk = np.log(k)
        for n in range(1, n_max + 1):
            prev2, prev1 = L2[n - 1], L1[n - 1]
            shifted2 = np.concatenate(([NEG_INF], prev2[:-1]))
            shifted1 = np.concatenate(([NEG_INF], prev1[:-1]))
            L2[n] = np.logaddexp(logk + prev2, shifted2)
            L1[n] = np.logaddexp(math.log(n - 1) + prev1 if n > 1 else np.full_like(prev1, NEG_INF), shifted1)
    return L2, L1


def log_stirling2(n: int, k: int) -> float:
    if k < 0 or n < 0:
        raise ValueError("negative argument")
    if k > n:
        return NEG_INF
    if n <= EXACT_STIRLING_N:
        v = _stirling_exact(EXACT_STIRLING_N)[0][n][k]
        return math.log(v) if v else NEG_INF
    return float(_stirling_log_tables(max(n, 64))[0][n, k])


def log_stirling1_abs(n: int, k: int) -> float:
    if k < 0 or n < 0:
        raise ValueError("negative argument")
    if k > n:
        return NEG_INF
    if n <= EXACT_STIRLING_N:
        v = _stirling_exact(EXACT_STIRLING_N)[1][n][k]
        return math.log(v) if v else NEG_INF
    return float(_stirling_log_tables(max(n, 64))[1][n, k])


def stirling2_exact(n: int, k: int) -> int:
    return _stirling_exact(max(n, EXACT_STIRLING_N))[0][n][k] if k <= n else 0


def stirling1_abs_exact(n: int, k: int) -> int:
    return _stirling_exact(max(n, EXACT_STIRLING_N))[1][n][k] if k <= n else 0


# --------------------------------------------------------------------------
# mu families


def _log_real_binom(a: float, b: int) -> tuple[float, float]:
    """(log|C(a, b)|, sign) for real a and integer b >= 0, from the product a(a-1)...(a-b+1)/b!."""
    if b == 0:
        return 0.0, 1.0
    terms = a - np.arange(b)
    if np.any(terms == 0):
        return NEG_INF, 0.0
    sign = -1.0 if np.count_nonzero(terms < 0) % 2 else 1.0
    return float(np.sum(np.log(np.abs(terms)))) - log_factorial(b), sign


def _frac_binom(a: Fraction, b: int) -> Fraction:
    out = Fraction(1)
    for i in range(b):
        out *= a - i
    return out / math.factorial(b)


class MuFamily:
    """A discrete cluster-size law on s >= 1 with mu_1 > 0."""

    tag = "mu"
    support_max: int | None = None

    def log_pmf(self, s):
        raise NotImplementedError

    def log_size_ratio(self, s: int) -> float:
        """log f(s) = log((s+1) mu_{s+1} / mu_s): existing-cluster reallocation weight."""
        return math.log(s + 1) + float(self.log_pmf(s + 1)) - float(self.log_pmf(s))

    def pmf(self, s):
        return np.exp(self.log_pmf(s))

    @property
    def params(self) -> dict:
        raise NotImplementedError

    def log_prob_En_closed(self, n: int, method: str = "auto") -> float:
        raise NotImplementedError(f"no closed form for {self.tag}")

    def spec(self) -> dict:
        return {"family": self.tag, **self.params}

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v:g}" for k, v in self.params.items())
        return f"{type(self).__name__}({args})"


def _check_p(p: float) -> float:
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    return p


def _check_N(N) -> int:
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N}")
    return int(N)


@dataclass(frozen=True, repr=False)
class ShiftedBinomial(MuFamily):
    """1 + Binomial(N, p), support {1, ..., N+1}."""

    N: int
    p: float
    tag = "shifted-binomial"

    def __post_init__(self):
        object.__setattr__(self, "N", _check_N(self.N))
        object.__setattr__(self, "p", _check_p(self.p))

    @property
    def support_max(self) -> int:
        return self.N + 1

    @property
    def params(self):
        return {"N": self.N, "p": self.p}

    def log_pmf(self, s):
        return stats.binom.logpmf(np.asarray(s) - 1, self.N, self.p)

    def log_size_ratio(self, s: int) -> float:
        if s >= self.N + 1:
            return NEG_INF
        return math.log((s + 1) / s) + math.log(self.N - s + 1) + math.log(self.p / (1 - self.p))

    def log_prob_En_closed(self, n: int, method: str = "auto") -> float:
        N, p = self.N, self.p
        terms = [
            log_binom(N * k, n - k) + (n - k) * math.log(p) + (N * k - n + k) * math.log1p(-p)
            for k in range(-(-n // (N + 1)), n + 1)
        ]
        return logsumexp_list(terms)


@dataclass(frozen=True, repr=False)
class ZTBinomial(MuFamily):
    """Binomial(N, p) conditioned on s >= 1, support {1, ..., N}."""

    N: int
    p: float
    tag = "zt-binomial"

    def __post_init__(self):
        object.__setattr__(self, "N", _check_N(self.N))
        object.__setattr__(self, "p", _check_p(self.p))

    @property
    def support_max(self) -> int:
        return self.N

    @property
    def params(self):
        return {"N": self.N, "p": self.p}

    def log_pmf(self, s):
        s = np.asarray(s)
        log_norm = math.log(-math.expm1(self.N * math.log1p(-self.p)))
        out = stats.binom.logpmf(s, self.N, self.p) - log_norm
        return np.where(s >= 1, out, NEG_INF)

    def log_size_ratio(self, s: int) -> float:
        if s >= self.N:
            return NEG_INF
        return math.log(self.N - s) + math.log(self.p / (1 - self.p))

    def log_prob_En_closed(self, n: int, method: str = "auto") -> float:
        N = self.N
        k_lo = -(-n // N)
        if method in ("auto", "exact"):
            p = Fraction(self.p)
            q = 1 - p
            z = 1 - q**N
            total = Fraction(0)
            for k in range(k_lo, n + 1):
                inner = Fraction(0)
                for i in range(k_lo, k + 1):
                    c = math.comb(k, i) * math.comb(N * i, n)
                    inner += c if (k - i) % 2 == 0 else -c
                total += inner * q ** (N * k - n) / z**k
            total *= p**n
            return _log_fraction(total)
        log_abs, signs = [], []
        lp, lq = math.log(self.p), math.log1p(-self.p)
        lz = math.log(-math.expm1(N * lq))
        for k in range(k_lo, n + 1):
            for i in range(k_lo, k + 1):
                log_abs.append(log_binom(k, i) + log_binom(N * i, n) + n * lp + (N * k - n) * lq - k * lz)
                signs.append(1.0 if (k - i) % 2 == 0 else -1.0)
        val, sign, _ = signed_logsumexp(log_abs, signs)
        if sign <= 0:
            raise PrecisionError("signed sum came out nonpositive")
        return val


@dataclass(frozen=True, repr=False)
class ZTPoisson(MuFamily):
    lam: float
    tag = "zt-poisson"

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def params(self):
        return {"lam": self.lam}

    def _log_norm(self) -> float:
        # log(1 - e^-lam)
        return math.log(-math.expm1(-self.lam))

    def log_pmf(self, s):
        s = np.asarray(s)
        out = stats.poisson.logpmf(s, self.lam) - self._log_norm()
        return np.where(s >= 1, out, NEG_INF)

    def log_size_ratio(self, s: int) -> float:
        return math.log(self.lam)

    def log_prob_En_closed(self, n: int, method: str = "auto") -> float:
        lam = self.lam
        log_em1 = lam + math.log(-math.expm1(-lam))  # log(e^lam - 1)
        terms = [
            log_factorial(k) + n * math.log(lam) - k * log_em1 - log_factorial(n) + log_stirling2(n, k)
            for k in range(1, n + 1)
        ]
        return logsumexp_list(terms)


@dataclass(frozen=True, repr=False)
class ZTNegBinomial(MuFamily):
    """Engen's extended negative binomial, r > -1, r != 0, conditioned on s >= 1.

    mu_s = C(s+r-1, s) (1-p)^r p^s / (1 - (1-p)^r).
    """

    r: float
    p: float
    tag = "zt-negbinomial"

    def __post_init__(self):
        r = float(self.r)
        if not r > -1 or r == 0:
            raise ValueError(f"r must satisfy r > -1 and r != 0, got {r}")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "p", _check_p(self.p))

    @property
    def params(self):
        return {"r": self.r, "p": self.p}

    def _log_const(self) -> tuple[float, float]:
        # (1-p)^r / (1 - (1-p)^r), in (log|.|, sign)
        a = self.r * math.log1p(-self.p)
        denom = -math.expm1(a)
        return a - math.log(abs(denom)), math.copysign(1.0, denom)

    def log_pmf(self, s):
        scalar = np.ndim(s) == 0
        s_arr = np.atleast_1d(np.asarray(s, dtype=np.int64))
        lc, csign = self._log_const()
        out = np.empty(s_arr.shape)
        for idx, sv in enumerate(s_arr):
            if sv < 1:
                out[idx] = NEG_INF
                continue
            lb, bsign = _log_real_binom(sv + self.r - 1, int(sv))
            if bsign * csign <= 0:
                out[idx] = NEG_INF
            else:
                out[idx] = lb + lc + sv * math.log(self.p)
        return float(out[0]) if scalar else out

    def log_size_ratio(self, s: int) -> float:
        return math.log(s + self.r) + math.log(self.p)

    def log_prob_En_closed(self, n: int, method: str = "auto") -> float:
        if self.r == 1.0:
            # (1 - p) p^(s-1): renewal probability is constant
            return math.log1p(-self.p)
        if method in ("auto", "exact") and float(self.r).is_integer():
            r = int(self.r)
            p = Fraction(self.p)
            denom = (1 - p) ** (-r) - 1
            total = Fraction(0)
            for k in range(1, n + 1):
                inner = Fraction(0)
                for i in range(1, k + 1):
                    c = math.comb(k, i) * _frac_binom(Fraction(n + r * i - 1), n)
                    inner += c if (k - i) % 2 == 0 else -c
                total += inner / denom**k
            return _log_fraction(total * p**n)
        if method in ("auto", "mp"):
            return _negbin_En_mp(self.r, self.p, n)
        return self._En_float(n)

    def _En_float(self, n: int) -> float:
        r, p = self.r, self.p
        log_abs, signs = [], []
        a = -r * math.log1p(-p)
        d = math.expm1(a)  # (1-p)^-r - 1
        ld, dsign = math.log(abs(d)), math.copysign(1.0, d)
        for k in range(1, n + 1):
            for i in range(1, k + 1):
                lb, bsign = _log_real_binom(n + r * i - 1, n)
                if bsign == 0:
                    continue
                log_abs.append(log_binom(k, i) + lb + n * math.log(p) - k * ld)
                sgn = bsign * (1.0 if (k - i) % 2 == 0 else -1.0) * (dsign**k)
                signs.append(sgn)
        val, sign, _ = signed_logsumexp(log_abs, signs)
        if sign <= 0:
            raise PrecisionError("signed sum came out nonpositive")
        return val


def _negbin_En_mp(r: float, p: float, n: int) -> float:
    """High-precision evaluation of the alternating sum, raising precision until two levels agree."""
    dps = 40
    prev = None
    while dps <= 640:
        with mpmath.workdps(dps):
            R, P = mpmath.mpf(r), mpmath.mpf(p)
            denom = (1 - P) ** (-R) - 1
            total = mpmath.mpf(0)
            for k in range(1, n + 1):
                inner = mpmath.mpf(0)
                for i in range(1, k + 1):
                    term = mpmath.binomial(k, i) * mpmath.binomial(n + R * i - 1, n)
                    inner += term if (k - i) % 2 == 0 else -term
                total += inner / denom**k
            total *= P**n
            if total > 0 and prev is not None and abs(total - prev) <= abs(total) * mpmath.mpf(10) ** (-20):
                return float(mpmath.log(total))
            prev = total
        dps *= 2
    raise PrecisionError(f"alternating sum for P(E_{n}) did not stabilize")


@dataclass(frozen=True, repr=False)
class Geometric(ZTNegBinomial):
    """Geometric on {1, 2, ...} with success probability p: mu_s = p (1-p)^(s-1).

    Same law as ZTNegBinomial(r=1, p'=1-p); P(E_n | mu) = p for every n.
    """

    tag = "geometric"

    def __init__(self, p: float):
        object.__setattr__(self, "success", _check_p(p))
        super().__init__(1.0, 1.0 - float(p))

    @property
    def params(self):
        return {"p": self.success}

    def log_pmf(self, s):
        s = np.asarray(s)
        out = np.where(s >= 1, math.log(self.success) + (s - 1) * math.log1p(-self.success), NEG_INF)
        return float(out) if out.ndim == 0 else out

    def log_prob_En_closed(self, n: int, method: str = "auto") -> float:
        return math.log(self.success)


@dataclass(frozen=True, repr=False)
class Logarithmic(MuFamily):
    p: float
    tag = "logarithmic"

    def __post_init__(self):
        object.__setattr__(self, "p", _check_p(self.p))

    @property
    def params(self):
        return {"p": self.p}

    def log_pmf(self, s):
        s = np.asarray(s)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = stats.logser.logpmf(s, self.p)
        return np.where(s >= 1, out, NEG_INF)

    def log_size_ratio(self, s: int) -> float:
        return math.log(s) + math.log(self.p)

    def log_prob_En_closed(self, n: int, method: str = "auto") -> float:
        lp = math.log(self.p)
        llog = math.log(-math.log1p(-self.p))
        terms = [
            log_factorial(k) + n * lp - log_factorial(n) - k * llog + log_stirling1_abs(n, k)
            for k in range(1, n + 1)
        ]
        return logsumexp_list(terms)


def _log_fraction(x: Fraction) -> float:
    if x <= 0:
        raise PrecisionError(f"exact sum is nonpositive: {x}")
    # log of a huge rational without float overflow
    num, den = x.numerator, x.denominator
    return _log_int(num) - _log_int(den)


def _log_int(v: int) -> float:
    bits = v.bit_length()
    if bits < 1000:
        return math.log(v)
    shift = bits - 900
    return math.log(v >> shift) + shift * math.log(2)


FAMILIES = {
    "shifted-binomial": ShiftedBinomial,
    "sbinom": ShiftedBinomial,
    "zt-binomial": ZTBinomial,
    "ztbinom": ZTBinomial,
    "zt-poisson": ZTPoisson,
    "ztpois": ZTPoisson,
    "zt-negbinomial": ZTNegBinomial,
    "ztnegbin": ZTNegBinomial,
    "geometric": Geometric,
    "geom": Geometric,
    "logarithmic": Logarithmic,
    "log": Logarithmic,
}


def make_mu(family: str, **params) -> MuFamily:
    try:
        cls = FAMILIES[family]
    except KeyError:
        raise ValueError(f"unknown mu family {family!r}; choose from {sorted(set(FAMILIES))}") from None
    return cls(**params)


_POSITIONAL = {
    ShiftedBinomial: ("N", "p"),
    ZTBinomial: ("N", "p"),
    ZTPoisson: ("lam",),
    ZTNegBinomial: ("r", "p"),
    Geometric: ("p",),
    Logarithmic: ("p",),
}


def parse_mu_spec(spec) -> MuFamily:
    """Build a mu family from "ztpois:2", "sbinom:10,0.5", "ztnegbin:r,p", ... or a
    mapping {"family": ..., <params>}."""
    if isinstance(spec, MuFamily):
        return spec
    if isinstance(spec, dict):
        params = dict(spec)
        try:
            family = params.pop("family")
        except KeyError:
            raise ValueError("mu mapping needs a 'family' key") from None
        return make_mu(family, **params)
    name, _, rest = str(spec).partition(":")
    try:
        cls = FAMILIES[name.strip()]
    except KeyError:
        raise ValueError(f"unknown mu family {name!r}; choose from {sorted(set(FAMILIES))}") from None
    values = [v for v in rest.split(",") if v.strip()]
    names = _POSITIONAL[cls]
    if len(values) != len(names):
        raise ValueError(f"{name} takes {len(names)} parameter(s) {names}, got {len(values)}")
    kwargs = {}
    for key, v in zip(names, values):
        kwargs[key] = int(v) if key == "N" else float(v)
    return cls(**kwargs)


def mu_pmf(f: MuFamily, s: int) -> float:
    if s < 1:
        raise ValueError("mu is indexed from s = 1")
    return float(np.exp(f.log_pmf(s)))


# --------------------------------------------------------------------------
# Normalizing constant


def log_prob_En_closed(f: MuFamily, n: int, method: str = "auto") -> float:
    """log P(E_n | mu) from the family's closed form.

    ``method``: "auto" (exact rationals or high precision where the sum
    alternates), "exact", "mp" or "float" (signed log-sum-exp; raises
    PrecisionError when cancellation is too severe).
    """
    if n < 1:
        raise ValueError("n must be positive")
    if n == 1:
        return float(f.log_pmf(1))
    return f.log_prob_En_closed(n, method=method)


def log_prob_En_dp(f: MuFamily, n: int) -> float:
    """Convolution oracle: c[k][m] = sum_s mu_s c[k-1][m-s], answer sum_k c[k][n]."""
    if n < 1:
        raise ValueError("n must be positive")
    mu = np.zeros(n + 1)
    mu[1:] = np.exp(f.log_pmf(np.arange(1, n + 1)))
    c = np.zeros(n + 1)
    c[0] = 1.0
    parts = []
    for _k in range(1, n + 1):
        c = np.convolve(c, mu)[: n + 1]
        parts.append(c[n])
    return math.log(math.fsum(parts))


# --------------------------------------------------------------------------
# Models


def mu_w_sequence(f: MuFamily) -> WSequence:
    """W_s = s! mu_s / mu_1 with closed-form log ratios."""
    lmu1 = float(f.log_pmf(1))

    def log_w(s: int) -> float:
        return log_factorial(s) + float(f.log_pmf(s)) - lmu1

    return WSequence(log_w, support_max=f.support_max, log_ratio=f.log_size_ratio, name=f"W[{f!r}]")


@dataclass(eq=False)
class ESCModel:
    mu: MuFamily
    method: str = "auto"
    _En: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not float(self.mu.log_pmf(1)) > NEG_INF:
            raise ValueError("ESC models need mu_1 > 0")

    @property
    def family(self) -> str:
        return f"ESC[{self.mu.tag}]"

    def log_prob_En(self, n: int) -> float:
        if n not in self._En:
            self._En[n] = log_prob_En_closed(self.mu, n, self.method)
        return self._En[n]

    def precompute(self, n_max: int) -> "ESCModel":
        for n in range(1, n_max + 1):
            self.log_prob_En(n)
        return self

    def log_eppf(self, shape: IntegerPartition) -> float:
        return esc_log_eppf(self, shape)


def esc_log_eppf(m: ESCModel, shape: IntegerPartition) -> float:
    parts = np.asarray(shape.parts)
    lmu = m.mu.log_pmf(parts)
    if np.any(lmu == NEG_INF):
        return NEG_INF
    return (log_factorial(shape.k) - log_factorial(shape.n)
            + float(np.sum(log_factorial(parts) + lmu)) - m.log_prob_En(shape.n))


def esc_to_gibbs(m: ESCModel, n: int | None = None) -> GibbsModel:
    """Gibbs form: V[n,k] = mu_1^k k! / (n! P(E_n)), W_s = s! mu_s / mu_1."""
    if n is not None:
        m.precompute(n)
    lmu1 = float(m.mu.log_pmf(1))

    def log_v(nn: int, k: int) -> float:
        return k * lmu1 + log_factorial(k) - log_factorial(nn) - m.log_prob_En(nn)

    return GibbsModel(mu_w_sequence(m.mu), log_v, "ESCDerived", {"mu": repr(m.mu)})


def classify_mu(f, s_max: int = DEFAULT_S_MAX, finite_support: bool = False) -> BalanceClass:
    """Balancedness of the ESC model induced by mu.

    ``f`` is a MuFamily or a raw pmf array (mu_1, mu_2, ...).  A raw array is
    treated as a truncation of an infinite-support law unless
    ``finite_support`` is set.
    """
    if isinstance(f, MuFamily):
        return classify_balance(mu_w_sequence(f), s_max)
    pmf = np.asarray(f, dtype=float)
    if pmf.size == 0 or not pmf[0] > 0:
        raise ValueError("mu_1 must be positive")
    s = np.arange(1, pmf.size + 1)
    with np.errstate(divide="ignore"):
        log_w = log_factorial(s) + np.log(pmf)
    w = WSequence.from_log_values(log_w, finite_support=finite_support, name="W[raw mu]")
    return classify_balance(w, min(s_max, pmf.size))


def cmp_truncated_pmf(lam: float, nu: float, s_max: int) -> np.ndarray:
    """Zero-truncated Conway-Maxwell-Poisson pmf on 1..s_max (renormalized over the window)."""
    s = np.arange(1, s_max + 1)
    logw = s * math.log(lam) - nu * gammaln(s + 1.0)
    w = np.exp(logw - logw.max())
    return w / w.sum()


def hypergeometric_truncated_pmf(M: int, K: int, draws: int) -> np.ndarray:
    """Zero-truncated hypergeometric pmf on 1..min(K, draws)."""
    top = min(K, draws)
    s = np.arange(1, top + 1)
    pmf = stats.hypergeom.pmf(s, M, K, draws)
    return pmf / pmf.sum()
