"""Gibbs partitions: EPPF engine, balancedness classification and B-sequences.

A Gibbs partition has EPPF ``p(n_1..n_k) = V[n,k] * prod_j W[n_j]`` with
``V[1,1] = W[1] = 1``.  Everything here works with ``log V`` and ``log W``;
zero weights are ``-inf``.

Balancedness only depends on W: log-convex W gives a balance-averse EPPF,
log-concave W (no internal zeros) a balance-seeking one.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np
from scipy import stats
from scipy.special import gammaln

from .logmath import NEG_INF, log_falling, logsumexp_list
from .partitions import (
    CoverTag,
    IntegerPartition,
    OrderResult,
    covers,
    dominance_compare,
    enumerate_integer_partitions,
    gini_simpson_index,
    shannon_index,
    shape_multiplicity,
    MAX_SET_PARTITION_N,
)

TAU_CLS = 1e-9
DEFAULT_S_MAX = 200
NEUTRAL_EPS = 1e-15


class DegenerateStateError(ValueError):
    """The model puts zero mass on the conditioning configuration."""


class SupportError(ValueError):
    """A W-sequence value needed by the computation is zero."""


class Balance(enum.Enum):
    AVERSE = "averse"
    SEEKING = "seeking"
    NEUTRAL = "neutral"
    NEITHER = "neither"


@dataclass(frozen=True)
class BalanceClass:
    kind: Balance
    averse_witness: int | None = None  # first s where log-convexity fails
    seeking_witness: int | None = None  # first s where log-concavity fails
    horizon: int | None = None  # W checked for s <= horizon

    def __eq__(self, other):
        if isinstance(other, Balance):
            return self.kind is other
        if isinstance(other, BalanceClass):
            return self.kind is other.kind
        return NotImplemented

    def __hash__(self):
        return hash(self.kind)

    @property
    def is_averse(self) -> bool:
        return self.kind in (Balance.AVERSE, Balance.NEUTRAL)

    @property
    def is_seeking(self) -> bool:
        return self.kind in (Balance.SEEKING, Balance.NEUTRAL)


def _combine(averse_ok: bool, seeking_ok: bool) -> Balance:
    if averse_ok and seeking_ok:
        return Balance.NEUTRAL
    if averse_ok:
        return Balance.AVERSE
    if seeking_ok:
        return Balance.SEEKING
    return Balance.NEITHER


# --------------------------------------------------------------------------
# W sequences


class WSequence:
    """log W_s for s >= 1, with W_1 = 1.

    ``support_max`` is the last s with W_s > 0 for finite supports (None means
    every s >= 1).  ``log_ratio`` optionally gives ``log(W_{s+1} / W_s)`` in
    closed form, which keeps second differences exact for log-linear W.
    """

    def __init__(
        self,
        log_w: Callable[[int], float],
        support_max: int | None = None,
        log_ratio: Callable[[int], float] | None = None,
        name: str = "W",
    ):
        self._log_w = log_w
        self._log_ratio = log_ratio
        self.support_max = support_max
        self.name = name

    def log_w(self, s: int) -> float:
        if s < 1:
            raise ValueError("W is indexed from s = 1")
        if self.support_max is not None and s > self.support_max:
            return NEG_INF
        if s == 1:
            return 0.0
        return float(self._log_w(s))

    def log_ratio(self, s: int) -> float:
        """log W_{s+1} - log W_s; -inf past the support, requires W_s > 0."""
        if self.support_max is not None and s + 1 > self.support_max:
            if s > self.support_max:
                raise SupportError(f"W_{s} = 0 in {self.name}")
            return NEG_INF
        if self._log_ratio is not None:
            return float(self._log_ratio(s))
        hi, lo = self.log_w(s + 1), self.log_w(s)
        if lo == NEG_INF:
            raise SupportError(f"W_{s} = 0 in {self.name}")
        return hi - lo

    def values(self, s_max: int) -> np.ndarray:
        return np.array([self.log_w(s) for s in range(1, s_max + 1)])

    @classmethod
    def from_log_values(cls, log_values: Sequence[float], finite_support: bool = False, name: str = "W"):
        """W from an explicit table log W_1..log W_m (log W_1 is shifted to 0).

        With ``finite_support`` the table is the whole support; otherwise the
        sequence is only known up to m and queries beyond raise.
        """
        arr = np.asarray(log_values, dtype=float)
        if arr.size == 0 or not np.isfinite(arr[0]):
            raise ValueError("W_1 must be positive")
        arr = arr - arr[0]
        m = arr.size

        def log_w(s: int) -> float:
            if s > m:
                if finite_support:
                    return NEG_INF
                raise SupportError(f"{name} only tabulated up to s={m}")
            return float(arr[s - 1])

        last = m
        if finite_support:
            nz = np.flatnonzero(np.isfinite(arr))
            last = int(nz[-1]) + 1
        seq = cls(log_w, support_max=last if finite_support else None, name=name)
        seq.table_size = m
        return seq


def two_parameter_w(sigma: float) -> WSequence:
    """W_s = Gamma(s - sigma) / Gamma(1 - sigma); W_s = 1 when sigma = -inf."""
    if sigma == -math.inf:
        return WSequence(lambda s: 0.0, log_ratio=lambda s: 0.0, name="W(sigma=-inf)")

    def log_w(s: int) -> float:
        return float(np.sum(np.log(np.arange(1, s) - sigma)))

    return WSequence(log_w, log_ratio=lambda s: math.log(s - sigma), name=f"W(sigma={sigma:g})")


# --------------------------------------------------------------------------
# Models


@dataclass(frozen=True, eq=False)
class GibbsModel:
    w: WSequence
    log_v_fn: Callable[[int, int], float]
    family: str = "Custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "_v_cache", lru_cache(maxsize=None)(self.log_v_fn))

    def log_v(self, n: int, k: int) -> float:
        if not 1 <= k <= n:
            raise ValueError(f"V is defined for 1 <= k <= n, got n={n}, k={k}")
        if n == 1:
            return 0.0
        return float(self._v_cache(n, k))

    def log_w(self, s: int) -> float:
        return self.w.log_w(s)

    def log_eppf(self, shape: IntegerPartition) -> float:
        return log_eppf(self, shape)

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v}" for k, v in self.params.items())
        return f"{self.family}({args})"


def log_eppf(m: GibbsModel, shape: IntegerPartition) -> float:
    lv = m.log_v(shape.n, shape.k)
    if lv == NEG_INF:
        return NEG_INF
    total = lv
    for part in shape.parts:
        lw = m.w.log_w(part)
        if lw == NEG_INF:
            return NEG_INF
        total += lw
    return total


def two_parameter_model(sigma: float, theta: float | None = None, K: int | None = None) -> GibbsModel:
    """Ewens-Pitman (sigma, theta) family.

    Admissible regimes: sigma in [0, 1) with theta > -sigma (DP/PYP);
    sigma < 0 with theta = K|sigma| (Dirichlet-multinomial); sigma = -inf
    with integer K (coupon collector, W = 1).
    """
    if sigma == -math.inf:
        if K is None or int(K) != K or K < 1:
            raise ValueError("sigma = -inf needs a positive integer K")
        return coupon_collector(int(K))
    if sigma >= 1:
        raise ValueError(f"sigma must be < 1, got {sigma}")
    if sigma < 0:
        if theta is None and K is not None:
            theta = K * abs(sigma)
        if theta is None:
            raise ValueError("sigma < 0 needs theta = K|sigma| or K")
        ratio = theta / abs(sigma)
        K_int = int(round(ratio))
        if K_int < 1 or abs(ratio - K_int) > 1e-9 * max(1.0, ratio):
            raise ValueError(f"sigma < 0 requires theta = K|sigma| with integer K; got theta/|sigma| = {ratio}")
        if K is not None and K != K_int:
            raise ValueError(f"K={K} inconsistent with theta/|sigma|={K_int}")
        K = K_int
        log_abs_sigma = math.log(abs(sigma))

        def log_v(n: int, k: int) -> float:
            if k > K:
                return NEG_INF
            # theta + i sigma = |sigma| (K - i)
            num = (k - 1) * log_abs_sigma + float(np.sum(np.log(K - np.arange(1, k))))
            den = float(np.sum(np.log(theta + np.arange(1, n))))
            return num - den

        family = "DirichletMultinomial"
        params = {"sigma": sigma, "theta": theta, "K": K}
    else:
        if theta is None or not theta > -sigma:
            raise ValueError(f"sigma in [0,1) needs theta > -sigma, got theta={theta}")

        def log_v(n: int, k: int) -> float:
            num = float(np.sum(np.log(theta + sigma * np.arange(1, k))))
            den = float(np.sum(np.log(theta + np.arange(1, n))))
            return num - den

        family = "TwoParameter"
        params = {"sigma": sigma, "theta": theta}
    return GibbsModel(two_parameter_w(sigma), log_v, family, params)


def crp(theta: float) -> GibbsModel:
    return two_parameter_model(0.0, theta)


def dirichlet_multinomial(K: int, alpha: float) -> GibbsModel:
    """Symmetric Dirichlet(alpha) over K labels, i.e. sigma = -alpha, theta = K alpha."""
    return two_parameter_model(-alpha, K * alpha, K=K)


def coupon_collector(K: int) -> GibbsModel:
    def log_v(n: int, k: int) -> float:
        return log_falling(K, k) - n * math.log(K)

    return GibbsModel(two_parameter_w(-math.inf), log_v, "CouponCollector", {"K": K, "sigma": -math.inf})


# --------------------------------------------------------------------------
# Mixtures over the number of components


def shifted_poisson(lam: float):
    """1 + Poisson(lam), a distribution on K = 1, 2, ..."""
    return stats.poisson(lam, loc=1)


def dirac(K: int):
    return stats.randint(K, K + 1)


def _series_over_K(q, log_kernel: Callable[[np.ndarray], np.ndarray], k: int,
                   log_tail_factor: Callable[[int], float], eps: float) -> float:
    """log sum_{K >= k} q(K) exp(log_kernel(K)).

    Stops once q's tail mass beyond the last K, times a bound on the kernel
    there (``log_tail_factor``), is below ``eps`` times the running sum.
    """
    lo, hi = q.support()
    start = int(max(k, lo))
    if math.isfinite(hi) and start > hi:
        return NEG_INF
    total = NEG_INF
    chunk = 64
    K0 = start
    while True:
        K = np.arange(K0, K0 + chunk)
        if math.isfinite(hi):
            K = K[K <= hi]
        if K.size == 0:
            return total
        with np.errstate(divide="ignore"):
            terms = q.logpmf(K) + log_kernel(K)
        total = logsumexp_list(np.append(terms, total))
        last = int(K[-1])
        tail = float(q.logsf(last)) + log_tail_factor(last)
        if math.isfinite(hi) and last >= hi:
            return total
        if tail == NEG_INF or (total > NEG_INF and tail < math.log(eps) + total):
            return total
        K0 = last + 1
        chunk = min(chunk * 2, 1 << 16)


def neutral_log_V(q, n: int, k: int, eps: float = NEUTRAL_EPS) -> float:
    """log sum_{K >= k} q(K) K(K-1)...(K-k+1) / K^n."""
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= n")

    def kernel(K: np.ndarray) -> np.ndarray:
        # log falling factorial K_(k) - n log K, vectorized over K >= k
        return gammaln(K + 1.0) - gammaln(K - k + 1.0) - n * np.log(K)

    # K_(k)/K^n <= K^(k-n), nonincreasing in K
    return _series_over_K(q, kernel, k, lambda K: (k - n) * math.log(K), eps)


def neutral_mixture(q, eps: float = NEUTRAL_EPS) -> GibbsModel:
    """Balance-neutral projective partition: W = 1, V from a mixture on K."""
    def log_v(n: int, k: int) -> float:
        return neutral_log_V(q, n, k, eps)

    params = {"q": _describe_dist(q)}
    return GibbsModel(two_parameter_w(-math.inf), log_v, "NeutralMixture", params)


def mfm_model(q, gamma: float, eps: float = NEUTRAL_EPS) -> GibbsModel:
    """Mixture of finite mixtures: K ~ q, symmetric Dirichlet(gamma) weights.

    W_s = Gamma(s + gamma) / Gamma(1 + gamma) and
    V[n,k] = sum_K q(K) K_(k) gamma^k Gamma(K gamma) / Gamma(K gamma + n).
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")

    def log_v(n: int, k: int) -> float:
        def kernel(K: np.ndarray) -> np.ndarray:
            Kf = K.astype(float)
            return (gammaln(Kf + 1.0) - gammaln(Kf - k + 1.0) + k * math.log(gamma)
                    + gammaln(Kf * gamma) - gammaln(Kf * gamma + n))

        def tail_factor(K: int) -> float:
            # the kernel is bounded by 1 and decreasing for large K when n > k
            return 0.0 if n == k else min(0.0, float(kernel(np.array([K]))[0]))

        return _series_over_K(q, kernel, k, tail_factor, eps)

    return GibbsModel(two_parameter_w(-gamma), log_v, "MFMMixture", {"q": _describe_dist(q), "gamma": gamma})


def _describe_dist(q) -> str:
    name = getattr(getattr(q, "dist", None), "name", "dist")
    args = ",".join(f"{a:g}" for a in getattr(q, "args", ()))
    loc = getattr(q, "kwds", {}).get("loc", 0)
    return f"{name}({args})" + (f"+{loc:g}" if loc else "")


class GibbsMixture:
    """EPPF mixing Gibbs components: p = sum_i weight_i * p_i."""

    def __init__(self, components: Iterable[tuple[GibbsModel, float]]):
        self.components = [(m, float(wt)) for m, wt in components]
        if not self.components:
            raise ValueError("a mixture needs at least one component")
        if any(wt < 0 for _, wt in self.components):
            raise ValueError("mixture weights must be nonnegative")
        total = math.fsum(wt for _, wt in self.components)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"mixture weights must sum to 1, got {total}")
        self.family = "Mixture"

    def log_eppf(self, shape: IntegerPartition) -> float:
        return mixture_log_eppf(self.components, shape)


def mixture_log_eppf(components, shape: IntegerPartition) -> float:
    components = list(components)
    if not components:
        raise ValueError("empty mixture")
    with np.errstate(divide="ignore"):
        terms = [math.log(wt) + log_eppf(m, shape) if wt > 0 else NEG_INF for m, wt in components]
    return logsumexp_list(terms)


# --------------------------------------------------------------------------
# Balancedness


def _tol(*xs: float) -> float:
    return TAU_CLS * max([1.0] + [abs(x) for x in xs if math.isfinite(x)])


def classify_balance(w: WSequence, s_max: int = DEFAULT_S_MAX, tol: float | None = None) -> BalanceClass:
    """Log-convexity / log-concavity of W_1..W_{s_max}.

    Second log-differences within the tolerance count as both convex and
    concave.  A finite support end is compatible with log-concavity; an
    internal zero breaks it.
    """
    if s_max < 3:
        raise ValueError("s_max must be at least 3")
    if w.support_max is None and hasattr(w, "table_size"):
        s_max = min(s_max, w.table_size)
    logs = [w.log_w(s) for s in range(1, s_max + 1)]
    averse_witness = seeking_witness = None

    positive = [s for s, lw in enumerate(logs, start=1) if lw > NEG_INF]
    last_pos = positive[-1]
    for s in range(1, last_pos):
        if logs[s - 1] == NEG_INF:
            seeking_witness = s  # internal zero
            break

    for s in range(2, s_max):
        a, b, c = logs[s - 2], logs[s - 1], logs[s]
        if b == NEG_INF:
            convex_ok = True
            concave_ok = True
        elif a == NEG_INF or c == NEG_INF:
            convex_ok = False
            concave_ok = True
        else:
            d2 = w.log_ratio(s) - w.log_ratio(s - 1)
            t = tol if tol is not None else _tol(w.log_ratio(s), w.log_ratio(s - 1))
            convex_ok = d2 >= -t
            concave_ok = d2 <= t
        if not convex_ok and averse_witness is None:
            averse_witness = s
        if not concave_ok and seeking_witness is None:
            seeking_witness = s

    kind = _combine(averse_witness is None, seeking_witness is None)
    return BalanceClass(kind, averse_witness, seeking_witness, s_max)


@lru_cache(maxsize=64)
def _comparable_pairs(n: int) -> tuple[tuple[IntegerPartition, IntegerPartition], ...]:
    pairs = []
    for k in range(1, n + 1):
        shapes = enumerate_integer_partitions(n, k)
        for a in shapes:
            for b in shapes:
                if dominance_compare(a, b) is OrderResult.LESS:
                    pairs.append((a, b))
    return tuple(pairs)


def brute_force_balance_check(m, n: int, rel_tol: float = TAU_CLS) -> BalanceClass:
    """Literal pairwise test of the balancedness definition on every comparable pair in ℐ_n^k.

    ``m`` is anything with a ``log_eppf(shape)`` method.
    """
    if n > 10:
        raise ValueError("brute-force check is limited to n <= 10")
    cache: dict[IntegerPartition, float] = {}

    def lp(shape):
        if shape not in cache:
            cache[shape] = m.log_eppf(shape)
        return cache[shape]

    averse_ok = seeking_ok = True
    for a, b in _comparable_pairs(n):
        la, lb = lp(a), lp(b)
        t = rel_tol * max(1.0, abs(la) if math.isfinite(la) else 0.0, abs(lb) if math.isfinite(lb) else 0.0)
        if averse_ok and not (la >= lb - t or lb == NEG_INF):
            averse_ok = False
        if seeking_ok and not (la <= lb + t or la == NEG_INF):
            seeking_ok = False
        if not averse_ok and not seeking_ok:
            break
    return BalanceClass(_combine(averse_ok, seeking_ok), horizon=n)


def classify_mixture(mixture: GibbsMixture, n: int | None = None, s_max: int = DEFAULT_S_MAX) -> BalanceClass:
    """Sufficient condition from the components' W, else brute force when n is small."""
    classes = [classify_balance(m.w, s_max) for m, _ in mixture.components]
    if all(c.is_averse for c in classes) and all(c.is_seeking for c in classes):
        return BalanceClass(Balance.NEUTRAL, horizon=s_max)
    if all(c.is_averse for c in classes):
        return BalanceClass(Balance.AVERSE, horizon=s_max)
    if all(c.is_seeking for c in classes):
        return BalanceClass(Balance.SEEKING, horizon=s_max)
    if n is not None and n <= 10:
        return brute_force_balance_check(mixture, n)
    return BalanceClass(Balance.NEITHER, horizon=s_max)


def b_sequence(w: WSequence, s: int) -> float:
    """B_s = -s (log W_{s+1} - 2 log W_s + log W_{s-1}); +inf when W_{s+1} = 0."""
    if s < 2:
        raise ValueError("B_s is defined for s >= 2")
    if w.log_w(s - 1) == NEG_INF or w.log_w(s) == NEG_INF:
        raise SupportError(f"B_{s} needs W_{s-1} > 0 and W_{s} > 0 in {w.name}")
    if w.log_w(s + 1) == NEG_INF:
        return math.inf
    return -s * (w.log_ratio(s) - w.log_ratio(s - 1))


def b_sequence_values(w: WSequence, s_max: int) -> list[tuple[int, float]]:
    """(s, B_s) for s = 2..s_max, stopping after the first +inf."""
    out = []
    for s in range(2, s_max + 1):
        try:
            b = b_sequence(w, s)
        except SupportError:
            break
        out.append((s, b))
        if b == math.inf:
            break
    return out


def _last_positive(w: WSequence, s_max: int) -> int:
    if w.support_max is not None:
        return min(w.support_max, s_max)
    return s_max


def lc_compare(w: WSequence, w2: WSequence, s_max: int = DEFAULT_S_MAX, rel_tol: float = TAU_CLS) -> OrderResult:
    """Relative log-concavity order via pointwise B-sequence comparison.

    LESS means w <=_lc w2: supp(w) within supp(w2) and B_s(w) >= B_s(w2) on
    the support of w.
    """
    le = _b_dominates(w, w2, s_max, rel_tol)
    ge = _b_dominates(w2, w, s_max, rel_tol)
    if le and ge:
        return OrderResult.EQUAL
    if le:
        return OrderResult.LESS
    if ge:
        return OrderResult.GREATER
    return OrderResult.INCOMPARABLE


def _b_dominates(w: WSequence, w2: WSequence, s_max: int, rel_tol: float) -> bool:
    """B_s(w) >= B_s(w2) for 2 <= s < last support point of w (checked up to s_max)."""
    m, m2 = _last_positive(w, s_max), _last_positive(w2, s_max)
    if m > m2:
        return False
    for s in range(2, m):
        b1, b2 = b_sequence(w, s), b_sequence(w2, s)
        if b1 == math.inf:
            continue
        if b2 == math.inf:
            return False
        if b1 < b2 - rel_tol * max(1.0, abs(b1), abs(b2)):
            return False
    return True


def is_relatively_log_concave(w: WSequence, w2: WSequence, s_max: int = DEFAULT_S_MAX,
                              rel_tol: float = TAU_CLS) -> bool:
    """w <=_lc w2 straight from the definition: log(W_s / W2_s) concave on supp(w)."""
    m, m2 = _last_positive(w, s_max), _last_positive(w2, s_max)
    if m > m2:
        return False
    d = [w.log_w(s) - w2.log_w(s) for s in range(1, m + 1)]
    for s in range(2, m):
        second = d[s] - 2 * d[s - 1] + d[s - 2]
        if second > rel_tol * max(1.0, abs(d[s]), abs(d[s - 1]), abs(d[s - 2])):
            return False
    return True


# --------------------------------------------------------------------------
# Sequential rules and projectivity


def log_reallocation_weights(m: GibbsModel, counts: Sequence[int], n: int) -> np.ndarray:
    counts = [int(c) for c in counts]
    if sum(counts) != n:
        raise ValueError(f"counts sum to {sum(counts)}, expected n={n}")
    k = len(counts)
    if k == 0:
        return np.array([0.0])
    lv_same = m.log_v(n + 1, k)
    if lv_same == NEG_INF:
        raise DegenerateStateError(f"V[{n + 1},{k}] = 0 in {m!r}")
    lv_new = m.log_v(n + 1, k + 1)
    f = [m.w.log_ratio(c) for c in counts]
    return np.array(f + [lv_new - lv_same])


def reallocation_weights(m: GibbsModel, counts: Sequence[int], n: int) -> np.ndarray:
    """Unnormalized (f(n_1), ..., f(n_k), g(n, k)) for seating datapoint n+1."""
    return np.exp(log_reallocation_weights(m, counts, n))


class ProjectivityReport(NamedTuple):
    ok: bool
    first_failure: tuple | None = None  # (shape, log p_n, log of the summed children)

    def __bool__(self) -> bool:
        return self.ok


def check_projectivity(m, n_max: int, tol: float = 1e-10) -> ProjectivityReport:
    """Addition rule p_n(shape) = sum_j p_{n+1}(shape, n_j + 1) + p_{n+1}(shape, 1), n <= n_max."""
    for n in range(1, n_max + 1):
        for shape in enumerate_integer_partitions(n):
            lhs = m.log_eppf(shape)
            children = []
            parts = list(shape.parts)
            for j in range(len(parts)):
                grown = parts.copy()
                grown[j] += 1
                children.append(m.log_eppf(IntegerPartition.from_sizes(grown)))
            children.append(m.log_eppf(IntegerPartition.from_sizes(parts + [1])))
            rhs = logsumexp_list(children)
            if lhs == NEG_INF or rhs == NEG_INF:
                if lhs != rhs:
                    return ProjectivityReport(False, (shape, lhs, rhs))
                continue
            if abs(math.expm1(rhs - lhs)) > tol:
                return ProjectivityReport(False, (shape, lhs, rhs))
    return ProjectivityReport(True)


# --------------------------------------------------------------------------
# Spectrum and slopes


class SpectrumRow(NamedTuple):
    shape: IntegerPartition
    k: int
    H: float
    G: float
    log_eppf: float
    multiplicity: int


def eppf_spectrum(m, n: int) -> list[SpectrumRow]:
    if n > MAX_SET_PARTITION_N:
        raise ValueError(f"n={n} exceeds the enumeration guard of {MAX_SET_PARTITION_N}")
    return [
        SpectrumRow(shape, shape.k, shannon_index(shape), gini_simpson_index(shape),
                    m.log_eppf(shape), shape_multiplicity(shape))
        for shape in enumerate_integer_partitions(n)
    ]


def spectrum_total_probability(rows: Sequence[SpectrumRow]) -> float:
    return math.fsum(r.multiplicity * math.exp(r.log_eppf) for r in rows if r.log_eppf > NEG_INF)


SPECTRUM_HEADER = ("shape", "k", "H", "G", "log_eppf", "multiplicity")


def format_real(x: float) -> str:
    if x == NEG_INF:
        return "-inf"
    if x == math.inf:
        return "inf"
    if x == 0.0:
        return "0"  # drop the sign of negative zero
    return f"{x:.17g}"


def spectrum_to_csv(rows: Sequence[SpectrumRow], fh=None) -> str | None:
    out = fh if fh is not None else io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(SPECTRUM_HEADER)
    for r in rows:
        writer.writerow([r.shape.label(), r.k, format_real(r.H), format_real(r.G),
                         format_real(r.log_eppf), r.multiplicity])
    return out.getvalue() if fh is None else None


def read_spectrum_csv(fh) -> list[SpectrumRow]:
    rows = []
    for rec in csv.DictReader(fh):
        shape = IntegerPartition(tuple(int(p) for p in rec["shape"].split("-")))
        rows.append(SpectrumRow(shape, int(rec["k"]), float(rec["H"]), float(rec["G"]),
                                float(rec["log_eppf"]), int(rec["multiplicity"])))
    return rows


def slope_ratio(m, a: IntegerPartition, b: IntegerPartition) -> float:
    """(log p(b) - log p(a)) / (H(b) - H(a)) along a (**) cover a -> b."""
    cov = covers(a, b)
    if not cov or cov.tag not in (CoverTag.STARSTAR, CoverTag.BOTH) or cov.s is None or cov.s < 2:
        raise ValueError(f"{b.parts} is not a (**) cover of {a.parts}")
    dlp = m.log_eppf(b) - m.log_eppf(a)
    return dlp / (shannon_index(b) - shannon_index(a))


def shannon_cover_gap(n: int, s: int) -> float:
    """Exact H(b) - H(a) for a (**) cover meeting at value s, n * gap ~ 1/s."""
    def xlogx(x: int) -> float:
        return x * math.log(x) if x > 0 else 0.0

    return (xlogx(s + 1) - 2 * xlogx(s) + xlogx(s - 1)) / n
