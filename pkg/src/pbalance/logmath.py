"""Log-space helpers shared by the EPPF, ESC and sampler code."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, logsumexp

NEG_INF = -math.inf

_FACT_TABLE_MAX = 170
_LOG_FACT = np.array([math.log(math.factorial(i)) for i in range(_FACT_TABLE_MAX + 1)])


class PrecisionError(ArithmeticError):
    """Raised when a signed sum cancels too badly to trust its float value."""


def log_factorial(n):
    """log(n!) from an exact table for n <= 170, log-gamma beyond."""
    if np.ndim(n) == 0:
        n = int(n)
        if n < 0:
            raise ValueError("factorial of a negative integer")
        if n <= _FACT_TABLE_MAX:
            return float(_LOG_FACT[n])
        return float(gammaln(n + 1.0))
    n = np.asarray(n, dtype=np.int64)
    out = np.empty(n.shape, dtype=float)
    small = n <= _FACT_TABLE_MAX
    out[small] = _LOG_FACT[n[small]]
    out[~small] = gammaln(n[~small] + 1.0)
    return out


def log_falling(a: float, k: int) -> float:
    """log of a(a-1)...(a-k+1) for real a >= k-1; -inf when a product term is zero."""
    if k == 0:
        return 0.0
    if float(a).is_integer() and 0 <= a < k:
        return NEG_INF
    return float(np.sum(np.log(a - np.arange(k))))


def log_binom(n: int, k: int) -> float:
    if k < 0 or k > n:
        return NEG_INF
    return log_factorial(n) - log_factorial(k) - log_factorial(n - k)


def logsumexp_list(values) -> float:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0 or np.all(arr == NEG_INF):
        return NEG_INF
    return float(logsumexp(arr))


def signed_logsumexp(log_abs, signs, rel_tol: float = 1e-6):
    """Sum of sign_i * exp(log_abs_i) in log space.

    Returns ``(log|S|, sign(S), rel_err)`` where ``rel_err`` is a float
    rounding bound ``eps * sum|t_i| / |S|``.  Raises PrecisionError when the
    bound exceeds ``rel_tol``.
    """
    log_abs = np.asarray(log_abs, dtype=float)
    signs = np.asarray(signs, dtype=float)
    keep = np.isfinite(log_abs)
    log_abs, signs = log_abs[keep], signs[keep]
    if log_abs.size == 0:
        return NEG_INF, 0.0, 0.0
    top = log_abs.max()
    scaled = signs * np.exp(log_abs - top)
    total = math.fsum(scaled)
    mass = math.fsum(np.abs(scaled))
    if total == 0.0:
        raise PrecisionError("signed sum cancelled to zero")
    rel_err = np.finfo(float).eps * mass / abs(total) * log_abs.size
    if rel_err > rel_tol:
        raise PrecisionError(
            f"signed sum lost precision (relative error bound {rel_err:.2e}); "
            "use the exact or high-precision path"
        )
    return top + math.log(abs(total)), math.copysign(1.0, total), rel_err


@lru_cache(maxsize=None)
def log_factorial_table(n_max: int) -> np.ndarray:
    return log_factorial(np.arange(n_max + 1))
