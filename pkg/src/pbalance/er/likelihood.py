"""Record likelihood under the categorical distortion model."""

from __future__ import annotations

import numpy as np

from ..logmath import logsumexp_list
from ..partitions import MAX_SET_PARTITION_N, restricted_growth_strings, IntegerPartition
from .data import ERDataset


def log_record_likelihood(x_i, y_j, beta, theta) -> float:
    """sum_l log[(1 - b_l) 1(x_il = y_jl) + b_l theta_l(x_il)], distortion indicators summed out."""
    x_i = np.asarray(x_i)
    y_j = np.asarray(y_j)
    beta = np.asarray(beta, dtype=float)
    th = np.asarray(theta)[np.arange(x_i.size), x_i]
    with np.errstate(divide="ignore"):
        return float(np.sum(np.log((1.0 - beta) * (x_i == y_j) + beta * th)))


def new_cluster_log_likelihood(x_i, theta) -> float:
    """Entity row integrated over theta: sum_l log theta_l(x_il)."""
    x_i = np.asarray(x_i)
    with np.errstate(divide="ignore"):
        return float(np.sum(np.log(np.asarray(theta)[np.arange(x_i.size), x_i])))


def cluster_log_marginal(x_block: np.ndarray, beta, theta, D) -> float:
    """log p(records in one cluster) with the entity row and distortions summed out."""
    total = 0.0
    beta = np.asarray(beta, dtype=float)
    for ell in range(x_block.shape[1]):
        xs = x_block[:, ell]
        th = theta[ell, : D[ell]]
        terms = []
        for v in range(D[ell]):
            if th[v] == 0.0:
                continue
            with np.errstate(divide="ignore"):
                terms.append(np.log(th[v]) + np.sum(np.log((1 - beta[ell]) * (xs == v) + beta[ell] * th[xs])))
        total += logsumexp_list(terms)
    return total


def exact_partition_posterior(ds: ERDataset, prior, beta) -> dict[tuple[int, ...], float]:
    """Posterior over every set partition of the records, by enumeration.

    ``prior`` is anything with ``log_eppf(IntegerPartition)``.  Keys are
    canonical label tuples.
    """
    if ds.n > MAX_SET_PARTITION_N:
        raise ValueError("exhaustive posterior is only available for tiny n")
    logs = {}
    cache: dict[tuple[int, ...], float] = {}
    for labels in restricted_growth_strings(ds.n):
        lab = np.asarray(labels)
        k = lab.max() + 1
        blocks = [tuple(np.flatnonzero(lab == c)) for c in range(k)]
        lp = prior.log_eppf(IntegerPartition.from_sizes([len(b) for b in blocks]))
        for b in blocks:
            if b not in cache:
                cache[b] = cluster_log_marginal(ds.x[list(b)], beta, ds.theta, ds.D)
            lp += cache[b]
        logs[labels] = lp
    norm = logsumexp_list(list(logs.values()))
    return {key: float(np.exp(v - norm)) for key, v in logs.items()}
