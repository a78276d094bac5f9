"""Pairwise linkage metrics and the least-squares co-clustering point estimate."""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numba
import numpy as np

from ..partitions import SetPartition


class PairMetrics(NamedTuple):
    fnr: float
    fdr: float
    cp: int  # linked in both
    mp: int  # linked in truth only
    wp: int  # linked in estimate only


def _labels(p) -> np.ndarray:
    if isinstance(p, SetPartition):
        return np.asarray(p.labels)
    return np.asarray(p)


def _pairs(counts: np.ndarray) -> int:
    counts = counts.astype(np.int64)
    return int(np.sum(counts * (counts - 1) // 2))


def fnr_fdr(truth, estimate) -> PairMetrics:
    """FNR = MP/(MP+CP), FDR = WP/(WP+CP); each is 0 when its denominator is 0."""
    t, e = _labels(truth), _labels(estimate)
    if t.shape != e.shape:
        raise ValueError("partitions cover different numbers of records")
    _, t_idx = np.unique(t, return_inverse=True)
    _, e_idx = np.unique(e, return_inverse=True)
    _, joint = np.unique(np.stack([t_idx, e_idx]), axis=1, return_counts=True)
    cp = _pairs(joint)
    mp = _pairs(np.bincount(t_idx)) - cp
    wp = _pairs(np.bincount(e_idx)) - cp
    fnr = mp / (mp + cp) if mp + cp else 0.0
    fdr = wp / (wp + cp) if wp + cp else 0.0
    return PairMetrics(fnr, fdr, cp, mp, wp)


@numba.njit(cache=True)
def _group(z):
    n = z.shape[0]
    K = 0
    for r in range(n):
        if z[r] + 1 > K:
            K = z[r] + 1
    order = np.argsort(z, kind="mergesort")
    starts = np.zeros(K + 1, dtype=np.int64)
    for r in range(n):
        starts[z[r] + 1] += 1
    for c in range(K):
        starts[c + 1] += starts[c]
    return order, starts, K


@numba.njit(cache=True)
def _coclustering(samples):
    S, n = samples.shape
    pi = np.zeros((n, n))
    for s in range(S):
        order, starts, K = _group(samples[s])
        for c in range(K):
            for a in range(starts[c], starts[c + 1]):
                for b in range(a + 1, starts[c + 1]):
                    i, j = order[a], order[b]
                    pi[i, j] += 1.0
                    pi[j, i] += 1.0
    pi /= S
    for i in range(n):
        pi[i, i] = 1.0
    return pi


@numba.njit(cache=True)
def _dahl_scores(samples, pi):
    # sum_{i<j} (d_ij - pi_ij)^2 = sum_{i<j} pi_ij^2 + sum_{linked i<j} (1 - 2 pi_ij)
    S, n = samples.shape
    scores = np.zeros(S)
    for s in range(S):
        order, starts, K = _group(samples[s])
        acc = 0.0
        for c in range(K):
            for a in range(starts[c], starts[c + 1]):
                for b in range(a + 1, starts[c + 1]):
                    acc += 1.0 - 2.0 * pi[order[a], order[b]]
        scores[s] = acc
    return scores


def coclustering_matrix(samples) -> np.ndarray:
    """Posterior probability that records i and j share a cluster."""
    return _coclustering(np.ascontiguousarray(samples, dtype=np.int64))


def dahl_scores(samples, pi: np.ndarray | None = None) -> np.ndarray:
    """Squared co-clustering loss of each sample against the mean co-clustering matrix."""
    samples = np.ascontiguousarray(samples, dtype=np.int64)
    if pi is None:
        pi = _coclustering(samples)
    iu = np.triu_indices(samples.shape[1], k=1)
    return _dahl_scores(samples, pi) + float(np.sum(pi[iu] ** 2))


def dahl_point_estimate(samples: Sequence) -> SetPartition:
    """The sampled partition closest to the co-clustering matrix (first one on ties)."""
    samples = np.asarray([_labels(s) for s in samples]) if not isinstance(samples, np.ndarray) else samples
    if samples.ndim != 2 or samples.shape[0] == 0:
        raise ValueError("need at least one partition sample")
    samples = np.ascontiguousarray(samples, dtype=np.int64)
    # labels must be 0..K-1 for the grouping kernel
    canon = np.array([SetPartition.from_labels(row.tolist()).labels for row in samples], dtype=np.int64) \
        if samples.min() < 0 or not _dense(samples) else samples
    scores = dahl_scores(canon)
    return SetPartition.from_labels(canon[int(np.argmin(scores))].tolist())


def _dense(samples: np.ndarray) -> bool:
    for row in samples:
        if np.unique(row).size != row.max() + 1:
            return False
    return True
