"""Categorical record datasets and the synthetic distortion-model generator.

Category ids are 0-based in memory and 1-based on disk.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..esc import MuFamily, ShiftedBinomial, ZTNegBinomial, ZTPoisson, ZTBinomial
from ..partitions import SetPartition

# cluster-size counts m_1, m_2, ... for the three simulation scenarios
SCENARIO_COUNTS = {
    1: (1, 4, 12, 21, 25, 21, 12, 4, 1),
    2: (3, 8, 14, 18, 18, 15, 11, 7, 4, 2, 1),
    3: (8, 12, 14, 14, 13, 11, 8, 6, 5, 3, 2, 1, 1, 1),
}

# the size laws the counts are rounded from
SCENARIO_MU = {
    1: ZTBinomial(10, 0.5),
    2: ZTPoisson(5.0),
    3: ZTNegBinomial(5, 0.5),
}


@dataclass
class ERDataset:
    x: np.ndarray  # (n, L) int, 0-based categories
    D: np.ndarray  # (L,) category counts
    theta: np.ndarray  # (L, max D) per-field category probabilities, zero padded
    truth: SetPartition | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.ascontiguousarray(self.x, dtype=np.int64)
        self.D = np.asarray(self.D, dtype=np.int64)
        self.theta = np.ascontiguousarray(self.theta, dtype=float)
        if self.x.ndim != 2:
            raise ValueError("x must be an (n, L) array")
        if self.D.shape != (self.L,):
            raise ValueError("D must have one entry per field")
        if np.any(self.x < 0) or np.any(self.x >= self.D[None, :]):
            raise ValueError("category ids out of range")
        for ell in range(self.L):
            total = self.theta[ell, : self.D[ell]].sum()
            if abs(total - 1.0) > 1e-12:
                raise ValueError(f"theta for field {ell} sums to {total}")
        if self.truth is not None and self.truth.n != self.n:
            raise ValueError("truth partition has the wrong length")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def L(self) -> int:
        return self.x.shape[1]

    def with_empirical_theta(self) -> "ERDataset":
        return ERDataset(self.x, self.D, empirical_theta(self.x, self.D), self.truth, dict(self.meta))


def empirical_theta(x: np.ndarray, D) -> np.ndarray:
    x = np.asarray(x)
    D = np.asarray(D)
    theta = np.zeros((x.shape[1], int(D.max())))
    for ell in range(x.shape[1]):
        theta[ell, : D[ell]] = np.bincount(x[:, ell], minlength=D[ell]) / x.shape[0]
    return theta


def counts_from_mu(mu: MuFamily, scale: float = 100.0, s_max: int = 200) -> tuple[int, ...]:
    """Round scale * mu_s to integers, trimming trailing zeros."""
    s = np.arange(1, s_max + 1)
    counts = np.rint(scale * np.exp(mu.log_pmf(s))).astype(int)
    nz = np.nonzero(counts)[0]
    if nz.size == 0:
        raise ValueError("every rounded cluster count is zero")
    return tuple(int(c) for c in counts[: nz[-1] + 1])


def scenario_counts(spec) -> tuple[int, ...]:
    """Cluster counts from a scenario id, a MuFamily, or an explicit sequence."""
    if isinstance(spec, MuFamily):
        counts = counts_from_mu(spec)
    elif isinstance(spec, (int, np.integer)):
        if spec not in SCENARIO_COUNTS:
            raise ValueError(f"unknown scenario {spec}; choose from {sorted(SCENARIO_COUNTS)}")
        counts = SCENARIO_COUNTS[int(spec)]
    else:
        counts = tuple(int(c) for c in spec)
    if not counts or any(c < 0 for c in counts) or sum(counts) == 0:
        raise ValueError("cluster counts must be nonnegative and not all zero")
    return counts


def generate_synthetic(
    scenario,
    L: int = 5,
    D: int | np.ndarray = 10,
    theta: np.ndarray | None = None,
    beta: float | np.ndarray = 0.01,
    seed: int | np.random.SeedSequence | None = 0,
    shuffle: bool = True,
) -> ERDataset:
    """Simulate records from the distortion model with a fixed cluster-size profile.

    Each entity draws its field values from theta; each record copies its
    entity's value with probability 1 - beta_l and otherwise redraws it from
    theta_l.  The stored theta is the generating one.
    """
    counts = scenario_counts(scenario)
    rng = np.random.default_rng(seed)
    D = np.broadcast_to(np.asarray(D, dtype=np.int64), (L,)).copy()
    if theta is None:
        theta = np.zeros((L, D.max()))
        for ell in range(L):
            theta[ell, : D[ell]] = 1.0 / D[ell]
    theta = np.asarray(theta, dtype=float)
    beta = np.broadcast_to(np.asarray(beta, dtype=float), (L,))
    if np.any(beta < 0) or np.any(beta > 1):
        raise ValueError("beta must lie in [0, 1]")

    sizes = np.repeat(np.arange(1, len(counts) + 1), counts)
    K = sizes.size
    labels = np.repeat(np.arange(K), sizes)
    n = labels.size

    y = np.empty((K, L), dtype=np.int64)
    x = np.empty((n, L), dtype=np.int64)
    for ell in range(L):
        p = theta[ell, : D[ell]]
        y[:, ell] = rng.choice(D[ell], size=K, p=p)
        distorted = rng.random(n) < beta[ell]
        fresh = rng.choice(D[ell], size=n, p=p)
        x[:, ell] = np.where(distorted, fresh, y[labels, ell])
    if shuffle:
        order = rng.permutation(n)
        x, labels = x[order], labels[order]
    meta = {"counts": list(counts), "beta": beta.tolist(), "K": int(K)}
    return ERDataset(x, D, theta, SetPartition.from_labels(labels.tolist()), meta)


def write_dataset_csv(ds: ERDataset, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = [f"f{ell + 1}" for ell in range(ds.L)]
        if ds.truth is not None:
            header.append("truth")
        w.writerow(header)
        for i in range(ds.n):
            row = [int(v) + 1 for v in ds.x[i]]
            if ds.truth is not None:
                row.append(ds.truth.labels[i] + 1)
            w.writerow(row)


def read_dataset_csv(path, D=None) -> ERDataset:
    """Read a dataset; theta is set to the empirical field distribution."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    if not body:
        raise ValueError(f"{path} has no records")
    has_truth = "truth" in header
    fields = [j for j, h in enumerate(header) if h != "truth"]
    x = np.array([[int(r[j]) - 1 for j in fields] for r in body], dtype=np.int64)
    if np.any(x < 0):
        raise ValueError("category ids in CSV must start at 1")
    if D is None:
        D = x.max(axis=0) + 1
    D = np.broadcast_to(np.asarray(D, dtype=np.int64), (x.shape[1],)).copy()
    truth = None
    if has_truth:
        t = header.index("truth")
        truth = SetPartition.from_labels([int(r[t]) for r in body])
    return ERDataset(x, D, empirical_theta(x, D), truth, {"source": str(path)})
