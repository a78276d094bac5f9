"""MCMC for entity resolution with ESC or Gibbs-type partition priors.

One iteration updates the partition (record by record, or by chaperone
pairs), then the size-law parameters, then the entity rows, distortion
indicators and distortion probabilities.

Partition moves condition on the entity rows of occupied clusters and
integrate the row of a prospective new cluster, which is then drawn from its
conditional.  The kernels consume uniforms generated by a numpy Generator,
so a run is fully determined by its seed.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numba
import numpy as np

from ..esc import MuFamily
from ..partitions import SetPartition
from .data import ERDataset
from .priors import DEFAULT_BETA_PRIOR, ESCPrior, GibbsPrior, reallocation_tables, update_theta_mu


class ConfigError(ValueError):
    pass


@dataclass
class MCMCConfig:
    iterations: int = 6000
    burn_in: int = 2000
    thin: int = 1
    seed: int = 0
    use_chaperones: bool = False
    pair_weighting: str = "uniform"  # or "agreement"
    fix_beta: bool = False
    fix_theta_mu: bool = False
    beta_prior: tuple[float, float] = DEFAULT_BETA_PRIOR
    beta_init: float | None = None
    init: str = "exact-match"  # or "singletons", "one-cluster"
    store_z: bool = True
    check_invariants: bool = False

    def validate(self) -> None:
        if self.iterations < 1 or self.burn_in < 0 or self.thin < 1:
            raise ConfigError("iterations must be positive, burn_in nonnegative, thin positive")
        if self.iterations <= self.burn_in:
            raise ConfigError(
                f"no samples after burn-in: iterations={self.iterations}, burn_in={self.burn_in}"
            )
        if self.pair_weighting not in ("uniform", "agreement"):
            raise ConfigError(f"unknown pair_weighting {self.pair_weighting!r}")
        if self.init not in ("exact-match", "singletons", "one-cluster"):
            raise ConfigError(f"unknown init {self.init!r}")
        a, b = self.beta_prior
        if not (a > 0 and b > 0):
            raise ConfigError("beta_prior parameters must be positive")

    @property
    def n_samples(self) -> int:
        return len(range(self.burn_in, self.iterations, self.thin))


@dataclass
class MCMCState:
    z: np.ndarray  # (n,) cluster index in 0..K-1
    sizes: np.ndarray  # (n,) sizes[c] for c < K
    y: np.ndarray  # (n, L) entity rows for c < K
    K: int
    w: np.ndarray  # (n, L) distortion indicators
    beta: np.ndarray  # (L,)
    mu: MuFamily | None = None

    def partition(self) -> SetPartition:
        return SetPartition.from_labels(self.z.tolist())

    def cluster_sizes(self) -> np.ndarray:
        return self.sizes[: self.K].copy()

    def copy(self) -> "MCMCState":
        return MCMCState(self.z.copy(), self.sizes.copy(), self.y.copy(), self.K, self.w.copy(),
                         self.beta.copy(), self.mu)


def check_state(state: MCMCState, ds: ERDataset) -> None:
    """Raise AssertionError if the state is internally inconsistent."""
    K = state.K
    assert 1 <= K <= ds.n
    assert state.z.min() >= 0 and state.z.max() < K
    counts = np.bincount(state.z, minlength=K)
    assert np.array_equal(counts, state.sizes[:K]), "cluster sizes out of sync with labels"
    assert np.all(counts > 0), "empty cluster present"
    undistorted = state.w == 0
    assert np.all(ds.x[undistorted] == state.y[state.z][undistorted]), "w=0 entry differs from entity"


# --------------------------------------------------------------------------
# likelihood tables


def likelihood_tables(ds: ERDataset, beta: np.ndarray):
    """log((1-b) + b theta_v) and log(b theta_v) per field and category."""
    with np.errstate(divide="ignore"):
        log_match = np.log((1.0 - beta)[:, None] + beta[:, None] * ds.theta)
        log_mis = np.log(beta[:, None] * ds.theta)
    return log_match, log_mis


def new_record_loglik(ds: ERDataset) -> np.ndarray:
    with np.errstate(divide="ignore"):
        lt = np.log(ds.theta)
    return lt[np.arange(ds.L)[None, :], ds.x].sum(axis=1)


# --------------------------------------------------------------------------
# reference (pure Python) single-record update


def _choose(logw, u: float) -> int:
    top = max(logw)
    weights = [math.exp(v - top) if v != -math.inf else 0.0 for v in logw]
    total = 0.0
    for v in weights:
        total += v
    target = u * total
    cum = 0.0
    last = 0
    for idx, v in enumerate(weights):
        if v > 0.0:
            last = idx
            cum += v
            if cum > target:
                return idx
    return last


def _draw_new_row(x_i, beta, theta_cdf, D, u_fields) -> list[int]:
    row = []
    for ell in range(len(x_i)):
        uu = u_fields[ell]
        keep = 1.0 - beta[ell]
        if uu < keep:
            row.append(int(x_i[ell]))
            continue
        t = (uu - keep) / beta[ell]
        v = 0
        while v < D[ell] - 1 and theta_cdf[ell, v] <= t:
            v += 1
        row.append(v)
    return row


def gibbs_update_z(state: MCMCState, ds: ERDataset, log_f, log_g, i: int, u_row) -> MCMCState:
    """Resample z_i from its full conditional (reference implementation).

    ``u_row`` holds 1 + L uniforms: the first picks the cluster, the rest draw
    a new entity row when a new cluster is opened.
    """
    log_match, log_mis = likelihood_tables(ds, state.beta)
    theta_cdf = np.cumsum(ds.theta, axis=1)
    x_i = ds.x[i]
    L = ds.L
    c = int(state.z[i])
    state.sizes[c] -= 1
    if state.sizes[c] == 0:
        last = state.K - 1
        if c != last:
            state.y[c] = state.y[last]
            state.sizes[c] = state.sizes[last]
            state.z[state.z == last] = c
        state.K -= 1
    K = state.K
    logw = []
    for cc in range(K):
        lw = float(log_f[state.sizes[cc]])
        for ell in range(L):
            v = x_i[ell]
            lw += log_match[ell, v] if state.y[cc, ell] == v else log_mis[ell, v]
        logw.append(lw)
    lnew = float(log_g[K])
    for ell in range(L):
        lnew += math.log(ds.theta[ell, x_i[ell]]) if ds.theta[ell, x_i[ell]] > 0 else -math.inf
    logw.append(lnew)
    choice = _choose(logw, float(u_row[0]))
    if choice == K:
        state.y[K] = _draw_new_row(x_i, state.beta, theta_cdf, ds.D, u_row[1:])
        state.sizes[K] = 1
        state.K += 1
    else:
        state.sizes[choice] += 1
    state.z[i] = choice
    return state


# --------------------------------------------------------------------------
# numba kernels


@numba.njit(cache=True, nogil=True)
def _nb_choose(logw, m, u):
    top = -np.inf
    for c in range(m):
        if logw[c] > top:
            top = logw[c]
    total = 0.0
    for c in range(m):
        if logw[c] != -np.inf:
            logw[c] = math.exp(logw[c] - top)
        else:
            logw[c] = 0.0
        total += logw[c]
    target = u * total
    cum = 0.0
    last = 0
    for c in range(m):
        if logw[c] > 0.0:
            last = c
            cum += logw[c]
            if cum > target:
                return c
    return last


@numba.njit(cache=True, nogil=True)
def _nb_remove(i, z, sizes, y, K):
    c = z[i]
    sizes[c] -= 1
    if sizes[c] == 0:
        last = K - 1
        if c != last:
            y[c, :] = y[last, :]
            sizes[c] = sizes[last]
            for r in range(z.shape[0]):
                if z[r] == last:
                    z[r] = c
        K -= 1
    z[i] = -1
    return K


@numba.njit(cache=True, nogil=True)
def _nb_existing_logw(i, c, x, sizes, y, log_match, log_mis, log_f):
    lw = log_f[sizes[c]]
    for ell in range(x.shape[1]):
        v = x[i, ell]
        if y[c, ell] == v:
            lw += log_match[ell, v]
        else:
            lw += log_mis[ell, v]
    return lw


@numba.njit(cache=True, nogil=True)
def _nb_open(i, x, z, sizes, y, K, beta, theta_cdf, D, u, uo):
    for ell in range(x.shape[1]):
        uu = u[uo + 1 + ell]
        keep = 1.0 - beta[ell]
        if uu < keep:
            y[K, ell] = x[i, ell]
        else:
            t = (uu - keep) / beta[ell]
            v = 0
            while v < D[ell] - 1 and theta_cdf[ell, v] <= t:
                v += 1
            y[K, ell] = v
    sizes[K] = 1
    z[i] = K
    return K + 1


@numba.njit(cache=True, nogil=True)
def gibbs_sweep_kernel(x, z, sizes, y, K, log_match, log_mis, log_new, log_f, log_g,
                       beta, theta_cdf, D, u):
    """Sequential-scan Gibbs over all records; u has shape (n, 1 + L)."""
    n = x.shape[0]
    logw = np.empty(n + 1)
    uflat = u.ravel()
    stride = u.shape[1]
    for i in range(n):
        K = _nb_remove(i, z, sizes, y, K)
        for c in range(K):
            logw[c] = _nb_existing_logw(i, c, x, sizes, y, log_match, log_mis, log_f)
        logw[K] = log_g[K] + log_new[i]
        choice = _nb_choose(logw, K + 1, uflat[i * stride])
        if choice == K:
            K = _nb_open(i, x, z, sizes, y, K, beta, theta_cdf, D, uflat, i * stride)
        else:
            sizes[choice] += 1
            z[i] = choice
    return K


@numba.njit(cache=True, nogil=True)
def chaperone_kernel(x, z, sizes, y, K, log_match, log_mis, log_new, log_f, log_g,
                     beta, theta_cdf, D, pairs, start, ubuf, ptr):
    """Restricted Gibbs moves driven by record pairs (i, j).

    For every other record r currently in the cluster of i or of j, z_r is
    resampled between those two clusters.  Record i itself may join j's
    cluster or open a new one (only if it is currently alone or already with
    j), and symmetrically for j.  Each move is a Gibbs update restricted to a
    set that does not depend on z_r, so the posterior is preserved.

    Returns (K, next pair index, buffer pointer); stops early when the
    uniform buffer could run out.
    """
    n = x.shape[0]
    L = x.shape[1]
    stride = 1 + L
    logw = np.empty(3)
    p = start
    while p < pairs.shape[0]:
        i = pairs[p, 0]
        j = pairs[p, 1]
        need = (sizes[z[i]] + sizes[z[j]]) * stride
        if ptr + need > ubuf.shape[0]:
            return K, p, ptr
        for r in range(n):
            zi = z[i]
            zj = z[j]
            if r == i or r == j:
                other = j if r == i else i
                zo = z[other]
                zr = z[r]
                if not (zr == zo or sizes[zr] == 1):
                    continue
                K = _nb_remove(r, z, sizes, y, K)
                zo = z[other]
                logw[0] = _nb_existing_logw(r, zo, x, sizes, y, log_match, log_mis, log_f)
                logw[1] = log_g[K] + log_new[r]
                choice = _nb_choose(logw, 2, ubuf[ptr])
                if choice == 0:
                    sizes[zo] += 1
                    z[r] = zo
                else:
                    K = _nb_open(r, x, z, sizes, y, K, beta, theta_cdf, D, ubuf, ptr)
                ptr += stride
            else:
                zr = z[r]
                if zi == zj or (zr != zi and zr != zj):
                    continue
                sizes[zr] -= 1  # never empties: the cluster still holds i or j
                z[r] = -1
                logw[0] = _nb_existing_logw(r, zi, x, sizes, y, log_match, log_mis, log_f)
                logw[1] = _nb_existing_logw(r, zj, x, sizes, y, log_match, log_mis, log_f)
                choice = _nb_choose(logw, 2, ubuf[ptr])
                dest = zi if choice == 0 else zj
                sizes[dest] += 1
                z[r] = dest
                ptr += stride
        p += 1
    return K, p, ptr


@numba.njit(cache=True, nogil=True)
def update_y_kernel(x, z, K, y, log_match, log_mis, log_theta, D, u):
    """Draw each entity row field from its categorical full conditional (w summed out)."""
    n, L = x.shape
    order = np.argsort(z, kind="mergesort")
    starts = np.zeros(K + 1, dtype=np.int64)
    for r in range(n):
        starts[z[r] + 1] += 1
    for c in range(K):
        starts[c + 1] += starts[c]
    dmax = log_theta.shape[1]
    lw = np.empty(dmax)
    for c in range(K):
        for ell in range(L):
            for v in range(D[ell]):
                acc = log_theta[ell, v]
                if acc != -np.inf:
                    for q in range(starts[c], starts[c + 1]):
                        xv = x[order[q], ell]
                        acc += log_match[ell, v] if xv == v else log_mis[ell, xv]
                lw[v] = acc
            y[c, ell] = _nb_choose(lw, D[ell], u[c, ell])


# --------------------------------------------------------------------------
# driver


@dataclass
class ERResult:
    kplus: np.ndarray
    beta: np.ndarray
    theta_mu: dict
    size_hist: np.ndarray  # (S, max_size + 1), column s counts clusters of size s
    z_samples: np.ndarray | None
    config: dict
    prior: str
    elapsed: float
    truth: SetPartition | None = None
    extra: dict = field(default_factory=dict)

    @property
    def n_samples(self) -> int:
        return self.kplus.size

    def point_estimate(self) -> SetPartition:
        from .metrics import dahl_point_estimate

        if self.z_samples is None:
            raise ValueError("z samples were not stored")
        if "dahl" not in self.extra:
            self.extra["dahl"] = dahl_point_estimate(self.z_samples)
        return self.extra["dahl"]

    def summary(self) -> dict:
        from .metrics import fnr_fdr

        out = {
            "prior": self.prior,
            "n_samples": int(self.n_samples),
            "kplus_mean": float(self.kplus.mean()),
            "kplus_sd": float(self.kplus.std(ddof=1)) if self.n_samples > 1 else 0.0,
            "beta_mean": self.beta.mean(axis=0).tolist(),
            "beta_sd": self.beta.std(axis=0, ddof=1).tolist() if self.n_samples > 1 else [0.0] * self.beta.shape[1],
            "theta_mu_mean": {k: float(np.mean(v)) for k, v in self.theta_mu.items()},
            "size_quantiles": {
                str(s): np.quantile(self.size_hist[:, s], [0.025, 0.5, 0.975]).tolist()
                for s in range(1, self.size_hist.shape[1])
            },
            "elapsed_sec": self.elapsed,
        }
        if self.z_samples is not None and self.truth is not None:
            m = fnr_fdr(self.truth, self.point_estimate())
            out.update(fnr=m.fnr, fdr=m.fdr, cp=m.cp, mp=m.mp, wp=m.wp)
        return out


def _initial_labels(ds: ERDataset, how: str) -> np.ndarray:
    if how == "singletons":
        return np.arange(ds.n)
    if how == "one-cluster":
        return np.zeros(ds.n, dtype=np.int64)
    _, labels = np.unique(ds.x, axis=0, return_inverse=True)
    return SetPartition.from_labels(labels.ravel().tolist()).labels


def initial_state(ds: ERDataset, prior, cfg: MCMCConfig) -> MCMCState:
    labels = np.asarray(_initial_labels(ds, cfg.init), dtype=np.int64)
    labels = np.asarray(SetPartition.from_labels(labels.tolist()).labels, dtype=np.int64)
    K = int(labels.max()) + 1
    sizes = np.zeros(ds.n, dtype=np.int64)
    sizes[:K] = np.bincount(labels, minlength=K)
    y = np.zeros((ds.n, ds.L), dtype=np.int64)
    for c in range(K):
        members = ds.x[labels == c]
        for ell in range(ds.L):
            y[c, ell] = np.bincount(members[:, ell]).argmax()
    w = (ds.x != y[labels]).astype(np.int8)
    a, b = cfg.beta_prior
    beta0 = cfg.beta_init if cfg.beta_init is not None else a / (a + b)
    beta = np.full(ds.L, float(beta0))
    mu = prior.mu if isinstance(prior, ESCPrior) else None
    return MCMCState(labels, sizes, y, K, w, beta, mu)


def _pair_sampler(ds: ERDataset, how: str):
    n = ds.n
    iu, ju = np.triu_indices(n, k=1)
    if how == "uniform":
        return iu, ju, None
    agree = (ds.x[iu] == ds.x[ju]).sum(axis=1) + 1.0
    return iu, ju, agree / agree.sum()


def run_mcmc(ds: ERDataset, prior, cfg: MCMCConfig, seed=None, state: MCMCState | None = None) -> ERResult:
    cfg.validate()
    if isinstance(prior, MuFamily):
        prior = ESCPrior(prior)
    if not isinstance(prior, (ESCPrior, GibbsPrior)):
        raise TypeError("prior must be an ESCPrior, GibbsPrior or MuFamily")
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    st = initial_state(ds, prior, cfg) if state is None else state.copy()
    n, L = ds.n, ds.L
    update_mu = isinstance(prior, ESCPrior) and not (cfg.fix_theta_mu or prior.fixed)
    cur_prior = prior

    log_f, log_g = reallocation_tables(cur_prior, n)
    log_new = new_record_loglik(ds)
    with np.errstate(divide="ignore"):
        log_theta = np.log(ds.theta)
    theta_cdf = np.cumsum(ds.theta, axis=1)
    theta_cdf[:, -1] = np.maximum(theta_cdf[:, -1], 1.0)
    D = ds.D
    a_beta, b_beta = cfg.beta_prior

    if cfg.use_chaperones and n >= 2:
        iu, ju, pair_p = _pair_sampler(ds, cfg.pair_weighting)

    S = cfg.n_samples
    kplus = np.empty(S, dtype=np.int64)
    betas = np.empty((S, L))
    theta_trace: dict[str, list] = {}
    hist_rows = []
    z_store = np.empty((S, n), dtype=np.int32) if cfg.store_z else None
    t0 = time.perf_counter()
    slot = 0
    for it in range(cfg.iterations):
        log_match, log_mis = likelihood_tables(ds, st.beta)
        if cfg.use_chaperones and n >= 2:
            idx = rng.choice(iu.size, size=n, p=pair_p)
            pairs = np.column_stack([iu[idx], ju[idx]]).astype(np.int64)
            p = 0
            while p < n:
                ubuf = rng.random(4 * n * (1 + L))
                st.K, p, _ = chaperone_kernel(ds.x, st.z, st.sizes, st.y, st.K, log_match, log_mis,
                                              log_new, log_f, log_g, st.beta, theta_cdf, D,
                                              pairs, p, ubuf, 0)
        else:
            u = rng.random((n, 1 + L))
            st.K = gibbs_sweep_kernel(ds.x, st.z, st.sizes, st.y, st.K, log_match, log_mis,
                                      log_new, log_f, log_g, st.beta, theta_cdf, D, u)
        if update_mu:
            st.mu = update_theta_mu(cur_prior, st.sizes[: st.K], rng)
            cur_prior = ESCPrior(st.mu, cur_prior.hyper)
            log_f, log_g = reallocation_tables(cur_prior, n)

        update_y_kernel(ds.x, st.z, st.K, st.y, log_match, log_mis, log_theta, D, rng.random((st.K, L)))
        yz = st.y[st.z]
        with np.errstate(divide="ignore", invalid="ignore"):
            keep_prob = np.where(ds.x == yz, 1.0 - _w_prob(ds, st.beta), 0.0)
        st.w = (rng.random((n, L)) >= keep_prob).astype(np.int8)
        if not cfg.fix_beta:
            nd = st.w.sum(axis=0)
            st.beta = rng.beta(a_beta + nd, b_beta + n - nd)
        if cfg.check_invariants:
            check_state(st, ds)

        if it >= cfg.burn_in and (it - cfg.burn_in) % cfg.thin == 0:
            kplus[slot] = st.K
            betas[slot] = st.beta
            if st.mu is not None:
                for key, val in st.mu.params.items():
                    theta_trace.setdefault(key, []).append(float(val))
            hist_rows.append(np.bincount(st.sizes[: st.K]))
            if z_store is not None:
                z_store[slot] = st.z
            slot += 1

    width = max(len(h) for h in hist_rows)
    size_hist = np.zeros((S, width), dtype=np.int64)
    for r, h in enumerate(hist_rows):
        size_hist[r, : len(h)] = h
    return ERResult(
        kplus=kplus,
        beta=betas,
        theta_mu={k: np.asarray(v) for k, v in theta_trace.items()},
        size_hist=size_hist,
        z_samples=z_store,
        config=asdict(cfg),
        prior=cur_prior.name if isinstance(cur_prior, ESCPrior) else prior.name,
        elapsed=time.perf_counter() - t0,
        truth=ds.truth,
        extra={"final_state": st},
    )


def _w_prob(ds: ERDataset, beta: np.ndarray) -> np.ndarray:
    """P(w_il = 1 | x_il = y) = b theta_x / ((1 - b) + b theta_x), per record and field."""
    th = ds.theta[np.arange(ds.L)[None, :], ds.x]
    return beta[None, :] * th / ((1.0 - beta)[None, :] + beta[None, :] * th)


def run_chains(ds: ERDataset, prior, cfg: MCMCConfig, n_chains: int = 1, workers: int = 1) -> list[ERResult]:
    """Independent chains seeded from SeedSequence(cfg.seed).spawn(n_chains)."""
    seeds = np.random.SeedSequence(cfg.seed).spawn(n_chains)
    if workers <= 1 or n_chains == 1:
        return [run_mcmc(ds, prior, cfg, seed=s) for s in seeds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda s: run_mcmc(ds, prior, cfg, seed=s), seeds))
