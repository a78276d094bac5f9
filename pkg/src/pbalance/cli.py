"""Command-line front end.

Subcommands: spectrum, bseq, classify, compare-lc, projectivity and
``er simulate|fit|eval``.  Every run writes ``manifest.json`` into the output
directory.  Exit codes: 0 success, 2 configuration error, 3 numerical
precision error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .esc import ESCModel, classify_mu, mu_w_sequence, parse_mu_spec
from .gibbs import (
    DEFAULT_S_MAX,
    b_sequence_values,
    brute_force_balance_check,
    check_projectivity,
    classify_balance,
    coupon_collector,
    crp,
    dirac,
    dirichlet_multinomial,
    eppf_spectrum,
    format_real,
    lc_compare,
    mfm_model,
    neutral_mixture,
    shifted_poisson,
    spectrum_to_csv,
    spectrum_total_probability,
    two_parameter_model,
)
from .logmath import PrecisionError
from .partitions import MAX_SET_PARTITION_N

EXIT_OK, EXIT_CONFIG, EXIT_PRECISION = 0, 2, 3

MODELS = ("crp", "pyp", "dm", "coupon", "neutral", "mfm", "esc")
MODEL_KEYS = ("model", "theta", "sigma", "K", "alpha", "q", "gamma", "mu", "en_method")


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# model specs


def parse_q(spec: str):
    """Mixing law on the number of components: "shifted-poisson:LAM" or "dirac:K"."""
    name, _, arg = str(spec).partition(":")
    try:
        if name in ("shifted-poisson", "1+poisson"):
            return shifted_poisson(float(arg))
        if name == "dirac":
            return dirac(int(arg))
    except ValueError as exc:
        raise ConfigError(f"q: bad parameter in {spec!r}") from exc
    raise ConfigError(f"q: unknown mixing law {spec!r}; use shifted-poisson:LAM or dirac:K")


def _need(cfg: dict, key: str, model: str, suffix: str = ""):
    if cfg.get(key + suffix) is None:
        raise ConfigError(f"{key + suffix}: required for --model{suffix} {model}")
    return cfg[key + suffix]


def build_model(cfg: dict, suffix: str = ""):
    """A GibbsModel or ESCModel from the resolved model keys."""
    model = cfg.get("model" + suffix)
    if model not in MODELS:
        raise ConfigError(f"model{suffix}: expected one of {MODELS}, got {model!r}")
    try:
        if model == "crp":
            return crp(float(_need(cfg, "theta", model, suffix)))
        if model == "pyp":
            sigma = float(_need(cfg, "sigma", model, suffix))
            theta = cfg.get("theta" + suffix)
            K = cfg.get("K" + suffix)
            return two_parameter_model(sigma, None if theta is None else float(theta),
                                       None if K is None else int(K))
        if model == "dm":
            return dirichlet_multinomial(int(_need(cfg, "K", model, suffix)),
                                         float(_need(cfg, "alpha", model, suffix)))
        if model == "coupon":
            return coupon_collector(int(_need(cfg, "K", model, suffix)))
        if model == "neutral":
            return neutral_mixture(parse_q(_need(cfg, "q", model, suffix)))
        if model == "mfm":
            return mfm_model(parse_q(_need(cfg, "q", model, suffix)), float(_need(cfg, "gamma", model, suffix)))
        return ESCModel(parse_mu_spec(_need(cfg, "mu", model, suffix)), cfg.get("en_method" + suffix) or "auto")
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"model{suffix}: {exc}") from exc


def w_sequence_of(m):
    return mu_w_sequence(m.mu) if isinstance(m, ESCModel) else m.w


def describe(m) -> str:
    return f"ESC[{m.mu!r}]" if isinstance(m, ESCModel) else repr(m)


# --------------------------------------------------------------------------
# config plumbing


def add_model_args(p: argparse.ArgumentParser, suffix: str = "") -> None:
    p.add_argument(f"--model{suffix}", choices=MODELS, default=None)
    p.add_argument(f"--theta{suffix}", type=float, default=None)
    p.add_argument(f"--sigma{suffix}", type=float, default=None)
    p.add_argument(f"--K{suffix}", type=int, default=None)
    p.add_argument(f"--alpha{suffix}", type=float, default=None)
    p.add_argument(f"--q{suffix}", default=None, help="shifted-poisson:LAM or dirac:K")
    p.add_argument(f"--gamma{suffix}", type=float, default=None)
    p.add_argument(f"--mu{suffix}", default=None, help="e.g. ztpois:2, ztbinom:5,0.3, sbinom:10,0.5")
    p.add_argument(f"--en-method{suffix}", dest=f"en_method{suffix}", choices=("auto", "exact", "mp", "float"),
                   default=None, help="evaluation of the ESC normalizing constant")


def resolve_config(args: argparse.Namespace, defaults: dict) -> dict:
    """Merge built-in defaults, the JSON config file and explicit flags (flags win)."""
    allowed = set(defaults)
    cfg = dict(defaults)
    if args.config:
        try:
            with open(args.config) as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"config: cannot read {args.config}: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise ConfigError("config: top level must be a JSON object")
        unknown = sorted(set(file_cfg) - allowed)
        if unknown:
            raise ConfigError(f"config: unknown key(s) {unknown}")
        cfg.update(file_cfg)
    for key in allowed:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if "seed" in cfg and os.environ.get("PB_SEED"):
        try:
            cfg["seed"] = int(os.environ["PB_SEED"])
        except ValueError as exc:
            raise ConfigError("PB_SEED must be an integer") from exc
    return cfg


def _versions() -> dict:
    import mpmath
    import numba
    import scipy

    return {"pbalance": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__, "mpmath": mpmath.__version__}


def write_manifest(out: Path, command: str, cfg: dict, artifacts: list[str]) -> None:
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"command": command, "config": cfg, "artifacts": artifacts, "versions": _versions()}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")


def _out_dir(cfg: dict) -> Path:
    return Path(cfg.get("out") or ".")


# --------------------------------------------------------------------------
# commands


MODEL_DEFAULTS = {k: None for k in MODEL_KEYS}


def cmd_spectrum(args) -> int:
    cfg = resolve_config(args, {**MODEL_DEFAULTS, "n": 10, "out": "."})
    n = int(cfg["n"])
    if not 1 <= n <= MAX_SET_PARTITION_N:
        raise ConfigError(f"n: must be between 1 and {MAX_SET_PARTITION_N}, got {n}")
    m = build_model(cfg)
    rows = eppf_spectrum(m, n)
    out = _out_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "spectrum.csv").open("w", newline="") as fh:
        spectrum_to_csv(rows, fh)
    write_manifest(out, "spectrum", cfg, ["spectrum.csv"])
    print(f"{describe(m)} n={n}: {len(rows)} shapes, total probability "
          f"{format_real(spectrum_total_probability(rows))}")
    return EXIT_OK


def cmd_bseq(args) -> int:
    cfg = resolve_config(args, {**MODEL_DEFAULTS, "s_max": 50, "out": "."})
    s_max = int(cfg["s_max"])
    if s_max < 3:
        raise ConfigError("s_max: must be at least 3")
    m = build_model(cfg)
    w = w_sequence_of(m)
    values = b_sequence_values(w, s_max)
    cls = classify_balance(w, s_max + 1)
    out = _out_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "bseq.csv").open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["s", "B_s"])
        for s, b in values:
            writer.writerow([s, format_real(b)])
    write_manifest(out, "bseq", {**cfg, "classification": cls.kind.value}, ["bseq.csv"])
    print(f"{describe(m)}: {cls.kind.value} (s <= {s_max})")
    return EXIT_OK


def _class_record(cls) -> dict:
    return {"kind": cls.kind.value, "averse_witness": cls.averse_witness,
            "seeking_witness": cls.seeking_witness, "horizon": cls.horizon}


def cmd_classify(args) -> int:
    cfg = resolve_config(args, {**MODEL_DEFAULTS, "s_max": DEFAULT_S_MAX, "brute_force_n": None, "out": "."})
    m = build_model(cfg)
    s_max = int(cfg["s_max"])
    cls = classify_mu(m.mu, s_max) if isinstance(m, ESCModel) else classify_balance(m.w, s_max)
    report = {"model": describe(m), "classification": _class_record(cls)}
    if cfg["brute_force_n"]:
        bn = int(cfg["brute_force_n"])
        if not 2 <= bn <= 10:
            raise ConfigError("brute_force_n: must be between 2 and 10")
        bf = brute_force_balance_check(m, bn)
        report["brute_force"] = {"n": bn, "kind": bf.kind.value}
    out = _out_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    (out / "classify.json").write_text(json.dumps(report, indent=2) + "\n")
    write_manifest(out, "classify", cfg, ["classify.json"])
    print(json.dumps(report))
    return EXIT_OK


def cmd_compare_lc(args) -> int:
    defaults = {**MODEL_DEFAULTS, **{k + "2": None for k in MODEL_KEYS}, "s_max": DEFAULT_S_MAX, "out": "."}
    cfg = resolve_config(args, defaults)
    m1, m2 = build_model(cfg), build_model(cfg, "2")
    res = lc_compare(w_sequence_of(m1), w_sequence_of(m2), int(cfg["s_max"]))
    out = _out_dir(cfg)
    write_manifest(out, "compare-lc", {**cfg, "result": res.value}, [])
    print(f"{describe(m1)} vs {describe(m2)}: {res.value.upper()}")
    return EXIT_OK


def cmd_projectivity(args) -> int:
    cfg = resolve_config(args, {**MODEL_DEFAULTS, "n_max": 10, "tol": 1e-10, "out": "."})
    m = build_model(cfg)
    if isinstance(m, ESCModel):
        m.precompute(int(cfg["n_max"]) + 1)
    rep = check_projectivity(m, int(cfg["n_max"]), float(cfg["tol"]))
    result = {"ok": rep.ok}
    if not rep.ok:
        shape, lhs, rhs = rep.first_failure
        result.update(shape=shape.label(), log_p=format_real(lhs), log_children=format_real(rhs))
    write_manifest(_out_dir(cfg), "projectivity", {**cfg, "result": result}, [])
    print(json.dumps({"model": describe(m), **result}))
    return EXIT_OK


# --------------------------------------------------------------------------
# entity resolution


def _scenario_arg(cfg: dict):
    if cfg.get("counts"):
        return [int(c) for c in str(cfg["counts"]).split(",")]
    if cfg.get("size_mu"):
        return parse_mu_spec(cfg["size_mu"])
    return int(cfg["scenario"])


def cmd_er_simulate(args) -> int:
    from .er.data import generate_synthetic, write_dataset_csv

    cfg = resolve_config(args, {"scenario": 1, "counts": None, "size_mu": None, "L": 5, "D": 10,
                                "beta": 0.01, "seed": 0, "out": ".", "name": "dataset.csv"})
    try:
        ds = generate_synthetic(_scenario_arg(cfg), L=int(cfg["L"]), D=int(cfg["D"]),
                                beta=float(cfg["beta"]), seed=int(cfg["seed"]))
    except ValueError as exc:
        raise ConfigError(f"simulate: {exc}") from exc
    out = _out_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    write_dataset_csv(ds, out / cfg["name"])
    write_manifest(out, "er simulate", cfg, [cfg["name"]])
    print(f"wrote {ds.n} records in {ds.meta['K']} entities to {out / cfg['name']}")
    return EXIT_OK


def _er_prior(cfg: dict):
    from .er.priors import ESCPrior, GibbsPrior

    if cfg.get("prior"):
        try:
            return ESCPrior(parse_mu_spec(cfg["prior"]), dict(cfg.get("hyper") or {}))
        except ValueError as exc:
            raise ConfigError(f"prior: {exc}") from exc
    if cfg.get("model"):
        m = build_model(cfg)
        if isinstance(m, ESCModel):
            return ESCPrior(m.mu, dict(cfg.get("hyper") or {}))
        return GibbsPrior(m)
    raise ConfigError("prior: give --prior MU_SPEC (ESC) or --model for a Gibbs-type prior")


def cmd_er_fit(args) -> int:
    from .er.data import read_dataset_csv
    from .er.sampler import ConfigError as SamplerConfigError
    from .er.sampler import MCMCConfig, run_chains

    defaults = {**MODEL_DEFAULTS, "data": None, "prior": None, "hyper": None, "iterations": 6000,
                "burn_in": 2000, "thin": 1, "seed": 0, "chains": 1, "chaperones": False,
                "pair_weighting": "uniform", "init": "exact-match", "fix_beta": False, "out": "."}
    cfg = resolve_config(args, defaults)
    if not cfg.get("data"):
        raise ConfigError("data: a dataset CSV is required")
    prior = _er_prior(cfg)
    mcfg = MCMCConfig(iterations=int(cfg["iterations"]), burn_in=int(cfg["burn_in"]), thin=int(cfg["thin"]),
                      seed=int(cfg["seed"]), use_chaperones=bool(cfg["chaperones"]),
                      pair_weighting=cfg["pair_weighting"], init=cfg["init"], fix_beta=bool(cfg["fix_beta"]))
    try:
        mcfg.validate()
        ds = read_dataset_csv(cfg["data"])
    except (SamplerConfigError, ValueError, OSError) as exc:
        raise ConfigError(str(exc)) from exc
    results = run_chains(ds, prior, mcfg, n_chains=int(cfg["chains"]))
    out = _out_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    artifacts = []
    summaries = []
    for c, res in enumerate(results):
        trace_name = f"trace_chain{c}.csv"
        write_trace(res, out / trace_name, burn_in=mcfg.burn_in, thin=mcfg.thin)
        est_name = f"estimate_chain{c}.csv"
        est = res.point_estimate()
        with (out / est_name).open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["cluster"])
            writer.writerows([[lab + 1] for lab in est.labels])
        summaries.append(_jsonable(res.summary()))
        artifacts += [trace_name, est_name]
    (out / "summary.json").write_text(json.dumps({"chains": summaries}, indent=2) + "\n")
    artifacts.append("summary.json")
    write_manifest(out, "er fit", cfg, artifacts)
    s0 = summaries[0]
    line = f"K+ posterior mean {s0['kplus_mean']:.3f} (sd {s0['kplus_sd']:.3f})"
    if "fnr" in s0:
        line += f", FNR {s0['fnr']:.4f}, FDR {s0['fdr']:.4f}"
    print(line)
    return EXIT_OK


def write_trace(res, path: Path, burn_in: int = 0, thin: int = 1) -> None:
    L = res.beta.shape[1]
    keys = sorted(res.theta_mu)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iter", "Kplus"] + [f"beta_{l + 1}" for l in range(L)] + keys)
        for s in range(res.n_samples):
            row = [burn_in + s * thin, int(res.kplus[s])] + [format_real(b) for b in res.beta[s]]
            row += [format_real(float(res.theta_mu[k][s])) for k in keys]
            writer.writerow(row)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def cmd_er_eval(args) -> int:
    from .er.data import read_dataset_csv
    from .er.metrics import fnr_fdr

    cfg = resolve_config(args, {"data": None, "estimate": None, "out": "."})
    if not cfg.get("data") or not cfg.get("estimate"):
        raise ConfigError("eval: --data and --estimate are required")
    try:
        ds = read_dataset_csv(cfg["data"])
        with open(cfg["estimate"], newline="") as fh:
            est = [int(r["cluster"]) for r in csv.DictReader(fh)]
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"eval: {exc}") from exc
    if ds.truth is None:
        raise ConfigError("truth: dataset has no 'truth' column")
    if len(est) != ds.n:
        raise ConfigError(f"estimate: {len(est)} labels for {ds.n} records")
    m = fnr_fdr(ds.truth, est)
    report = {"fnr": m.fnr, "fdr": m.fdr, "cp": m.cp, "mp": m.mp, "wp": m.wp}
    out = _out_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    write_manifest(out, "er eval", cfg, ["report.json"])
    print(json.dumps(report))
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pbalance", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"pbalance {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="JSON file with parameter defaults")
        p.add_argument("--out", default=None, help="output directory (default: current directory)")

    p = sub.add_parser("spectrum", help="log-EPPF of every integer partition of n")
    add_model_args(p)
    p.add_argument("--n", type=int, default=None)
    common(p)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("bseq", help="B-sequence of the model's W")
    add_model_args(p)
    p.add_argument("--s-max", dest="s_max", type=int, default=None)
    common(p)
    p.set_defaults(func=cmd_bseq)

    p = sub.add_parser("classify", help="balance-averse / seeking / neutral")
    add_model_args(p)
    p.add_argument("--s-max", dest="s_max", type=int, default=None)
    p.add_argument("--brute-force-n", dest="brute_force_n", type=int, default=None)
    common(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("compare-lc", help="relative log-concavity order of two W sequences")
    add_model_args(p)
    add_model_args(p, "2")
    p.add_argument("--s-max", dest="s_max", type=int, default=None)
    common(p)
    p.set_defaults(func=cmd_compare_lc)

    p = sub.add_parser("projectivity", help="addition-rule check up to n_max")
    add_model_args(p)
    p.add_argument("--n-max", dest="n_max", type=int, default=None)
    p.add_argument("--tol", type=float, default=None)
    common(p)
    p.set_defaults(func=cmd_projectivity)

    er = sub.add_parser("er", help="entity resolution experiments")
    er_sub = er.add_subparsers(dest="er_command", required=True)

    p = er_sub.add_parser("simulate", help="synthetic records with a fixed cluster-size profile")
    p.add_argument("--scenario", type=int, default=None)
    p.add_argument("--counts", default=None, help="comma-separated m_1,m_2,...")
    p.add_argument("--size-mu", dest="size_mu", default=None, help="round 100*mu_s to cluster counts")
    p.add_argument("--L", type=int, default=None)
    p.add_argument("--D", type=int, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--name", default=None)
    common(p)
    p.set_defaults(func=cmd_er_simulate)

    p = er_sub.add_parser("fit", help="posterior sampling for a dataset CSV")
    p.add_argument("--data", default=None)
    p.add_argument("--prior", default=None, help="ESC size law, e.g. sbinom:5,0.5 or ztpois:1")
    add_model_args(p)
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--burn-in", dest="burn_in", type=int, default=None)
    p.add_argument("--thin", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--chains", type=int, default=None)
    p.add_argument("--chaperones", action="store_const", const=True, default=None)
    p.add_argument("--pair-weighting", dest="pair_weighting", choices=("uniform", "agreement"), default=None)
    p.add_argument("--init", choices=("exact-match", "singletons", "one-cluster"), default=None)
    p.add_argument("--fix-beta", dest="fix_beta", action="store_const", const=True, default=None)
    common(p)
    p.set_defaults(func=cmd_er_fit)

    p = er_sub.add_parser("eval", help="FNR/FDR of an estimate against the dataset's truth column")
    p.add_argument("--data", default=None)
    p.add_argument("--estimate", default=None)
    common(p)
    p.set_defaults(func=cmd_er_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PrecisionError as exc:
        print(f"precision error: {exc}", file=sys.stderr)
        return EXIT_PRECISION


if __name__ == "__main__":
    sys.exit(main())
