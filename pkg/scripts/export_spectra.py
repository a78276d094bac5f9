"""EPPF spectra (log-EPPF vs Shannon index per shape) for a grid of partition models.

One CSV per model plus a per-k trend summary: for every k, the fraction of
one-step downshifts along which log-EPPF goes down, stays flat or goes up.

    python3 scripts/export_spectra.py --n 10 --out results/spectra
"""

from __future__ import annotations

import argparse
import csv
from pathlib import Path

from pbalance.esc import ESCModel, ShiftedBinomial, ZTNegBinomial, ZTPoisson
from pbalance.gibbs import (
    coupon_collector,
    eppf_spectrum,
    mfm_model,
    neutral_mixture,
    shifted_poisson,
    spectrum_to_csv,
    two_parameter_model,
)
from pbalance.partitions import enumerate_integer_partitions, one_step_downshifts


def model_grid():
    return {
        "dm_K5": two_parameter_model(-1.0, K=5),
        "crp_theta1": two_parameter_model(0.0, 1.0),
        "pyp_0.25": two_parameter_model(0.25, 1.0),
        "pyp_0.5": two_parameter_model(0.5, 1.0),
        "pyp_0.8": two_parameter_model(0.8, 1.0),
        "coupon_K5": coupon_collector(5),
        "neutral_pois3": neutral_mixture(shifted_poisson(3.0)),
        "mfm_pois3_g1": mfm_model(shifted_poisson(3.0), 1.0),
        "esc_sbinom": ESCModel(ShiftedBinomial(10, 0.5)),
        "esc_ztpois": ESCModel(ZTPoisson(5.0)),
        "esc_ztnegbin": ESCModel(ZTNegBinomial(5, 0.5)),
    }


def trend_by_k(m, n: int) -> dict[int, tuple[int, int, int]]:
    out = {}
    for k in range(1, n + 1):
        down = flat = up = 0
        for shape in enumerate_integer_partitions(n, k):
            if m.log_eppf(shape) == float("-inf"):
                continue
            for lower in one_step_downshifts(shape):
                d = m.log_eppf(lower) - m.log_eppf(shape)
                if abs(d) <= 1e-12 * max(1.0, abs(m.log_eppf(shape))):
                    flat += 1
                elif d < 0:
                    up += 1  # the more balanced shape is less likely
                else:
                    down += 1
        out[k] = (up, flat, down)
    return out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=10)
    ap.add_argument("--out", type=Path, default=Path("results/spectra"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    with (args.out / "trend.csv").open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["model", "k", "balanced_less_likely", "flat", "balanced_more_likely"])
        for name, m in model_grid().items():
            rows = eppf_spectrum(m, args.n)
            with (args.out / f"{name}.csv").open("w", newline="") as out:
                spectrum_to_csv(rows, out)
            for k, (up, flat, down) in trend_by_k(m, args.n).items():
                writer.writerow([name, k, up, flat, down])
            print(f"{name}: {len(rows)} shapes")


if __name__ == "__main__":
    main()
