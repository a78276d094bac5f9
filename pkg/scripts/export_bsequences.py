"""B-sequences and balance classes for the two-parameter grid and the ESC size laws.

    python3 scripts/export_bsequences.py --s-max 50 --out results/bseq
"""

from __future__ import annotations

import argparse
import csv
import math
from pathlib import Path

from pbalance.esc import Geometric, Logarithmic, ShiftedBinomial, ZTBinomial, ZTNegBinomial, ZTPoisson, mu_w_sequence
from pbalance.gibbs import b_sequence_values, classify_balance, format_real, two_parameter_w


def sequences():
    seqs = {f"sigma={s:g}": two_parameter_w(s) for s in (-math.inf, -5.0, -1.0, 0.0, 0.25, 0.5, 0.8)}
    for f in (ShiftedBinomial(10, 0.5), ZTBinomial(10, 0.5), ZTPoisson(5.0), ZTNegBinomial(5, 0.5),
              Geometric(0.3), Logarithmic(0.5)):
        seqs[repr(f)] = mu_w_sequence(f)
    return seqs


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--s-max", type=int, default=50)
    ap.add_argument("--out", type=Path, default=Path("results/bseq"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    with (args.out / "bseq.csv").open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sequence", "class", "s", "B_s"])
        for name, w in sequences().items():
            cls = classify_balance(w, args.s_max + 1).kind.value
            for s, b in b_sequence_values(w, args.s_max):
                writer.writerow([name, cls, s, format_real(b)])
            print(f"{name:>32}: {cls}")


if __name__ == "__main__":
    main()
