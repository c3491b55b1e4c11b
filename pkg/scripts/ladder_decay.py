"""Completeness surrogate: the recorded ladder distances against their bounds.

Runs the subdiagonal construction on diag(0, 1, 0, 1, ...) with a constant
two-band prescription and prints dist^2(y_{r,l}, span u_1..u_{n_s}) next to
(1 - eta/2)^(l-1) for every recorded ladder point.
"""
import argparse
import math

from basisforge.builder import BuildParams, build_subdiagonal
from basisforge.operators import make_diagonal
from basisforge.patterns import Pattern, TargetArray


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dim", type=int, default=600)
    ap.add_argument("--m", type=int, default=30)
    ap.add_argument("--C", type=float, default=0.9)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    T = make_diagonal([i % 2 for i in range(args.dim)])
    delta = 0.9 * args.C / (4 * math.sqrt(2))
    B = Pattern.banded(2, lower_only=True)
    targets = TargetArray.constant(B, args.m, delta / 4)
    _, rep = build_subdiagonal(T, B, targets, args.m, BuildParams(m=args.m, C=args.C, delta=delta, seed=args.seed))

    print(f"entry residual {rep.entry_residual_max:.2e}, gram {rep.gram_residual:.2e}, eta {rep.records['eta']:.4f}")
    print(f"{'s':>3} {'r':>3} {'l':>3} {'n_s':>4} {'dist^2':>10} {'bound':>10}")
    for row in rep.ladder:
        flag = "" if row["observed"] <= row["bound"] else "  <-- above bound"
        print(f"{row['s']:3d} {row['r']:3d} {row['l']:3d} {row['n']:4d} {row['observed']:10.3e} {row['bound']:10.3e}{flag}")


if __name__ == "__main__":
    main()
