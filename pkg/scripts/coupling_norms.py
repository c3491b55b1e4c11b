"""How close do single coupling pairs get to the ||v|| ||z|| <= 2 sqrt(2)/C bound?

Sweeps C over (0, diam W_e) for T = diag(0, 1, 0, 1, ...) and random
finite-codimension subspaces, printing the worst observed product per C.
"""
import argparse
import math

import numpy as np

from basisforge.constructors import build_pair_single
from basisforge.hilbert import Subspace
from basisforge.operators import make_diagonal


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dim", type=int, default=200)
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    n = args.dim
    T = make_diagonal([i % 2 for i in range(n)])
    rng = np.random.default_rng(args.seed)
    print(f"{'C':>6} {'bound':>8} {'worst':>8} {'mean':>8}")
    for C in (0.2, 0.4, 0.6, 0.8, 0.9, 0.95):
        prods = []
        for t in range(args.trials):
            codim = int(rng.integers(0, 11))
            c = rng.standard_normal((codim, n)) + 1j * rng.standard_normal((codim, n))
            M = Subspace(n, c) if codim else Subspace.full(n)
            p = build_pair_single(T, M, C, seed=t)
            prods.append(p.product)
        print(f"{C:6.2f} {2 * math.sqrt(2) / C:8.4f} {max(prods):8.4f} {np.mean(prods):8.4f}")


if __name__ == "__main__":
    main()
