"""Boundary polylines of W(T) for the model operators, as CSV for plotting.

Writes one theta,re,im file per operator plus the essential-range margin of 0.
"""
import argparse
from pathlib import Path

import numpy as np

from basisforge.numrange import boundary_single, essential_body, margin
from basisforge.operators import make_diagonal, make_power_tuple, make_shift, make_two_circle


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dim", type=int, default=64)
    ap.add_argument("--n-theta", type=int, default=256)
    ap.add_argument("--out", default="range_gallery")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    n = args.dim
    ops = {
        "shift": make_shift(n),
        "alternating": make_diagonal([i % 2 for i in range(n)]),
        "two_circle": make_two_circle(0.5, 2.0, n),
    }
    for name, op in ops.items():
        body = boundary_single(op, args.n_theta)
        z = body.complex_samples[:, 0]
        np.savetxt(out / f"{name}.csv", np.column_stack([body.thetas, z.real, z.imag]),
                   delimiter=",", header="theta,re,im", comments="", fmt="%.17g")
        mg = margin(essential_body(op), 0).margin
        print(f"{name:12s} max|W| {np.max(np.abs(z)):.6f}  essential margin of 0 {mg:+.4f}")
    for k in (2, 3, 4):
        mg = margin(essential_body(make_power_tuple(make_shift(n), k)), np.zeros(k)).margin
        print(f"(S..S^{k}) curve hull margin of 0 {mg:.4f}")


if __name__ == "__main__":
    main()
