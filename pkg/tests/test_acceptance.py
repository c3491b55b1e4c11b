"""Acceptance suite: one PASS/FAIL line per criterion.

Runs under pytest (lines appear in the terminal summary) or directly with
``python tests/test_acceptance.py``.
"""
import math
import sys
import time

import numpy as np
import pytest

from basisforge.builder import (
    BuildParams,
    budget,
    build_density,
    build_full,
    build_sparse,
    build_sparse_zero_diag,
    build_subdiagonal,
)
from basisforge.cli import main as cli_main
from basisforge.config import DEFAULT_TOL
from basisforge.constructors import DimensionBudgetError, build_family, build_pair_single
from basisforge.hilbert import Subspace
from basisforge.io import operator_from_doc, read_frame_csv
from basisforge.numrange import boundary_single, essential_body, margin
from basisforge.operators import (
    make_diagonal,
    make_inverse_power_tuple,
    make_power_tuple,
    make_shift,
    make_two_circle,
)
from basisforge.patterns import Pattern, TargetArray
from basisforge.verify import census, entry_tensor, verify

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script
    ACCEPTANCE_LINES = []


def record(no: int, name: str, ok: bool, detail: str) -> bool:
    line = f"{'PASS' if ok else 'FAIL'} criterion {no}: {name} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def alternating(n):
    return make_diagonal([i % 2 for i in range(n)])


# ---------------------------------------------------------------------------


def test_c1_single_pairs():
    N, C = 200, 0.9
    T = alternating(N)
    rng = np.random.default_rng(1)
    bound = 2 * math.sqrt(2) / C + 1e-8
    worst = {"couple": 0.0, "orth": 0.0, "product": 0.0}
    t0 = time.perf_counter()
    for trial in range(100):
        codim = int(rng.integers(0, 11))
        c = rng.standard_normal((N, codim)) + 1j * rng.standard_normal((N, codim))
        M = Subspace.full(N).with_constraints(list(c.T))
        p = build_pair_single(T, M, C, seed=trial)
        v, z = p.v, p.z
        worst["couple"] = max(worst["couple"], abs(np.vdot(z, T.matrix @ v) - 1))
        worst["orth"] = max(worst["orth"], abs(np.vdot(z, v)))
        worst["product"] = max(worst["product"], np.linalg.norm(v) * np.linalg.norm(z))
        assert M.violation(v) < 1e-10 and M.violation(z) < 1e-10
    dt = time.perf_counter() - t0
    ok = worst["couple"] <= 1e-9 and worst["orth"] <= 1e-10 and worst["product"] <= bound and dt < 30
    record(1, "single coupling pairs, 100 subspaces", ok,
           f"couple {worst['couple']:.2e} orth {worst['orth']:.2e} "
           f"|v||z| {worst['product']:.4f} <= {bound:.4f} time {dt:.1f}s")
    assert ok


def family_table(fam, tup):
    """(worst designated-coupling error, worst off-table value), from raw inner products."""
    mats = tup.matrices
    ops = [(t, False, m) for t, m in enumerate(mats)] + [(t, True, m.conj().T) for t, m in enumerate(mats)]
    vecs = []
    for j in range(tup.k):
        vecs.append((j, False, fam.v[j], fam.z[j]))
        vecs.append((j, True, fam.vt[j], fam.zt[j]))
    designated, other = 0.0, 0.0
    for j, star, v, z in vecs:
        other = max(other, abs(np.vdot(z, v)))
        for t, is_adj, A in ops:
            val = np.vdot(z, A @ v)
            if t == j and is_adj == star:
                designated = max(designated, abs(val - 1))
            else:
                other = max(other, abs(val))
    # block-to-block ⊥^(𝒯)
    for a in range(len(vecs)):
        for b in range(len(vecs)):
            if vecs[a][0] == vecs[b][0]:
                continue
            for x in vecs[a][2:]:
                for y in vecs[b][2:]:
                    other = max(other, abs(np.vdot(y, x)))
                    for _, _, A in ops:
                        other = max(other, abs(np.vdot(y, A @ x)))
    return designated, other


def test_c2_coupling_family():
    N, eps = 400, 0.2
    tup = make_power_tuple(make_shift(N), 2)
    t0 = time.perf_counter()
    fam = build_family(tup, Subspace.full(N), np.zeros(2), eps, seed=3)
    dt = time.perf_counter() - t0
    designated, other = family_table(fam, tup)
    zmax = max(np.linalg.norm(z) for z in list(fam.z) + list(fam.zt))
    ok = designated <= 1e-8 and other <= 1e-8 and zmax <= 2 / eps + 1e-8 and dt < 60
    record(2, "tuple coupling family (S, S^2)", ok,
           f"designated {designated:.2e} others {other:.2e} max|z| {zmax:.4f} <= {2 / eps} time {dt:.1f}s")
    assert ok


def test_c3_sparse():
    tup = make_power_tuple(make_shift(500), 3)
    B = Pattern.paper_example()
    frame, _ = build_sparse(tup, B, 40, BuildParams(m=40, seed=0))
    rep = verify(tup, frame, B)
    ok = rep.entry_max <= 1e-8 and rep.gram <= 1e-10 and frame.vectors.shape[1] == 40
    record(3, "sparse shared basis, (S,S^2,S^3)", ok, f"entry {rep.entry_max:.2e} gram {rep.gram:.2e}")
    assert ok


def test_c4_zero_diag():
    tup = make_power_tuple(make_shift(400), 1)
    B = Pattern.paper_example()
    frame, _ = build_sparse_zero_diag(tup, B, 40, BuildParams(m=40, eta=0.1))
    rep = verify(tup, frame, B, diag=True)
    e = entry_tensor(tup, frame)
    dmax = float(np.max(np.abs(np.diagonal(e, axis1=1, axis2=2))))
    ok = rep.entry_max <= 1e-8 and dmax <= 1e-8 and rep.gram <= 1e-10
    record(4, "sparse with zero diagonal, (S), eta=0.1", ok,
           f"entry {rep.entry_max:.2e} diag {dmax:.2e} gram {rep.gram:.2e}")
    assert ok


def ceil_sqrt(m):
    return math.isqrt(m - 1) + 1 if m > 0 else 0


def test_c5_density():
    m = 60
    tup = make_power_tuple(make_shift(400), 1)
    frame, _, _ = build_density(tup, ceil_sqrt, m, BuildParams(m=m), include_diag=True)
    cen = census(tup, frame, 1e-9)
    ok1 = len(cen) == m and all(c <= ceil_sqrt(p) for p, c in enumerate(cen, start=1))

    shifted = operator_from_doc({"family": "affine_shift", "a": 2, "b": 1, "dim": 400})
    frame2, _, _ = build_density(shifted, ceil_sqrt, m, BuildParams(m=m), include_diag=False)
    cen2 = census(shifted, frame2, 1e-9)
    ok2 = all(c <= p + ceil_sqrt(p) for p, c in enumerate(cen2, start=1))
    ok = ok1 and ok2
    slack1 = min(ceil_sqrt(p) - c for p, c in enumerate(cen, start=1))
    slack2 = min(p + ceil_sqrt(p) - c for p, c in enumerate(cen2, start=1))
    record(5, "density census, f = ceil(sqrt m)", ok,
           f"zero-diag min slack {slack1}, (2I+S) min slack {slack2}, final counts {cen[-1]}/{cen2[-1]}")
    assert ok


def test_c6_subdiagonal():
    N, C, m = 600, 0.9, 30
    T = alternating(N)
    delta = 0.9 * C / (4 * math.sqrt(2))
    B = Pattern.banded(2, lower_only=True)
    targets = TargetArray.constant(B, m, delta / 4)
    frame, rep = build_subdiagonal(T, B, targets, m, BuildParams(m=m, C=C, delta=delta))
    v = verify(T, frame, B, targets)
    stage = max(r["norm"] for r in rep.stage_residuals)
    ladder_ok = all(r["observed"] <= r["bound"] for r in rep.ladder)
    ok = v.entry_max <= 1e-8 and v.gram <= 1e-10 and stage <= 1e-9 and ladder_ok and len(rep.ladder) > 0
    record(6, "subdiagonal prescription, diag(0,1,...)", ok,
           f"entry {v.entry_max:.2e} stage {stage:.2e} ladder rows {len(rep.ladder)} all ok {ladder_ok}")
    assert ok


def test_c7_full():
    N, eps, k, m = 800, 0.2, 2, 20
    tup = make_power_tuple(make_shift(N), k)
    delta = 0.9 * eps * math.sqrt(eps) / (18 * k)
    B = Pattern.banded(1, symmetric=True)
    targets = TargetArray.constant(B, m, delta / 8, k=k, diag=0)
    t0 = time.perf_counter()
    frame, rep = build_full(tup, B, targets, m, BuildParams(m=m, eps=eps, delta=delta))
    dt = time.perf_counter() - t0
    v = verify(tup, frame, B, targets, diag=True, tol=DEFAULT_TOL.with_(entry=1e-7))
    body = essential_body(tup)
    lam_margin = min(margin(body, lam).margin for lam in rep.records["lambda"].values())
    x_max = max(rep.records["x_norm2"].values())
    ok = (
        v.entry_max <= 1e-7
        and v.gram <= 1e-10
        and lam_margin > eps / 2
        and x_max <= (2 * k + 1) * delta
        and dt < 300
    )
    record(7, "full prescription on B and the diagonal, (S,S^2)", ok,
           f"entry {v.entry_max:.2e} lambda margin {lam_margin:.3f} > {eps / 2} "
           f"|x|^2 {x_max:.2e} <= {(2 * k + 1) * delta:.2e} time {dt:.0f}s")
    assert ok


def test_c8_inverse_sparse():
    N, k, m = 640, 2, 16
    tup = make_inverse_power_tuple(make_two_circle(0.5, 2.0, N), k)
    mg = margin(essential_body(tup.normalized()), np.zeros(2 * k)).margin
    B = Pattern.paper_example(symmetric=True)
    frame, _ = build_sparse_zero_diag(tup, B, m, BuildParams(m=m))
    v = verify(tup, frame, B, diag=True, tol=DEFAULT_TOL.with_(entry=1e-7))
    ok = mg > 0 and v.entry_max <= 1e-7 and v.diag_max <= 1e-7 and v.gram <= 1e-10
    record(8, "inverse-power tuple of two_circle(0.5, 2), k=2", ok,
           f"margin(0) {mg:.4f} entry {v.entry_max:.2e} diag {v.diag_max:.2e}")
    assert ok


def _hausdorff_polygon(a, b):
    """Hausdorff distance between two closed polygons given by vertex lists."""

    def to_poly(p, poly):
        q, r = poly, np.roll(poly, -1)
        d = r - q
        t = np.clip(((p - q) * d.conj()).real / np.maximum(np.abs(d) ** 2, 1e-300), 0, 1)
        return np.min(np.abs(q + t * d - p))

    return max(max(to_poly(p, b) for p in a), max(to_poly(p, a) for p in b))


def test_c9_properties(tmp_path):
    details, oks = [], []
    # bit-identical basis.csv across two runs
    op = tmp_path / "op.json"
    op.write_text('{"family": "power_tuple", "k": 2, "base": {"family": "shift", "dim": 160}}')
    pat = tmp_path / "pat.json"
    pat.write_text('{"kind": "paper_example"}')
    outs = []
    for run in range(2):
        out = tmp_path / f"run{run}"
        code = cli_main(["build", "--mode", "sparse", "--op", str(op), "--pattern", str(pat),
                         "--m", "12", "--seed", "7", "--out", str(out)])
        outs.append((code, (out / "basis.csv").read_bytes()))
    same = outs[0][0] == 0 and outs[1][0] == 0 and outs[0][1] == outs[1][1]
    oks.append(same)
    details.append(f"seed replay identical {same}")

    # perturbing any u_n by 1e-3 is detected
    tup = make_power_tuple(make_shift(160), 2)
    B = Pattern.paper_example()
    u = read_frame_csv(tmp_path / "run0" / "basis.csv")
    assert verify(tup, u, B, diag=False).passed
    rng = np.random.default_rng(5)
    detected = 0
    for n in range(u.shape[1]):
        w = u.copy()
        d = rng.standard_normal(u.shape[0]) + 1j * rng.standard_normal(u.shape[0])
        w[:, n] += 1e-3 * d / np.linalg.norm(d)
        detected += not verify(tup, w, B).passed
    oks.append(detected == u.shape[1])
    details.append(f"perturbations detected {detected}/{u.shape[1]}")

    # unitary invariance of the boundary sweep
    worst = 0.0
    for trial in range(5):
        a = rng.standard_normal((12, 12)) + 1j * rng.standard_normal((12, 12))
        q, _ = np.linalg.qr(rng.standard_normal((12, 12)) + 1j * rng.standard_normal((12, 12)))
        b1 = boundary_single(a, 512).complex_samples[:, 0]
        b2 = boundary_single(q.conj().T @ a @ q, 512).complex_samples[:, 0]
        worst = max(worst, _hausdorff_polygon(b1, b2))
    oks.append(worst <= 1e-6)
    details.append(f"Hausdorff {worst:.1e}")

    # budget errors when N is below budget()
    tup = make_power_tuple(make_shift(30), 1)
    need = budget("sparse", tup, Pattern.paper_example(), 40)
    try:
        build_sparse(tup, Pattern.paper_example(), 40, BuildParams(m=40))
        raised = False
    except DimensionBudgetError:
        raised = True
    oks.append(raised and need > 30)
    details.append(f"budget error raised {raised} (N=30 < {need})")

    ok = all(oks)
    record(9, "property suite", ok, "; ".join(details))
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s", "-p", "no:cacheprovider"]))
