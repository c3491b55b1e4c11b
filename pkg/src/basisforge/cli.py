"""Command-line front end.

Exit codes: 0 when the run verifies, 2 on a verification failure, 1 on a
usage or configuration error.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from basisforge import builder as bld
from basisforge import io
from basisforge.config import DEFAULT_TOL
from basisforge.numrange import boundary_single, diam, essential_body, margin
from basisforge.operators import as_tuple, make_inverse_power_tuple, make_power_tuple, make_shift, make_two_circle
from basisforge.patterns import (
    Pattern,
    TargetArray,
    density,
    is_admissible_prefix,
    skip_sequence_upto,
)
from basisforge.verify import census, verify

log = logging.getLogger("basisforge")

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2

DENSITY_FUNCTIONS = {
    "ceil_sqrt": lambda m: math.ceil(math.sqrt(m)),
    "ceil_log2": lambda m: max(1, math.ceil(math.log2(m + 1))),
    "linear": lambda m: m,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _thread_limit():
    val = os.environ.get("BASISFORGE_THREADS")
    if not val:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=int(val))


def _common(p):
    p.add_argument("--op", help="operator spec (JSON file)")
    p.add_argument("--pattern", help="pattern spec (JSON file)")
    p.add_argument("--targets", help="target spec (JSON file)")
    p.add_argument("--params", help="parameter file (JSON)")
    p.add_argument("--m", type=int, help="number of vectors")
    p.add_argument("--dim", type=int, help="ambient dimension override")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--tol-entry", type=float, default=None)
    p.add_argument("--zero-tol", type=float, default=None)
    p.add_argument("--mode", choices=bld.MODES, default=None)


def make_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="basisforge", description="Orthonormal frames with prescribed matrix entries.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", parser_class=_Parser)

    p = sub.add_parser("range", help="numerical range boundary and essential hull")
    _common(p)
    p.add_argument("--n-theta", type=int, default=256)

    p = sub.add_parser("pattern", help="generate or check index patterns")
    p.add_argument("action", choices=("gen", "check"))
    _common(p)
    p.add_argument("--kind", default="banded")
    p.add_argument("--width", type=int, default=1)
    p.add_argument("--symmetric", action="store_true")
    p.add_argument("--lower-only", action="store_true")

    p = sub.add_parser("build", help="run a construction and verify it")
    _common(p)

    p = sub.add_parser("verify", help="verify a frame CSV")
    _common(p)
    p.add_argument("--frame", help="frame CSV (default: <out>/basis.csv)")

    p = sub.add_parser("demo", help="self-contained scenarios")
    p.add_argument("name", choices=("corollary-power-hull", "inverse-sparse", "band"))
    _common(p)
    p.add_argument("--k", type=int, default=2)
    return ap


# ---------------------------------------------------------------------------
# helpers


def _params(args) -> tuple[dict, bld.BuildParams]:
    raw = dict(io.load_doc(args.params)) if args.params else {}
    tol = DEFAULT_TOL
    for key, field_ in (("tol_entry", "entry"), ("tol_gram", "gram"), ("tol_lambda", "lam"), ("zero_tol", "zero")):
        if key in raw:
            tol = tol.with_(**{field_: float(raw[key])})
    if args.tol_entry is not None:
        tol = tol.with_(entry=args.tol_entry)
    if args.zero_tol is not None:
        tol = tol.with_(zero=args.zero_tol)
    m = args.m if args.m is not None else int(raw.get("m", 20))
    seed = args.seed if args.seed is not None else int(raw.get("seed", 0))
    p = bld.BuildParams(
        m=m,
        eta=raw.get("eta"),
        delta=raw.get("delta"),
        eps=raw.get("eps"),
        C=raw.get("C"),
        tol=tol,
        seed=seed,
        relation=raw.get("relation"),
    )
    return raw, p


def _need(args, name):
    val = getattr(args, name)
    if not val:
        raise UsageError(f"--{name} is required")
    if not Path(val).exists():
        raise UsageError(f"file not found: {val}")
    return val


def _diag_prescribed(mode: str, raw: dict) -> bool:
    return mode in ("sparse-zero-diag", "full") or (mode == "density" and raw.get("include_diag", True))


def _emit(out: Path, u, vr, build_report=None, extra=None) -> int:
    out.mkdir(parents=True, exist_ok=True)
    io.write_frame_csv(out / "basis.csv", u)
    doc = vr.to_json()
    if build_report is not None:
        doc["build"] = build_report.as_dict()
    if extra:
        doc.update(extra)
    io.write_json(out / "report.json", doc)
    print(
        f"{doc['mode']}: m={vr.m} N={vr.N} gram={vr.gram:.3e} entry_max={vr.entry_max:.3e} "
        f"diag_max={vr.diag_max:.3e} -> {'PASS' if vr.passed else 'FAIL'}"
    )
    return EXIT_OK if vr.passed else EXIT_FAIL


def _run_build(mode, tup, B, targets, p: bld.BuildParams, raw: dict, out: Path) -> int:
    m = p.m
    census_bound = None
    if mode == "sparse":
        frame, rep = bld.build_sparse(tup, B, m, p)
    elif mode == "sparse-zero-diag":
        frame, rep = bld.build_sparse_zero_diag(tup, B, m, p)
    elif mode == "density":
        f = DENSITY_FUNCTIONS[raw.get("f", "ceil_sqrt")]
        include = bool(raw.get("include_diag", True))
        frame, rep, B = bld.build_density(tup, f, m, p, include_diag=include)
        census_bound = f if include else (lambda q: q + f(q))
    elif mode == "subdiagonal":
        frame, rep = bld.build_subdiagonal(tup, B, targets, m, p)
    else:
        frame, rep = bld.build_full(tup, B, targets, m, p)
    u = frame.vectors
    vr = verify(
        tup, u, B, targets, diag=_diag_prescribed(mode, raw), tol=p.tol, mode=mode,
        census_bound=census_bound, ladder=rep.ladder,
    )
    code = _emit(out, u, vr, rep, {"pattern": io.pattern_to_doc(B)})
    if census_bound is not None:
        rows = "\n".join(f"{q + 1},{c},{census_bound(q + 1)}" for q, c in enumerate(vr.census))
        (out / "census.csv").write_text("m,census,bound\n" + rows + "\n", encoding="utf-8")
    return code


# ---------------------------------------------------------------------------
# subcommands


def cmd_range(args) -> int:
    tup = as_tuple(io.operator_from_doc(io.load_doc(_need(args, "op")), args.dim))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if tup.k == 1:
        body = boundary_single(tup.matrices[0], args.n_theta)
        pts = body.complex_samples[:, 0]
        rows = [f"{t:.17g},{z.real:.17g},{z.imag:.17g}" for t, z in zip(body.thetas, pts)]
        (out / "boundary.csv").write_text("theta,re,im\n" + "\n".join(rows) + "\n", encoding="utf-8")
    ess = essential_body(tup)
    z = ess.complex_samples
    cols = ",".join(f"re{t + 1},im{t + 1}" for t in range(tup.k))
    rows = [",".join(f"{v.real:.17g},{v.imag:.17g}" for v in row) for row in z]
    (out / "hull.csv").write_text(cols + "\n" + "\n".join(rows) + "\n", encoding="utf-8")
    info = {"k": tup.k, "dim": tup.dim, "margin_of_0": margin(ess, np.zeros(tup.k)).margin}
    if tup.k == 1:
        info["diam_essential"] = diam(ess)
    io.write_json(out / "range.json", info)
    print(", ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in info.items()))
    return EXIT_OK


def cmd_pattern(args) -> int:
    m = args.m or 20
    out = Path(args.out)
    if args.action == "gen":
        doc = {"kind": args.kind, "symmetric": args.symmetric}
        if args.kind == "banded":
            doc.update(m=args.width, lower_only=args.lower_only)
        B = io.pattern_from_doc(doc)
        out.mkdir(parents=True, exist_ok=True)
        io.write_json(out / "pattern.json", io.pattern_to_doc(B))
        print(f"wrote {out / 'pattern.json'}")
        return EXIT_OK
    B = io.pattern_from_doc(io.load_doc(_need(args, "pattern")))
    ok, bad = is_admissible_prefix(B, m)
    skips = skip_sequence_upto(B, m).values
    print(f"admissible up to {m}: {ok}" + ("" if ok else f" (no skip after {bad})"))
    print(f"skips <= {m}: {skips}")
    print(f"density({m}) = {density(B, m):.4f}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_build(args) -> int:
    raw, p = _params(args)
    mode = args.mode or raw.get("mode")
    if mode not in bld.MODES:
        raise UsageError("--mode is required")
    tup = io.operator_from_doc(io.load_doc(_need(args, "op")), args.dim)
    if mode == "density":
        B = None
    else:
        B = io.pattern_from_doc(io.load_doc(_need(args, "pattern")))
    targets = None
    if mode in ("subdiagonal", "full"):
        targets = io.targets_from_doc(io.load_doc(_need(args, "targets")))
    return _run_build(mode, tup, B, targets, p, raw, Path(args.out))


def cmd_verify(args) -> int:
    raw, p = _params(args)
    mode = args.mode or raw.get("mode", "sparse")
    tup = io.operator_from_doc(io.load_doc(_need(args, "op")), args.dim)
    frame_path = args.frame or str(Path(args.out) / "basis.csv")
    if not Path(frame_path).exists():
        raise UsageError(f"file not found: {frame_path}")
    u = io.read_frame_csv(frame_path)
    B = io.pattern_from_doc(io.load_doc(args.pattern)) if args.pattern else None
    targets = io.targets_from_doc(io.load_doc(args.targets)) if args.targets else None
    vr = verify(tup, u, B, targets, diag=_diag_prescribed(mode, raw), tol=p.tol, mode=mode)
    print(vr.dumps())
    return EXIT_OK if vr.passed else EXIT_FAIL


def cmd_demo(args) -> int:
    raw, p = _params(args)
    out = Path(args.out)
    k = args.k
    if args.name == "corollary-power-hull":
        # 0 lies inside the polynomial hull of the spectrum of S, so (S, ..., S^k) has
        # 0 inside its essential range and zero diagonals are reachable
        n = args.dim or 400
        p.m = args.m or 20
        tup = make_power_tuple(make_shift(n), k)
        B = Pattern.paper_example(symmetric=True)
        return _run_build("sparse-zero-diag", tup, B, None, p, raw, out)
    if args.name == "inverse-sparse":
        n = args.dim or 640
        p.m = args.m or 16
        tup = make_inverse_power_tuple(make_two_circle(0.5, 2.0, n), k)
        mg = margin(essential_body(tup.normalized()), np.zeros(2 * k)).margin
        print(f"margin of 0 in the normalized curve hull: {mg:.6g}")
        if mg <= 0:
            return EXIT_FAIL
        B = Pattern.paper_example(symmetric=True)
        return _run_build("sparse-zero-diag", tup, B, None, p, raw, out)
    # band: finitely many prescribed diagonals, zero main diagonal
    n = args.dim or 400
    p.m = args.m or 12
    width = int(raw.get("width", 1))
    tup = make_power_tuple(make_shift(n), k)
    p.eps = p.eps or 0.2
    delta = p.delta or 0.9 * p.eps**1.5 / (18 * k)
    p.delta = delta
    B = Pattern.banded(width, symmetric=True)
    val = delta / (4 * width)
    targets = TargetArray(k, {c: [val * np.exp(1j * (c[0] - c[1])) for _ in range(k)] for c in B.cells(p.m)},
                          {q: np.zeros(k) for q in range(1, p.m + 1)})
    return _run_build("full", tup, B, targets, p, raw, out)


COMMANDS = {"range": cmd_range, "pattern": cmd_pattern, "build": cmd_build, "verify": cmd_verify, "demo": cmd_demo}


def main(argv=None) -> int:
    try:
        args = make_parser().parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.cmd is None:
        make_parser().print_help(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        with _thread_limit():
            return COMMANDS[args.cmd](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except bld.BuildError as exc:
        print(f"build failed: {exc}", file=sys.stderr)
        if exc.frame is not None and len(exc.frame):
            Path(args.out).mkdir(parents=True, exist_ok=True)
            io.write_frame_csv(Path(args.out) / "partial_basis.csv", exc.frame.vectors)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
