"""JSON specs for operators, patterns and targets; CSV frames.

Complex numbers are written as ``[re, im]`` pairs in JSON. A frame CSV has
the header ``# dim=N count=m``, one row per ambient coordinate and an
adjacent (re, im) column pair per vector, printed with 17 significant digits
so that reading it back is exact.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from basisforge.operators import (
    EssentialDescriptor,
    ModelOperator,
    OperatorTuple,
    as_tuple,
    make_dense,
    make_diagonal,
    make_inverse_power_tuple,
    make_power_tuple,
    make_shift,
    make_two_circle,
)
from basisforge.patterns import Pattern, TargetArray


class SpecError(ValueError):
    """A spec document is malformed."""


def _c(x) -> complex:
    if isinstance(x, (list, tuple)):
        if len(x) != 2:
            raise SpecError(f"complex value must be [re, im], got {x!r}")
        return complex(float(x[0]), float(x[1]))
    return complex(x)


def _pair(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def load_doc(src) -> dict:
    """A dict from a dict, a JSON string or a path to a JSON file."""
    if isinstance(src, dict):
        return src
    p = Path(src)
    if p.exists():
        return json.loads(p.read_text(encoding="utf-8"))
    if isinstance(src, str) and src.lstrip().startswith("{"):
        return json.loads(src)
    raise FileNotFoundError(f"spec file not found: {src}")


# ---------------------------------------------------------------------------
# operators


def descriptor_from_doc(d: dict) -> EssentialDescriptor:
    kind = d.get("kind")
    if kind in ("disk", "circle"):
        return EssentialDescriptor(kind, center=_c(d.get("center", 0)), radius=float(d["radius"]))
    if kind == "segment":
        return EssentialDescriptor.segment(_c(d["a"]), _c(d["b"]))
    if kind == "point_set":
        return EssentialDescriptor.point_set([_c(z) for z in d["points"]])
    if kind == "union":
        return EssentialDescriptor.union([descriptor_from_doc(x) for x in d["parts"]])
    if kind == "compression_proxy":
        return EssentialDescriptor.compression_proxy(int(d["p"]))
    raise SpecError(f"unknown descriptor kind {kind!r}")


def operator_from_doc(doc, dim: int | None = None):
    """ModelOperator or OperatorTuple described by an operator spec.

    ``dim`` overrides the document's dimension where the family has one."""
    doc = load_doc(doc)
    fam = doc.get("family")
    n = int(dim if dim is not None else doc.get("dim", 0))
    if fam == "shift":
        op = make_shift(n)
    elif fam == "diagonal":
        if "values" in doc:
            vals = [_c(z) for z in doc["values"]]
        elif "cycle" in doc:
            cyc = [_c(z) for z in doc["cycle"]]
            vals = [cyc[i % len(cyc)] for i in range(n)]
        else:
            raise SpecError("diagonal needs 'values' or 'cycle'")
        op = make_diagonal(vals)
    elif fam == "two_circle":
        op = make_two_circle(float(doc["r"]), float(doc["s"]), n)
    elif fam == "dense":
        m = np.array([[_c(z) for z in row] for row in doc["matrix"]], dtype=np.complex128)
        if "shift_identity" in doc:
            m = m + _c(doc["shift_identity"]) * np.eye(m.shape[0])
        op = make_dense(m)
    elif fam in ("power_tuple", "inverse_power_tuple"):
        base = operator_from_doc(doc["base"], dim)
        if not isinstance(base, ModelOperator):
            raise SpecError("the base of a power tuple must be a single operator")
        k = int(doc["k"])
        return make_power_tuple(base, k) if fam == "power_tuple" else make_inverse_power_tuple(base, k)
    elif fam == "affine_shift":  # a I + b S, convenient for the 2I + S example
        s = make_shift(n)
        a, b = _c(doc.get("a", 0)), _c(doc.get("b", 1))
        desc = EssentialDescriptor.disk(a, abs(b))
        op = make_dense(a * np.eye(n) + b * s.matrix, desc, s.blocks)
    else:
        raise SpecError(f"unknown operator family {fam!r}")
    if "descriptor" in doc:
        op = ModelOperator(op.dim, op.matrix, descriptor_from_doc(doc["descriptor"]), op.blocks, op.name)
    return op


# ---------------------------------------------------------------------------
# patterns and targets


def pattern_from_doc(doc) -> Pattern:
    doc = load_doc(doc)
    kind = doc.get("kind")
    kw = {"symmetric": bool(doc.get("symmetric", False))}
    if "m_max" in doc:
        kw["m_max"] = int(doc["m_max"])
    if kind == "banded":
        return Pattern.banded(int(doc["m"]), lower_only=bool(doc.get("lower_only", False)), **kw)
    if kind == "explicit":
        return Pattern.explicit([tuple(p) for p in doc.get("pairs", [])], **kw)
    if kind == "paper_example":
        return Pattern.paper_example(**kw)
    if kind == "lower_triangle":
        return Pattern.lower_triangle(**kw)
    if kind == "density_cross":
        return Pattern.density_cross(doc["nk"], **kw)
    raise SpecError(f"unknown pattern kind {kind!r}")


def pattern_to_doc(B: Pattern) -> dict:
    if B.kind == "predicate":
        raise SpecError("predicate patterns cannot be serialized")
    doc = {"kind": B.kind, "symmetric": B.symmetric, "m_max": B.m_max}
    if B.kind == "banded":
        doc.update(m=B.m, lower_only=B.lower_only)
    elif B.kind == "explicit":
        doc["pairs"] = sorted([list(p) for p in B.pairs])
    elif B.kind == "density_cross":
        doc["nk"] = list(B.nk)
    return doc


def targets_from_doc(doc) -> TargetArray:
    doc = load_doc(doc)
    k = int(doc["k"])
    entries = {}
    for e in doc.get("entries", []):
        entries[(int(e["n"]), int(e["j"]))] = [_c(z) for z in e["value"]]
    diag = {}
    for n, v in enumerate(doc.get("diag", []), start=1):
        diag[n] = [_c(z) for z in v]
    delta = doc.get("delta")
    return TargetArray(k, entries, diag, None if delta is None else float(delta))


def targets_to_doc(t: TargetArray) -> dict:
    m = max(t.diag, default=0)
    return {
        "k": t.k,
        "diag": [[_pair(z) for z in t.get(n, n)] for n in range(1, m + 1)],
        "entries": [
            {"n": n, "j": j, "value": [_pair(z) for z in v]} for (n, j), v in sorted(t.entries.items())
        ],
        "delta": t.delta,
    }


# ---------------------------------------------------------------------------
# frames and reports


def write_frame_csv(path, u: np.ndarray):
    u = np.asarray(u, dtype=np.complex128)
    n, m = u.shape
    out = np.empty((n, 2 * m))
    out[:, 0::2], out[:, 1::2] = u.real, u.imag
    np.savetxt(path, out, fmt="%.17g", delimiter=",", header=f"dim={n} count={m}", comments="# ")


def read_frame_csv(path) -> np.ndarray:
    p = Path(path)
    with p.open(encoding="utf-8") as fh:
        head = fh.readline().strip()
    if not head.startswith("#"):
        raise SpecError("frame CSV must start with '# dim=N count=m'")
    fields = dict(kv.split("=") for kv in head.lstrip("#").split())
    n, m = int(fields["dim"]), int(fields["count"])
    raw = np.loadtxt(p, delimiter=",", comments="#", ndmin=2)
    if m == 0:
        return np.zeros((n, 0), dtype=np.complex128)
    if raw.shape != (n, 2 * m):
        raise SpecError(f"frame CSV body has shape {raw.shape}, header says ({n}, {2 * m})")
    return raw[:, 0::2] + 1j * raw[:, 1::2]


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (complex, np.complexfloating)):
        return _pair(x)
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, float) and not np.isfinite(x):
        return None
    return x


def write_json(path, obj):
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2) + "\n", encoding="utf-8")


def describe_tuple(tup) -> dict:
    t = as_tuple(tup)
    return {"k": t.k, "dim": t.dim, "names": [op.name for op in t.ops]}


__all__ = [
    "SpecError",
    "OperatorTuple",
    "descriptor_from_doc",
    "load_doc",
    "operator_from_doc",
    "pattern_from_doc",
    "pattern_to_doc",
    "read_frame_csv",
    "targets_from_doc",
    "targets_to_doc",
    "write_frame_csv",
    "write_json",
]
