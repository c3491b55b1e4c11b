"""Post-hoc verification of a frame from raw inner products only.

Nothing here reads builder state: the inputs are the operator tuple, the
frame, the pattern and the prescribed values.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from basisforge.config import DEFAULT_TOL, Tolerances
from basisforge.hilbert import DimensionError, OrthoFrame
from basisforge.operators import as_tuple
from basisforge.patterns import Pattern, TargetArray


def _columns(frame) -> np.ndarray:
    u = frame.vectors if isinstance(frame, OrthoFrame) else np.asarray(frame, dtype=np.complex128)
    if u.ndim != 2:
        raise DimensionError("frame must be an N x m array")
    return u


def entry_tensor(tup, frame) -> np.ndarray:
    """E[t, n, j] = <T_t u_j, u_n> (0-based indices)."""
    tup = as_tuple(tup)
    u = _columns(frame)
    if u.shape[0] != tup.dim:
        raise DimensionError(f"frame dimension {u.shape[0]} differs from operator dimension {tup.dim}")
    uh = u.conj().T
    return np.stack([uh @ (m @ u) for m in tup.matrices])


def census(tup, frame, zero_tol: float = 1e-9) -> list[int]:
    """counts[m'-1] = card{(n, j) : n, j <= m', some |<T_t u_j, u_n>| > zero_tol}."""
    e = np.max(np.abs(entry_tensor(tup, frame)), axis=0) > zero_tol
    m = e.shape[0]
    out, total = [], 0
    for p in range(m):
        # new cells of the leading (p+1) x (p+1) corner: row p and column p
        total += int(np.count_nonzero(e[p, : p + 1]) + np.count_nonzero(e[:p, p]))
        out.append(total)
    return out


@dataclass
class VerifyReport:
    mode: str
    m: int
    N: int
    k: int
    tolerances: dict
    gram: float
    entry_max: float
    entry_argmax: list | None
    diag_max: float
    census: list = field(default_factory=list)
    ladder: list = field(default_factory=list)
    flags: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.flags.values())

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "m": self.m,
            "N": self.N,
            "k": self.k,
            "tolerances": self.tolerances,
            "residuals": {
                "gram": self.gram,
                "entry_max": self.entry_max,
                "entry_argmax": self.entry_argmax,
                "diag_max": self.diag_max,
            },
            "census": self.census,
            "ladder": self.ladder,
            "flags": self.flags,
            "pass": self.passed,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def verify(
    tup,
    frame,
    B: Pattern | None = None,
    targets: TargetArray | None = None,
    *,
    diag: bool = False,
    tol: Tolerances = DEFAULT_TOL,
    mode: str = "",
    zero_tol: float | None = None,
    census_bound=None,
    ladder=None,
) -> VerifyReport:
    """Residuals of a frame against a prescription.

    Cells of B without a target value (or all of them, when ``targets`` is
    None) are prescribed to be zero. With ``diag`` the diagonal is prescribed
    too (``targets.diag`` or zero). ``census_bound(m')`` adds an integer
    census check; ``ladder`` rows (dicts with bound/observed) are re-checked.
    """
    tup = as_tuple(tup)
    u = _columns(frame)
    m = u.shape[1]
    e = entry_tensor(tup, u)
    gram = OrthoFrame.residual_of(u)

    worst, arg = 0.0, None
    if B is not None:
        for n, j in B.cells(m):
            a = targets.get(n, j) if targets is not None else np.zeros(tup.k)
            r = np.abs(e[:, n - 1, j - 1] - a)
            t = int(np.argmax(r))
            if r[t] > worst:
                worst, arg = float(r[t]), [n, j, t + 1]
    dmax = 0.0
    if diag:
        for n in range(1, m + 1):
            a = targets.get(n, n) if targets is not None else np.zeros(tup.k)
            r = np.abs(e[:, n - 1, n - 1] - a)
            dmax = max(dmax, float(np.max(r)))
            if r.max() > worst:
                worst, arg = float(r.max()), [n, n, int(np.argmax(r)) + 1]

    flags = {"gram": gram <= tol.gram, "entries": worst <= tol.entry and dmax <= tol.entry}
    zt = tol.zero if zero_tol is None else zero_tol
    cen = census(tup, u, zt) if census_bound is not None else []
    if census_bound is not None:
        flags["census"] = all(c <= census_bound(p + 1) for p, c in enumerate(cen))
    rows = []
    if ladder:
        for row in ladder:
            rows.append({key: row[key] for key in ("r", "l", "bound", "observed") if key in row})
        flags["ladder"] = all(r["observed"] <= r["bound"] + tol.gram for r in rows)
    return VerifyReport(
        mode=mode,
        m=m,
        N=u.shape[0],
        k=tup.k,
        tolerances=asdict(tol) | {"zero_tol": zt},
        gram=gram,
        entry_max=worst,
        entry_argmax=arg,
        diag_max=dmax,
        census=cen,
        ladder=rows,
        flags=flags,
    )
