"""Coupling pairs (v, z) with <T v, z> = 1 and prescribed orthogonality, for a
single operator, for a tuple, and the full 4k-vector family of a tuple."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from basisforge.config import DEFAULT_TOL, Tolerances
from basisforge.hilbert import Subspace
from basisforge.numrange import (
    SolveOptions,
    diam,
    diameter_pair,
    essential_body,
    find_state,
    margin,
)
from basisforge.operators import ModelOperator, OperatorTuple, as_tuple, perp_vectors, quadratic_form


class DegenerateRangeError(ValueError):
    """W_e(T) is (numerically) a single point."""


class DimensionBudgetError(ValueError):
    """Not enough free dimensions left for the requested construction."""


class MarginTooSmall(ValueError):
    pass


class ConstructionError(RuntimeError):
    """Post-hoc verification of a constructed object failed."""


@dataclass
class CouplingPair:
    v: np.ndarray
    z: np.ndarray
    product_bound: float

    @property
    def product(self) -> float:
        return float(np.linalg.norm(self.v) * np.linalg.norm(self.z))


@dataclass
class CouplingFamily:
    """v[j], z[j], vt[j], zt[j] for j < k, with <T_j v_j, z_j> = <T_j^* vt_j, zt_j> = 1."""

    v: list
    z: list
    vt: list
    zt: list
    lam: np.ndarray
    eps: float
    bound: float = field(init=False)

    def __post_init__(self):
        self.bound = 2.0 / self.eps

    @property
    def k(self) -> int:
        return len(self.v)

    def rescaled(self, norm_v: float) -> "CouplingFamily":
        """Rescale every (v, z) and (vt, zt) pair so that the v's have norm ``norm_v``."""
        v, z, vt, zt = [], [], [], []
        for j in range(self.k):
            s = norm_v / np.linalg.norm(self.v[j])
            v.append(s * self.v[j]); z.append(self.z[j] / s)
            s = norm_v / np.linalg.norm(self.vt[j])
            vt.append(s * self.vt[j]); zt.append(self.zt[j] / s)
        return CouplingFamily(v, z, vt, zt, self.lam, self.eps)


def rescale_pair(p: CouplingPair, s: float) -> CouplingPair:
    if s <= 0:
        raise ValueError("scale must be positive")
    return CouplingPair(s * p.v, p.z / s, p.product_bound)


def _rel_violation(M: Subspace, x) -> float:
    n = np.linalg.norm(x)
    return M.violation(x) / n if n else 0.0


def _check_slack(M: Subspace, need: int):
    if M.dim < need:
        raise DimensionBudgetError(f"subspace has {M.dim} free dimensions, {need} required")


def _residual_direction(target, keep, avoid=None) -> np.ndarray:
    """(I - P) target, P the orthogonal projection onto span(keep ∪ avoid)."""
    cols = list(keep)
    if avoid is not None and len(avoid):
        cols += list(np.atleast_2d(avoid))
    q = sla.orth(np.column_stack(cols), rcond=1e-12)
    r = target - q @ (q.conj().T @ target)
    return r - q @ (q.conj().T @ r)


def build_pair_single(
    T,
    M: Subspace | None,
    C: float,
    *,
    support=None,
    seed: int = 0,
    tol: Tolerances = DEFAULT_TOL,
    dim_slack: int = 8,
    body=None,
    space=None,
    avoid=None,
) -> CouplingPair:
    """Unit v and z in M with v ⊥ z, <T v, z> = 1 and ||z|| <= 2 sqrt(2) / C.

    ``space(extra)`` may replace the default search space M ∩ T^{-1}M; it
    returns an orthonormal basis of the admissible vectors orthogonal to the
    rows of ``extra``. Rows of ``avoid`` are projected out of z.
    """
    op = T if isinstance(T, ModelOperator) else as_tuple(T).ops[0]
    tup = OperatorTuple.of(op)
    body = body if body is not None else essential_body(op)
    d = diam(body)
    if d < 1e-9:
        raise DegenerateRangeError("essential numerical range is a single point")
    if not 0 < C < d:
        raise ValueError(f"need 0 < C < diam = {d:.6g}")
    if space is None:
        _check_slack(M, dim_slack)
        space = lambda extra: M.basis(support, (op.matrix,), extra)  # noqa: E731
    eps = (d - C) / 8
    lam, mu = diameter_pair(body)
    u = (mu - lam) / abs(mu - lam)
    lam_t, mu_t = lam + 0.5 * eps * u, mu - 0.5 * eps * u

    opts = SolveOptions(tol_lambda=tol.lam, seed=seed)
    x, _ = find_state(tup, space(None), lam_t, opts)
    opts.seed = seed + 1
    y, _ = find_state(tup, space(perp_vectors(tup, [x])), mu_t, opts)

    v = (x + y) / np.sqrt(2)
    w = _residual_direction(op.matrix @ v, [v], avoid)
    z = w / np.vdot(w, w).real
    pair = CouplingPair(v, z, 2 * np.sqrt(2) / C)
    _verify_single(pair, op, M, tol, check_bound=avoid is None)
    return pair


def _verify_single(p: CouplingPair, op, M, tol, check_bound=True):
    errs = {
        "norm_v": abs(np.linalg.norm(p.v) - 1),
        "v_perp_z": abs(np.vdot(p.z, p.v)),
        "couple": abs(np.vdot(p.z, op.matrix @ p.v) - 1),
        "in_M": 0.0 if M is None else max(_rel_violation(M, p.v), _rel_violation(M, p.z)),
    }
    lim = {"norm_v": tol.gram, "v_perp_z": tol.gram, "couple": tol.couple, "in_M": tol.gram}
    bad = [k for k in errs if errs[k] > lim[k]]
    if check_bound and p.product > p.product_bound + 1e-8:
        bad.append("product")
    if bad:
        raise ConstructionError(f"coupling pair failed checks {bad}: {errs}")


def _coupling_residual(rows, v, z) -> np.ndarray:
    return np.array([np.vdot(z, r) for r in rows])


def build_pair_tuple(
    tup,
    M: Subspace | None,
    eps: float,
    *,
    support=None,
    extra=None,
    seed: int = 0,
    tol: Tolerances = DEFAULT_TOL,
    check_margin: bool = True,
    dim_slack: int | None = None,
    space=None,
    avoid=None,
) -> CouplingPair:
    """Unit v with <𝒯 v, v> = 0 and z ∈ span{T_t v, T_t^* v} with z ⊥ v,
    <T_1 v, z> = 1 and z orthogonal to every other T_t v, T_t^* v.

    The leading entry of ``tup`` is the coupled operator; rotated or starred
    tuples move the coupling. ``extra`` rows are plain orthogonality
    constraints imposed on v only. ``space(extra)`` may replace the default
    search space M ∩ 𝒯^{-1}M ∩ 𝒯^{*-1}M, in which case the constraints z must
    meet are passed as ``avoid`` rows and projected out of z.
    """
    tup = as_tuple(tup)
    k = tup.k
    if eps <= 0:
        raise ValueError("eps must be positive")
    if check_margin:
        mg = margin(essential_body(tup), np.zeros(k)).margin
        if mg <= eps:
            raise MarginTooSmall(f"margin of 0 is {mg:.4g}, needs > {eps}")
    base_extra = np.zeros((0, tup.dim), dtype=np.complex128) if extra is None else np.atleast_2d(extra)
    if space is None:
        _check_slack(M, dim_slack if dim_slack is not None else 8 * k)
        pullbacks = tuple(tup.matrices) + tuple(tup.adjoints)
        space = lambda ex: M.basis(support, pullbacks, ex)  # noqa: E731

    xs = []
    for i, unit in enumerate((1, 1j, -1, -1j)):
        target = np.zeros(k, dtype=np.complex128)
        target[0] = eps * unit
        ex = np.vstack([base_extra, perp_vectors(tup, xs)]) if xs else base_extra
        x, _ = find_state(tup, space(ex), target, SolveOptions(tol_lambda=tol.lam, seed=seed + i))
        xs.append(x)
    v = 0.5 * sum(xs)

    t1v = tup.matrices[0] @ v
    others = [m @ v for m in tup.matrices[1:]] + [m @ v for m in tup.adjoints] + [v]
    r = _residual_direction(t1v, others, avoid)
    z = r / np.vdot(r, r).real
    pair = CouplingPair(v, z, 2.0 / eps)
    _verify_tuple(pair, tup, M, tol, check_bound=avoid is None)
    return pair


def _verify_tuple(p: CouplingPair, tup: OperatorTuple, M, tol, check_bound=True):
    v, z = p.v, p.z
    rows = [m @ v for m in tup.matrices] + [m @ v for m in tup.adjoints]
    c = _coupling_residual(rows, v, z)
    c[0] -= 1
    errs = {
        "norm_v": abs(np.linalg.norm(v) - 1),
        "form": float(np.max(np.abs(quadratic_form(tup, v)))),
        "v_perp_z": abs(np.vdot(z, v)),
        "coupling": float(np.max(np.abs(c))),
        "in_M": 0.0 if M is None else max(_rel_violation(M, v), _rel_violation(M, z)),
    }
    lim = {"norm_v": tol.gram, "form": tol.lam, "v_perp_z": tol.gram, "coupling": tol.couple, "in_M": tol.gram}
    bad = [key for key in errs if errs[key] > lim[key]]
    if check_bound and np.linalg.norm(z) > p.product_bound + 1e-8:
        bad.append("norm_z")
    if bad:
        raise ConstructionError(f"tuple coupling pair failed checks {bad}: {errs}")


def family_order(k: int) -> list[tuple[int, bool]]:
    """Coupling order (T_1), (T_1^*), (T_2), (T_2^*), ... as (index, starred) pairs."""
    return [(j, star) for j in range(k) for star in (False, True)]


def build_family(
    tup,
    M: Subspace,
    lam,
    eps: float,
    *,
    support=None,
    seed: int = 0,
    tol: Tolerances = DEFAULT_TOL,
    check_margin: bool = True,
    body=None,
) -> CouplingFamily:
    """4k vectors v_j, z_j, vt_j, zt_j in M with <T_j v_j, z_j> = <T_j^* vt_j, zt_j> = 1,
    form values lam ||v||^2, and the full orthogonality table between blocks.

    Built from 2k tuple-pair constructions on the rotated and starred tuples
    of 𝒯 - lam, each inside the ⊥^(𝒯) complement of the earlier outputs.
    """
    tup = as_tuple(tup)
    k = tup.k
    lam = np.atleast_1d(np.asarray(lam, dtype=np.complex128))
    if check_margin:
        body = body if body is not None else essential_body(tup)
        mg = margin(body, lam).margin
        if mg <= eps:
            raise MarginTooSmall(f"margin of lambda is {mg:.4g}, needs > {eps}")
    shifted = tup.shifted(lam)
    out = {False: [], True: []}
    cur = M
    for step, (j, star) in enumerate(family_order(k)):
        rt = shifted.rotated(j, star)
        p = build_pair_tuple(rt, cur, eps, support=support, seed=seed + 8 * step, tol=tol, check_margin=False)
        out[star].append(p)
        cur = cur.with_constraints(perp_vectors(shifted, [p.v, p.z]))
    fam = CouplingFamily(
        [p.v for p in out[False]], [p.z for p in out[False]],
        [p.v for p in out[True]], [p.z for p in out[True]],
        lam, eps,
    )
    err = family_table_error(fam, tup)
    if err["coupling"] > tol.couple or err["form"] > tol.lam:
        raise ConstructionError(f"family failed its coupling table: {err}")
    return fam


def family_table_error(fam: CouplingFamily, tup) -> dict:
    """Worst violations of the family's relations, computed from raw inner products.

    ``coupling`` covers the unit couplings, the vanishing couplings of each
    z against its own v, and the ⊥^(𝒯) relations between different blocks.
    ``form`` covers <𝒯 v, v> = lam ||v||^2 for the v's and vt's.
    """
    tup = as_tuple(tup)
    mats, adjs = tup.matrices, tup.adjoints
    k = fam.k
    worst, form = 0.0, 0.0

    def perp(a, b):
        vals = [np.vdot(b, a)] + [np.vdot(m @ b, a) for m in mats] + [np.vdot(m @ b, a) for m in adjs]
        return float(np.max(np.abs(vals)))

    for j in range(k):
        for v, z, star in ((fam.v[j], fam.z[j], False), (fam.vt[j], fam.zt[j], True)):
            target = adjs[j] if star else mats[j]
            worst = max(worst, abs(np.vdot(z, target @ v) - 1), abs(np.vdot(z, v)))
            for t in range(k):
                for m, is_adj in ((mats[t], False), (adjs[t], True)):
                    if t == j and is_adj == star:
                        continue
                    worst = max(worst, abs(np.vdot(z, m @ v)))
            q = quadratic_form(tup, v)
            form = max(form, float(np.max(np.abs(q - fam.lam * np.vdot(v, v).real))))
    blocks = [[fam.v[j], fam.z[j], fam.vt[j], fam.zt[j]] for j in range(k)]
    for j in range(k):
        for i in range(k):
            if i != j:
                for a in blocks[j]:
                    for b in blocks[i]:
                        worst = max(worst, perp(a, b))
        for a in blocks[j][2:]:
            for b in blocks[j][:2]:
                worst = max(worst, perp(a, b))
    return {"coupling": worst, "form": form}
