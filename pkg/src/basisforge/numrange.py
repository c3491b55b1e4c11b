"""Numerical ranges, curve hulls, interior margins and the inverse problem
"find a unit x in M with <T x, x> = lam"."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize, minimize_scalar

from basisforge.config import DEFAULT_TOL
from basisforge.hilbert import DimensionError, Subspace, TrivialSubspaceError
from basisforge.operators import (
    DescriptorError,
    ModelOperator,
    OperatorTuple,
    as_tuple,
    quadratic_form,
)


class SolverError(RuntimeError):
    def __init__(self, msg, best_residual=np.inf):
        super().__init__(msg)
        self.best_residual = best_residual


class InfeasibleTarget(SolverError):
    pass


def realify(z) -> np.ndarray:
    """C^k -> R^{2k}, interleaving real and imaginary parts."""
    z = np.asarray(z, dtype=np.complex128)
    out = np.empty(z.shape[:-1] + (2 * z.shape[-1],))
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


def complexify(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[..., 0::2] + 1j * x[..., 1::2]


def direction_table(k: int, seed: int = 12345) -> np.ndarray:
    """64k pseudo-uniform unit directions in R^{2k} (a regular grid when k = 1)."""
    n = 64 * k
    if k == 1:
        t = 2 * np.pi * np.arange(n) / n
        return np.column_stack([np.cos(t), np.sin(t)])
    g = np.random.default_rng(seed).standard_normal((n, 2 * k))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


@dataclass
class RangeBody:
    k: int
    samples: np.ndarray  # (n, 2k) real points
    source: str
    support_fn: Callable | None = None
    thetas: np.ndarray | None = None
    directions: np.ndarray = field(init=False)
    support: np.ndarray = field(init=False)

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=float))
        if self.samples.shape[1] != 2 * self.k:
            raise DimensionError("sample dimension differs from 2k")
        self.directions = direction_table(self.k)
        self.support = np.array([self.h(d) for d in self.directions])

    def h(self, d) -> float:
        """Support function at direction d (not necessarily unit)."""
        d = np.asarray(d, dtype=float)
        if self.support_fn is not None:
            return float(self.support_fn(d))
        return float(np.max(self.samples @ d))

    @property
    def complex_samples(self) -> np.ndarray:
        return complexify(self.samples)


@dataclass
class MarginReport:
    point: np.ndarray
    margin: float


def _body_from_points(points, source, support_fn=None, thetas=None) -> RangeBody:
    pts = np.asarray(points, dtype=np.complex128)
    if pts.ndim == 1:
        pts = pts[:, None]
    return RangeBody(pts.shape[1], realify(pts), source, support_fn, thetas)


def _sweep_support(mats: list) -> Callable:
    """Exact support function of conv W(T_1..T_k): lambda_max(sum Re(conj(d_t) T_t))."""

    def h(d):
        dz = complexify(d)
        herm = sum(np.conj(c) * m for c, m in zip(dz, mats))
        herm = (herm + herm.conj().T) / 2
        return float(np.linalg.eigvalsh(herm)[-1])

    return h


def boundary_points(a: np.ndarray, thetas: np.ndarray):
    """For each angle the boundary point <Ax, x> and its top eigenvector x of Re(e^{-i theta} A)."""
    pts, vecs = [], []
    for t in thetas:
        hm = np.exp(-1j * t) * a
        hm = (hm + hm.conj().T) / 2
        n = hm.shape[0]
        if n > 32:
            _, v = sla.eigh(hm, subset_by_index=[n - 1, n - 1], driver="evr")
        else:
            _, v = np.linalg.eigh(hm)
        x = v[:, -1]
        pts.append(np.vdot(x, a @ x))
        vecs.append(x)
    return np.array(pts), np.array(vecs).T


def boundary_single(t, n_theta: int = 256) -> RangeBody:
    """theta-sweep of W(T): samples are boundary points, in sweep order."""
    if n_theta < 8:
        raise ValueError("n_theta must be >= 8")
    m = t.matrix if isinstance(t, ModelOperator) else np.asarray(t, dtype=np.complex128)
    thetas = 2 * np.pi * np.arange(n_theta) / n_theta
    pts, _ = boundary_points(m, thetas)
    return _body_from_points(pts, "sampled", _sweep_support([m]), thetas)


def _descriptor_support(desc) -> Callable | None:
    if desc.kind in ("disk", "circle"):
        c, r = desc.center, desc.radius
        return lambda d: d[0] * c.real + d[1] * c.imag + r * np.hypot(d[0], d[1])
    if desc.kind == "union" and all(p.kind in ("disk", "circle", "segment", "point_set") for p in desc.parts):
        fns = [_descriptor_support(p) for p in desc.parts]
        return lambda d: max(f(d) for f in fns)
    if desc.kind in ("segment", "point_set"):
        pts = realify(desc.sample(8)[:, None]) if desc.kind == "point_set" else realify(np.array([desc.a, desc.b])[:, None])
        return lambda d: float(np.max(pts @ d))
    return None


def _compressed(mats, p):
    return [m[p:, p:] for m in mats]


def essential_body(op_or_tuple, exponents=None, n_samples: int = 1024) -> RangeBody:
    """Model of W_e: the descriptor hull for one operator, the curve hull
    conv{(lam^e)_e : lam in sigma_e} for power and inverse-power tuples."""
    if isinstance(op_or_tuple, ModelOperator) and exponents is None:
        desc = op_or_tuple.descriptor
        if desc.kind == "compression_proxy":
            mats = _compressed([op_or_tuple.matrix], desc.p)
            body = boundary_single(mats[0], 256)
            body.source = "compression_proxy"
            return body
        if not desc.analytic:
            raise DescriptorError("unknown descriptor without compression proxy")
        return _body_from_points(desc.sample(n_samples), "descriptor", _descriptor_support(desc))

    tup = as_tuple(op_or_tuple)
    scales = np.asarray(tup.scales, dtype=float)
    if tup.base is not None and (tup.exponents is not None or exponents is not None):
        exps = list(exponents if exponents is not None else tup.exponents)
        desc = tup.base.descriptor
        if desc.kind == "compression_proxy" or not desc.analytic:
            raise DescriptorError("curve hulls need an analytic spectral descriptor")
        lam = desc.sample(n_samples)
        if any(e < 0 for e in exps) and np.min(np.abs(lam)) < 1e-12:
            raise DescriptorError("negative exponents need a descriptor bounded away from 0")
        pts = np.column_stack([lam ** e for e in exps])
        if exponents is None:
            pts = pts / scales
        return _body_from_points(pts, "descriptor")

    if tup.k == 1:
        return essential_body(tup.ops[0])
    p = tup.ops[0].descriptor.p if tup.ops[0].descriptor.kind == "compression_proxy" else None
    if p is None:
        raise DescriptorError("tuple without a common base needs a compression_proxy descriptor")
    mats = _compressed(tup.matrices, p)
    h = _sweep_support(mats)
    dirs = direction_table(tup.k)
    pts = []
    for d in dirs:
        dz = complexify(d)
        herm = sum(np.conj(c) * m for c, m in zip(dz, mats))
        _, v = np.linalg.eigh((herm + herm.conj().T) / 2)
        x = v[:, -1]
        pts.append([np.vdot(x, m @ x) for m in mats])
    return _body_from_points(np.array(pts), "compression_proxy", h)


def margin(body: RangeBody, lam) -> MarginReport:
    """Signed distance from lam to the hull boundary (positive inside):
    min over unit d of h(d) - <d, lam>."""
    lam = np.atleast_1d(np.asarray(lam, dtype=np.complex128))
    if lam.shape[0] != body.k:
        raise DimensionError("point dimension differs from body dimension")
    x = realify(lam)
    g_table = body.support - body.directions @ x

    def g(d):
        n = np.linalg.norm(d)
        if n == 0:
            return np.inf
        d = d / n
        return body.h(d) - d @ x

    if body.k == 1:
        i = int(np.argmin(g_table))
        t0 = np.arctan2(body.directions[i, 1], body.directions[i, 0])
        step = 2 * np.pi / len(body.directions)
        res = minimize_scalar(
            lambda t: g(np.array([np.cos(t), np.sin(t)])),
            bounds=(t0 - step, t0 + step),
            method="bounded",
            options={"xatol": 1e-12},
        )
        best = min(float(res.fun), float(g_table[i]))
    else:
        best = float(np.min(g_table))
        for i in np.argsort(g_table)[:4]:
            res = minimize(g, body.directions[i], method="Nelder-Mead", options={"xatol": 1e-9, "fatol": 1e-12, "maxiter": 4000})
            best = min(best, float(res.fun))
    return MarginReport(lam, best)


def diam(body: RangeBody) -> float:
    if body.k != 1:
        raise ValueError("diam is defined for k = 1 bodies")
    z = body.complex_samples[:, 0]
    if z.size > 2048:
        z = z[:: int(np.ceil(z.size / 2048))]
    return float(np.max(np.abs(z[:, None] - z[None, :])))


def diameter_pair(body: RangeBody) -> tuple[complex, complex]:
    """Two sample points realizing the diameter."""
    z = body.complex_samples[:, 0]
    dist = np.abs(z[:, None] - z[None, :])
    i, j = np.unravel_index(np.argmax(dist), dist.shape)
    return complex(z[i]), complex(z[j])


# ---------------------------------------------------------------------------
# inverse problem


@dataclass
class SolveOptions:
    tol_lambda: float = 1e-9
    min_margin: float | None = None
    restarts: int = 16
    max_iter: int = 80
    seed: int = 0
    support: object = None
    pullbacks: tuple = ()
    extra: object = None
    check_margin: bool = True

    @property
    def margin_floor(self) -> float:
        return 10 * self.tol_lambda if self.min_margin is None else self.min_margin


class _Compressed:
    """Q^H A_t Q acting on coefficient vectors, either precomputed or matrix-free."""

    def __init__(self, q, matrices, dense_limit=96):
        self.q = q
        self.d = q.shape[1]
        if self.d <= dense_limit:
            self.mats = [q.conj().T @ (m @ q) for m in matrices]
            self.full = None
        else:
            self.mats = None
            self.full = list(matrices)

    def dense(self):
        if self.mats is None:
            self.mats = [self.q.conj().T @ (m @ self.q) for m in self.full]
        return self.mats

    def apply(self, c):
        """Lists (A_t c, A_t^H c) in coefficient space."""
        if self.full is None:
            return [a @ c for a in self.mats], [a.conj().T @ c for a in self.mats]
        x = self.q @ c
        qh = self.q.conj().T
        return [qh @ (m @ x) for m in self.full], [qh @ (m.conj().T @ x) for m in self.full]


def _residual(ops, c, lam):
    if isinstance(ops, _Compressed):
        g, h = ops.apply(c)
    else:
        g = [a @ c for a in ops]
        h = [a.conj().T @ c for a in ops]
    f = np.array([np.vdot(c, gi) for gi in g])
    return f - lam, (g, h)


def _gn_sphere(mats, lam, rng, tol, restarts, max_iter, start=None):
    """Projected Gauss-Newton for c^H A_t c = lam_t on the unit sphere of C^d."""
    d = mats.d if isinstance(mats, _Compressed) else mats[0].shape[0]
    best_c, best_r = None, np.inf
    for attempt in range(restarts):
        if attempt == 0 and start is not None:
            c = start / np.linalg.norm(start)
        else:
            c = rng.standard_normal(d) + 1j * rng.standard_normal(d)
            c /= np.linalg.norm(c)
        r, g = _residual(mats, c, lam)
        rn = np.linalg.norm(r)
        for _ in range(max_iter):
            if np.max(np.abs(r)) <= tol * 1e-3:
                break
            rows = []
            for gi, hi in zip(*g):
                rows.append(realify(gi + hi))
                rows.append(realify(1j * (hi - gi)))
            rows.append(realify(c))
            jac = np.array(rows)
            rhs = np.concatenate([-realify(r), [0.0]])
            step = complexify(np.linalg.lstsq(jac, rhs, rcond=None)[0])
            alpha, moved = 1.0, False
            while alpha > 1e-6:
                cn = c + alpha * step
                cn /= np.linalg.norm(cn)
                rn_new, gn = _residual(mats, cn, lam)
                if np.linalg.norm(rn_new) < rn:
                    c, r, g, rn, moved = cn, rn_new, gn, np.linalg.norm(rn_new), True
                    break
                alpha /= 2
            if not moved:
                break
        res = float(np.max(np.abs(r)))
        if res < best_r:
            best_c, best_r = c, res
        if best_r <= tol:
            break
    return best_c, best_r


def _two_witness(a, lam, rng, tol):
    """k = 1: boundary witnesses a1, a2 of the compression with lam on the
    segment between their form values, then an exact solve on span{a1, a2}."""
    thetas = 2 * np.pi * np.arange(16) / 16
    pts, vecs = boundary_points(a, thetas)
    p1, x1 = pts[0], vecs[:, 0]
    direc = lam - p1
    if abs(direc) < tol:
        return x1
    cross = (np.conj(direc) * (pts - p1)).imag
    along = (np.conj(direc) * (pts - p1)).real
    x2 = None
    if np.max(np.abs(cross)) < 1e-12 * max(1.0, np.max(np.abs(pts))):
        j = int(np.argmax(along))
        x2 = vecs[:, j]
    else:
        for j in range(1, len(thetas)):
            if cross[j - 1] * cross[j] <= 0 and along[j] > 0 and along[j - 1] > 0:
                lo, hi = thetas[j - 1], thetas[j]
                c_lo = cross[j - 1]
                for _ in range(60):
                    mid = (lo + hi) / 2
                    pm, vm = boundary_points(a, np.array([mid]))
                    cm = (np.conj(direc) * (pm[0] - p1)).imag
                    if abs(cm) < 1e-15 * abs(direc):
                        lo = hi = mid
                        break
                    if cm * c_lo <= 0:
                        hi = mid
                    else:
                        lo, c_lo = mid, cm
                _, vm = boundary_points(a, np.array([(lo + hi) / 2]))
                x2 = vm[:, 0]
                break
    if x2 is None:
        return None
    q = np.column_stack([x1, x2])
    q, _ = np.linalg.qr(q)
    if q.shape[1] < 2 or np.linalg.matrix_rank(q) < 2:
        return None
    small = [q.conj().T @ a @ q]
    c, res = _gn_sphere(small, np.array([lam]), rng, tol, 8, 60)
    if res > tol:
        return None
    return q @ c


def find_state(tup, M, lam, opts: SolveOptions | None = None) -> tuple[np.ndarray, float]:
    """Unit x in M (restricted to opts.support, pulled back through opts.pullbacks)
    with max_t |<T_t x, x> - lam_t| <= opts.tol_lambda. No margin check.

    M may also be an N x d array with orthonormal columns spanning the search space.
    """
    opts = opts or SolveOptions()
    tup = as_tuple(tup)
    lam = np.atleast_1d(np.asarray(lam, dtype=np.complex128))
    if lam.shape[0] != tup.k:
        raise DimensionError("target dimension differs from tuple length")
    if isinstance(M, Subspace):
        q = M.basis(opts.support, opts.pullbacks, opts.extra)
    else:  # caller supplied an orthonormal basis of the search space
        q = np.asarray(M, dtype=np.complex128)
    if q.shape[1] == 0:
        raise TrivialSubspaceError("search subspace is {0}")
    ops = _Compressed(q, tup.matrices)
    rng = np.random.default_rng(opts.seed)
    x = None
    if ops.full is not None:  # large space: a few cheap matrix-free attempts first
        c, res = _gn_sphere(ops, lam, rng, opts.tol_lambda, 3, opts.max_iter)
        if res <= opts.tol_lambda:
            x = q @ c
    if x is None and tup.k == 1 and q.shape[1] >= 2:
        c = _two_witness(ops.dense()[0], lam[0], rng, opts.tol_lambda)
        if c is not None:
            x = q @ c
    if x is None:
        c, res = _gn_sphere(ops, lam, rng, opts.tol_lambda, opts.restarts, opts.max_iter)
        if c is None or res > opts.tol_lambda:
            raise SolverError(f"no state reached the target (best residual {res:.3e})", res)
        x = q @ c
    if isinstance(M, Subspace):
        x = M.project(x)
    x /= np.linalg.norm(x)
    res = float(np.max(np.abs(quadratic_form(tup, x) - lam)))
    viol = M.violation(x) if isinstance(M, Subspace) else 0.0
    if opts.extra is not None and len(opts.extra):
        ex = np.asarray(opts.extra, dtype=np.complex128)
        viol = max(viol, float(np.max(np.abs(ex.conj() @ x) / np.maximum(np.linalg.norm(ex, axis=1), 1e-300))))
    if res > opts.tol_lambda or viol > DEFAULT_TOL.gram:
        raise SolverError(f"re-verification failed (residual {res:.3e})", res)
    return x, res


def compressed_body(tup, M: Subspace, support=None) -> RangeBody:
    tup = as_tuple(tup)
    q = M.basis(support)
    mats = [q.conj().T @ m @ q for m in tup.matrices]
    if tup.k == 1:
        return boundary_single(mats[0], 128)
    h = _sweep_support(mats)
    dirs = direction_table(tup.k)
    pts = []
    for d in dirs:
        dz = complexify(d)
        herm = sum(np.conj(c) * m for c, m in zip(dz, mats))
        _, v = np.linalg.eigh((herm + herm.conj().T) / 2)
        x = v[:, -1]
        pts.append([np.vdot(x, m @ x) for m in mats])
    return _body_from_points(np.array(pts), "sampled", h)


def relative_margin(body: RangeBody, lam, flat_tol: float = 1e-9) -> float:
    """margin(), except that a k = 1 body lying on a line is measured inside
    that line: an interior point of a segment gets its distance to the nearer
    endpoint rather than 0."""
    if body.k != 1:
        return margin(body, lam).margin
    z = body.complex_samples[:, 0]
    a, b = diameter_pair(body)
    if abs(b - a) <= flat_tol:
        return -abs(complex(np.atleast_1d(lam)[0]) - a)
    u = (b - a) / abs(b - a)
    if np.max(np.abs(((z - a) * np.conj(u)).imag)) > flat_tol:
        return margin(body, lam).margin
    w = (complex(np.atleast_1d(lam)[0]) - a) * np.conj(u)
    if abs(w.imag) > flat_tol:
        return -abs(w.imag)
    return float(min(w.real, abs(b - a) - w.real))


def solve_state(tup, M: Subspace, lam, opts: SolveOptions | None = None) -> np.ndarray:
    """Unit x ∈ M with <T x, x> = lam to opts.tol_lambda (sup norm)."""
    opts = opts or SolveOptions()
    if M.dim < 1:
        raise TrivialSubspaceError("subspace too small")
    if opts.check_margin:
        body = compressed_body(tup, M, opts.support)
        mg = relative_margin(body, lam)
        if mg < opts.margin_floor:
            raise InfeasibleTarget(f"target margin {mg:.3e} below {opts.margin_floor:.1e}")
    x, _ = find_state(tup, M, lam, opts)
    return x
