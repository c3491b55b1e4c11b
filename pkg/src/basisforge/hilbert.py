"""Dense complex linear algebra: inner products, constraint subspaces, frames.

Vectors are plain 1-D ``complex128`` numpy arrays. The inner product is linear
in the first argument and conjugate-linear in the second.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from basisforge.config import DEFAULT_TOL, Tolerances


class DimensionError(ValueError):
    pass


class TrivialSubspaceError(ValueError):
    pass


class FrameRejected(ValueError):
    pass


def as_cvector(x) -> np.ndarray:
    return np.asarray(x, dtype=np.complex128).reshape(-1)


def inner(u, v) -> complex:
    """<u, v> = sum_l u_l * conj(v_l)."""
    u = as_cvector(u)
    v = as_cvector(v)
    if u.shape != v.shape:
        raise DimensionError(f"dimension mismatch: {u.shape[0]} vs {v.shape[0]}")
    return complex(np.vdot(v, u))


def _orthonormal_extension(existing: np.ndarray, new: np.ndarray, drop: float) -> np.ndarray:
    """Rows orthonormal to ``existing`` spanning the part of ``new`` outside it.

    ``existing`` has orthonormal rows. Rows of ``new`` whose residual after
    projection is below ``drop`` (relative to the row norm) are discarded.
    """
    if new.shape[0] == 0:
        return new
    norms = np.linalg.norm(new, axis=1)
    keep = norms > 0
    new = new[keep] / norms[keep, None]
    if new.shape[0] == 0:
        return new
    x = new.T.copy()
    for _ in range(2):
        if existing.shape[0]:
            x -= existing.T @ (existing.conj() @ x)
    q, r, _ = sla.qr(x, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > drop))
    q = q[:, :rank]
    if existing.shape[0] and rank:
        q -= existing.T @ (existing.conj() @ q)
        q /= np.linalg.norm(q, axis=0)
    return q.T.copy()


class Subspace:
    """M = {x : <x, c> = 0 for every constraint c}, stored by its constraint frame."""

    def __init__(self, ambient_dim: int, constraints=None, tol: Tolerances = DEFAULT_TOL):
        if ambient_dim < 1:
            raise ValueError("ambient_dim must be positive")
        self.ambient_dim = int(ambient_dim)
        self.tol = tol
        if constraints is None:
            self.constraints = np.zeros((0, ambient_dim), dtype=np.complex128)
        else:
            c = np.asarray(constraints, dtype=np.complex128)
            if c.ndim == 1:
                c = c[None, :]
            if c.shape[1] != ambient_dim:
                raise DimensionError("constraint length differs from ambient_dim")
            self.constraints = _orthonormal_extension(
                np.zeros((0, ambient_dim), dtype=np.complex128), c, tol.drop
            )
        self.constraints.setflags(write=False)

    @classmethod
    def full(cls, n: int, tol: Tolerances = DEFAULT_TOL) -> "Subspace":
        return cls(n, None, tol)

    @property
    def codim(self) -> int:
        return self.constraints.shape[0]

    @property
    def dim(self) -> int:
        return self.ambient_dim - self.codim

    def with_constraints(self, vectors) -> "Subspace":
        """A new subspace with the extra vectors appended to the constraint frame."""
        v = np.asarray(vectors, dtype=np.complex128)
        if v.ndim == 1:
            v = v[None, :]
        if v.size == 0:
            return self
        if v.shape[1] != self.ambient_dim:
            raise DimensionError("constraint length differs from ambient_dim")
        ext = _orthonormal_extension(self.constraints, v, self.tol.drop)
        out = Subspace.__new__(Subspace)
        out.ambient_dim = self.ambient_dim
        out.tol = self.tol
        out.constraints = np.vstack([self.constraints, ext]) if ext.shape[0] else self.constraints
        out.constraints.setflags(write=False)
        return out

    def project(self, x) -> np.ndarray:
        x = as_cvector(x)
        if x.shape[0] != self.ambient_dim:
            raise DimensionError("vector length differs from ambient_dim")
        c = self.constraints
        if c.shape[0] == 0:
            return x.copy()
        y = x - c.T @ (c.conj() @ x)
        return y - c.T @ (c.conj() @ y)

    def violation(self, x) -> float:
        """max |<x, c>| over the constraint frame."""
        x = as_cvector(x)
        if self.codim == 0:
            return 0.0
        return float(np.max(np.abs(self.constraints.conj() @ x)))

    def basis(self, support=None, pullbacks=(), extra=None) -> np.ndarray:
        """Orthonormal columns spanning M ∩ span{e_i : i in support}.

        Each matrix A in ``pullbacks`` additionally imposes A x ∈ M, i.e. the
        search space becomes M ∩ A^{-1}M ∩ ... restricted to the support.
        """
        n = self.ambient_dim
        idx = np.arange(n) if support is None else np.asarray(sorted(set(int(i) for i in support)))
        c = self.constraints.conj()
        rows = [c[:, idx]]
        for a in pullbacks:
            rows.append(c @ np.asarray(a)[:, idx])
        if extra is not None and len(extra):
            rows.append(np.asarray(extra, dtype=np.complex128).conj()[:, idx])
        r = np.vstack(rows) if rows else np.zeros((0, idx.size), dtype=np.complex128)
        r = r[np.linalg.norm(r, axis=1) > self.tol.drop] if r.shape[0] else r
        if r.shape[0] == 0:
            local = np.eye(idx.size, dtype=np.complex128)
        else:
            local = sla.null_space(r, rcond=1e-11)
        out = np.zeros((n, local.shape[1]), dtype=np.complex128)
        out[idx, :] = local
        return out


def project_complement(M: Subspace, x) -> np.ndarray:
    """(I - P_span(constraints)) x, i.e. the orthogonal projection of x onto M."""
    return M.project(x)


def random_unit_in(M: Subspace, rng_seed: int, support=None) -> np.ndarray:
    if M.codim >= M.ambient_dim:
        raise TrivialSubspaceError("subspace is {0}")
    rng = np.random.default_rng(rng_seed)
    q = M.basis(support) if support is not None else None
    if q is not None:
        if q.shape[1] == 0:
            raise TrivialSubspaceError("subspace restricted to support is {0}")
        c = rng.standard_normal(q.shape[1]) + 1j * rng.standard_normal(q.shape[1])
        x = q @ c
    else:
        x = np.zeros(M.ambient_dim, dtype=np.complex128)
        while np.linalg.norm(x) < 1e-8:
            g = rng.standard_normal(M.ambient_dim) + 1j * rng.standard_normal(M.ambient_dim)
            x = M.project(g)
    return x / np.linalg.norm(x)


class OrthoFrame:
    """A growing orthonormal family, stored as columns of an N x m array."""

    def __init__(self, ambient_dim: int, tol: Tolerances = DEFAULT_TOL):
        self.ambient_dim = int(ambient_dim)
        self.tol = tol
        self._vecs: list[np.ndarray] = []
        self.gram_residual = 0.0

    def __len__(self) -> int:
        return len(self._vecs)

    @property
    def vectors(self) -> np.ndarray:
        if not self._vecs:
            return np.zeros((self.ambient_dim, 0), dtype=np.complex128)
        return np.column_stack(self._vecs)

    def __getitem__(self, i) -> np.ndarray:
        return self._vecs[i]

    @staticmethod
    def residual_of(u: np.ndarray) -> float:
        if u.shape[1] == 0:
            return 0.0
        g = u.conj().T @ u
        off = g - np.diag(np.diag(g))
        return float(max(np.max(np.abs(off)), np.max(np.abs(np.sqrt(np.abs(np.diag(g))) - 1.0))))

    def append(self, v, orthogonalize: bool = True) -> np.ndarray:
        """Append v. With ``orthogonalize`` the vector is run through modified
        Gram-Schmidt with one re-orthogonalization pass and normalized; without
        it the raw vector is checked. Raises FrameRejected if the frame would
        leave tolerance."""
        v = as_cvector(v).copy()
        if v.shape[0] != self.ambient_dim:
            raise DimensionError("vector length differs from ambient_dim")
        if orthogonalize:
            for _ in range(2):
                for u in self._vecs:
                    v -= np.vdot(u, v) * u
            nv = np.linalg.norm(v)
            if nv < self.tol.drop:
                raise FrameRejected("vector lies in the span of the frame")
            v /= nv
        cand = np.column_stack(self._vecs + [v])
        res = self.residual_of(cand)
        if res > self.tol.gram:
            raise FrameRejected(f"gram residual {res:.3e} exceeds {self.tol.gram:.1e}")
        self._vecs.append(v)
        self.gram_residual = res
        return v

    @classmethod
    def from_columns(cls, u: np.ndarray, tol: Tolerances = DEFAULT_TOL, check: bool = True) -> "OrthoFrame":
        f = cls(u.shape[0], tol)
        f._vecs = [np.asarray(u[:, i], dtype=np.complex128).copy() for i in range(u.shape[1])]
        f.gram_residual = cls.residual_of(np.asarray(u, dtype=np.complex128))
        if check and f.gram_residual > tol.gram:
            raise FrameRejected(f"gram residual {f.gram_residual:.3e} exceeds {tol.gram:.1e}")
        return f


def extreme_hermitian_eigenpair(a, tol: Tolerances = DEFAULT_TOL) -> tuple[float, np.ndarray]:
    """Largest eigenvalue of a Hermitian matrix and a unit eigenvector."""
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError("matrix must be square")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if np.max(np.abs(a - a.conj().T), initial=0.0) > tol.herm * scale:
        raise ValueError("matrix is not Hermitian")
    h = (a + a.conj().T) / 2
    w, v = np.linalg.eigh(h)
    return float(w[-1]), v[:, -1]
