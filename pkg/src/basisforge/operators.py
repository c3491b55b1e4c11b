"""Model operators, operator tuples and their essential-range descriptors."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from basisforge.hilbert import DimensionError, Subspace, as_cvector


class DescriptorError(ValueError):
    pass


@dataclass(frozen=True)
class EssentialDescriptor:
    """Analytic model of the essential spectrum / essential numerical range.

    kind is one of ``disk``, ``segment``, ``point_set``, ``circle``, ``union``,
    ``compression_proxy`` or ``unknown``. For a single operator the convex hull
    of :meth:`sample` is the model of W_e(T).
    """

    kind: str
    center: complex = 0j
    radius: float = 0.0
    a: complex = 0j
    b: complex = 0j
    points: tuple = ()
    parts: tuple = ()
    p: int = 0

    def __post_init__(self):
        if self.kind not in {"disk", "segment", "point_set", "circle", "union", "compression_proxy", "unknown"}:
            raise DescriptorError(f"unknown descriptor kind {self.kind!r}")
        if self.radius < 0 or not np.isfinite(self.radius):
            raise DescriptorError("radius must be finite and nonnegative")
        for z in (self.center, self.a, self.b, *self.points):
            if not np.isfinite(complex(z)):
                raise DescriptorError("descriptor parameters must be finite")

    @classmethod
    def disk(cls, center, radius):
        return cls("disk", center=complex(center), radius=float(radius))

    @classmethod
    def segment(cls, a, b):
        return cls("segment", a=complex(a), b=complex(b))

    @classmethod
    def point_set(cls, pts):
        return cls("point_set", points=tuple(complex(z) for z in pts))

    @classmethod
    def circle(cls, radius, center=0j):
        return cls("circle", center=complex(center), radius=float(radius))

    @classmethod
    def union(cls, parts):
        return cls("union", parts=tuple(parts))

    @classmethod
    def compression_proxy(cls, p):
        return cls("compression_proxy", p=int(p))

    @property
    def analytic(self) -> bool:
        if self.kind == "union":
            return all(d.analytic for d in self.parts)
        return self.kind not in ("compression_proxy", "unknown")

    def sample(self, n: int = 256) -> np.ndarray:
        """Points of the descriptor set (boundary suffices for hulls)."""
        theta = 2 * np.pi * np.arange(n) / n
        if self.kind in ("disk", "circle"):
            return self.center + self.radius * np.exp(1j * theta)
        if self.kind == "segment":
            return self.a + (self.b - self.a) * np.linspace(0.0, 1.0, max(n // 4, 2))
        if self.kind == "point_set":
            return np.array(self.points, dtype=np.complex128)
        if self.kind == "union":
            return np.concatenate([d.sample(n) for d in self.parts])
        raise DescriptorError(f"descriptor {self.kind!r} has no analytic sample")

    def conj(self) -> "EssentialDescriptor":
        if self.kind in ("disk", "circle"):
            return EssentialDescriptor(self.kind, center=np.conj(self.center), radius=self.radius)
        if self.kind == "segment":
            return EssentialDescriptor.segment(np.conj(self.a), np.conj(self.b))
        if self.kind == "point_set":
            return EssentialDescriptor.point_set(np.conj(self.points))
        if self.kind == "union":
            return EssentialDescriptor.union(d.conj() for d in self.parts)
        return self


@dataclass(frozen=True, eq=False)
class ModelOperator:
    dim: int
    matrix: np.ndarray
    descriptor: EssentialDescriptor
    # coordinate blocks (start, length) on which the operator acts locally
    blocks: tuple | None = None
    name: str = "dense"

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.complex128)
        if m.shape != (self.dim, self.dim):
            raise DimensionError(f"matrix shape {m.shape} does not match dim {self.dim}")
        if not np.all(np.isfinite(m)):
            raise ValueError("matrix must be finite")
        object.__setattr__(self, "matrix", m)

    def adjoint(self) -> "ModelOperator":
        return ModelOperator(self.dim, self.matrix.conj().T, self.descriptor.conj(), self.blocks, self.name + "*")

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))


@dataclass(frozen=True, eq=False)
class OperatorTuple:
    ops: tuple
    # for power / inverse-power tuples: the base operator and the exponent of each entry
    base: ModelOperator | None = None
    exponents: tuple | None = None
    blocks: tuple | None = None
    scales: tuple | None = field(default=None)

    def __post_init__(self):
        ops = tuple(self.ops)
        if not ops:
            raise ValueError("an operator tuple needs at least one operator")
        dims = {op.dim for op in ops}
        if len(dims) != 1:
            raise DimensionError("all operators in a tuple must share the ambient dimension")
        object.__setattr__(self, "ops", ops)
        if self.exponents is not None and len(self.exponents) != len(ops):
            raise ValueError("exponent list length differs from tuple length")
        if self.blocks is None:
            object.__setattr__(self, "blocks", ops[0].blocks)
        if self.scales is None:
            object.__setattr__(self, "scales", (1.0,) * len(ops))

    @classmethod
    def of(cls, *ops) -> "OperatorTuple":
        return cls(tuple(ops))

    @property
    def k(self) -> int:
        return len(self.ops)

    @property
    def dim(self) -> int:
        return self.ops[0].dim

    @property
    def matrices(self) -> list:
        return [op.matrix for op in self.ops]

    @property
    def adjoints(self) -> list:
        return [op.matrix.conj().T for op in self.ops]

    def shifted(self, lam) -> "OperatorTuple":
        """The tuple T - lam (componentwise T_t - lam_t I)."""
        lam = np.broadcast_to(np.asarray(lam, dtype=np.complex128), (self.k,))
        eye = np.eye(self.dim)
        ops = tuple(
            ModelOperator(op.dim, op.matrix - l * eye, op.descriptor, op.blocks, op.name) for op, l in zip(self.ops, lam)
        )
        return OperatorTuple(ops, blocks=self.blocks)

    def rotated(self, j: int, star: bool = False) -> "OperatorTuple":
        """(T_j, ..., T_k, T_1, ..., T_{j-1}) with the leading entry optionally replaced by its adjoint."""
        order = list(range(j, self.k)) + list(range(j))
        ops = [self.ops[i] for i in order]
        if star:
            ops[0] = ops[0].adjoint()
        return OperatorTuple(tuple(ops), blocks=self.blocks)

    def normalized(self) -> "OperatorTuple":
        """Each component divided by its operator norm; ``scales`` records the norms."""
        norms = [max(op.norm, 1e-300) for op in self.ops]
        ops = tuple(
            ModelOperator(op.dim, op.matrix / c, op.descriptor, op.blocks, op.name) for op, c in zip(self.ops, norms)
        )
        return OperatorTuple(ops, self.base, self.exponents, self.blocks, tuple(norms))


def _bilateral_block(n: int) -> np.ndarray:
    c = np.zeros((n, n), dtype=np.complex128)
    c[(np.arange(n) + 1) % n, np.arange(n)] = 1.0
    return c


def make_shift(n: int) -> ModelOperator:
    """Truncated unilateral shift e_j -> e_{j+1}, e_N -> 0."""
    if n < 2:
        raise ValueError("shift needs N >= 2")
    s = np.zeros((n, n), dtype=np.complex128)
    s[np.arange(1, n), np.arange(n - 1)] = 1.0
    return ModelOperator(n, s, EssentialDescriptor.disk(0, 1), ((0, n),), "shift")


def _radius_clusters(values: np.ndarray, rtol: float = 1e-12):
    mods = np.sort(np.abs(values))
    radii = [mods[0]]
    for m in mods[1:]:
        if abs(m - radii[-1]) > rtol * max(1.0, m):
            radii.append(m)
    return radii


def make_diagonal(values) -> ModelOperator:
    v = as_cvector(values)
    if v.size == 0:
        raise ValueError("diagonal needs at least one value")
    distinct = np.unique(np.round(v, 14))
    radii = _radius_clusters(distinct)
    desc = None
    if distinct.size >= 8 and len(radii) <= 2 and radii[0] > 0:
        # values spread over one or two circles
        per = [np.sum(np.isclose(np.abs(distinct), r, rtol=1e-12)) for r in radii]
        if min(per) >= 4:
            circles = [EssentialDescriptor.circle(r) for r in radii]
            desc = circles[0] if len(circles) == 1 else EssentialDescriptor.union(circles)
    if desc is None:
        desc = EssentialDescriptor.point_set(distinct)
    return ModelOperator(v.size, np.diag(v), desc, ((0, v.size),), "diagonal")


def make_two_circle(r: float, s: float, n: int) -> ModelOperator:
    """r*C ⊕ s*C with C the cyclic (bilateral) shift on N/2 coordinates."""
    if not (0 < r < s):
        raise ValueError("two_circle needs 0 < r < s")
    if n < 4 or n % 2:
        raise ValueError("two_circle needs an even N >= 4")
    h = n // 2
    m = np.zeros((n, n), dtype=np.complex128)
    c = _bilateral_block(h)
    m[:h, :h] = r * c
    m[h:, h:] = s * c
    desc = EssentialDescriptor.union([EssentialDescriptor.circle(r), EssentialDescriptor.circle(s)])
    return ModelOperator(n, m, desc, ((0, h), (h, h)), "two_circle")


def make_dense(matrix, descriptor: EssentialDescriptor | None = None, blocks=None) -> ModelOperator:
    m = np.asarray(matrix, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError("dense operator needs a square matrix")
    return ModelOperator(m.shape[0], m, descriptor or EssentialDescriptor("unknown"), blocks, "dense")


def make_power_tuple(t: ModelOperator, k: int) -> OperatorTuple:
    if k < 1:
        raise ValueError("k must be >= 1")
    ops, p = [], np.eye(t.dim, dtype=np.complex128)
    for e in range(1, k + 1):
        p = p @ t.matrix
        ops.append(ModelOperator(t.dim, p.copy(), t.descriptor, t.blocks, f"{t.name}^{e}"))
    return OperatorTuple(tuple(ops), t, tuple(range(1, k + 1)))


class SingularOperatorError(ValueError):
    pass


def make_inverse_power_tuple(t: ModelOperator, k: int, cond_cap: float = 1e6) -> OperatorTuple:
    """(T^-k, ..., T^-1, T, ..., T^k); the inverse comes from one LU factorization."""
    if k < 1:
        raise ValueError("k must be >= 1")
    cond = np.linalg.cond(t.matrix)
    if not np.isfinite(cond) or cond > cond_cap:
        raise SingularOperatorError(f"operator is singular or ill-conditioned (cond={cond:.3e})")
    lu = sla.lu_factor(t.matrix)
    inv = sla.lu_solve(lu, np.eye(t.dim, dtype=np.complex128))
    neg, pos = [], []
    p, q = np.eye(t.dim, dtype=np.complex128), np.eye(t.dim, dtype=np.complex128)
    for e in range(1, k + 1):
        p = p @ t.matrix
        q = q @ inv
        pos.append(ModelOperator(t.dim, p.copy(), t.descriptor, t.blocks, f"{t.name}^{e}"))
        neg.append(ModelOperator(t.dim, q.copy(), t.descriptor, t.blocks, f"{t.name}^-{e}"))
    ops = tuple(reversed(neg)) + tuple(pos)
    exps = tuple(range(-k, 0)) + tuple(range(1, k + 1))
    return OperatorTuple(ops, t, exps)


def as_tuple(op_or_tuple) -> OperatorTuple:
    if isinstance(op_or_tuple, OperatorTuple):
        return op_or_tuple
    if isinstance(op_or_tuple, ModelOperator):
        return OperatorTuple((op_or_tuple,), op_or_tuple, (1,))
    raise TypeError("expected a ModelOperator or OperatorTuple")


def perp_vectors(tup: OperatorTuple, vs) -> np.ndarray:
    """Rows {v, T_t v, T_t^* v : v in vs, t <= k}."""
    rows = []
    for v in vs:
        v = as_cvector(v)
        if v.shape[0] != tup.dim:
            raise DimensionError("vector length differs from tuple dimension")
        rows.append(v)
        for m in tup.matrices:
            rows.append(m @ v)
        for m in tup.adjoints:
            rows.append(m @ v)
    if not rows:
        return np.zeros((0, tup.dim), dtype=np.complex128)
    return np.vstack(rows)


def perp_constraints(tup, vs, base: Subspace | None = None) -> Subspace:
    """Subspace of x with x ⊥ v, T_t v, T_t^* v for every v in vs (optionally inside ``base``)."""
    tup = as_tuple(tup)
    base = base if base is not None else Subspace.full(tup.dim)
    return base.with_constraints(perp_vectors(tup, vs))


def quadratic_form(tup, x) -> np.ndarray:
    """(<T_1 x, x>, ..., <T_k x, x>) without normalization."""
    tup = as_tuple(tup)
    x = as_cvector(x)
    if x.shape[0] != tup.dim:
        raise DimensionError("vector length differs from tuple dimension")
    return np.array([np.vdot(x, m @ x) for m in tup.matrices], dtype=np.complex128)
