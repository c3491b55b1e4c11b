"""Index patterns B ⊂ (N x N) minus the diagonal, skip sequences, density and
target arrays. Indices are 1-based throughout, as in the matrix picture."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np


class HorizonExhausted(RuntimeError):
    """The question could not be decided within the pattern's horizon."""


KINDS = ("explicit", "banded", "paper_example", "lower_triangle", "density_cross", "predicate")


@dataclass(frozen=True)
class Pattern:
    """Membership predicate for an off-diagonal index set.

    kind : one of ``KINDS``
    m : band width for ``banded``
    pairs : cell set for ``explicit``
    nk : cross indices n_1 < n_2 < ... for ``density_cross``
    fn : callable (n, j) -> bool for ``predicate``
    lower_only : restrict a band to n > j
    symmetric : close the set under (n, j) -> (j, n)
    m_max : horizon used by searches over consecutive candidates
    """

    kind: str
    m: int = 0
    pairs: frozenset = frozenset()
    nk: tuple = ()
    fn: Callable | None = None
    lower_only: bool = False
    symmetric: bool = False
    m_max: int = 4096

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown pattern kind {self.kind!r}")
        if self.kind == "explicit":
            pairs = frozenset((int(n), int(j)) for n, j in self.pairs)
            if any(n == j for n, j in pairs):
                raise ValueError("patterns may not contain diagonal cells")
            if any(n < 1 or j < 1 for n, j in pairs):
                raise ValueError("indices are 1-based")
            object.__setattr__(self, "pairs", pairs)
        if self.kind == "banded" and self.m < 1:
            raise ValueError("band width must be >= 1")

    # constructors -----------------------------------------------------
    @classmethod
    def explicit(cls, pairs, **kw) -> "Pattern":
        return cls("explicit", pairs=frozenset(map(tuple, pairs)), **kw)

    @classmethod
    def banded(cls, m: int, lower_only: bool = False, **kw) -> "Pattern":
        return cls("banded", m=m, lower_only=lower_only, **kw)

    @classmethod
    def paper_example(cls, **kw) -> "Pattern":
        """{(n, j) : n > j} minus the cells (2^k, j) with j <= k."""
        return cls("paper_example", **kw)

    @classmethod
    def lower_triangle(cls, **kw) -> "Pattern":
        return cls("lower_triangle", **kw)

    @classmethod
    def density_cross(cls, nk, **kw) -> "Pattern":
        """Everything off the diagonal except the cells (n_k, j), (j, n_k), j <= k."""
        nk = tuple(int(x) for x in nk)
        if any(b <= a for a, b in zip(nk, nk[1:])):
            raise ValueError("n_k must be increasing")
        return cls("density_cross", nk=nk, **kw)

    @classmethod
    def predicate(cls, fn, **kw) -> "Pattern":
        return cls("predicate", fn=fn, **kw)

    # membership -------------------------------------------------------
    def _base(self, n: int, j: int) -> bool:
        if self.kind == "explicit":
            return (n, j) in self.pairs
        if self.kind == "banded":
            d = n - j
            return 1 <= (d if self.lower_only else abs(d)) <= self.m
        if self.kind == "lower_triangle":
            return n > j
        if self.kind == "paper_example":
            if n <= j:
                return False
            if n & (n - 1) == 0:  # n = 2^k
                return j > n.bit_length() - 1
            return True
        if self.kind == "density_cross":
            k = _cross_rank(self.nk, n)
            if k is not None and j <= k:
                return False
            k = _cross_rank(self.nk, j)
            if k is not None and n <= k:
                return False
            return True
        return bool(self.fn(n, j))

    def contains(self, n: int, j: int) -> bool:
        n, j = int(n), int(j)
        if n == j or n < 1 or j < 1:
            return False
        if self.symmetric:
            return self._base(n, j) or self._base(j, n)
        return self._base(n, j)

    __call__ = contains

    def cells(self, m: int) -> list[tuple[int, int]]:
        """All cells (n, j) of the pattern with n, j <= m."""
        return [(n, j) for n in range(1, m + 1) for j in range(1, m + 1) if self.contains(n, j)]

    def neighbours(self, n: int, m: int) -> set[int]:
        """Indices j <= m with (n, j) or (j, n) in the pattern."""
        return {j for j in range(1, m + 1) if self.contains(n, j) or self.contains(j, n)}

    def symmetrized(self) -> "Pattern":
        if self.symmetric:
            return self
        return Pattern(self.kind, self.m, self.pairs, self.nk, self.fn, self.lower_only, True, self.m_max)

    # candidate skips ---------------------------------------------------
    def skip_candidates(self, after: int) -> Iterator[int] | None:
        """Increasing candidates n > after that can possibly be skip indices.

        ``None`` means no index beyond ``after`` can ever qualify."""
        if self.kind == "lower_triangle":
            return None
        if self.kind == "paper_example":
            start = max(after + 1, 1)
            k = max(0, (start - 1).bit_length())
            return (1 << e for e in itertools.count(k) if (1 << e) > after)
        if self.kind == "density_cross":
            return (n for n in self.nk if n > after)
        return itertools.count(after + 1)

    @property
    def finite_support(self) -> int | None:
        """Largest index used by a finite explicit pattern."""
        if self.kind == "explicit":
            return max((max(c) for c in self.pairs), default=0)
        return None


def symmetrize(B: Pattern) -> Pattern:
    return B.symmetrized()


def _cross_rank(nk: tuple, n: int) -> int | None:
    """k with n = n_k (1-based), if any."""
    lo, hi = 0, len(nk)
    while lo < hi:
        mid = (lo + hi) // 2
        if nk[mid] < n:
            lo = mid + 1
        else:
            hi = mid
    if lo < len(nk) and nk[lo] == n:
        return lo + 1
    return None


def _clear_of(B: Pattern, n: int, m: int) -> bool:
    """(n, j) and (j, n) are outside B for every j <= m."""
    return not any(B.contains(n, j) or B.contains(j, n) for j in range(1, m + 1))


def _next_clear(B: Pattern, m: int, after: int, horizon: int | None) -> int | None:
    cand = B.skip_candidates(after)
    if cand is None:
        return None
    fs = B.finite_support
    for n in cand:
        if B.kind in ("explicit", "banded", "predicate") and horizon is not None and n > horizon:
            raise HorizonExhausted(f"no clear index up to horizon {horizon}")
        if B.kind == "density_cross" and n > 10**15:
            break
        if _clear_of(B, n, m):
            return n
        if fs is not None and n > fs:
            return n
    if B.kind == "density_cross":
        raise HorizonExhausted("cross indices exhausted")
    return None


def is_admissible_prefix(B: Pattern, m_max: int) -> tuple[bool, int | None]:
    """True if every m <= m_max has some n > m with (n, j), (j, n) ∉ B for all j <= m.

    Returns (ok, first failing m). Raises HorizonExhausted when the search
    over consecutive candidates passes ``B.m_max`` undecided.
    """
    for m in range(1, m_max + 1):
        horizon = None if B.kind not in ("explicit", "banded", "predicate") else max(B.m_max, m + 1)
        n = _next_clear(B, m, m, horizon)
        if n is None:
            return False, m
    return True, None


@dataclass
class SkipSequence:
    """n_1 = 1 < n_2 < ... ; n_0 = 0 is implicit."""

    values: list = field(default_factory=list)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, s: int) -> int:
        """1-based access; s = 0 gives the sentinel 0."""
        return 0 if s == 0 else self.values[s - 1]

    def upto(self, m: int) -> list[int]:
        return [n for n in self.values if n <= m]

    def index_of(self, n: int) -> int | None:
        try:
            return self.values.index(n) + 1
        except ValueError:
            return None


def compute_skip_sequence(B: Pattern, count: int) -> SkipSequence:
    """First ``count`` skip indices, each minimal given its predecessor."""
    vals = [1]
    while len(vals) < count:
        n = _next_clear(B, vals[-1], vals[-1], max(B.m_max, vals[-1] + 1))
        if n is None:
            raise HorizonExhausted("pattern is not admissible")
        vals.append(n)
    return SkipSequence(vals[:count])


def skip_sequence_upto(B: Pattern, m: int) -> SkipSequence:
    """All skip indices <= m (computed without a horizon cap below m)."""
    vals = [1]
    while True:
        cand = B.skip_candidates(vals[-1])
        if cand is None:
            break
        nxt = None
        for n in cand:
            if n > m:
                break
            if _clear_of(B, n, vals[-1]):
                nxt = n
                break
        if nxt is None:
            break
        vals.append(nxt)
    return SkipSequence([v for v in vals if v <= m])


def skip_sequence_minimal(B: Pattern, seq: SkipSequence) -> bool:
    """Each n_s (s >= 2) is clear of its predecessor and no smaller index is."""
    for s in range(2, len(seq) + 1):
        prev, n = seq[s - 1], seq[s]
        if not _clear_of(B, n, prev):
            return False
        if any(_clear_of(B, c, prev) for c in range(prev + 1, n)):
            return False
    return True


# ---------------------------------------------------------------------------
# density


def density(obj, N: int, zero_tol: float = 1e-9) -> float:
    """Fraction of cells (n, j), n, j <= N, that are in the set or nonzero."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if isinstance(obj, Pattern):
        return len(obj.cells(N)) / N**2
    if isinstance(obj, (set, frozenset, list)) and (len(obj) == 0 or isinstance(next(iter(obj)), tuple)):
        return sum(1 for n, j in obj if n <= N and j <= N) / N**2
    a = np.asarray(obj)
    if a.ndim == 3:  # (k, m, m) tuple of matrices: entry is nonzero if any component is
        a = np.max(np.abs(a), axis=0)
    a = np.abs(a[:N, :N])
    return float(np.count_nonzero(a > zero_tol)) / N**2


def nonzero_census(entries, m: int, zero_tol: float = 1e-9) -> int:
    """card{(n, j) : n, j <= m, |entry| > zero_tol}; ``entries`` is (k, M, M) or (M, M)."""
    a = np.asarray(entries)
    if a.ndim == 3:
        a = np.max(np.abs(a), axis=0)
    return int(np.count_nonzero(np.abs(a[:m, :m]) > zero_tol))


def density_pattern_from_f(f: Callable[[int], int], m_max: int) -> tuple[Pattern, SkipSequence]:
    """Cross-complement pattern with n_k = min{m : f(m) >= (k+1)^2} (kept increasing).

    f is replaced by its lower envelope min_{j in [m, m_max]} f(j) so that it is
    nondecreasing on the horizon.
    """
    vals = np.array([f(m) for m in range(1, m_max + 1)], dtype=float)
    env = np.minimum.accumulate(vals[::-1])[::-1]
    if env[-1] < 4:
        raise ValueError("f does not reach 4 on the horizon; it must tend to infinity")
    nk = []
    k = 1
    while True:
        hit = np.nonzero(env >= (k + 1) ** 2)[0]
        if hit.size == 0:
            break
        n = int(hit[0]) + 1
        if nk and n <= nk[-1]:
            n = nk[-1] + 1
        if n > m_max:
            break
        nk.append(n)
        k += 1
    B = Pattern.density_cross(nk, m_max=m_max)
    return B, skip_sequence_upto(B, m_max)


def excluded_count(B: Pattern, m: int) -> int:
    """card{(n, j) : n, j <= m, n != j, (n, j) ∉ B}."""
    return sum(1 for n in range(1, m + 1) for j in range(1, m + 1) if n != j and not B.contains(n, j))


# ---------------------------------------------------------------------------
# targets


@dataclass
class TargetArray:
    """Prescribed values a_nj ∈ C^k on off-diagonal cells and a_nn on the diagonal."""

    k: int
    entries: dict = field(default_factory=dict)
    diag: dict = field(default_factory=dict)
    delta: float | None = None

    def __post_init__(self):
        self.entries = {(int(n), int(j)): self._vec(v) for (n, j), v in self.entries.items()}
        self.diag = {int(n): self._vec(v) for n, v in self.diag.items()}
        if any(n == j for n, j in self.entries):
            raise ValueError("diagonal values go in `diag`")

    def _vec(self, v) -> np.ndarray:
        v = np.atleast_1d(np.asarray(v, dtype=np.complex128))
        if v.shape != (self.k,):
            raise ValueError(f"target value must have {self.k} components")
        return v

    def get(self, n: int, j: int) -> np.ndarray:
        if n == j:
            return self.diag.get(n, np.zeros(self.k, dtype=np.complex128))
        return self.entries.get((n, j), np.zeros(self.k, dtype=np.complex128))

    def set(self, n: int, j: int, value):
        if n == j:
            self.diag[int(n)] = self._vec(value)
        else:
            self.entries[(int(n), int(j))] = self._vec(value)

    def row_sum(self, n: int) -> float:
        return float(sum(np.max(np.abs(v)) for (a, _), v in self.entries.items() if a == n))

    def col_sum(self, j: int) -> float:
        return float(sum(np.max(np.abs(v)) for (_, b), v in self.entries.items() if b == j))

    @property
    def row_sums(self) -> dict:
        out: dict = {}
        for (n, _), v in self.entries.items():
            out[n] = out.get(n, 0.0) + float(np.max(np.abs(v)))
        return out

    @property
    def col_sums(self) -> dict:
        out: dict = {}
        for (_, j), v in self.entries.items():
            out[j] = out.get(j, 0.0) + float(np.max(np.abs(v)))
        return out

    def restricted(self, B: Pattern, m: int) -> "TargetArray":
        """Entries on cells of B with n, j <= m (others are dropped)."""
        ent = {c: v for c, v in self.entries.items() if c[0] <= m and c[1] <= m and B.contains(*c)}
        dg = {n: v for n, v in self.diag.items() if n <= m}
        return TargetArray(self.k, ent, dg, self.delta)

    @classmethod
    def constant(cls, B: Pattern, m: int, value, k: int = 1, diag=None) -> "TargetArray":
        ent = {c: np.full(k, value, dtype=np.complex128) for c in B.cells(m)}
        dg = {} if diag is None else {n: np.full(k, diag, dtype=np.complex128) for n in range(1, m + 1)}
        return cls(k, ent, dg)


def check_budgets(targets: TargetArray, delta: float) -> tuple[bool, tuple | None]:
    """Every row and column sum of ||a_nj||_inf over off-diagonal cells is <= delta.

    Returns (ok, worst) with worst = ("row" | "col", index, sum) for the largest sum."""
    worst = None
    for side, sums in (("row", targets.row_sums), ("col", targets.col_sums)):
        for idx, val in sums.items():
            if worst is None or val > worst[2]:
                worst = (side, idx, val)
    ok = worst is None or worst[2] <= delta
    return ok, worst
