"""Inductive constructions of partial orthonormal families u_1..u_m with
prescribed entries <T_t u_j, u_n>, plus the completeness-ladder bookkeeping.

Every u_n is assembled from *pieces* (the helper vectors w_n, b_n, v, z of
the constructions), each owned by one index n. A new piece is made
orthogonal to every existing piece, and ⊥^(𝒯) to the pieces whose owners it
is *related* to. Two relation policies exist:

``strict``
    every pair of owners is related (the plain inductive scheme);
``pattern``
    owners a, c are related when (a, c) or (c, a) is a prescribed cell
    (including a = c when the diagonal is prescribed).

The pattern policy is what keeps the full-matrix construction inside a few
hundred ambient dimensions. Coupling vectors z are not searched for; their
constraints are projected out of them directly.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from basisforge.config import DEFAULT_TOL, Tolerances
from basisforge.constructors import (
    ConstructionError,
    DegenerateRangeError,
    DimensionBudgetError,
    MarginTooSmall,
    _residual_direction,
    build_pair_single,
    build_pair_tuple,
    family_order,
)
from basisforge.hilbert import OrthoFrame, TrivialSubspaceError
from basisforge.numrange import (
    SolveOptions,
    SolverError,
    diam,
    essential_body,
    find_state,
    margin,
)
from basisforge.operators import OperatorTuple, as_tuple, quadratic_form
from basisforge.patterns import (
    HorizonExhausted,
    Pattern,
    TargetArray,
    check_budgets,
    density_pattern_from_f,
    is_admissible_prefix,
    skip_sequence_upto,
)

MODES = ("sparse", "sparse-zero-diag", "density", "subdiagonal", "full")


class BuildError(RuntimeError):
    """An inductive step failed after all restarts.

    ``stage`` names the step; ``frame`` holds the vectors finished so far."""

    def __init__(self, msg, stage="", frame=None):
        super().__init__(f"[{stage}] {msg}" if stage else msg)
        self.stage = stage
        self.frame = frame


class BudgetViolated(BuildError):
    """alpha_n^2 < 0: the entry budget delta is too large for the helper norms."""


class AdmissibilityError(ValueError):
    pass


# ---------------------------------------------------------------------------
# parameters and reports


@dataclass
class BuildParams:
    """Knobs of the constructions. ``None`` means "use the mode's default".

    eta : ladder absorption weight
    delta : bound on row/column sums of the targets
    eps : margin of the diagonal targets (full mode)
    C : lower bound for diam W_e(T) (subdiagonal mode)
    rho : explicit ladder perturbation sizes rho_1, rho_2, ...
    relation : "strict" or "pattern" (see module docstring)
    restarts : fresh-seed retries of a failing step
    """

    m: int = 20
    eta: float | None = None
    delta: float | None = None
    eps: float | None = None
    C: float | None = None
    rho: tuple | None = None
    tol: Tolerances = DEFAULT_TOL
    dim: int | None = None
    seed: int = 0
    relation: str | None = None
    restarts: int = 3
    check_budget: bool = True

    def rho_at(self, s: int, l: int, eta: float) -> float:
        if self.rho is not None:
            return float(self.rho[s - 1])
        return default_rho(s, l, eta)


def default_rho(s: int, l: int, eta: float) -> float:
    """min(2^{-s-1}, 0.9 * largest rho allowed by the ladder inequality at l)."""
    cap = 2.0 ** (-s - 1)
    if l < 2:
        return cap
    bar = (1 - eta / 2) ** ((l - 1) / 2) / math.sqrt(1 - eta) - (1 - eta / 2) ** ((l - 2) / 2)
    return min(cap, 0.9 * bar)


def ladder_ok(rho: float, l: int, eta: float) -> bool:
    """((1-eta/2)^{(l-2)/2} + rho)^2 (1-eta) <= (1-eta/2)^{l-1}."""
    if l < 2:
        return True
    return ((1 - eta / 2) ** ((l - 2) / 2) + rho) ** 2 * (1 - eta) <= (1 - eta / 2) ** (l - 1)


def split_stage(s: int) -> tuple[int, int]:
    """s = 2^r (2l - 1) -> (r, l)."""
    r = (s & -s).bit_length() - 1
    return r, ((s >> r) + 1) // 2


@dataclass
class BuildReport:
    mode: str
    m: int
    N: int
    k: int
    gram_residual: float = float("nan")
    entry_residual_max: float = float("nan")
    entry_argmax: tuple | None = None
    diag_residual_max: float = 0.0
    stage_residuals: list = field(default_factory=list)
    ladder: list = field(default_factory=list)
    ladder_steps: float = 0.0
    budget: int = 0
    wall_time: float = 0.0
    seed: int = 0
    scales: tuple | None = None
    records: dict = field(default_factory=dict)
    state: object = field(default=None, repr=False)

    def as_dict(self) -> dict:
        out = {k: v for k, v in self.__dict__.items() if k != "state"}
        out["entry_argmax"] = list(self.entry_argmax) if self.entry_argmax else None
        return out


@dataclass
class BuildState:
    """Everything the inductive construction keeps between steps."""

    frame: OrthoFrame
    skips: list
    alpha: dict = field(default_factory=dict)
    w: dict = field(default_factory=dict)
    b: dict = field(default_factory=dict)
    pairs: dict = field(default_factory=dict)
    lam: dict = field(default_factory=dict)
    x: dict = field(default_factory=dict)
    y: dict = field(default_factory=dict)


def budget(mode: str, tup, B: Pattern | None, m: int) -> int:
    """Recommended minimal ambient dimension for a build of m vectors."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    k = as_tuple(tup).k
    B = B if B is not None else Pattern.explicit([])
    cells = B.cells(m)
    if mode == "subdiagonal":
        helpers = 2 * sum(1 for n, j in cells if n > j)
    elif mode == "full":
        helpers = 4 * k * len(cells)
    else:
        helpers = 0
    skips = len(skip_sequence_upto(B, m)) if cells or mode != "density" else 1
    return m + helpers + skips + 8 * k


def _phase(a: complex) -> complex:
    return a / abs(a) if abs(a) > 0 else 1.0


# ---------------------------------------------------------------------------
# piece store and search spaces


ROW_FLOOR = 1e-14


def _live_rows(rows: np.ndarray) -> np.ndarray:
    """Rows that carry a constraint; images that vanish up to roundoff impose none."""
    if rows.shape[0] == 0:
        return rows
    return rows[np.linalg.norm(rows, axis=1) > ROW_FLOOR]


def _complement(rows: np.ndarray, n: int) -> np.ndarray:
    """Orthonormal columns spanning the vectors orthogonal to every row."""
    rows = _live_rows(rows)
    if rows.shape[0] == 0:
        return np.eye(n, dtype=np.complex128)
    rows = rows / np.linalg.norm(rows, axis=1)[:, None]
    q, r, _ = sla.qr(rows.T, mode="full", pivoting=True)
    rank = int(np.sum(np.abs(np.diag(r)) > 1e-11))
    return q[:, rank:]


class PieceStore:
    """Constructed helper vectors with their owners and cached images."""

    def __init__(self, tup: OperatorTuple, related):
        self.tup = tup
        self.related = related
        self.vecs: list = []
        self.images: list = []
        self.owners: list = []
        self.kinds: list = []
        self.plain: list = []

    def __len__(self):
        return len(self.vecs)

    def add(self, vec, owner: int, kind: str):
        vec = np.asarray(vec, dtype=np.complex128)
        imgs = [m @ vec for m in self.tup.matrices] + [m @ vec for m in self.tup.adjoints]
        self.vecs.append(vec)
        self.images.append(np.vstack(imgs))
        self.owners.append(int(owner))
        self.kinds.append(kind)

    def add_plain(self, vec):
        """A vector every later piece must be orthogonal to (ladder vectors)."""
        self.plain.append(np.asarray(vec, dtype=np.complex128))

    def rows(self, owner: int, extra=()) -> np.ndarray:
        """Constraint rows for a new piece owned by ``owner``.

        ``extra`` lists (vector, with_images) items added on top."""
        out = []
        for vec, img, c in zip(self.vecs, self.images, self.owners):
            out.append(vec[None, :])
            if self.related(owner, c):
                out.append(img)
        out.extend(p[None, :] for p in self.plain)
        for vec, with_images in extra:
            vec = np.asarray(vec, dtype=np.complex128)
            out.append(vec[None, :])
            if with_images:
                out.extend((m @ vec)[None, :] for m in self.tup.matrices + self.tup.adjoints)
        if not out:
            return np.zeros((0, self.tup.dim), dtype=np.complex128)
        return np.vstack(out)

    def violation(self, vec, owner: int) -> float:
        """Largest relative violation of the owner's constraints by ``vec``."""
        r = _live_rows(self.rows(owner))
        if r.shape[0] == 0:
            return 0.0
        nr = np.linalg.norm(r, axis=1)
        return float(np.max(np.abs(r.conj() @ vec) / nr) / max(np.linalg.norm(vec), 1e-300))


class _Space:
    """Search space for one piece: an orthonormal basis q0 of the admissible
    vectors, refined on demand by extra orthogonality rows."""

    def __init__(self, q0: np.ndarray):
        self.q0 = q0

    @property
    def dim(self) -> int:
        return self.q0.shape[1]

    def __call__(self, extra=None) -> np.ndarray:
        if extra is None or len(extra) == 0:
            return self.q0
        local = np.atleast_2d(extra) @ self.q0.conj()
        return self.q0 @ _complement(local, self.dim)


class _Engine:
    """Shared machinery: piece store, solver calls with restarts, pair builders."""

    def __init__(self, tup: OperatorTuple, related, params: BuildParams, mode: str):
        self.tup = tup
        self.N = tup.dim
        self.params = params
        self.tol = params.tol
        self.mode = mode
        self.store = PieceStore(tup, related)
        self.rng = np.random.default_rng(params.seed)
        self.calls = 0

    def space(self, owner: int, extra=()) -> _Space:
        return _Space(_complement(self.store.rows(owner, extra), self.N))

    def _seed(self) -> int:
        self.calls += 1
        return int(self.params.seed * 1_000_003 + self.calls)

    def retry(self, stage: str, fn, frame=None):
        """Run fn(seed) with up to ``restarts`` fresh seeds."""
        last = None
        for _ in range(self.params.restarts + 1):
            try:
                return fn(self._seed())
            except (SolverError, ConstructionError, TrivialSubspaceError) as exc:
                last = exc
        raise BuildError(f"step failed after {self.params.restarts} restarts: {last}", stage, frame)

    def unit(self, owner: int, extra=(), stage="unit", frame=None) -> np.ndarray:
        """Random unit vector meeting the owner's constraints."""

        def go(seed):
            sp = self.space(owner, extra)
            if sp.dim == 0:
                raise TrivialSubspaceError("no admissible directions left")
            g = np.random.default_rng(seed)
            c = g.standard_normal(sp.dim) + 1j * g.standard_normal(sp.dim)
            x = sp.q0 @ c
            return x / np.linalg.norm(x)

        x = self.retry(stage, go, frame)
        self._check(x, owner, extra, stage, frame)
        return x

    def state(self, owner: int, target, extra=(), stage="state", frame=None) -> np.ndarray:
        """Unit vector meeting the owner's constraints with <𝒯x, x> = target."""
        target = np.atleast_1d(np.asarray(target, dtype=np.complex128))

        def go(seed):
            sp = self.space(owner, extra)
            if sp.dim == 0:
                raise TrivialSubspaceError("no admissible directions left")
            x, _ = find_state(self.tup, sp.q0, target, SolveOptions(tol_lambda=self.tol.lam, seed=seed))
            return x

        x = self.retry(stage, go, frame)
        self._check(x, owner, extra, stage, frame)
        return x

    def _check(self, x, owner, extra, stage, frame):
        rows = _live_rows(self.store.rows(owner, extra))
        if rows.shape[0]:
            nr = np.linalg.norm(rows, axis=1)
            viol = float(np.max(np.abs(rows.conj() @ x) / nr))
            if viol > self.tol.gram:
                raise BuildError(f"constraint violation {viol:.3e}", stage, frame)

    def residual_unit(self, y, basis_vectors) -> tuple[np.ndarray, float]:
        """Normalized (I - P) y for P the projection onto span(basis_vectors)."""
        if basis_vectors:
            r = _residual_direction(y, basis_vectors)
        else:
            r = np.array(y, dtype=np.complex128)
        nr = float(np.linalg.norm(r))
        return (r / nr if nr > 0 else r), nr


# ---------------------------------------------------------------------------
# common preparation and reporting


def _prepare(tup, B: Pattern, m: int, params: BuildParams, mode: str) -> tuple[OperatorTuple, list]:
    tup = as_tuple(tup)
    if params.dim is not None and params.dim != tup.dim:
        raise ValueError(f"params.dim = {params.dim} but the operators act on C^{tup.dim}")
    if m < 1:
        raise ValueError("m must be >= 1")
    need = budget(mode, tup, B, m)
    if params.check_budget and tup.dim < need:
        raise DimensionBudgetError(f"N = {tup.dim} is below the budget {need} for mode {mode!r}")
    try:
        ok, bad = is_admissible_prefix(B, m)
    except HorizonExhausted:  # undecided beyond the horizon; the skips up to m are all we use
        ok, bad = True, None
    if not ok:
        raise AdmissibilityError(f"pattern has no skip index after {bad}")
    return tup, skip_sequence_upto(B, m).values


def _unit_y(N: int, r: int) -> np.ndarray:
    y = np.zeros(N, dtype=np.complex128)
    y[r % N] = 1.0
    return y


def _dist2(y, u: np.ndarray) -> float:
    if u.shape[1] == 0:
        return float(np.vdot(y, y).real)
    q = sla.orth(u)
    r = y - q @ (q.conj().T @ y)
    return float(np.vdot(r, r).real)


def _finish(report: BuildReport, tup, frame_u, B, targets, diag, tol, t0):
    from basisforge.verify import verify

    vr = verify(tup, frame_u, B, targets, diag=diag, tol=tol, mode=report.mode)
    report.gram_residual = vr.gram
    report.entry_residual_max = vr.entry_max
    report.entry_argmax = tuple(vr.entry_argmax) if vr.entry_argmax else None
    report.diag_residual_max = vr.diag_max
    report.wall_time = time.perf_counter() - t0
    return report


# ---------------------------------------------------------------------------
# zero prescriptions


def _build_zero(tup, B: Pattern, m: int, params: BuildParams, zero_diag: bool, mode: str):
    t0 = time.perf_counter()
    tup, skips = _prepare(tup, B, m, params, mode)
    N = tup.dim
    work = tup
    eta = None
    if zero_diag:
        if any(op.norm > 1 + 1e-12 for op in tup.ops):
            work = tup.normalized()  # zero targets are unchanged by rescaling
        try:
            body = essential_body(work)
        except Exception as exc:  # degenerate descriptors
            raise MarginTooSmall(f"cannot evaluate the essential range: {exc}") from exc
        mg = margin(body, np.zeros(work.k)).margin
        if mg <= 0:
            raise MarginTooSmall(f"0 is not interior to the essential range (margin {mg:.4g})")
        eta = params.eta if params.eta is not None else (0.5 * mg) / (1 + 0.5 * mg)
        if not 0 < eta < 1:
            raise ValueError("eta must lie in (0, 1)")
        if mg <= eta / (1 - eta):
            raise MarginTooSmall(f"margin of 0 is {mg:.4g}; needs > eta/(1-eta) = {eta / (1 - eta):.4g}")
    eng = _Engine(work, lambda a, c: True, params, mode)
    frame = OrthoFrame(N, params.tol)
    state = BuildState(frame, skips)
    report = BuildReport(mode, m, N, tup.k, budget=budget(mode, tup, B, m), seed=params.seed, scales=work.scales)
    zero = np.zeros(work.k)

    def new_vector(n, extra):
        if zero_diag:
            return eng.state(n, zero, extra, stage=f"u_{n}", frame=frame)
        return eng.unit(n, extra, stage=f"u_{n}", frame=frame)

    def ystage(s):
        if zero_diag:
            r, l = split_stage(s)
            return r, l, _unit_y(N, r)
        return s - 1, 1, _unit_y(N, s - 1)

    kinds = {}
    bounds = []
    n, s = 1, 1
    while n <= m:
        nxt = skips[s - 1] if s <= len(skips) else m + 1
        r, l, y = ystage(s)
        while n < nxt and n <= m:  # vectors between skips
            u = new_vector(n, [(y, True)])
            frame.append(u, orthogonalize=False)
            eng.store.add(u, n, "u")
            kinds[n] = "between"
            n += 1
        if n > m:
            break
        # skip index n = n_s
        prev = frame.vectors[:, : skips[s - 2]] if s >= 2 else np.zeros((N, 0), dtype=np.complex128)
        b, nr = eng.residual_unit(y, list(prev.T))
        if nr < 1e-8:
            u = new_vector(n, [])
            kinds[n] = "skip-absorbed"
        elif zero_diag:
            qb = quadratic_form(work, b)
            v = eng.state(n, -eta / (1 - eta) * qb, [(b, True)], stage=f"v_{n}", frame=frame)
            u = math.sqrt(1 - eta) * v + math.sqrt(eta) * b
            state.b[n] = b
            kinds[n] = "skip"
        else:
            u = b
            kinds[n] = "skip"
        frame.append(u, orthogonalize=False)
        eng.store.add(u, n, "u")
        state.y[(r, l)] = y
        bounds.append((r, l, s, n, y, (1 - eta) ** l if zero_diag else 0.0))
        n += 1
        s += 1

    u_all = frame.vectors
    for r, l, s_, n_s, y, bound in bounds:
        report.ladder.append(
            {"r": r, "l": l, "s": s_, "n": n_s, "bound": bound, "observed": _dist2(y, u_all[:, :n_s])}
        )
    report.records = {"kinds": kinds, "eta": eta}
    report.state = state
    return frame, _finish(report, tup, u_all, B, None, zero_diag, params.tol, t0)


def build_sparse(tup, B: Pattern, m: int, params: BuildParams | None = None):
    """u_1..u_m orthonormal with <T_t u_j, u_n> = 0 on B for every t.

    Between skip indices u_n is a random unit vector ⊥^(𝒯) all predecessors
    and the current ladder vector; at a skip index it is the normalized
    residual of the ladder vector."""
    params = params or BuildParams(m=m)
    return _build_zero(tup, B, m, params, False, "sparse")


def build_sparse_zero_diag(tup, B: Pattern, m: int, params: BuildParams | None = None):
    """As ``build_sparse`` with additionally <𝒯u_n, u_n> = 0 for all n <= m.

    Needs 0 strictly inside the essential range with margin > eta/(1-eta),
    measured after rescaling the tuple to ||T_t|| <= 1."""
    params = params or BuildParams(m=m)
    return _build_zero(tup, B, m, params, True, "sparse-zero-diag")


def build_density(tup, f, m: int, params: BuildParams | None = None, include_diag: bool = True):
    """Frame whose leading m' x m' corners have at most f(m') nonzero cells
    (m' + f(m') when ``include_diag`` is False).

    Returns (frame, report, pattern)."""
    params = params or BuildParams(m=m)
    horizon = 4 * max(m, 4)
    if f(horizon) <= f(1):
        raise ValueError("f must be nondecreasing and tend to infinity")
    B, _ = density_pattern_from_f(f, horizon)
    if include_diag:
        frame, report = build_sparse_zero_diag(tup, B, m, params)
        bound = lambda p: f(p)  # noqa: E731
    else:
        frame, report = build_sparse(tup, B, m, params)
        bound = lambda p: p + f(p)  # noqa: E731
    from basisforge.verify import census

    counts = census(tup, frame.vectors, params.tol.zero)
    report.mode = "density"
    report.records["census"] = counts
    report.records["census_bound"] = [bound(p) for p in range(1, m + 1)]
    report.records["nk"] = list(B.nk)
    return frame, report, B


# ---------------------------------------------------------------------------
# prescribed entries


class _Assembly:
    """u_n as a growing sum of (coefficient, piece) terms tagged by stage."""

    def __init__(self, N: int):
        self.N = N
        self.parts: dict = {}

    def add(self, n: int, coef, vec, stage: int):
        self.parts.setdefault(n, []).append((complex(coef), vec, stage))

    def partial(self, n: int, s: int) -> np.ndarray:
        out = np.zeros(self.N, dtype=np.complex128)
        for c, v, st in self.parts.get(n, ()):
            if st <= s:
                out += c * v
        return out

    def final(self, n: int) -> np.ndarray:
        return self.partial(n, 1 << 60)


def _relation(kind: str, B: Pattern, diag: bool):
    if kind == "strict":
        return lambda a, c: True
    if kind == "pattern":
        return lambda a, c: (a == c and diag) or (a != c and (B.contains(a, c) or B.contains(c, a)))
    raise ValueError(f"unknown relation {kind!r}")


def _stages(skips: list, m: int):
    """(s, lo, hi, is_skip) with the last stage truncated at m."""
    prev = 0
    for s, n in enumerate(skips, start=1):
        yield s, prev + 1, n, True
        prev = n
    if prev < m:
        yield len(skips) + 1, prev + 1, m, False


def _ladder_step(eng: _Engine, asm: _Assembly, s: int, prev_skip: int, ystate: dict, eta: float, params, report):
    """Advance y_{r(s), l(s)} against L_{s-1} and return the unit residual."""
    N = eng.N
    r, l = split_stage(s)
    y_prev = ystate.get(r, _unit_y(N, r))
    L = [asm.partial(j, s - 1) for j in range(1, prev_skip + 1)]
    _, nr = eng.residual_unit(y_prev, L)
    y, step = y_prev, 0.0
    if nr < 1e-8:  # y already absorbed: move it off L by less than rho_s
        rho = params.rho_at(s, l, eta)
        g = np.random.default_rng(eng._seed())
        e, _ = eng.residual_unit(g.standard_normal(N) + 1j * g.standard_normal(N), L)
        y = y_prev + 0.5 * rho * e
        y = y / max(1.0, float(np.linalg.norm(y)))
        step = float(np.linalg.norm(y - y_prev))
    ystate[r] = y
    report.ladder_steps += step
    b, _ = eng.residual_unit(y, L)
    return r, l, y, b


def _ladder_rows(report: BuildReport, recs: list, u: np.ndarray):
    for r, l, s, n_s, y, bound in recs:
        report.ladder.append({"r": r, "l": l, "s": s, "n": n_s, "bound": bound, "observed": _dist2(y, u[:, :n_s])})


def _stage_check(asm: _Assembly, hi: int, expected) -> tuple[float, float]:
    """(norm-identity residual, orthogonality residual) of u_{1,s}..u_{hi,s}."""
    if hi == 0:
        return 0.0, 0.0
    s = asm._stage_now
    vs = np.column_stack([asm.partial(n, s) for n in range(1, hi + 1)])
    g = vs.conj().T @ vs
    d = np.real(np.diag(g))
    norm_res = float(np.max(np.abs(d - np.array([expected(n) for n in range(1, hi + 1)]))))
    off = g - np.diag(np.diag(g))
    return norm_res, float(np.max(np.abs(off))) if hi > 1 else 0.0


def build_subdiagonal(T, B: Pattern, targets: TargetArray, m: int, params: BuildParams | None = None):
    """u_1..u_m with <T u_j, u_n> = a_nj on the subdiagonal pattern B.

    u_n = alpha_n w_n + sum_j beta_jn v_jn + sum_i gamma_ni z_ni + b_n with
    one coupling pair (v_ni, z_ni), ||v_ni||^2 = 2 sqrt(2)/C, per cell."""
    t0 = time.perf_counter()
    params = params or BuildParams(m=m)
    tup = as_tuple(T)
    if tup.k != 1:
        raise ValueError("subdiagonal mode takes a single operator")
    if any(n <= j for n, j in B.cells(m)):
        raise ValueError("pattern must be subdiagonal (n > j on every cell)")
    op = tup.ops[0]
    body = essential_body(op)
    d = diam(body)
    if d < 1e-9:
        raise DegenerateRangeError("essential numerical range is a single point")
    C = params.C if params.C is not None else 0.9 * d
    if not 0 < C < d:
        raise ValueError(f"need 0 < C < diam W_e(T) = {d:.6g}")
    tup, skips = _prepare(tup, B, m, params, "subdiagonal")
    delta = params.delta if params.delta is not None else 0.9 * C / (4 * math.sqrt(2))
    if not 0 < delta < C / (4 * math.sqrt(2)):
        raise ValueError("need 0 < delta < C / (4 sqrt 2)")
    tg = targets.restricted(B, m)
    ok, worst = check_budgets(tg, delta)
    if not ok:
        raise ValueError(f"target sums exceed delta: {worst}")
    eta_max = 1 - 4 * delta * math.sqrt(2) / C
    eta = params.eta if params.eta is not None else 0.9 * eta_max
    if not 0 < eta < eta_max:
        raise ValueError(f"need 0 < eta < {eta_max:.6g}")

    N = tup.dim
    eng = _Engine(tup, _relation(params.relation or "strict", B, False), params, "subdiagonal")
    asm = _Assembly(N)
    frame = OrthoFrame(N, params.tol)
    state = BuildState(frame, skips)
    report = BuildReport("subdiagonal", m, N, 1, budget=budget("subdiagonal", tup, B, m), seed=params.seed)
    vn2 = 2 * math.sqrt(2) / C
    a = {c: complex(tg.get(*c)[0]) for c in B.cells(m)}
    ystate, recs, zmax = {}, [], 0.0

    def owed(n, hi):  # sum over j > hi of |a_jn| 2 sqrt 2 / C
        return sum(abs(v) for (j, i), v in a.items() if i == n and j > hi) * vn2

    prev = 0
    for s, lo, hi, is_skip in _stages(skips, m):
        asm._stage_now = s
        if is_skip:  # (A)
            r, l, y, bu = _ladder_step(eng, asm, s, prev, ystate, eta, params, report)
            b = math.sqrt(eta) * bu
            state.b[hi], state.y[(r, l)] = b, y
            eng.store.add(b, hi, "b")
            eng.store.add_plain(y)
            asm.add(hi, 1.0, b, s)
            state.x[hi] = b.copy()
            recs.append((r, l, s, hi, y, (1 - eta / 2) ** (l - 1)))
        for n in range(lo, hi + 1):  # (B)
            state.x.setdefault(n, np.zeros(N, dtype=np.complex128))
            for i in range(1, n):
                if (n, i) not in a or a[(n, i)] == 0:
                    continue
                tag = f"pair ({n},{i})"

                def go(seed, n=n, i=i):
                    sp = eng.space(i)
                    return build_pair_single(
                        op, None, C, seed=seed, tol=params.tol, body=body, space=sp, avoid=eng.store.rows(n)
                    )

                p = eng.retry(tag, go, frame)
                sc = math.sqrt(vn2) / np.linalg.norm(p.v)
                v, z = p.v * sc, p.z / sc
                zmax = max(zmax, float(np.linalg.norm(z)))
                eng.store.add(v, i, "v")
                eng.store.add(z, n, "z")
                av = a[(n, i)]
                beta, gamma = abs(av) ** 0.5 * _phase(av), abs(av) ** 0.5
                asm.add(i, beta, v, s)
                asm.add(n, gamma, z, s)
                state.x[n] = state.x[n] + gamma * z
                state.pairs[(n, i)] = (v, z, beta, gamma)
        for n in range(lo, hi + 1):  # (C)
            w = eng.unit(n, stage=f"w_{n}", frame=frame)
            eng.store.add(w, n, "w")
            state.w[n] = w
        for n in range(lo, hi + 1):  # (D)
            xn = state.x[n]
            a2 = 1 - owed(n, n) - float(np.vdot(xn, xn).real)
            if a2 < 0:
                raise BudgetViolated(f"alpha_{n}^2 = {a2:.4g} < 0; delta too large", f"alpha_{n}", frame)
            state.alpha[n] = math.sqrt(a2)
            asm.add(n, state.alpha[n], state.w[n], s)
        nres, ores = _stage_check(asm, hi, lambda n: 1 - owed(n, hi))
        report.stage_residuals.append({"s": s, "n_s": hi, "norm": nres, "orth": ores})
        prev = hi

    u = np.column_stack([asm.final(n) for n in range(1, m + 1)])
    frame = state.frame = OrthoFrame.from_columns(u, params.tol, check=False)
    _ladder_rows(report, recs, u)
    report.records = {"C": C, "delta": delta, "eta": eta, "alpha": dict(state.alpha), "z_norm_max": zmax}
    report.state = state
    return frame, _finish(report, tup, u, B, tg, False, params.tol, t0)


def lambda_update(a_nn, q_x, x_norm2: float) -> np.ndarray:
    """lambda_n = (a_nn - <𝒯x_n, x_n>) / (1 - ||x_n||^2)."""
    if not x_norm2 < 1:
        raise ValueError("||x_n||^2 must be < 1")
    return (np.asarray(a_nn, dtype=np.complex128) - np.asarray(q_x, dtype=np.complex128)) / (1 - x_norm2)


def build_full(tup, B: Pattern, targets: TargetArray, m: int, params: BuildParams | None = None):
    """u_1..u_m with <𝒯u_j, u_n> = a_nj on B and on the diagonal.

    Each cell (n, i), n > i, of the symmetric pattern gets a coupling family
    (v, z, vt, zt) per component; w_n carries the shifted diagonal value
    lambda_n. The tuple is rescaled to ||T_t|| <= 1 with the targets, and the
    final entries are checked against the original tuple."""
    t0 = time.perf_counter()
    params = params or BuildParams(m=m)
    orig = as_tuple(tup)
    k = orig.k
    if any(not B.contains(j, n) for n, j in B.cells(m)):
        raise ValueError("pattern must be symmetric")
    if params.eps is None or params.eps <= 0:
        raise ValueError("full mode needs eps > 0")
    eps = params.eps
    orig, skips = _prepare(orig, B, m, params, "full")
    delta = params.delta if params.delta is not None else 0.9 * eps**1.5 / (18 * k)
    if not 0 < delta < eps**1.5 / (18 * k):
        raise ValueError("need 0 < delta < eps^(3/2) / (18 k)")
    eta = params.eta if params.eta is not None else delta
    if not 0 < eta <= delta:
        raise ValueError("need 0 < eta <= delta")
    tg0 = targets.restricted(B, m)
    ok, worst = check_budgets(tg0, delta)
    if not ok:
        raise ValueError(f"target sums exceed delta: {worst}")

    work = orig.normalized() if any(op.norm > 1 + 1e-12 for op in orig.ops) else orig
    sc = np.asarray(work.scales, dtype=float)
    tg = TargetArray(
        k,
        {c: v / sc for c, v in tg0.entries.items()},
        {n: tg0.get(n, n) / sc for n in range(1, m + 1)},
    )
    body = essential_body(work)
    for n in range(1, m + 1):
        mg = margin(body, tg.get(n, n)).margin
        if mg <= eps:
            raise MarginTooSmall(f"diagonal target a_{n}{n} has margin {mg:.4g} <= eps = {eps}")

    N = orig.dim
    eng = _Engine(work, _relation(params.relation or "pattern", B, True), params, "full")
    asm = _Assembly(N)
    frame = OrthoFrame(N, params.tol)
    state = BuildState(frame, skips)
    report = BuildReport("full", m, N, k, budget=budget("full", orig, B, m), seed=params.seed, scales=work.scales)
    vnorm = 2 / eps**0.75
    coef = 4 / eps**1.5
    ystate, recs = {}, []
    zmax, lam_margin, xbound = 0.0, {}, {}

    def owed(n, hi):  # sum over j > hi, j <= m of (|a_jn| + |a_nj|) 4 / eps^(3/2), summed over components
        tot = 0.0
        for j in range(max(hi, n) + 1, m + 1):
            if B.contains(j, n):
                tot += float(np.sum(np.abs(tg.get(j, n))) + np.sum(np.abs(tg.get(n, j))))
        return tot * coef

    prev = 0
    for s, lo, hi, is_skip in _stages(skips, m):
        asm._stage_now = s
        if is_skip:  # (A)
            r, l, y, bu = _ladder_step(eng, asm, s, prev, ystate, eta, params, report)
            b = math.sqrt(eta) * bu
            state.b[hi], state.y[(r, l)] = b, y
            eng.store.add(b, hi, "b")
            eng.store.add_plain(y)
            asm.add(hi, 1.0, b, s)
            state.x[hi] = b.copy()
            recs.append((r, l, s, hi, y, (1 - eta / 2) ** (l - 1)))
        for n in range(lo, hi + 1):  # (B)
            state.x.setdefault(n, np.zeros(N, dtype=np.complex128))
            for i in range(1, n):
                if not B.contains(n, i):
                    continue
                lam_i = state.lam[i]
                shifted = work.shifted(lam_i)
                leps = min(eps, 0.9 * margin(body, lam_i).margin)
                a_ni, a_in = tg.get(n, i), tg.get(i, n)
                for j, star in family_order(k):
                    a_c = a_in[j] if star else a_ni[j]
                    if a_c == 0:
                        continue
                    rt = shifted.rotated(j, star)
                    tag = f"family ({n},{i}) t={j + 1}{'*' if star else ''}"

                    def go(seed, rt=rt, n=n, i=i):
                        sp = eng.space(i)
                        return build_pair_tuple(
                            rt, None, leps, seed=seed, tol=params.tol, check_margin=False,
                            space=sp, avoid=eng.store.rows(n),
                        )

                    p = eng.retry(tag, go, frame)
                    f = vnorm / np.linalg.norm(p.v)
                    v, z = p.v * f, p.z / f
                    zmax = max(zmax, float(np.linalg.norm(z)))
                    eng.store.add(v, i, "vt" if star else "v")
                    eng.store.add(z, n, "zt" if star else "z")
                    ph = np.conj(_phase(a_c)) if star else _phase(a_c)
                    beta, gamma = abs(a_c) ** 0.5 * ph, abs(a_c) ** 0.5
                    asm.add(i, beta, v, s)
                    asm.add(n, gamma, z, s)
                    state.x[n] = state.x[n] + gamma * z
                    state.pairs[(n, i, j + 1, star)] = (v, z, beta, gamma)
            xn = state.x[n]
            xn2 = float(np.vdot(xn, xn).real)
            xbound[n] = xn2
            state.lam[n] = lambda_update(tg.get(n, n), quadratic_form(work, xn), xn2)
            lam_margin[n] = margin(body, state.lam[n]).margin
            if lam_margin[n] <= 0:
                raise BuildError(f"lambda_{n} left the essential range", f"lambda_{n}", frame)
        for n in range(lo, hi + 1):  # (C)
            w = eng.state(n, state.lam[n], stage=f"w_{n}", frame=frame)
            eng.store.add(w, n, "w")
            state.w[n] = w
        for n in range(lo, hi + 1):  # (D)
            a2 = 1 - owed(n, n) - xbound[n]
            if a2 < 0:
                raise BudgetViolated(f"alpha_{n}^2 = {a2:.4g} < 0; delta too large", f"alpha_{n}", frame)
            state.alpha[n] = math.sqrt(a2)
            asm.add(n, state.alpha[n], state.w[n], s)
        nres, ores = _stage_check(asm, hi, lambda n: 1 - owed(n, hi))
        report.stage_residuals.append({"s": s, "n_s": hi, "norm": nres, "orth": ores})
        prev = hi

    u = np.column_stack([asm.final(n) for n in range(1, m + 1)])
    frame = state.frame = OrthoFrame.from_columns(u, params.tol, check=False)
    _ladder_rows(report, recs, u)
    report.records = {
        "eps": eps,
        "delta": delta,
        "eta": eta,
        "alpha": dict(state.alpha),
        "lambda": {n: state.lam[n].tolist() for n in state.lam},
        "lambda_margin": lam_margin,
        "lambda_shift": {n: float(np.max(np.abs(state.lam[n] - tg.get(n, n)))) for n in state.lam},
        "x_norm2": xbound,
        "x_norm2_bound": (2 * k + 1) * delta,
        "z_norm_max": zmax,
    }
    report.state = state
    return frame, _finish(report, orig, u, B, tg0, True, params.tol, t0)
