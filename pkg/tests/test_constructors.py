import math

import numpy as np
import pytest

from basisforge.constructors import (
    CouplingPair,
    DegenerateRangeError,
    MarginTooSmall,
    build_family,
    build_pair_single,
    build_pair_tuple,
    family_order,
    rescale_pair,
)
from basisforge.hilbert import Subspace
from basisforge.operators import (
    make_diagonal,
    make_power_tuple,
    make_shift,
    perp_constraints,
    perp_vectors,
    quadratic_form,
)


def alternating(n):
    return make_diagonal([i % 2 for i in range(n)])


def test_single_pair_full_space():
    n, C = 200, 0.9
    T = alternating(n)
    p = build_pair_single(T, Subspace.full(n), C)
    assert abs(np.vdot(p.z, T.matrix @ p.v) - 1) <= 1e-9
    assert abs(np.vdot(p.z, p.v)) <= 1e-10
    assert np.isclose(np.linalg.norm(p.v), 1)
    assert p.product <= 2 * math.sqrt(2) / C + 1e-8


def test_single_pair_under_perp_constraints():
    n, C = 200, 0.9
    T = alternating(n)
    M = perp_constraints(T, list(np.eye(n, dtype=complex)[:10]))
    p = build_pair_single(T, M, C, seed=4)
    assert abs(np.vdot(p.z, T.matrix @ p.v) - 1) <= 1e-9
    assert M.violation(p.v) <= 1e-10 and M.violation(p.z) <= 1e-10
    assert p.product <= 2 * math.sqrt(2) / C + 1e-8


def test_single_pair_degenerate_identity():
    with pytest.raises(DegenerateRangeError):
        build_pair_single(make_diagonal(np.ones(20)), Subspace.full(20), 0.5)


def test_tuple_pair_shift():
    n, eps = 120, 0.5
    S = make_shift(n)
    p = build_pair_tuple(S, Subspace.full(n), eps)
    assert np.isclose(np.linalg.norm(p.v), 1)
    assert np.linalg.norm(p.z) <= 2 / eps + 1e-8
    assert abs(np.vdot(p.z, S.matrix @ p.v) - 1) <= 1e-9
    assert abs(quadratic_form(S, p.v)[0]) <= 1e-9


def test_tuple_pair_power_tuple_decouples_other_components():
    n, eps = 200, 0.2
    tup = make_power_tuple(make_shift(n), 2)
    p = build_pair_tuple(tup, Subspace.full(n), eps)
    s, s2 = tup.matrices
    assert abs(np.vdot(p.z, s @ p.v) - 1) <= 1e-9
    assert abs(np.vdot(p.z, s.conj().T @ p.v)) <= 1e-9
    assert abs(np.vdot(p.z, s2 @ p.v)) <= 1e-9
    assert abs(np.vdot(p.z, s2.conj().T @ p.v)) <= 1e-9
    # z lies in span{T_t v, T_t^* v}
    span = perp_vectors(tup, [p.v]).T
    coef, *_ = np.linalg.lstsq(span, p.z, rcond=None)
    assert np.linalg.norm(span @ coef - p.z) <= 1e-9


def test_rotated_tuple_moves_coupling():
    n, eps = 200, 0.2
    tup = make_power_tuple(make_shift(n), 2)
    p = build_pair_tuple(tup.rotated(1), Subspace.full(n), eps, check_margin=False)
    s, s2 = tup.matrices
    assert abs(np.vdot(p.z, s2 @ p.v) - 1) <= 1e-9
    assert abs(np.vdot(p.z, s @ p.v)) <= 1e-9


def test_tuple_pair_margin_check():
    with pytest.raises(MarginTooSmall):
        build_pair_tuple(make_shift(40), Subspace.full(40), 1.5)


def _all_table(fam, tup):
    mats = tup.matrices + tup.adjoints
    k = tup.k
    worst = 0.0
    for j in range(k):
        for v, z, idx in ((fam.v[j], fam.z[j], j), (fam.vt[j], fam.zt[j], k + j)):
            for i, B in enumerate(mats):
                val = np.vdot(z, B @ v)
                worst = max(worst, abs(val - 1) if i == idx else abs(val))
    return worst


def test_family_k1():
    n = 160
    S = make_power_tuple(make_shift(n), 1)
    fam = build_family(S, Subspace.full(n), [0], 0.5)
    assert _all_table(fam, S) <= 1e-9
    assert abs(np.vdot(fam.z[0], S.matrices[0] @ fam.v[0]) - 1) <= 1e-9
    assert abs(np.vdot(fam.zt[0], S.adjoints[0] @ fam.vt[0]) - 1) <= 1e-9


def test_family_nonzero_lambda_form_values():
    n = 300
    tup = make_power_tuple(make_shift(n), 2)
    lam = np.array([0.1 + 0.05j, 0.02])
    fam = build_family(tup, Subspace.full(n), lam, 0.2, seed=2)
    for v in list(fam.v) + list(fam.vt):
        assert np.max(np.abs(quadratic_form(tup, v) - lam * np.vdot(v, v).real)) <= 1e-9
    # different blocks are mutually ⊥^(𝒯)
    for a in (fam.v[0], fam.z[0], fam.vt[0], fam.zt[0]):
        M = perp_constraints(tup, [a])
        for b in (fam.v[1], fam.z[1], fam.vt[1], fam.zt[1]):
            assert M.violation(b) <= 1e-9 * max(1, np.linalg.norm(b))


def test_family_equals_sequential_pairs():
    n, eps = 200, 0.2
    tup = make_power_tuple(make_shift(n), 2)
    fam = build_family(tup, Subspace.full(n), np.zeros(2), eps, seed=0)
    shifted = tup.shifted(np.zeros(2))
    cur = Subspace.full(n)
    pairs = []
    for step, (j, star) in enumerate(family_order(2)):
        p = build_pair_tuple(shifted.rotated(j, star), cur, eps, seed=8 * step, check_margin=False)
        pairs.append(p)
        cur = cur.with_constraints(perp_vectors(shifted, [p.v, p.z]))
    assert np.allclose(pairs[0].v, fam.v[0], atol=1e-12)
    assert np.allclose(pairs[1].z, fam.zt[0], atol=1e-12)
    assert np.allclose(pairs[2].v, fam.v[1], atol=1e-12)
    assert np.allclose(pairs[3].z, fam.zt[1], atol=1e-12)


def test_rescale_pair():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((5, 5))
    v = rng.standard_normal(5) + 0j
    z = rng.standard_normal(5) + 0j
    p = CouplingPair(v, z, 10.0)
    same = rescale_pair(p, 1.0)
    assert np.array_equal(same.v, v) and np.array_equal(same.z, z)
    q = rescale_pair(p, 2.0)
    assert np.isclose(np.linalg.norm(q.v), 2 * np.linalg.norm(v))
    assert np.isclose(np.linalg.norm(q.z), np.linalg.norm(z) / 2)
    assert np.isclose(np.vdot(q.z, A @ q.v), np.vdot(z, A @ v))
    assert np.isclose(q.product, p.product)
    with pytest.raises(ValueError):
        rescale_pair(p, 0)


def test_rescale_to_fixed_helper_norm():
    n, eps = 120, 0.25
    p = build_pair_tuple(make_shift(n), Subspace.full(n), eps)
    target = 2 / eps**0.75
    q = rescale_pair(p, target / np.linalg.norm(p.v))
    assert np.isclose(np.linalg.norm(q.v), 5.656854, atol=1e-6)
    # ||z|| <= 2/eps before rescaling, so after: ||z|| <= (2/eps) / (2/eps^{3/4}) = eps^{-1/4}
    assert np.linalg.norm(q.z) <= eps**-0.25 + 1e-8
