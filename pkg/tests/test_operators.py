import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from basisforge.hilbert import DimensionError
from basisforge.numrange import boundary_single
from basisforge.operators import (
    EssentialDescriptor,
    SingularOperatorError,
    as_tuple,
    make_dense,
    make_diagonal,
    make_inverse_power_tuple,
    make_power_tuple,
    make_shift,
    make_two_circle,
    perp_constraints,
    quadratic_form,
)


def e(i, n):
    x = np.zeros(n, dtype=complex)
    x[i] = 1
    return x


def test_shift_small():
    s = make_shift(2)
    assert np.array_equal(s.matrix, np.array([[0, 0], [1, 0]]))
    assert s.descriptor == EssentialDescriptor.disk(0, 1)
    assert np.vdot(e(1, 5), make_shift(5).matrix @ e(0, 5)) == 1


@pytest.mark.parametrize("n", [4, 10, 30])
def test_shift_numerical_radius(n):
    body = boundary_single(make_shift(n), 512)
    r = np.max(np.abs(body.complex_samples))
    assert abs(r - np.cos(np.pi / (n + 1))) < 1e-9


def test_diagonal_descriptors():
    d = make_diagonal([i % 2 for i in range(10)])
    assert d.descriptor.kind == "point_set" and set(d.descriptor.points) == {0, 1}
    c = make_diagonal([3 + 1j] * 6)
    assert c.descriptor.points == (3 + 1j,)
    w = np.exp(2j * np.pi * np.arange(8) / 8)
    two = make_diagonal(np.concatenate([0.5 * w, 2 * w]))
    assert two.descriptor.kind == "union"
    assert np.allclose(sorted(p.radius for p in two.descriptor.parts), [0.5, 2.0])


def test_two_circle():
    t = make_two_circle(0.5, 2, 8)
    assert np.isclose(t.norm, 2)
    assert np.isclose(np.linalg.norm(np.linalg.inv(t.matrix), 2), 2)
    mods = np.abs(np.linalg.eigvals(t.matrix))
    assert np.all(np.isclose(mods, 0.5) | np.isclose(mods, 2))
    with pytest.raises(ValueError):
        make_two_circle(1, 1, 8)
    with pytest.raises(ValueError):
        make_two_circle(0.5, 2, 7)


def test_power_tuple():
    s = make_shift(6)
    assert make_power_tuple(s, 1).k == 1
    t = make_power_tuple(s, 2)
    assert np.vdot(e(2, 6), t.matrices[1] @ e(0, 6)) == 1
    d = np.array([1, 2, 3j])
    p = make_power_tuple(make_diagonal(d), 3)
    for i, m in enumerate(p.matrices, start=1):
        assert np.allclose(m, np.diag(d**i))
    assert p.exponents == (1, 2, 3)


def test_inverse_power_tuple():
    t = make_inverse_power_tuple(make_two_circle(0.5, 2, 8), 1)
    assert t.k == 2 and t.exponents == (-1, 1)
    assert np.allclose(t.matrices[0] @ t.matrices[1], np.eye(8))
    u = make_inverse_power_tuple(make_two_circle(0.5, 2, 16), 3)
    n = 16
    for j in range(3):
        prod = u.matrices[2 - j] @ u.matrices[3 + j]
        assert np.max(np.abs(prod - np.eye(n))) <= 1e6 * np.finfo(float).eps * n
    cyc = make_dense(np.roll(np.eye(5), 1, axis=0))
    for m in make_inverse_power_tuple(cyc, 2).matrices:
        assert np.allclose(m.conj().T @ m, np.eye(5))
    with pytest.raises(SingularOperatorError):
        make_inverse_power_tuple(make_shift(6), 1)


def test_adjoint_involution():
    a = make_dense(np.random.default_rng(0).standard_normal((5, 5)) + 1j)
    assert np.array_equal(a.adjoint().adjoint().matrix, a.matrix)


def test_perp_constraints():
    n = 10
    s = make_shift(n)
    assert perp_constraints(s, []).codim == 0
    v = np.random.default_rng(1).standard_normal(n) + 0j
    assert perp_constraints(s, [v]).codim <= 3


@given(st.integers(0, 10**6))
def test_perp_symmetric(seed):
    n = 8
    rng = np.random.default_rng(seed)
    tup = make_power_tuple(make_dense(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))), 2)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    M = perp_constraints(tup, [v])
    u = M.project(rng.standard_normal(n) + 1j * rng.standard_normal(n))
    if np.linalg.norm(u) < 1e-8:
        return
    # u ⊥^(𝒯) v  implies  v ⊥^(𝒯) u
    assert perp_constraints(tup, [u]).violation(v) <= 1e-9 * np.linalg.norm(v) * np.linalg.norm(u) * 10


def test_quadratic_form_examples():
    s = make_shift(4)
    assert np.allclose(quadratic_form(make_power_tuple(s, 3), np.zeros(4)), 0)
    assert quadratic_form(s, e(0, 4))[0] == 0
    d = make_diagonal([0, 1])
    assert np.isclose(quadratic_form(d, np.array([1, 1]) / np.sqrt(2))[0], 0.5)
    with pytest.raises(DimensionError):
        quadratic_form(s, np.ones(3))


@given(st.integers(0, 10**6))
def test_quadratic_form_unitary_conjugation(seed):
    rng = np.random.default_rng(seed)
    n = 8
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    u, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    tup = make_power_tuple(make_dense(a), 2)
    conj = as_tuple(make_power_tuple(make_dense(u.conj().T @ a @ u), 2))
    assert np.allclose(quadratic_form(tup, u @ x), quadratic_form(conj, x), atol=1e-10)
