import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from basisforge.numrange import (
    InfeasibleTarget,
    SolveOptions,
    boundary_single,
    diam,
    essential_body,
    margin,
    solve_state,
)
from basisforge.operators import (
    EssentialDescriptor,
    make_diagonal,
    make_inverse_power_tuple,
    make_power_tuple,
    make_shift,
    make_two_circle,
    perp_constraints,
    quadratic_form,
)
from basisforge.hilbert import Subspace


def body_of(desc):
    return essential_body(make_diagonal([0, 0]).__class__(2, np.zeros((2, 2)), desc))


def test_boundary_segment():
    body = boundary_single(np.diag([0.0, 1.0]), 64)
    z = body.complex_samples[:, 0]
    assert np.allclose(z.imag, 0, atol=1e-12)
    assert np.isclose(z.real.min(), 0) and np.isclose(z.real.max(), 1)


def test_boundary_nilpotent_disk():
    body = boundary_single(np.array([[0, 2], [0, 0]]), 128)
    assert np.allclose(np.abs(body.complex_samples[:, 0]), 1, atol=1e-9)


def test_boundary_identity_point():
    body = boundary_single(np.eye(3), 16)
    assert np.allclose(body.complex_samples[:, 0], 1)


def test_boundary_n_theta_floor():
    with pytest.raises(ValueError):
        boundary_single(np.eye(2), 4)


@given(st.integers(0, 10**6))
def test_boundary_contains_random_states(seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    body = boundary_single(a, 64)
    x = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    x /= np.linalg.norm(x)
    assert margin(body, np.vdot(x, a @ x)).margin >= -1e-9


def test_essential_body_power_hull_contains_zero():
    body = essential_body(make_power_tuple(make_shift(20), 2))
    assert margin(body, np.zeros(2)).margin > 0.1


def test_essential_body_inverse_pair_contains_zero():
    body = essential_body(make_inverse_power_tuple(make_two_circle(0.5, 2, 16), 1))
    assert margin(body, np.zeros(2)).margin > 0


def test_essential_body_point():
    body = body_of(EssentialDescriptor.point_set([0.3 + 0.2j]))
    assert np.allclose(body.complex_samples[:, 0], 0.3 + 0.2j)
    assert abs(margin(body, 0.3 + 0.2j).margin) < 1e-12
    assert diam(body) == 0


def test_interior_curve_point_has_positive_margin():
    # lambda inside the unit disk gives (lambda, lambda^2, lambda^3) inside the curve hull
    body = essential_body(make_power_tuple(make_shift(10), 3))
    lam = 0.3 * np.exp(0.7j)
    assert margin(body, [lam, lam**2, lam**3]).margin > 0


def test_margin_disk_and_segment():
    disk = body_of(EssentialDescriptor.disk(0, 1))
    assert np.isclose(margin(disk, 0).margin, 1, atol=1e-9)
    assert np.isclose(margin(disk, 2).margin, -1, atol=1e-9)
    seg = body_of(EssentialDescriptor.segment(0, 1))
    assert abs(margin(seg, 0.5).margin) < 1e-9


def test_diam():
    assert np.isclose(diam(body_of(EssentialDescriptor.disk(0, 1))), 2, atol=1e-4)
    assert np.isclose(diam(body_of(EssentialDescriptor.segment(0, 1))), 1)
    with pytest.raises(ValueError):
        diam(essential_body(make_power_tuple(make_shift(6), 2)))


def test_solve_state_diagonal():
    n = 20
    T = make_diagonal([i % 2 for i in range(n)])
    x = solve_state(T, Subspace.full(n), 0.5)
    assert abs(quadratic_form(T, x)[0] - 0.5) <= 1e-9
    assert np.isclose(np.linalg.norm(x), 1)
    w = np.zeros(n)
    w[:2] = 1 / np.sqrt(2)
    assert np.isclose(quadratic_form(T, w)[0], 0.5)


def test_solve_state_shift_zero():
    n = 12
    S = make_shift(n)
    x = solve_state(S, Subspace.full(n), 0.0)
    assert abs(quadratic_form(S, x)[0]) <= 1e-9


def test_solve_state_tuple_under_constraints():
    n = 80
    tup = make_power_tuple(make_shift(n), 2)
    es = list(np.eye(n, dtype=complex)[:5])
    M = perp_constraints(tup, es)
    x = solve_state(tup, M, np.zeros(2), SolveOptions(seed=1))
    assert np.max(np.abs(quadratic_form(tup, x))) <= 1e-9
    assert M.violation(x) <= 1e-10


def test_solve_state_rejects_exterior_target():
    n = 10
    with pytest.raises(InfeasibleTarget):
        solve_state(make_shift(n), Subspace.full(n), 2.0)
