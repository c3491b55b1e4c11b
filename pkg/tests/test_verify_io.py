import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from basisforge.builder import BuildParams, build_sparse
from basisforge.io import (
    SpecError,
    operator_from_doc,
    pattern_from_doc,
    pattern_to_doc,
    read_frame_csv,
    targets_from_doc,
    targets_to_doc,
    write_frame_csv,
)
from basisforge.operators import OperatorTuple, make_diagonal, make_power_tuple, make_shift
from basisforge.patterns import Pattern, TargetArray
from basisforge.verify import census, entry_tensor, verify


@pytest.fixture(scope="module")
def sparse_run():
    tup = make_power_tuple(make_shift(120), 2)
    B = Pattern.paper_example()
    frame, _ = build_sparse(tup, B, 12, BuildParams(m=12))
    return tup, B, frame.vectors


def test_verify_passes_on_builder_output(sparse_run):
    tup, B, u = sparse_run
    rep = verify(tup, u, B, mode="sparse")
    assert rep.passed and rep.entry_max <= 1e-8
    doc = rep.to_json()
    assert set(doc) >= {"mode", "m", "N", "k", "tolerances", "residuals", "census", "ladder", "pass"}
    assert set(doc["residuals"]) == {"gram", "entry_max", "entry_argmax", "diag_max"}
    json.loads(rep.dumps())


def test_verify_flags_perturbed_cells(sparse_run):
    tup, B, u = sparse_run
    w = u.copy()
    n = 6
    w[:, n - 1] += 1e-3 * tup.matrices[0] @ u[:, 2]
    rep = verify(tup, w, B)
    assert not rep.passed
    a, b, _ = rep.entry_argmax
    assert n in (a, b)


def test_verify_empty_pattern_checks_gram_only():
    rng = np.random.default_rng(0)
    q, _ = np.linalg.qr(rng.standard_normal((20, 5)) + 1j * rng.standard_normal((20, 5)))
    rep = verify(make_shift(20), q)
    assert rep.passed and rep.entry_max == 0 and rep.entry_argmax is None
    bad = q.copy()
    bad[:, 0] *= 1.001
    assert not verify(make_shift(20), bad).passed


def test_verify_shape_mismatch():
    with pytest.raises(ValueError):
        verify(make_shift(10), np.eye(12)[:, :3])


def test_census_examples():
    n, m = 30, 10
    # a frame of coordinate vectors on a zero operator has no nonzero cells
    zero = OperatorTuple.of(make_diagonal(np.zeros(n)))
    assert census(zero, np.eye(n)[:, :m]) == [0] * m
    ones = make_diagonal(np.ones(n))
    assert census(ones, np.eye(n)[:, :m]) == list(range(1, m + 1))


@given(st.integers(0, 10**6))
def test_census_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n, m = 8, 6
    a = rng.standard_normal((n, n)) * (rng.random((n, n)) < 0.3)
    u = np.eye(n)[:, :m]
    from basisforge.operators import make_dense

    T = make_dense(a)
    counts = census(T, u)
    e = entry_tensor(T, u)[0]
    for p in range(1, m + 1):
        assert counts[p - 1] == int(np.count_nonzero(np.abs(e[:p, :p]) > 1e-9))


@given(st.integers(0, 10**6), st.integers(1, 5))
def test_frame_csv_round_trip(tmp_path_factory, seed, m):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((7, m)) + 1j * rng.standard_normal((7, m))
    u[0, 0] = np.pi * 1e-300 + 1j / 3
    path = tmp_path_factory.mktemp("csv") / "basis.csv"
    write_frame_csv(path, u)
    assert path.read_text().startswith(f"# dim=7 count={m}")
    assert np.array_equal(read_frame_csv(path), u)


def test_pattern_and_target_docs_round_trip():
    for B in (Pattern.banded(2, lower_only=True), Pattern.explicit([(3, 1), (5, 2)]), Pattern.paper_example(symmetric=True)):
        C = pattern_from_doc(pattern_to_doc(B))
        assert C.cells(20) == B.cells(20)
    t = TargetArray(2, {(2, 1): [0.1, 0.2j]}, {1: [0, 0], 2: [0.05, -0.05]}, 0.3)
    s = targets_from_doc(json.loads(json.dumps(targets_to_doc(t))))
    assert s.k == 2 and s.delta == 0.3
    assert np.array_equal(s.get(2, 1), t.get(2, 1)) and np.array_equal(s.get(2, 2), t.get(2, 2))


def test_operator_docs():
    tup = operator_from_doc({"family": "power_tuple", "k": 2, "base": {"family": "shift", "dim": 9}})
    assert tup.k == 2 and tup.dim == 9
    d = operator_from_doc({"family": "diagonal", "cycle": [0, 1]}, dim=6)
    assert np.allclose(np.diag(d.matrix), [0, 1, 0, 1, 0, 1])
    with pytest.raises(SpecError):
        operator_from_doc({"family": "nope", "dim": 3})
