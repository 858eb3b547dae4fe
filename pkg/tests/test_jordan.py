import numpy as np
import pytest

from constants import JORDAN_RESIDUAL_TOLERANCE
from app.services.errors import PayloadError
from app.services.jordan import (
    characteristic_poly,
    jordan_matrix,
    jordanize,
    parse_matrix,
    reconstruction_residual,
)

UNIMODULAR = np.array([[1, 2, 0], [0, 1, 3], [0, 0, 1]]) @ np.array([[1, 0, 0], [1, 1, 0], [2, 1, 1]])


def _conjugate(J):
    Q = UNIMODULAR.astype(float)
    return Q @ np.asarray(J, dtype=float) @ np.linalg.inv(Q)


def _assert_valid(form, A):
    A = np.asarray(A, dtype=float)
    scale = 1.0 + float(np.max(np.abs(A)))
    assert reconstruction_residual(form, A) <= JORDAN_RESIDUAL_TOLERANCE * scale
    assert np.max(np.abs(form.P @ form.Pinv - np.eye(3))) <= 1e-8


@pytest.mark.parametrize(
    "A, expected",
    [
        (np.diag([1, 2, 3]), (-6, 11, -6)),
        (np.zeros((3, 3)), (0, 0, 0)),
        ([[0, 0, 0], [0, 0, 1], [0, -1, 0]], (0, 1, 0)),
    ],
)
def test_characteristic_poly(A, expected):
    assert characteristic_poly(A) == pytest.approx(expected)


def test_parse_matrix_accepts_rational_strings():
    M = parse_matrix([["1/2", 0, 0], [0, "-3/4", 1], [0, 0, 2.5]])
    assert M[0, 0] == 0.5
    assert M[1, 1] == -0.75


@pytest.mark.parametrize("payload", [[[1, 2, 3]], [[1, 2], [3, 4], [5, 6]], [[1, 0, 0], [0, "x", 0], [0, 0, 1]]])
def test_parse_matrix_rejects_bad_shapes(payload):
    with pytest.raises(PayloadError):
        parse_matrix(payload)


def test_diagonal_is_j1_with_sorted_eigenvalues():
    form = jordanize(np.diag([1.0, 2.0, 3.0]))
    assert form.kind == "J1"
    assert form.params == pytest.approx({"a": 1.0, "b": 2.0, "d": 3.0})
    assert np.allclose(form.P, np.eye(3))
    form = jordanize(np.diag([3.0, 1.0, 2.0]))
    assert [form.params[name] for name in ("a", "b", "d")] == pytest.approx([1.0, 2.0, 3.0])
    _assert_valid(form, np.diag([3.0, 1.0, 2.0]))


def test_rotation_block_is_j2_with_positive_frequency():
    A = [[2, 0, 0], [0, 3, 5], [0, -5, 3]]
    form = jordanize(A)
    assert form.kind == "J2"
    assert form.params == pytest.approx({"a": 2.0, "b": 3.0, "c": 5.0})
    assert np.allclose(form.P, np.eye(3))
    flipped = jordanize([[2, 0, 0], [0, 3, -5], [0, 5, 3]])
    assert flipped.params["c"] == pytest.approx(5.0)
    _assert_valid(flipped, [[2, 0, 0], [0, 3, -5], [0, 5, 3]])


def test_single_block_is_j4():
    form = jordanize([[4, 1, 0], [0, 4, 1], [0, 0, 4]])
    assert form.kind == "J4"
    assert form.params["a"] == pytest.approx(4.0)
    _assert_valid(form, [[4, 1, 0], [0, 4, 1], [0, 0, 4]])


def test_conjugated_j3_is_recovered():
    A = _conjugate([[7, 0, 0], [0, 7, 1], [0, 0, 7]])
    form = jordanize(A)
    assert form.kind == "J3"
    assert form.params == pytest.approx({"a": 7.0, "b": 7.0})
    _assert_valid(form, A)


def test_double_root_with_defect_is_j3():
    A = _conjugate([[-1, 0, 0], [0, 2, 1], [0, 0, 2]])
    form = jordanize(A)
    assert form.kind == "J3"
    assert form.params == pytest.approx({"a": -1.0, "b": 2.0})
    _assert_valid(form, A)


def test_diagonalizable_double_root_stays_j1():
    A = _conjugate(np.diag([2.0, 2.0, 5.0]))
    form = jordanize(A)
    assert form.kind == "J1"
    assert sorted(form.params.values()) == pytest.approx([2.0, 2.0, 5.0])
    _assert_valid(form, A)


@pytest.mark.parametrize(
    "J",
    [
        jordan_matrix("J1", {"a": -2, "b": 1, "d": 4}),
        jordan_matrix("J2", {"a": 1, "b": -1, "c": 2}),
        jordan_matrix("J3", {"a": 0, "b": 3}),
        jordan_matrix("J4", {"a": -1}),
    ],
)
def test_jordan_shapes_are_fixed_points(J):
    form = jordanize(J)
    assert np.allclose(form.matrix(), J, atol=1e-8)
    assert np.allclose(np.abs(form.P), np.round(np.abs(form.P)), atol=1e-8)


def test_tolerance_must_be_positive():
    with pytest.raises(ValueError):
        jordanize(np.eye(3), tol=0.0)


def _eigenvalues(form):
    p = form.params
    if form.kind == "J1":
        return [p["a"], p["b"], p["d"]]
    if form.kind == "J2":
        return [p["a"]]
    if form.kind == "J3":
        return [p["a"], p["b"], p["b"]]
    return [p["a"]] * 3


def _corpus(count, seed):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        yield rng.integers(-5, 6, size=(3, 3)).astype(float)


def _check_corpus(count):
    for A in _corpus(count, seed=42):
        form = jordanize(A)
        _assert_valid(form, A)
        c2, c1, c0 = characteristic_poly(A)
        scale = 1.0 + float(np.max(np.abs(A)))
        for value in _eigenvalues(form):
            assert abs(((value + c2) * value + c1) * value + c0) <= 1e-6 * scale**3
        p = form.params
        spectrum_sum = sum(_eigenvalues(form)) + (2 * p["b"] if form.kind == "J2" else 0.0)
        assert spectrum_sum == pytest.approx(-c2, abs=1e-7 * scale)


def test_random_integer_corpus_sample():
    _check_corpus(100)


@pytest.mark.slow
def test_random_integer_corpus_full():
    _check_corpus(1000)
