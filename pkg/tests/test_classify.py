import random
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp

from constants import VERDICT_CANONICAL, VERDICT_DEGENERATE, VERDICT_TRIVIAL_ONLY, VERDICT_UNCLASSIFIED
from app.services import expr_core as ec
from app.services.canonical_systems import (
    LinearSystem,
    build_canonical,
    commutant_condition,
    is_degenerate,
    random_params,
)
from app.services.classify import (
    classify_by_matrix,
    coefficient_equations,
    commutant_dimension,
    fit_canonical,
    mutation_suite,
    theorem_suite,
)
from app.services.errors import UnsupportedAtoms
from app.services.lie_symmetry import PointGenerator, check_admitted
from app.services.solution_families import linearize_family, xi_nonzero_family


@pytest.mark.parametrize(
    "A, case, params",
    [
        (np.diag([3, 1, 2]), 1, {"alpha": Fraction(-1), "beta": Fraction(-2)}),
        ([[2, 0, 0], [0, 3, 5], [0, -5, 3]], 2, {"alpha": Fraction(-1), "c": Fraction(5)}),
        ([[7, 0, 0], [0, 7, 1], [0, 0, 7]], 3, {"alpha": Fraction(0)}),
        ([[4, 1, 0], [0, 4, 1], [0, 0, 4]], 4, {"alpha": Fraction(4)}),
    ],
)
def test_classify_by_matrix(A, case, params):
    result = classify_by_matrix(A)
    assert result.case == case
    assert result.params == params
    assert result.generator.xi == 1


def test_classify_by_matrix_generator_for_diagonal():
    result = classify_by_matrix(np.diag([3, 1, 2]))
    assert result.generator.eta == (0, ec.z, 2 * ec.u)


FIT_EXAMPLES = {
    1: {"alpha": 1, "beta": 2, "alpha11": 1, "alpha13": 3, "alpha21": 1, "alpha23": -1, "alpha31": 2, "alpha32": 1},
    2: {"alpha": 1, "c": 2, "alpha11": 1, "alpha21": 1, "alpha31": -1, "beta": 1, "gamma": 2, "c1": 1, "c2": 3},
    3: {"alpha": -1, "alpha12": 1, "alpha13": 2, "alpha21": 1, "alpha31": 1, "alpha32": 2, "alpha33": 1},
    4: {"lambda": 1, "beta": 2, "gamma": 3},
}


@pytest.mark.parametrize("case", sorted(FIT_EXAMPLES))
def test_fit_recovers_canonical_case(case):
    system, _ = build_canonical(case, FIT_EXAMPLES[case])
    report = fit_canonical(system)
    assert report.verdict == VERDICT_CANONICAL
    assert report.case == case
    assert check_admitted(report.generator, system.to_system()).admitted
    for name in ("alpha", "beta", "c"):
        if name in report.params and case != 4:
            assert report.params[name] == FIT_EXAMPLES[case][name]
    if case == 4:
        assert report.params["alpha"] == 0
        assert report.notes


@pytest.mark.parametrize("case", [1, 2, 3, 4])
def test_fit_round_trips_random_canonical_params(case):
    for index in range(5):
        params = random_params(case, random.Random(f"fit:{case}:{index}"))
        system, _ = build_canonical(case, params)
        report = fit_canonical(system)
        if is_degenerate(system).degenerate:
            assert report.verdict == VERDICT_DEGENERATE
            continue
        assert report.verdict == VERDICT_CANONICAL, (index, params.as_json())
        assert report.case == case
        expected = dict(params.values)
        if case == 4:
            expected["alpha"] = 0
        assert {name: report.params[name] for name in expected} == expected


def test_fit_reads_beta_from_inner_cells():
    params = {"alpha": 1, "beta": 3, "alpha11": 2, "alpha21": 1, "alpha23": 2, "alpha32": -1}
    system, _ = build_canonical(1, params)
    report = fit_canonical(system)
    assert report.verdict == VERDICT_CANONICAL
    assert report.params["alpha"] == 1
    assert report.params["beta"] == 3
    assert report.params["alpha13"] == 0
    assert report.params["alpha31"] == 0


def test_coefficient_equations_separate_related_exponentials():
    a, b = sp.symbols("a b", real=True)
    expr = a * sp.exp(2 * ec.x) + b * sp.exp(ec.x) - 3 * sp.exp(2 * ec.x) + sp.exp(-ec.x) * sp.exp(2 * ec.x)
    equations = coefficient_equations([expr], (a, b))
    assert sp.solve(equations, (a, b)) == {a: 3, b: -1}


def test_fit_degenerate_patterns():
    report = fit_canonical(LinearSystem(sp.ImmutableMatrix(sp.diag(ec.x, 1, 2))))
    assert report.verdict == VERDICT_DEGENERATE
    assert report.degeneracy == "a"
    report = fit_canonical(LinearSystem(sp.ImmutableMatrix.zeros(3, 3)))
    assert report.verdict == VERDICT_DEGENERATE


def test_constant_coefficients_are_unclassified():
    report = fit_canonical(LinearSystem(sp.ImmutableMatrix([[1, 2, 3], [4, 5, 6], [7, 8, 10]])))
    assert report.verdict == VERDICT_UNCLASSIFIED
    assert report.commutant_dimension is not None


def test_generic_system_has_only_trivial_symmetries():
    C = sp.ImmutableMatrix([[ec.x, 1, 1], [1, ec.x**2, 1], [1, 1, 0]])
    L = LinearSystem(C)
    assert commutant_dimension(L) == 1
    report = fit_canonical(L)
    assert report.verdict == VERDICT_TRIVIAL_ONLY


def test_unsupported_atoms():
    with pytest.raises(UnsupportedAtoms):
        fit_canonical(LinearSystem(sp.ImmutableMatrix([[sp.log(ec.x), 1, 1], [1, 0, 1], [1, 1, 0]])))
    with pytest.raises(UnsupportedAtoms):
        fit_canonical(LinearSystem(sp.ImmutableMatrix([[sp.exp(ec.x**2), 1, 1], [1, 0, 1], [1, 1, 0]])))


def test_coefficient_equations():
    a, b = sp.symbols("a b", real=True)
    equations = coefficient_equations([a * sp.exp(ec.x) + b * ec.x - sp.exp(ec.x)], (a, b))
    assert sp.solve(equations, (a, b)) == {a: 1, b: 0}
    assert coefficient_equations([sp.Integer(0)]) == []


def test_commutant_dimension_of_scalar_system():
    assert commutant_dimension(LinearSystem(sp.ImmutableMatrix(sp.eye(3) * ec.x))) == 9


def test_theorem_suite_small_battery():
    report = theorem_suite(seed=7, draws=2)
    assert report.all_passed
    assert report.total == 8
    assert [result.case for result in report.cases] == [1, 2, 3, 4]


def test_theorem_suite_is_deterministic():
    first = theorem_suite(seed=3, draws=1, pairing={1: 4})
    second = theorem_suite(seed=3, draws=1, pairing={1: 4})
    assert [r.failures for r in first.cases] == [r.failures for r in second.cases]


def test_mismatched_pairing_is_caught():
    report = theorem_suite(seed=11, draws=3, pairing={1: 4, 4: 1})
    assert not report.all_passed
    by_case = {result.case: result for result in report.cases}
    assert by_case[1].generator_case == 4
    assert by_case[1].failed > 0
    assert by_case[2].failed == 0


def test_zero_draws():
    report = theorem_suite(draws=0)
    assert report.total == 0
    assert report.all_passed


@pytest.mark.slow
def test_theorem_suite_with_workers_matches_serial():
    serial = theorem_suite(seed=5, draws=2, workers=1)
    parallel = theorem_suite(seed=5, draws=2, workers=2)
    assert [(r.case, r.passed) for r in serial.cases] == [(r.case, r.passed) for r in parallel.cases]


def test_mutation_suite_rejects_mutants():
    report = mutation_suite(seed=42, count=8)
    assert report.total == 8
    assert report.rejected + len(report.coincidental) == report.total
    assert report.rejected >= 7


LINEARIZATION = {
    1: ("J1", {"a": 0, "b": 3, "d": 5}, [[1, 1, 2], [-1, 2, 3], [1, -2, 1]]),
    2: ("J2", {"a": 1, "b": 0, "c": 2}, [[1, 1, 0], [2, 1, -1], [3, 1, 2]]),
    3: ("J3", {"a": -1, "b": 0}, [[1, 2, 1], [1, 1, -1], [2, 1, 3]]),
    4: ("J4", {"a": 0}, [[1, 0, 0], [2, 0, 0], [3, 0, 0]]),
}


@pytest.mark.parametrize("case", sorted(LINEARIZATION))
def test_linearized_families_fit_their_case(case):
    kind, params, alphas = LINEARIZATION[case]
    fam = xi_nonzero_family(kind, params)
    L = linearize_family(fam, alphas)
    report = fit_canonical(L)
    assert report.verdict == VERDICT_CANONICAL
    assert report.case == case
    assert check_admitted(fam.generator, L.to_system()).admitted


UNIMODULAR = sp.Matrix([[1, 2, 0], [0, 1, 1], [1, 2, 1]])


@pytest.mark.parametrize(
    "A",
    [
        sp.diag(1, 2, 4),
        sp.Matrix([[2, 0, 0], [0, 1, 3], [0, -3, 1]]),
        sp.Matrix([[5, 0, 0], [0, -1, 1], [0, 0, -1]]),
        sp.Matrix([[2, 1, 0], [0, 2, 1], [0, 0, 2]]),
    ],
)
def test_case_is_invariant_under_conjugation(A):
    conjugated = np.array((UNIMODULAR * A * UNIMODULAR.inv()).tolist(), dtype=float)
    assert classify_by_matrix(conjugated).case == classify_by_matrix(np.array(A.tolist(), dtype=float)).case


def test_commutant_condition_matches_admission():
    rng = np.random.default_rng(7)
    for index in range(20):
        C = sp.Matrix(rng.integers(-3, 4, size=(3, 3)).tolist())
        A = [sp.eye(3), C, C * C + C, sp.Matrix(rng.integers(-3, 4, size=(3, 3)).tolist())][index % 4]
        L = LinearSystem(sp.ImmutableMatrix(C))
        commutes = all(entry == 0 for entry in commutant_condition(A, L))
        admitted = check_admitted(PointGenerator.linear(A), L.to_system(), exact=True).admitted
        assert commutes == admitted


def _symbolic_constant_system():
    return LinearSystem(sp.ImmutableMatrix(3, 3, lambda i, j: ec.symbol(f"c{i + 1}{j + 1}")))


def test_distinct_eigenvalues_force_a_decoupled_system():
    L = _symbolic_constant_system()
    equations = [entry for entry in commutant_condition(sp.diag(1, 2, 3), L) if entry != 0]
    solution = sp.solve(equations, list(L.C.free_symbols), dict=True)[0]
    reduced = LinearSystem(L.C.subs(solution))
    assert is_degenerate(reduced).degenerate


def test_repeated_outer_eigenvalue_lands_in_class_a():
    L = _symbolic_constant_system()
    equations = [entry for entry in commutant_condition(sp.diag(1, 2, 1), L) if entry != 0]
    solution = sp.solve(equations, list(L.C.free_symbols), dict=True)[0]
    reduced = LinearSystem(L.C.subs(solution))
    assert reduced.C[0, 2] != 0
    report = is_degenerate(reduced)
    assert report.degenerate and report.klass == "a"


@pytest.mark.slow
def test_full_theorem_battery_passes():
    report = theorem_suite(seed=42, draws=100)
    assert report.total == 400
    assert [result.passed for result in report.cases] == [100, 100, 100, 100]


@pytest.mark.slow
def test_full_mutation_control_rejects_nearly_all():
    report = mutation_suite(seed=42, count=100)
    assert report.total == 100
    assert report.rejected >= 99
