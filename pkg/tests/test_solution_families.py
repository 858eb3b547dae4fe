import numpy as np
import pytest
import sympy as sp

from constants import BRANCH_XI_NONZERO, BRANCH_XI_ZERO, JORDAN_KINDS, XI_ZERO_SUBCASES
from app.services import expr_core as ec
from app.services.canonical_systems import build_canonical
from app.services.errors import DegenerateParams, InconsistentPredicate, PayloadError, UnknownSubcase
from app.services.jordan import jordanize
from app.services.lie_symmetry import check_admitted
from app.services.solution_families import (
    XiZeroData,
    default_alphas,
    flow_matrix,
    jacobian_rank_check,
    jordan_block,
    linearize_family,
    list_subcases,
    parse_subcase,
    verify_family,
    xi_nonzero_family,
    xi_zero_family,
)

PARAMS = {
    "J1": {"a": 2, "b": 3, "d": 5},
    "J2": {"a": 2, "b": 1, "c": 3},
    "J3": {"a": 2, "b": 3},
    "J4": {"a": 2},
}


def _params_for(kind, tag):
    params = dict(PARAMS[kind])
    for name, nonzero in parse_subcase(tag).items():
        if name in params and not nonzero:
            params[name] = 0
    return params


ALL_SUBCASES = [(kind, tag) for kind in JORDAN_KINDS for tag in XI_ZERO_SUBCASES[kind]]


def test_subcase_counts():
    assert {kind: len(list_subcases(kind)) for kind in JORDAN_KINDS} == {"J1": 5, "J2": 3, "J3": 9, "J4": 3}
    assert len(ALL_SUBCASES) == 20
    with pytest.raises(PayloadError):
        list_subcases("J5")


def test_parse_subcase():
    assert parse_subcase("a!=0,h1=0") == {"a": True, "h1": False}
    with pytest.raises(UnknownSubcase):
        parse_subcase("a>0")


@pytest.mark.parametrize("kind", JORDAN_KINDS)
def test_flow_matrix_solves_the_linear_flow(kind):
    p = {name: ec.as_expr(value) for name, value in PARAMS[kind].items()}
    t = sp.Symbol("t", real=True)
    E = flow_matrix(kind, p, t)
    assert E.subs(t, 0) == sp.eye(3)
    difference = E.diff(t) - jordan_block(kind, p) * E
    assert all(ec.is_zero(entry) for entry in difference)


@pytest.mark.parametrize("kind", JORDAN_KINDS)
def test_xi_nonzero_family_is_admitted(kind):
    fam = xi_nonzero_family(kind, PARAMS[kind])
    assert fam.branch == BRANCH_XI_NONZERO
    assert fam.generator.xi == 1
    assert all(ec.is_zero(item) for item in verify_family(fam))
    for value in fam.invariants.values():
        assert ec.is_zero(fam.generator.apply(value))


@pytest.mark.parametrize("kind", JORDAN_KINDS)
def test_xi_nonzero_invariants_are_independent(kind):
    check = jacobian_rank_check(xi_nonzero_family(kind, PARAMS[kind]))
    assert check.independent
    assert len(check.determinants) == 10


@pytest.mark.parametrize("kind, tag", ALL_SUBCASES)
def test_xi_zero_family_is_admitted(kind, tag):
    fam = xi_zero_family(XiZeroData(kind, _params_for(kind, tag)), tag)
    assert fam.branch == BRANCH_XI_ZERO
    assert fam.subcase == tag
    assert fam.generator.xi == 0
    assert all(ec.is_zero(item) for item in verify_family(fam))


@pytest.mark.parametrize("kind, tag", ALL_SUBCASES)
def test_xi_zero_flow_parameter_and_invariants(kind, tag):
    fam = xi_zero_family(XiZeroData(kind, _params_for(kind, tag)), tag)
    for name, value in fam.invariants.items():
        expected = 1 if name == fam.flow else 0
        assert ec.is_zero(fam.generator.apply(value) - expected), name


def test_explicit_shifts_are_used():
    fam = xi_zero_family(XiZeroData("J4", {"a": 0}, shifts=(0, 0, ec.x**2)), "a=0,h3!=0")
    assert fam.shifts == (0, 0, ec.x**2)
    assert all(ec.is_zero(item) for item in verify_family(fam))


def test_inconsistent_predicates():
    with pytest.raises(InconsistentPredicate):
        xi_zero_family(XiZeroData("J1", {"a": 1, "b": 2, "d": 3}), "a!=0,b!=0,d=0")
    with pytest.raises(InconsistentPredicate):
        xi_zero_family(XiZeroData("J2", {"a": 0, "b": 1, "c": 1}, shifts=(ec.x, 0, 0)), "a=0,h1=0")


def test_unknown_subcase_and_degenerate_rotation():
    with pytest.raises(UnknownSubcase):
        xi_zero_family(XiZeroData("J4", {"a": 1}), "a!=0,b!=0")
    with pytest.raises(DegenerateParams):
        xi_nonzero_family("J2", {"a": 1, "b": 1, "c": 0})
    with pytest.raises(PayloadError):
        xi_nonzero_family("J1", {"q": 1})


def test_j1_linearization_matches_case_one():
    b, d = 3, 5
    fam = xi_nonzero_family("J1", {"a": 0, "b": b, "d": d})
    alphas = default_alphas()
    alphas[0, 1] = 1
    L = linearize_family(fam, alphas)
    names = ("alpha11", "alpha13", "alpha21", "alpha22", "alpha23", "alpha31", "alpha32", "alpha33")
    values = {name: ec.symbol(name) for name in names}
    values.update({"alpha": -b, "beta": -d})
    canonical, generator = build_canonical(1, values)
    assert all(ec.is_zero(entry) for entry in L.C - canonical.C)
    assert generator.eta == fam.generator.eta
    assert check_admitted(fam.generator, L.to_system()).admitted


def test_only_xi_nonzero_families_linearize():
    fam = xi_zero_family(XiZeroData("J4", {"a": 1}), "a!=0")
    with pytest.raises(PayloadError):
        linearize_family(fam)


def test_xi_zero_data_from_jordan_form():
    form = jordanize(np.array([[2.0, 0, 0], [0, 2, 1], [0, 0, 2]]))
    data = XiZeroData.from_jordan(form)
    assert data.kind == "J3"
    assert data.params == {"a": 2, "b": 2}
    fam = xi_zero_family(data, "a!=0,b!=0")
    assert all(ec.is_zero(item) for item in verify_family(fam))
