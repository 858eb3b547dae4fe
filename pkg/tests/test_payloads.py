import jsonschema
import pytest
import sympy as sp

from constants import SCHEMAS_DIR
from app.services import expr_core as ec
from app.services import payloads
from app.services.canonical_systems import LinearSystem
from app.services.equivalence import Composite, LinearChange, Reparam, Shift
from app.services.errors import ExprSyntaxError, PayloadError
from app.services.lie_symmetry import SecondOrderSystem

SCHEMA_NAMES = sorted(path.stem for path in SCHEMAS_DIR.glob("*.json"))


@pytest.mark.parametrize("name", SCHEMA_NAMES)
def test_schemas_are_valid(name):
    jsonschema.Draft202012Validator.check_schema(payloads.load_schema(name))


def test_generator_documents():
    X = payloads.generator_from_json({"xi": "x^2", "eta": ["x*y", 0, "z/2"]})
    assert X.xi == ec.x**2
    assert payloads.generator_to_json(X) == {"xi": "x^2", "eta": ["x*y", "0", "z/2"]}
    with pytest.raises(PayloadError):
        payloads.generator_from_json({"xi": "1", "eta": ["0", "0"]})
    with pytest.raises(PayloadError):
        payloads.generator_from_json({"xi": "1", "eta": [0, 0, 0], "extra": 1})
    with pytest.raises(ExprSyntaxError):
        payloads.generator_from_json({"xi": "1 +", "eta": [0, 0, 0]})


def test_system_documents():
    linear = payloads.system_from_json({"kind": "linear", "C": [["x", 0, 0], [0, 1, 0], [0, 0, "exp(x)"]]})
    assert isinstance(linear, LinearSystem)
    assert linear.C[2, 2] == sp.exp(ec.x)
    general = payloads.system_from_json({"kind": "general", "F": "y*z", "G": 0, "H": "u"})
    assert isinstance(general, SecondOrderSystem)
    assert payloads.system_to_json(general) == {"kind": "general", "F": "y*z", "G": "0", "H": "u"}
    assert payloads.as_second_order(linear).F == ec.x * ec.y
    with pytest.raises(PayloadError):
        payloads.system_from_json({"kind": "linear", "C": [[0, 0, 0]]})


def test_transform_documents():
    T = payloads.transform_from_json(
        {
            "kind": "composite",
            "steps": [
                {"kind": "linear", "P": [[1, 0, 0], [0, 2, 0], ["1/2", 0, 1]]},
                {"kind": "shift", "phi": ["x", 0, 0]},
                {"kind": "reparam", "phi": "2*x", "psi": "1"},
            ],
        }
    )
    assert isinstance(T, Composite)
    assert [type(step) for step in T.steps] == [LinearChange, Shift, Reparam]
    assert T.steps[0].P[2, 0] == sp.Rational(1, 2)
    assert payloads.transform_to_json(T.steps[2]) == {"kind": "reparam", "phi": "2*x", "psi": "1"}
    with pytest.raises(PayloadError):
        payloads.transform_from_json({"kind": "rotate"})


def test_matrix_documents():
    A = payloads.matrix_from_json([["1/2", 0, 0], [0, 1, 0], [0, 0, -3]])
    assert A[0, 0] == 0.5
    with pytest.raises(PayloadError):
        payloads.matrix_from_json([["a", 0, 0], [0, 1, 0], [0, 0, 1]])


def test_jordan_params_from_spec_or_matrix():
    kind, params = payloads.jordan_params_from_json({"kind": "J2", "params": {"a": 1, "c": "2/3"}})
    assert kind == "J2"
    assert params["c"] == sp.Rational(2, 3)
    kind, params = payloads.jordan_params_from_json([[2, 0, 0], [0, 2, 1], [0, 0, 2]])
    assert kind == "J3"
    assert params == {"a": 2, "b": 2}
    with pytest.raises(PayloadError):
        payloads.jordan_params_from_json({"kind": "J5"})


def test_shifts_documents():
    assert payloads.shifts_from_json(None) is None
    assert payloads.shifts_from_json(["x", 0, "exp(x)"]) == (ec.x, 0, sp.exp(ec.x))
    with pytest.raises(PayloadError):
        payloads.shifts_from_json(["x"])
