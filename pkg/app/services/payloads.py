"""JSON documents in and out of the services.

Expressions travel as strings in the expression grammar; matrices of numbers
may use "p/q" strings.  Incoming documents are checked against the schemas in
docs/schemas before they are decoded.
"""

from __future__ import annotations

import json
from functools import lru_cache

import jsonschema
import numpy as np
import sympy as sp

from constants import SCHEMAS_DIR
from app.services.errors import PayloadError
from app.services import expr_core as ec
from app.services.canonical_systems import CanonicalParams, LinearSystem
from app.services.classify import ClassificationReport, MutationReport, TheoremCase, TheoremReport
from app.services.equivalence import Composite, LinearChange, Normalization, Reparam, Shift
from app.services.jordan import JordanForm, jordanize, parse_matrix, reconstruction_residual
from app.services.lie_symmetry import Admission, PointGenerator, SecondOrderSystem
from app.services.solution_families import SolutionFamily


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    path = SCHEMAS_DIR / f"{name}.json"
    return json.loads(path.read_text(encoding="utf-8"))


def validate_document(name: str, payload) -> None:
    try:
        jsonschema.validate(instance=payload, schema=load_schema(name))
    except jsonschema.ValidationError as exc:
        raise PayloadError(f"Invalid {name} document: {exc.message}") from exc


def expression(value) -> sp.Expr:
    if isinstance(value, (str, int, float)) and not isinstance(value, bool):
        return ec.as_expr(value)
    raise PayloadError(f"Expected an expression string, got {type(value).__name__}")


def render(e) -> str:
    return ec.render(e)


# ---------------------------------------------------------------------------
# Generators and systems
# ---------------------------------------------------------------------------


def generator_from_json(payload) -> PointGenerator:
    validate_document("generator", payload)
    return PointGenerator(expression(payload["xi"]), tuple(expression(item) for item in payload["eta"]))


def generator_to_json(X: PointGenerator) -> dict:
    return {"xi": render(X.xi), "eta": [render(item) for item in X.eta]}


def system_from_json(payload) -> SecondOrderSystem | LinearSystem:
    validate_document("system", payload)
    if payload["kind"] == "linear":
        return LinearSystem(sp.ImmutableMatrix([[expression(item) for item in row] for row in payload["C"]]))
    return SecondOrderSystem(expression(payload["F"]), expression(payload["G"]), expression(payload["H"]))


def as_second_order(system) -> SecondOrderSystem:
    return system.to_system() if isinstance(system, LinearSystem) else system


def system_to_json(system) -> dict:
    if isinstance(system, LinearSystem):
        return {"kind": "linear", "C": [[render(system.C[i, j]) for j in range(3)] for i in range(3)]}
    return {"kind": "general", "F": render(system.F), "G": render(system.G), "H": render(system.H)}


def canonical_from_json(payload) -> tuple[int, CanonicalParams]:
    validate_document("canonical", payload)
    case = int(payload["case"])
    params = {name: expression(value) for name, value in payload.get("params", {}).items()}
    return case, CanonicalParams(case, params)


def residuals_to_json(admission: Admission) -> dict:
    return {
        "admitted": admission.admitted,
        "residuals": [render(item) for item in admission.residuals],
        "residual_max_abs": ec.max_abs_residual(admission.residuals),
    }


# ---------------------------------------------------------------------------
# Transforms
# ---------------------------------------------------------------------------


def transform_from_json(payload):
    validate_document("transform", payload)
    return _transform(payload)


def _transform(payload):
    kind = payload["kind"]
    if kind == "linear":
        return LinearChange(sp.ImmutableMatrix([[expression(item) for item in row] for row in payload["P"]]))
    if kind == "shift":
        return Shift(tuple(expression(item) for item in payload["phi"]))
    if kind == "reparam":
        return Reparam(expression(payload["phi"]), expression(payload["psi"]))
    return Composite(tuple(_transform(step) for step in payload["steps"]))


def transform_to_json(T) -> dict:
    if isinstance(T, LinearChange):
        return {"kind": "linear", "P": [[render(T.P[i, j]) for j in range(3)] for i in range(3)]}
    if isinstance(T, Shift):
        return {"kind": "shift", "phi": [render(item) for item in T.phi]}
    if isinstance(T, Reparam):
        return {"kind": "reparam", "phi": render(T.phi), "psi": render(T.psi)}
    return {"kind": "composite", "steps": [transform_to_json(step) for step in T.steps]}


def normalization_to_json(result: Normalization) -> dict:
    return {
        "transforms": [transform_to_json(step) for step in result.transforms],
        "generator": generator_to_json(result.generator),
        "A": [[render(result.A[i, j]) for j in range(3)] for i in range(3)],
        "residual_max_abs": result.residual,
    }


# ---------------------------------------------------------------------------
# Jordan forms, families, reports
# ---------------------------------------------------------------------------


def _matrix_list(M: np.ndarray) -> list[list[float]]:
    return [[float(value) for value in row] for row in np.asarray(M)]


def matrix_from_json(payload) -> np.ndarray:
    validate_document("matrix", payload)
    return parse_matrix(payload)


def jordan_to_json(form: JordanForm, source=None) -> dict:
    document = {
        "kind": form.kind,
        "params": {name: float(value) for name, value in form.params.items()},
        "P": _matrix_list(form.P),
        "Pinv": _matrix_list(form.Pinv),
    }
    if source is not None:
        document["residual_max_abs"] = reconstruction_residual(form, source)
    return document


def jordan_params_from_json(payload) -> tuple[str, dict]:
    """Kind and parameters for the family command.

    Accepts either ``{"kind": "J2", "params": {"a": 1, "b": 0, "c": "2/3"}}`` or
    a matrix, which is brought to Jordan form first.
    """
    if isinstance(payload, list):
        form = jordanize(matrix_from_json(payload))
        return form.kind, dict(form.rational_params())
    validate_document("jordan-spec", payload)
    return payload["kind"], {name: expression(value) for name, value in payload.get("params", {}).items()}


def shifts_from_json(payload) -> tuple[sp.Expr, sp.Expr, sp.Expr] | None:
    if payload is None:
        return None
    validate_document("shifts", payload)
    return tuple(expression(item) for item in payload)


def canonical_to_json(case: int, params: CanonicalParams, system: LinearSystem, generator: PointGenerator) -> dict:
    return {
        "case": case,
        "params": params.as_json(),
        "system": system_to_json(system),
        "generator": generator_to_json(generator),
    }


def family_to_json(fam: SolutionFamily) -> dict:
    return {
        "kind": fam.kind,
        "branch": fam.branch,
        "subcase": fam.subcase,
        "invariants": {name: render(fam.invariants[name]) for name in ("s", "v", "w")},
        "arguments": list(fam.arguments),
        "flow": fam.flow,
        "F": render(fam.F),
        "G": render(fam.G),
        "H": render(fam.H),
        "generator": generator_to_json(fam.generator),
    }


def theorem_case_to_json(result: TheoremCase) -> dict:
    return {
        "case": result.case,
        "jordan": jordan_to_json(result.jordan),
        "params": {name: render(ec.as_expr(value)) for name, value in result.params.items()},
        "generator": generator_to_json(result.generator),
    }


def report_to_json(report: ClassificationReport) -> dict:
    return {
        "verdict": report.verdict,
        "case": report.case,
        "params": {name: render(value) for name, value in report.params.items()},
        "generator": generator_to_json(report.generator) if report.generator is not None else None,
        "residual_max_abs": report.residual,
        "degeneracy": report.degeneracy,
        "commutant_dimension": report.commutant_dimension,
        "notes": list(report.notes),
    }


def theorem_report_to_json(report: TheoremReport) -> dict:
    return {
        "seed": report.seed,
        "draws": report.draws,
        "total": report.total,
        "all_passed": report.all_passed,
        "cases": [
            {
                "case": result.case,
                "generator_case": result.generator_case,
                "draws": result.draws,
                "passed": result.passed,
                "failed": result.failed,
                "failures": result.failures,
            }
            for result in report.cases
        ],
    }


def mutation_report_to_json(report: MutationReport) -> dict:
    return {
        "seed": report.seed,
        "total": report.total,
        "rejected": report.rejected,
        "coincidental": report.coincidental,
    }
