"""Request handlers shared by the command group and the HTTP API.

Each handler takes a request document (already decoded JSON) plus the
application config and returns an ``Outcome``: the response document and
whether the check it ran passed.  Commands that only compute something
always pass.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from constants import (
    BRANCH_XI_NONZERO,
    BRANCH_XI_ZERO,
    DEFAULT_DRAWS,
    DEFAULT_SAMPLES,
    DEFAULT_SEED,
    DEFAULT_TOLERANCE,
    DEFAULT_WORKERS,
)
from app.services.errors import PayloadError
from app.services import payloads
from app.services import expr_core as ec
from app.services.canonical_systems import LinearSystem, build_canonical
from app.services.classify import classify_by_matrix, fit_canonical, mutation_suite, theorem_suite
from app.services.equivalence import normalize_generator, pushforward, transform_system
from app.services.jordan import jordanize
from app.services.lie_symmetry import check_admitted
from app.services.solution_families import (
    XiZeroData,
    list_subcases,
    verify_family,
    xi_nonzero_family,
    xi_zero_family,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Outcome:
    document: dict
    passed: bool = True


def _require(request: Mapping, key: str):
    if key not in request or request[key] is None:
        raise PayloadError(f"Missing '{key}'")
    return request[key]


def _int_option(request: Mapping, key: str, default: int) -> int:
    value = request.get(key)
    if value is None:
        return default
    if isinstance(value, bool) or not isinstance(value, int):
        raise PayloadError(f"'{key}' must be an integer")
    return value


def _seed(request: Mapping, config: Mapping) -> int:
    return _int_option(request, "seed", config.get("LIE3_SEED", DEFAULT_SEED))


def jordan(request: Mapping, config: Mapping) -> Outcome:
    A = payloads.matrix_from_json(_require(request, "matrix"))
    scale = 1.0 + float(np.max(np.abs(A)))
    form = jordanize(A, tol=config.get("LIE3_TOLERANCE", DEFAULT_TOLERANCE) * scale)
    return Outcome(payloads.jordan_to_json(form, A))


def canonical(request: Mapping, config: Mapping) -> Outcome:
    case, params = payloads.canonical_from_json(
        {"case": _require(request, "case"), "params": request.get("params") or {}}
    )
    system, generator = build_canonical(case, params)
    return Outcome(payloads.canonical_to_json(case, params, system, generator))


def verify(request: Mapping, config: Mapping) -> Outcome:
    system = payloads.as_second_order(payloads.system_from_json(_require(request, "system")))
    generator = payloads.generator_from_json(_require(request, "generator"))
    admission = check_admitted(
        generator,
        system,
        seed=_seed(request, config),
        samples=_int_option(request, "samples", config.get("LIE3_SAMPLES", DEFAULT_SAMPLES)),
    )
    return Outcome(payloads.residuals_to_json(admission), passed=admission.admitted)


def classify(request: Mapping, config: Mapping) -> Outcome:
    if request.get("matrix") is not None:
        result = classify_by_matrix(payloads.matrix_from_json(request["matrix"]))
        return Outcome(payloads.theorem_case_to_json(result))
    system = payloads.system_from_json(_require(request, "system"))
    if not isinstance(system, LinearSystem):
        system = LinearSystem.from_system(system)
    report = fit_canonical(system, seed=_seed(request, config))
    return Outcome(payloads.report_to_json(report))


def family(request: Mapping, config: Mapping) -> Outcome:
    branch = _require(request, "branch")
    kind, params = payloads.jordan_params_from_json(_require(request, "jordan"))
    if branch == BRANCH_XI_NONZERO:
        fam = xi_nonzero_family(kind, params)
    elif branch == BRANCH_XI_ZERO:
        subcase = request.get("subcase")
        if not subcase:
            available = ", ".join(list_subcases(kind))
            raise PayloadError(f"xi-zero families need a subcase; {kind} has: {available}")
        shifts = payloads.shifts_from_json(request.get("shifts"))
        fam = xi_zero_family(XiZeroData(kind, params, shifts), subcase)
    else:
        raise PayloadError(f"Unknown branch '{branch}'")
    document = payloads.family_to_json(fam)
    if not request.get("verify"):
        return Outcome(document)
    residuals = verify_family(fam)
    document["residuals"] = [ec.render(item) for item in residuals]
    seed = _seed(request, config)
    return Outcome(document, passed=all(ec.is_zero(item, seed=seed) for item in residuals))


def transform(request: Mapping, config: Mapping) -> Outcome:
    system = payloads.system_from_json(_require(request, "system"))
    T = payloads.transform_from_json(_require(request, "transform"))
    transformed = transform_system(T, system)
    document = {"system": payloads.system_to_json(transformed)}
    if request.get("generator") is None:
        return Outcome(document)
    generator = pushforward(T, payloads.generator_from_json(request["generator"]))
    admission = check_admitted(
        generator,
        payloads.as_second_order(transformed),
        seed=_seed(request, config),
    )
    document["generator"] = payloads.generator_to_json(generator)
    document["verification"] = payloads.residuals_to_json(admission)
    return Outcome(document, passed=admission.admitted)


def normalize(request: Mapping, config: Mapping) -> Outcome:
    result = normalize_generator(payloads.generator_from_json(_require(request, "generator")))
    return Outcome(payloads.normalization_to_json(result))


def theorem(request: Mapping, config: Mapping) -> Outcome:
    seed = _seed(request, config)
    report = theorem_suite(
        seed=seed,
        draws=_int_option(request, "draws", config.get("LIE3_DRAWS", DEFAULT_DRAWS)),
        workers=_int_option(request, "workers", config.get("LIE3_WORKERS", DEFAULT_WORKERS)),
    )
    logger.info(
        "Theorem battery seed=%d: %d/%d draws passed", seed, sum(r.passed for r in report.cases), report.total
    )
    document = payloads.theorem_report_to_json(report)
    mutations = _int_option(request, "mutations", 0)
    if mutations > 0:
        document["mutations"] = payloads.mutation_report_to_json(mutation_suite(seed=seed, count=mutations))
    return Outcome(document, passed=report.all_passed)


HANDLERS: dict[str, Callable[[Mapping, Mapping], Outcome]] = {
    "jordan": jordan,
    "canonical": canonical,
    "verify": verify,
    "classify": classify,
    "family": family,
    "transform": transform,
    "normalize": normalize,
    "theorem": theorem,
}
