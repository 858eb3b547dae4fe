from __future__ import annotations

import sys
import time

import numpy as np

from constants import JORDAN_KINDS, JORDAN_RESIDUAL_TOLERANCE
from helpers import dump_json, parse_int
from app import create_app
from app.services import expr_core as ec
from app.services.classify import mutation_suite, theorem_suite
from app.services.errors import IllConditioned
from app.services.jordan import jordanize, reconstruction_residual
from app.services.lie_symmetry import check_admitted
from app.services.payloads import theorem_report_to_json
from app.services.solution_families import (
    XiZeroData,
    linearize_family,
    list_subcases,
    verify_family,
    xi_nonzero_family,
    xi_zero_family,
)

# Jordan parameters used for the xi-zero families; each subcase tag zeroes what it needs.
FAMILY_PARAMS = {
    "J1": {"a": 2, "b": 3, "d": 5},
    "J2": {"a": 2, "b": 1, "c": 3},
    "J3": {"a": 2, "b": 3},
    "J4": {"a": 2},
}


def _subcase_params(kind: str, tag: str) -> dict:
    params = dict(FAMILY_PARAMS[kind])
    for part in tag.split(","):
        name, _, value = part.partition("=")
        if name in params and value == "0":
            params[name] = 0
    return params


def families(seed: int) -> dict:
    results = []
    for kind in JORDAN_KINDS:
        fam = xi_nonzero_family(kind, FAMILY_PARAMS[kind])
        linear = linearize_family(fam)
        ok = all(ec.is_zero(item, seed=seed) for item in verify_family(fam))
        linear_ok = check_admitted(fam.generator, linear.to_system(), seed=seed).admitted
        results.append({"kind": kind, "branch": fam.branch, "subcase": "", "passed": ok and linear_ok})
        for tag in list_subcases(kind):
            fam = xi_zero_family(XiZeroData(kind, _subcase_params(kind, tag)), tag)
            ok = all(ec.is_zero(item, seed=seed) for item in verify_family(fam))
            results.append({"kind": kind, "branch": fam.branch, "subcase": tag, "passed": ok})
    return {"total": len(results), "passed": sum(item["passed"] for item in results), "families": results}


def jordan_corpus(seed: int, count: int = 1000) -> dict:
    rng = np.random.default_rng(seed)
    worst = 0.0
    ill = 0
    failures = 0
    for _ in range(count):
        A = rng.integers(-5, 6, size=(3, 3)).astype(float)
        try:
            form = jordanize(A)
        except IllConditioned:
            ill += 1
            continue
        residual = reconstruction_residual(form, A)
        worst = max(worst, residual)
        if residual > JORDAN_RESIDUAL_TOLERANCE * (1.0 + float(np.max(np.abs(A)))):
            failures += 1
    return {"total": count, "ill_conditioned": ill, "failures": failures, "worst_residual": worst}


def main() -> int:
    args = sys.argv[1:]
    app = create_app()
    with app.app_context():
        seed = parse_int(args[0] if args else None, app.config["LIE3_SEED"])
        draws = parse_int(args[1] if len(args) > 1 else None, app.config["LIE3_DRAWS"])
        started = time.perf_counter()

        theorem = theorem_report_to_json(theorem_suite(seed=seed, draws=draws, workers=app.config["LIE3_WORKERS"]))
        family_summary = families(seed)
        corpus = jordan_corpus(seed)
        mutations = mutation_suite(seed=seed, count=100)

        summary = {
            "seed": seed,
            "theorem": {key: theorem[key] for key in ("draws", "total", "all_passed")},
            "families": {key: family_summary[key] for key in ("total", "passed")},
            "jordan": corpus,
            "mutations": {"total": mutations.total, "rejected": mutations.rejected},
            "seconds": round(time.perf_counter() - started, 2),
        }
        print(dump_json(summary, pretty=True))

        ok = (
            theorem["all_passed"]
            and family_summary["passed"] == family_summary["total"]
            and corpus["failures"] == 0
            and corpus["ill_conditioned"] * 100 < corpus["total"]
            and mutations.rejected * 100 >= mutations.total * 99
        )
        if not ok:
            app.logger.warning("Some batteries failed; see the summary above")
        return 0 if ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
