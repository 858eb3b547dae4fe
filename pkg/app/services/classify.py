from __future__ import annotations

import itertools
import logging
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import sympy as sp

from constants import (
    CASE_PARAM_NAMES,
    DEFAULT_DRAWS,
    DEFAULT_SEED,
    DEFAULT_WORKERS,
    KIND_TO_CASE,
    VERDICT_CANONICAL,
    VERDICT_DEGENERATE,
    VERDICT_TRIVIAL_ONLY,
    VERDICT_UNCLASSIFIED,
)
from app.services.errors import DegenerateParams, UnsupportedAtoms
from app.services import expr_core as ec
from app.services.canonical_systems import (
    CanonicalParams,
    LinearSystem,
    build_canonical,
    canonical_generator,
    is_degenerate,
    random_params,
)
from app.services.jordan import JordanForm, jordanize
from app.services.lie_symmetry import PointGenerator, check_admitted

logger = logging.getLogger(__name__)

# Parameters fixed by the exponents and frequencies of C; the rest enter linearly.
NONLINEAR_PARAMS = {1: ("alpha", "beta"), 2: ("alpha", "c"), 3: ("alpha",), 4: ("alpha",)}


@dataclass
class TheoremCase:
    case: int
    jordan: JordanForm
    params: dict[str, Fraction]
    generator: PointGenerator


@dataclass
class ClassificationReport:
    verdict: str
    case: int | None = None
    params: dict[str, sp.Expr] = field(default_factory=dict)
    generator: PointGenerator | None = None
    residual: float = 0.0
    degeneracy: str | None = None
    commutant_dimension: int | None = None
    notes: list[str] = field(default_factory=list)


def _read_params(form: JordanForm) -> dict[str, Fraction]:
    r = form.rational_params()
    if form.kind == "J1":
        return {"alpha": r["a"] - r["b"], "beta": r["a"] - r["d"]}
    if form.kind in ("J2", "J3"):
        values = {"alpha": r["a"] - r["b"]}
        if form.kind == "J2":
            values["c"] = r["c"]
        return values
    return {"alpha": r["a"]}


def classify_by_matrix(A) -> TheoremCase:
    form = jordanize(A)
    case = KIND_TO_CASE[form.kind]
    params = _read_params(form)
    return TheoremCase(case=case, jordan=form, params=params, generator=canonical_generator(case, params))


# ---------------------------------------------------------------------------
# Atom decomposition
# ---------------------------------------------------------------------------


def _check_atom_class(expr: sp.Expr) -> None:
    for node in sp.preorder_traversal(expr):
        if isinstance(node, ec.OpaqueFunction) or (
            isinstance(node, sp.Function) and not isinstance(node, (sp.exp, sp.sin, sp.cos))
        ):
            raise UnsupportedAtoms(f"Unsupported function {ec.render(node)} in coefficient")
        if isinstance(node, (sp.exp, sp.sin, sp.cos)):
            rate = sp.diff(node.args[0], ec.x)
            if rate.has(ec.x):
                raise UnsupportedAtoms(f"Argument of {ec.render(node)} is not linear in x")
        if node.is_Pow and node.base.has(ec.x) and not (node.exp.is_Integer and node.exp >= 0):
            if not isinstance(node.base, sp.exp):
                raise UnsupportedAtoms(f"Non-polynomial power {ec.render(node)} in coefficient")


def _exp_factor(factor) -> sp.Expr | None:
    if isinstance(factor, sp.exp):
        return factor.args[0]
    if factor.is_Pow and isinstance(factor.base, sp.exp):
        return factor.base.args[0] * factor.exp
    return None


def _split_exponentials(expr: sp.Expr, rates: dict[sp.Expr, sp.Dummy]) -> sp.Expr:
    """Replace the exponential part of every term by one symbol per rate in x.

    exp(x) and exp(2x) then enter the polynomial as two independent generators.
    """
    terms = []
    for term in sp.Add.make_args(expr):
        rate, shift, factors = sp.Integer(0), sp.Integer(0), []
        for factor in sp.Mul.make_args(term):
            argument = _exp_factor(factor)
            if argument is None:
                factors.append(factor)
                continue
            slope = sp.diff(argument, ec.x)
            rate += slope
            shift += argument - slope * ec.x
        rate = ec.normalize(rate)
        if rate != 0:
            if rate not in rates:
                rates[rate] = sp.Dummy(f"exp{len(rates)}")
            factors.append(rates[rate])
        terms.append(sp.Mul(*factors) * sp.exp(ec.normalize(shift)))
    return sp.Add(*terms)


def coefficient_equations(exprs, unknowns=()) -> list[sp.Expr]:
    """Coefficients of every atom monomial (x^n, exp, sin, cos) in ``exprs``.

    ``exprs`` vanish identically in x exactly when every returned coefficient
    vanishes; with ``unknowns`` entering linearly the coefficients are linear
    equations in them.
    """
    rates: dict[sp.Expr, sp.Dummy] = {}
    split = [_split_exponentials(ec.normalize(item), rates) for item in exprs]
    trig = set()
    for expr in split:
        trig |= expr.atoms(sp.sin, sp.cos)
    gens = [ec.x, *rates.values(), *sorted(trig, key=sp.default_sort_key)]
    equations = []
    for expr in split:
        if expr == 0:
            continue
        try:
            poly = sp.Poly(expr, *gens)
        except sp.PolynomialError as exc:
            raise UnsupportedAtoms(f"Coefficient is not an atom polynomial: {exc}") from exc
        equations.extend(coeff for coeff in poly.coeffs() if coeff != 0)
    return equations


def commutant_dimension(L: LinearSystem) -> int:
    """Dimension of {A constant : C A - A C = 0 for all x}."""
    unknowns = sp.symbols("k0:9", real=True)
    A = sp.Matrix(3, 3, unknowns)
    commutator = L.C * A - A * L.C
    equations = coefficient_equations(list(commutator), unknowns)
    if not equations:
        return 9
    matrix, _ = sp.linear_eq_to_matrix(equations, unknowns)
    return 9 - matrix.rank()


# ---------------------------------------------------------------------------
# Template fitting
# ---------------------------------------------------------------------------


def _rates(entries) -> list[sp.Expr]:
    rates = {sp.Integer(0)}
    for entry in entries:
        for atom in entry.atoms(sp.exp):
            rates.add(ec.normalize(sp.diff(atom.args[0], ec.x)))
    return sorted(rates, key=sp.default_sort_key)


def _frequencies(entries) -> list[sp.Expr]:
    values = set()
    for entry in entries:
        for atom in entry.atoms(sp.sin, sp.cos):
            nu = ec.normalize(sp.diff(atom.args[0], ec.x))
            values |= {nu, -nu}
    return sorted(values, key=sp.default_sort_key)


def _case_1_betas(C: sp.Matrix, alpha: sp.Expr) -> set[sp.Expr]:
    """beta read off every cell that carries it: e^{bx}, e^{-bx}, e^{(b-a)x}, e^{(a-b)x}."""
    betas = set(_rates([C[0, 2]]))
    betas |= {-rate for rate in _rates([C[2, 0]])}
    betas |= {alpha + rate for rate in _rates([C[1, 2]])}
    betas |= {alpha - rate for rate in _rates([C[2, 1]])}
    return {ec.normalize(beta) for beta in betas}


def _candidates(case: int, C: sp.Matrix):
    """Exponents and frequencies to try; alpha is read off the first row only."""
    first_row = list(C[0, :])
    if case == 1:
        for alpha in _rates([C[0, 1]]):
            for beta in sorted(_case_1_betas(C, alpha), key=sp.default_sort_key):
                yield {"alpha": alpha, "beta": beta}
    elif case == 2:
        for alpha, c in itertools.product(_rates(first_row), _frequencies(first_row)):
            yield {"alpha": alpha, "c": c}
    elif case == 3:
        for alpha in _rates(first_row):
            yield {"alpha": alpha}
    else:
        yield {"alpha": sp.Integer(0)}


def _solve_linear(case: int, fixed: dict, C: sp.Matrix) -> dict[str, sp.Expr] | None:
    free = [name for name in CASE_PARAM_NAMES[case] if name not in NONLINEAR_PARAMS[case]]
    unknowns = [sp.Dummy(name, real=True) for name in free]
    values = dict(fixed)
    values.update(dict(zip(free, unknowns)))
    try:
        template, _ = build_canonical(case, CanonicalParams(case, values))
    except DegenerateParams:
        return None
    equations = coefficient_equations(list(template.C - C), unknowns)
    solution = {name: sp.Integer(0) for name in free}
    if equations:
        solutions = sp.linsolve(equations, unknowns)
        if solutions == sp.S.EmptySet:
            return None
        point = next(iter(solutions))
        for name, unknown, value in zip(free, unknowns, point):
            value = value.xreplace({other: 0 for other in unknowns})
            solution[name] = ec.normalize(value)
    values = dict(fixed)
    values.update(solution)
    return values


def _try_case(case: int, L: LinearSystem, seed: int):
    for fixed in _candidates(case, L.C):
        try:
            values = _solve_linear(case, fixed, L.C)
        except UnsupportedAtoms as exc:
            logger.debug("Case %d candidate %s skipped: %s", case, fixed, exc)
            continue
        if values is None:
            continue
        try:
            system, generator = build_canonical(case, CanonicalParams(case, values))
        except DegenerateParams:
            continue
        if not all(ec.is_zero(entry, seed=seed) for entry in system.C - L.C):
            continue
        admission = check_admitted(generator, L.to_system(), seed=seed)
        if admission.admitted:
            return values, generator, admission
    return None


def fit_canonical(L: LinearSystem, seed: int = DEFAULT_SEED) -> ClassificationReport:
    for entry in L.C:
        _check_atom_class(entry)
    degeneracy = is_degenerate(L)
    if degeneracy.degenerate:
        return ClassificationReport(
            verdict=VERDICT_DEGENERATE,
            degeneracy=degeneracy.klass,
            notes=[f"zero pattern of class ({degeneracy.klass}) under permutation {list(degeneracy.permutation)}"],
        )

    for case in (1, 2, 3, 4):
        fitted = _try_case(case, L, seed)
        if fitted is None:
            continue
        values, generator, admission = fitted
        notes = []
        if case == 4:
            notes.append("alpha does not enter the case 4 system and is reported as 0")
        return ClassificationReport(
            verdict=VERDICT_CANONICAL,
            case=case,
            params=values,
            generator=generator,
            residual=ec.max_abs_residual(admission.residuals, seed=seed),
            notes=notes,
        )

    dimension = commutant_dimension(L)
    constant = not any(entry.has(ec.x) for entry in L.C)
    if constant:
        return ClassificationReport(
            verdict=VERDICT_UNCLASSIFIED,
            commutant_dimension=dimension,
            notes=["constant-coefficient systems are outside the classification"],
        )
    if dimension == 1:
        return ClassificationReport(
            verdict=VERDICT_TRIVIAL_ONLY,
            commutant_dimension=dimension,
            notes=["only multiples of the identity commute with C(x)"],
        )
    return ClassificationReport(
        verdict=VERDICT_UNCLASSIFIED,
        commutant_dimension=dimension,
        notes=["no canonical template matched; supply an equivalence transform first"],
    )


# ---------------------------------------------------------------------------
# Theorem battery
# ---------------------------------------------------------------------------


@dataclass
class CaseResult:
    case: int
    generator_case: int
    draws: int = 0
    passed: int = 0
    failures: list[dict] = field(default_factory=list)

    @property
    def failed(self) -> int:
        return self.draws - self.passed


@dataclass
class TheoremReport:
    seed: int
    draws: int
    cases: list[CaseResult]

    @property
    def all_passed(self) -> bool:
        return all(result.failed == 0 for result in self.cases)

    @property
    def total(self) -> int:
        return sum(result.draws for result in self.cases)


def draw_rng(seed: int, case: int, index: int) -> random.Random:
    return random.Random(f"{seed}:{case}:{index}")


def run_draw(seed: int, case: int, generator_case: int, index: int) -> dict:
    """One admission check; plain data in and out so it can run in a worker process."""
    rng = draw_rng(seed, case, index)
    params = random_params(case, rng)
    system, generator = build_canonical(case, params)
    if generator_case != case:
        _, generator = build_canonical(generator_case, random_params(generator_case, rng))
    admission = check_admitted(generator, system.to_system(), seed=seed, exact=True)
    outcome = {"index": index, "admitted": admission.admitted}
    if not admission.admitted:
        outcome["params"] = params.as_json()
        outcome["residual"] = ec.max_abs_residual(admission.residuals, seed=seed)
    return outcome


def theorem_suite(
    seed: int = DEFAULT_SEED,
    draws: int = DEFAULT_DRAWS,
    pairing: dict[int, int] | None = None,
    workers: int = DEFAULT_WORKERS,
) -> TheoremReport:
    pairing = pairing or {}
    cases = [CaseResult(case=case, generator_case=pairing.get(case, case)) for case in (1, 2, 3, 4)]
    if draws <= 0:
        return TheoremReport(seed=seed, draws=0, cases=[])

    jobs = [(seed, result.case, result.generator_case, index) for result in cases for index in range(draws)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run_draw, *zip(*jobs)))
    else:
        outcomes = [run_draw(*job) for job in jobs]

    by_case = {result.case: result for result in cases}
    for (_, case, _, _), outcome in zip(jobs, outcomes):
        result = by_case[case]
        result.draws += 1
        if outcome["admitted"]:
            result.passed += 1
        else:
            result.failures.append(outcome)
    for result in cases:
        logger.info(
            "case %d with generator of case %d: %d/%d admitted",
            result.case,
            result.generator_case,
            result.passed,
            result.draws,
        )
    return TheoremReport(seed=seed, draws=draws, cases=cases)


@dataclass
class MutationReport:
    seed: int
    total: int
    rejected: int
    coincidental: list[dict] = field(default_factory=list)


def _mutate(case: int, generator: PointGenerator, rng: random.Random) -> tuple[str, PointGenerator]:
    if rng.random() < 0.5:
        other = rng.choice([item for item in (1, 2, 3, 4) if item != case])
        _, foreign = build_canonical(other, random_params(other, rng))
        return f"generator of case {other}", foreign
    weight = Fraction(rng.choice([-3, -2, -1, 1, 2, 3]), rng.randint(1, 4))
    extra = PointGenerator(0, (weight * ec.z, 0, 0))
    return f"extra term {weight}*z d/dy", generator.plus(extra)


def mutation_suite(seed: int = DEFAULT_SEED, count: int = 20) -> MutationReport:
    """Negative controls: mutated generators should not be admitted."""
    rejected = 0
    coincidental = []
    for index in range(count):
        rng = random.Random(f"mutation:{seed}:{index}")
        case = (index % 4) + 1
        params = random_params(case, rng)
        system, generator = build_canonical(case, params)
        label, mutated = _mutate(case, generator, rng)
        admission = check_admitted(mutated, system.to_system(), seed=seed)
        if admission.admitted:
            logger.warning("Mutation '%s' of case %d was admitted (draw %d)", label, case, index)
            coincidental.append({"index": index, "case": case, "mutation": label, "params": params.as_json()})
        else:
            rejected += 1
    return MutationReport(seed=seed, total=count, rejected=rejected, coincidental=coincidental)
