from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction

import sympy as sp

from constants import CASE_PARAM_NAMES
from app.services.errors import DegenerateParams, PayloadError
from app.services import expr_core as ec
from app.services.lie_symmetry import PointGenerator, SecondOrderSystem

CASES = tuple(sorted(CASE_PARAM_NAMES))


@dataclass(frozen=True)
class LinearSystem:
    """y'' = C(x) y with y = (y, z, u)."""

    C: sp.ImmutableMatrix

    def __post_init__(self):
        C = sp.Matrix(self.C)
        if C.shape != (3, 3):
            raise PayloadError("Coefficient matrix must be 3x3")
        C = C.applyfunc(lambda entry: ec.normalize(ec.as_expr(entry)))
        for entry in C:
            if entry.has(*ec.DEPENDENT, *ec.FIRST_DERIVATIVES, *ec.SECOND_DERIVATIVES):
                raise PayloadError("Coefficients may depend on x and parameters only")
        object.__setattr__(self, "C", sp.ImmutableMatrix(C))

    def to_system(self) -> SecondOrderSystem:
        rhs = self.C * sp.Matrix(ec.DEPENDENT)
        return SecondOrderSystem(rhs[0], rhs[1], rhs[2])

    @classmethod
    def from_system(cls, S: SecondOrderSystem) -> "LinearSystem":
        rows = []
        for component in S.rhs:
            row = [ec.differentiate(component, var) for var in ec.DEPENDENT]
            if any(entry.has(*ec.DEPENDENT) for entry in row):
                raise PayloadError("System is not linear in (y, z, u)")
            remainder = component - sum(coeff * var for coeff, var in zip(row, ec.DEPENDENT))
            if not ec.is_zero(remainder):
                raise PayloadError("System has terms that are not homogeneous in (y, z, u)")
            rows.append(row)
        return cls(sp.ImmutableMatrix(rows))

    def entry(self, i: int, j: int) -> sp.Expr:
        return self.C[i, j]


@dataclass(frozen=True)
class CanonicalParams:
    case: int
    values: dict[str, sp.Expr] = field(default_factory=dict)

    def __post_init__(self):
        if self.case not in CASE_PARAM_NAMES:
            raise PayloadError(f"Unknown canonical case {self.case!r}")
        names = CASE_PARAM_NAMES[self.case]
        unknown = sorted(set(self.values) - set(names))
        if unknown:
            raise PayloadError(f"Unknown parameters for case {self.case}: {', '.join(unknown)}")
        values = {name: ec.as_expr(self.values.get(name, 0)) for name in names}
        object.__setattr__(self, "values", values)

    def __getitem__(self, name: str) -> sp.Expr:
        return self.values[name]

    @classmethod
    def symbolic(cls, case: int) -> "CanonicalParams":
        """Every parameter left as a free real symbol; gamma (case 4) and c (case 2) stay nonzero."""
        return cls(case, {name: ec.symbol(name) for name in CASE_PARAM_NAMES[case]})

    def as_json(self) -> dict[str, str]:
        return {name: ec.render(value) for name, value in self.values.items()}


def _require_nonzero(value: sp.Expr, message: str) -> None:
    if value.is_number and value == 0:
        raise DegenerateParams(message)


def _case_1(p: CanonicalParams):
    alpha, beta = p["alpha"], p["beta"]
    e = sp.exp
    C = [
        [p["alpha11"], e(alpha * ec.x), p["alpha13"] * e(beta * ec.x)],
        [p["alpha21"] * e(-alpha * ec.x), p["alpha22"], p["alpha23"] * e((beta - alpha) * ec.x)],
        [p["alpha31"] * e(-beta * ec.x), p["alpha32"] * e((alpha - beta) * ec.x), p["alpha33"]],
    ]
    return C


def _case_2(p: CanonicalParams):
    alpha, c = p["alpha"], p["c"]
    _require_nonzero(c, "Case 2 needs c != 0; with c = 0 the system falls back to case 1")
    x = ec.x
    cos1, sin1 = sp.cos(c * x), sp.sin(c * x)
    cos2, sin2 = sp.cos(2 * c * x), sp.sin(2 * c * x)
    grow, decay = sp.exp(alpha * x), sp.exp(-alpha * x)
    beta, gamma, c1, c2 = p["beta"], p["gamma"], p["c1"], p["c2"]
    a21, a31 = p["alpha21"], p["alpha31"]
    C = [
        [p["alpha11"], grow * cos1, -grow * sin1],
        [
            decay * (a21 * cos1 + a31 * sin1),
            beta * cos2 + gamma * sin2 + c2,
            gamma * cos2 - beta * sin2 - c1,
        ],
        [
            decay * (a31 * cos1 - a21 * sin1),
            gamma * cos2 - beta * sin2 + c1,
            c2 - beta * cos2 - gamma * sin2,
        ],
    ]
    return C


def _case_3(p: CanonicalParams):
    alpha = p["alpha"]
    x = ec.x
    grow, decay = sp.exp(alpha * x), sp.exp(-alpha * x)
    C = [
        [p["alpha11"], grow * p["alpha12"], grow * (p["alpha13"] - p["alpha12"] * x)],
        [
            decay * (p["alpha21"] + p["alpha31"] * x),
            p["alpha22"] + p["alpha32"] * x,
            p["alpha23"] + (p["alpha33"] - p["alpha22"]) * x - p["alpha32"] * x**2,
        ],
        [decay * p["alpha31"], p["alpha32"], p["alpha33"] - p["alpha32"] * x],
    ]
    return C


def _case_4(p: CanonicalParams):
    gamma = p["gamma"]
    _require_nonzero(gamma, "Case 4 needs gamma != 0; gamma = 0 is reduced to the degenerate case H=0")
    x = ec.x
    weights = (1, -x, x**2 / 2)
    rows = (p["lambda"] + p["beta"] * x + gamma * x**2 / 2, p["beta"] + gamma * x, gamma)
    C = [[row * weight for weight in weights] for row in rows]
    return C


def canonical_generator(case: int, values: dict) -> PointGenerator:
    """The nontrivial generator paired with canonical case ``case``."""
    alpha = ec.as_expr(values.get("alpha", 0))
    if case == 1:
        beta = ec.as_expr(values.get("beta", 0))
        return PointGenerator(1, (0, -alpha * ec.z, -beta * ec.u))
    if case == 2:
        c = ec.as_expr(values.get("c", 0))
        return PointGenerator(1, (alpha * ec.y, c * ec.u, -c * ec.z))
    if case == 3:
        return PointGenerator(1, (alpha * ec.y, ec.u, 0))
    if case == 4:
        return PointGenerator(1, (ec.z, ec.u, 0))
    raise PayloadError(f"Unknown canonical case {case!r}")


_BUILDERS = {1: _case_1, 2: _case_2, 3: _case_3, 4: _case_4}


def build_canonical(case: int, p: CanonicalParams | dict) -> tuple[LinearSystem, PointGenerator]:
    if not isinstance(p, CanonicalParams):
        p = CanonicalParams(case, dict(p))
    if p.case != case:
        raise PayloadError(f"Parameters are for case {p.case}, not case {case}")
    C = _BUILDERS[case](p)
    return LinearSystem(sp.ImmutableMatrix(C)), canonical_generator(case, p.values)


def _draw(rng: random.Random, nonzero: bool = False) -> Fraction:
    while True:
        value = Fraction(rng.randint(-9, 9), rng.randint(1, 5))
        if value or not nonzero:
            return value


def random_params(case: int, rng: random.Random) -> CanonicalParams:
    values = {}
    for name in CASE_PARAM_NAMES[case]:
        nonzero = (case == 2 and name == "c") or (case == 4 and name == "gamma")
        values[name] = _draw(rng, nonzero=nonzero)
    return CanonicalParams(case, values)


@dataclass(frozen=True)
class Degeneracy:
    degenerate: bool
    klass: str | None = None
    permutation: tuple[int, int, int] | None = None


_DEGENERATE_PATTERNS = {
    "a": ((0, 1), (0, 2)),
    "b": ((0, 2), (1, 2)),
}


def is_degenerate(L: LinearSystem) -> Degeneracy:
    """Class (a): one equation decouples (c12=c13=0); class (b): c13=c23=0, up to relabelling."""
    zero = {(i, j): ec.is_zero(L.C[i, j]) for i in range(3) for j in range(3) if i != j}
    for klass, cells in _DEGENERATE_PATTERNS.items():
        for perm in itertools.permutations(range(3)):
            if all(zero[(perm[i], perm[j])] for i, j in cells):
                return Degeneracy(True, klass, perm)
    return Degeneracy(False)


def commutant_condition(A, L: LinearSystem) -> sp.Matrix:
    A = sp.Matrix(A).applyfunc(ec.as_expr)
    return (L.C * A - A * L.C).applyfunc(ec.normalize)
