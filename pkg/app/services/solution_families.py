"""General solutions of the determining equations for linear generators.

Two branches are covered.  For xi != 0 the generator is normalized to
``d/dx + (A y).grad`` and the family is ``e^{Ax} Phi(s, v, w)`` with
invariants ``e^{-Ax} y``.  For xi = 0 the generator is ``(A y + h(x)).grad``
with x acting as a parameter; every subcase is described by a flow
parameter ``tau`` (``X tau = 1``), two invariants and a fundamental matrix
``M`` with ``X M = A M``, and the family is

    F = M Phi(x, I1, I2) + G(tau) h''

where ``G' = A G + 1`` along the flow.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import sympy as sp

from constants import BRANCH_XI_NONZERO, BRANCH_XI_ZERO, JORDAN_KINDS, XI_ZERO_SUBCASES
from app.services.errors import DegenerateParams, InconsistentPredicate, PayloadError, UnknownSubcase
from app.services import expr_core as ec
from app.services.canonical_systems import LinearSystem
from app.services.jordan import PARAM_NAMES, JordanForm
from app.services.lie_symmetry import PointGenerator, Residuals, SecondOrderSystem, determining_residual

logger = logging.getLogger(__name__)

TEMPLATE_NAMES = ("f", "g", "h")

# Index groups of each Jordan kind and the parameter deciding whether the
# group is nilpotent (None: the group is always invertible).
_GROUPS = {
    "J1": (((0,), "a"), ((1,), "b"), ((2,), "d")),
    "J2": (((0,), "a"), ((1, 2), None)),
    "J3": (((0,), "a"), ((1, 2), "b")),
    "J4": (((0, 1, 2), "a"),),
}


@dataclass(frozen=True)
class SolutionFamily:
    kind: str
    branch: str
    subcase: str
    invariants: dict[str, sp.Expr]
    flow: str
    arguments: tuple[str, ...]
    F: sp.Expr
    G: sp.Expr
    H: sp.Expr
    generator: PointGenerator
    params: dict[str, sp.Expr] = field(default_factory=dict)
    shifts: tuple[sp.Expr, sp.Expr, sp.Expr] = (sp.Integer(0), sp.Integer(0), sp.Integer(0))

    @property
    def system(self) -> SecondOrderSystem:
        return SecondOrderSystem(self.F, self.G, self.H)


@dataclass(frozen=True)
class XiZeroData:
    kind: str
    params: dict[str, sp.Expr]
    shifts: tuple[sp.Expr, sp.Expr, sp.Expr] | None = None

    @classmethod
    def from_jordan(cls, form: JordanForm, shifts=None) -> "XiZeroData":
        return cls(form.kind, dict(form.rational_params()), shifts)


def list_subcases(kind: str) -> tuple[str, ...]:
    if kind not in XI_ZERO_SUBCASES:
        raise PayloadError(f"Unknown Jordan kind '{kind}'")
    return XI_ZERO_SUBCASES[kind]


def parse_subcase(tag: str) -> dict[str, bool]:
    """'a!=0,h1=0' -> {'a': True, 'h1': False}; True means nonzero."""
    predicates: dict[str, bool] = {}
    for part in tag.split(","):
        part = part.strip()
        if part.endswith("!=0"):
            predicates[part[:-3]] = True
        elif part.endswith("=0"):
            predicates[part[:-2]] = False
        else:
            raise UnknownSubcase(f"Malformed predicate '{part}' in subcase '{tag}'")
    return predicates


def _jordan_params(kind: str, params) -> dict[str, sp.Expr]:
    if kind not in JORDAN_KINDS:
        raise PayloadError(f"Unknown Jordan kind '{kind}'")
    params = dict(params or {})
    unknown = sorted(set(params) - set(PARAM_NAMES[kind]))
    if unknown:
        raise PayloadError(f"Unknown parameters for {kind}: {', '.join(unknown)}")
    values = {name: ec.as_expr(params.get(name, 0)) for name in PARAM_NAMES[kind]}
    if kind == "J2" and values["c"].is_number and values["c"] == 0:
        raise DegenerateParams("J2 needs c != 0")
    return values


def jordan_block(kind: str, p: dict[str, sp.Expr]) -> sp.Matrix:
    a = p.get("a", 0)
    if kind == "J1":
        return sp.diag(a, p["b"], p["d"])
    if kind == "J2":
        return sp.Matrix([[a, 0, 0], [0, p["b"], p["c"]], [0, -p["c"], p["b"]]])
    if kind == "J3":
        return sp.Matrix([[a, 0, 0], [0, p["b"], 1], [0, 0, p["b"]]])
    return sp.Matrix([[a, 1, 0], [0, a, 1], [0, 0, a]])


def flow_matrix(kind: str, p: dict[str, sp.Expr], t) -> sp.Matrix:
    """Closed form of exp(A t) for the Jordan block of ``kind``."""
    a = p.get("a", 0)
    if kind == "J1":
        return sp.diag(sp.exp(a * t), sp.exp(p["b"] * t), sp.exp(p["d"] * t))
    if kind == "J2":
        b, c = p["b"], p["c"]
        grow = sp.exp(b * t)
        return sp.Matrix(
            [
                [sp.exp(a * t), 0, 0],
                [0, grow * sp.cos(c * t), grow * sp.sin(c * t)],
                [0, -grow * sp.sin(c * t), grow * sp.cos(c * t)],
            ]
        )
    if kind == "J3":
        grow = sp.exp(p["b"] * t)
        return sp.Matrix([[sp.exp(a * t), 0, 0], [0, grow, grow * t], [0, 0, grow]])
    grow = sp.exp(a * t)
    return grow * sp.Matrix([[1, t, t**2 / 2], [0, 1, t], [0, 0, 1]])


def _template(arguments) -> sp.Matrix:
    return sp.Matrix([ec.apply_opaque(name, *arguments) for name in TEMPLATE_NAMES])


# ---------------------------------------------------------------------------
# xi != 0
# ---------------------------------------------------------------------------


def xi_nonzero_family(kind: str, params) -> SolutionFamily:
    p = _jordan_params(kind, params)
    A = jordan_block(kind, p)
    Y = sp.Matrix(ec.DEPENDENT)
    s, v, w = (ec.normalize(item) for item in flow_matrix(kind, p, -ec.x) * Y)
    rhs = flow_matrix(kind, p, ec.x) * _template((s, v, w))
    generator = PointGenerator(1, tuple(A * Y))
    return SolutionFamily(
        kind=kind,
        branch=BRANCH_XI_NONZERO,
        subcase="",
        invariants={"s": s, "v": v, "w": w},
        flow="x",
        arguments=("s", "v", "w"),
        F=rhs[0],
        G=rhs[1],
        H=rhs[2],
        generator=generator,
        params=p,
    )


# ---------------------------------------------------------------------------
# xi = 0
# ---------------------------------------------------------------------------


@dataclass
class _Context:
    p: dict[str, sp.Expr]
    h: tuple[sp.Expr, sp.Expr, sp.Expr]
    bar: tuple[sp.Expr, sp.Expr, sp.Expr]

    @property
    def Y(self):
        return self.bar[0]

    @property
    def Z(self):
        return self.bar[1]

    @property
    def U(self):
        return self.bar[2]


@dataclass
class _Flow:
    tau: sp.Expr
    invariants: dict[str, sp.Expr]
    flow: str
    arguments: tuple[str, ...]
    M: sp.Matrix | None = None


def _j1_flow(tag: str, ctx: _Context) -> _Flow:
    a, b, d = ctx.p["a"], ctx.p["b"], ctx.p["d"]
    y, z, u = ec.DEPENDENT
    h1, h2, h3 = ctx.h
    ln = sp.log
    if tag == "a!=0,b!=0,d!=0":
        tau = ln(ctx.Y) / a
        s = sp.exp(a * ln(ctx.Z) - b * ln(ctx.Y))
        v = sp.exp(b * ln(ctx.U) - d * ln(ctx.Z))
    elif tag == "a!=0,b!=0,d=0":
        tau = ln(ctx.Y) / a
        s = sp.exp(a * ln(ctx.Z) - b * ln(ctx.Y))
        v = u - h3 * ln(ctx.Z) / b
    elif tag == "a!=0,b=0,d=0":
        tau = ln(ctx.Y) / a
        s = z - h2 * tau
        v = u - h3 * tau
    elif tag == "a=0,b=0,d=0,h1!=0":
        tau = y / h1
        s = z - h2 * y / h1
        v = u - h3 * y / h1
    else:
        tau = z / h2
        s = u - h3 * z / h2
        v = y
    return _Flow(tau, {"s": s, "v": v, "w": tau}, "w", ("x", "s", "v"))


def _rotation_invariants(ctx: _Context, tau) -> tuple[sp.Expr, sp.Expr]:
    b, c = ctx.p["b"], ctx.p["c"]
    decay = sp.exp(-b * tau)
    v = decay * (ctx.Z * sp.cos(c * tau) - ctx.U * sp.sin(c * tau))
    w = decay * (ctx.Z * sp.sin(c * tau) + ctx.U * sp.cos(c * tau))
    return v, w


def _j2_flow(tag: str, ctx: _Context) -> _Flow:
    y = ec.y
    h1 = ctx.h[0]
    if tag == "a!=0":
        tau = sp.log(ctx.Y) / ctx.p["a"]
    elif tag == "a=0,h1!=0":
        tau = y / h1
    else:
        b, c = ctx.p["b"], ctx.p["c"]
        angle = sp.atan(ctx.Z / ctx.U)
        tau = angle / c
        v = sp.log(ctx.Z**2 + ctx.U**2) - 2 * b * angle / c
        M = sp.Matrix([[1, 0, 0], [0, ctx.U, ctx.Z], [0, -ctx.Z, ctx.U]])
        return _Flow(tau, {"s": tau, "v": v, "w": y}, "s", ("x", "v", "w"), M)
    v, w = _rotation_invariants(ctx, tau)
    return _Flow(tau, {"s": tau, "v": v, "w": w}, "s", ("x", "v", "w"))


def _j3_flow(tag: str, ctx: _Context) -> _Flow:
    y, z, u = ec.DEPENDENT
    h1, h2, h3 = ctx.h
    predicates = parse_subcase(tag)
    if predicates["a"]:
        tau = sp.log(ctx.Y) / ctx.p["a"]
    elif predicates.get("h1"):
        tau = y / h1
    else:
        tau = None

    if predicates["b"]:
        if tau is None:
            tau = sp.log(ctx.U) / ctx.p["b"]
            return _Flow(tau, {"s": tau, "v": ctx.Z / ctx.U - tau, "w": y}, "s", ("x", "v", "w"))
        decay = sp.exp(-ctx.p["b"] * tau)
        v = decay * (ctx.Z - tau * ctx.U)
        w = decay * ctx.U
        return _Flow(tau, {"s": tau, "v": v, "w": w}, "s", ("x", "v", "w"))

    moving = u + h2
    if tau is not None:
        if predicates["h3"]:
            w = u - h3 * tau
            v = z - moving * tau + h3 * tau**2 / 2
        else:
            w = u
            v = z - moving * tau
        return _Flow(tau, {"s": tau, "v": v, "w": w}, "s", ("x", "v", "w"))
    if predicates["h3"]:
        tau = moving / h3
        return _Flow(tau, {"s": tau, "v": z - moving**2 / (2 * h3), "w": y}, "s", ("x", "v", "w"))
    tau = z / moving
    return _Flow(tau, {"s": tau, "v": y, "w": u}, "s", ("x", "v", "w"))


def _j4_flow(tag: str, ctx: _Context) -> _Flow:
    y, z, u = ec.DEPENDENT
    h1, h2, h3 = ctx.h
    if tag == "a!=0":
        tau = sp.log(ctx.U) / ctx.p["a"]
        v = ctx.Z / ctx.U - tau
        w = ctx.Y / ctx.U - tau * ctx.Z / ctx.U + tau**2 / 2
    elif tag == "a=0,h3!=0":
        tau = (u + h2) / h3
        v = z + h1 - (u + h2) ** 2 / (2 * h3)
        w = y - v * tau - h3 * tau**3 / 6
    else:
        tau = (z + h1) / (u + h2)
        v = y - (z + h1) ** 2 / (2 * (u + h2))
        w = u
    return _Flow(tau, {"s": tau, "v": v, "w": w}, "s", ("x", "v", "w"))


_FLOWS: dict[str, Callable[[str, _Context], _Flow]] = {
    "J1": _j1_flow,
    "J2": _j2_flow,
    "J3": _j3_flow,
    "J4": _j4_flow,
}


def _is_exact_zero(value: sp.Expr) -> bool:
    return ec.normalize(value) == 0


def _check_predicates(tag: str, p: dict[str, sp.Expr], shifts) -> None:
    values = dict(p)
    values.update({f"h{i + 1}": shift for i, shift in enumerate(shifts)})
    for name, nonzero in parse_subcase(tag).items():
        if name not in values:
            raise UnknownSubcase(f"Subcase '{tag}' refers to unknown quantity '{name}'")
        zero = _is_exact_zero(values[name])
        if nonzero and zero:
            raise InconsistentPredicate(f"Subcase '{tag}' needs {name} != 0 but it is zero")
        if not nonzero and not zero:
            raise InconsistentPredicate(
                f"Subcase '{tag}' needs {name} = 0 but it is {ec.render(values[name])}"
            )


def _resolve_shifts(tag: str, shifts) -> tuple[sp.Expr, sp.Expr, sp.Expr]:
    if shifts is not None:
        if len(shifts) != 3:
            raise PayloadError("Exactly three shift functions are required")
        resolved = tuple(ec.as_expr(item) for item in shifts)
        for item in resolved:
            if item.has(*ec.DEPENDENT):
                raise PayloadError("Shift functions may depend on x only")
        return resolved
    predicates = parse_subcase(tag)
    return tuple(
        sp.Integer(0) if predicates.get(f"h{i}") is False else ec.apply_opaque(f"h{i}", ec.x)
        for i in (1, 2, 3)
    )


def _group_zero(tag: str, kind: str) -> list[tuple[tuple[int, ...], bool]]:
    predicates = parse_subcase(tag)
    groups = []
    for indices, name in _GROUPS[kind]:
        nilpotent = name is not None and not predicates.get(name, True)
        groups.append((indices, nilpotent))
    return groups


def _shift_and_particular(kind, tag, A, h, tau):
    """Shifted coordinates and the matrix G(tau) of the particular solution."""
    bar = list(ec.DEPENDENT)
    G = sp.zeros(3, 3)
    for indices, nilpotent in _group_zero(tag, kind):
        idx = list(indices)
        block = A.extract(idx, idx)
        if nilpotent:
            term = sp.eye(len(idx))
            local = sp.zeros(len(idx), len(idx))
            for k in range(len(idx)):
                local += term * tau ** (k + 1) / math.factorial(k + 1)
                term = term * block
        else:
            inverse = block.inv()
            offset = inverse * sp.Matrix([h[i] for i in idx])
            for pos, i in enumerate(idx):
                bar[i] = bar[i] + offset[pos]
            local = -inverse
        for r, i in enumerate(idx):
            for c, j in enumerate(idx):
                G[i, j] = local[r, c]
    return tuple(bar), G


def _shifted_coordinates(kind, tag, A, h) -> tuple[sp.Expr, sp.Expr, sp.Expr]:
    bar, _ = _shift_and_particular(kind, tag, A, h, sp.Integer(0))
    return bar


def xi_zero_family(data: XiZeroData, subcase: str) -> SolutionFamily:
    kind = data.kind
    if subcase not in list_subcases(kind):
        raise UnknownSubcase(f"Unknown subcase '{subcase}' for {kind}")
    p = _jordan_params(kind, data.params)
    shifts = _resolve_shifts(subcase, data.shifts)
    _check_predicates(subcase, p, shifts)

    A = jordan_block(kind, p)
    bar = _shifted_coordinates(kind, subcase, A, shifts)
    flow = _FLOWS[kind](subcase, _Context(p=p, h=shifts, bar=bar))
    _, G = _shift_and_particular(kind, subcase, A, shifts, flow.tau)
    M = flow.M if flow.M is not None else flow_matrix(kind, p, flow.tau)

    arguments = [ec.x if name == "x" else flow.invariants[name] for name in flow.arguments]
    second = sp.Matrix([sp.diff(item, ec.x, 2) for item in shifts])
    rhs = M * _template(arguments) + G * second

    Y = sp.Matrix(ec.DEPENDENT)
    generator = PointGenerator(0, tuple(A * Y + sp.Matrix(shifts)))
    invariants = {name: ec.normalize(value) for name, value in flow.invariants.items()}
    return SolutionFamily(
        kind=kind,
        branch=BRANCH_XI_ZERO,
        subcase=subcase,
        invariants=invariants,
        flow=flow.flow,
        arguments=flow.arguments,
        F=rhs[0],
        G=rhs[1],
        H=rhs[2],
        generator=generator,
        params=p,
        shifts=shifts,
    )


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------


def verify_family(fam: SolutionFamily) -> Residuals:
    return determining_residual(fam.generator, fam.system)


def default_alphas() -> sp.Matrix:
    return sp.Matrix(3, 3, lambda i, j: ec.symbol(f"alpha{i + 1}{j + 1}"))


def linearize_family(fam: SolutionFamily, alphas=None) -> LinearSystem:
    """Replace f, g, h by linear forms in (s, v, w) and read off C(x)."""
    if fam.branch != BRANCH_XI_NONZERO:
        raise PayloadError("Only xi-nonzero families can be linearized")
    alphas = default_alphas() if alphas is None else sp.Matrix(alphas).applyfunc(ec.as_expr)
    invariants = sp.Matrix([fam.invariants[name] for name in fam.arguments])
    linear = alphas * invariants
    replacements = {}
    for rhs in (fam.F, fam.G, fam.H):
        for atom in ec.opaque_atoms(rhs):
            if atom.opaque_name in TEMPLATE_NAMES and not any(atom.multi_index):
                replacements[atom] = linear[TEMPLATE_NAMES.index(atom.opaque_name)]
    system = SecondOrderSystem(*(rhs.xreplace(replacements) for rhs in (fam.F, fam.G, fam.H)))
    return LinearSystem.from_system(system)


@dataclass(frozen=True)
class JacobianCheck:
    independent: bool
    determinants: list[float]


def jacobian_rank_check(fam: SolutionFamily, seed: int = 42, points: int = 10) -> JacobianCheck:
    rows = [
        [sp.diff(fam.invariants[name], var) for var in ec.DEPENDENT]
        for name in ("s", "v", "w")
    ]
    determinant = sp.Matrix(rows).det()
    values = ec.sample_values(determinant, seed=seed, count=points)
    independent = all(abs(value) > 1e-12 for value in values)
    if not independent:
        logger.warning("Invariants of %s %s look functionally dependent", fam.kind, fam.subcase or fam.branch)
    return JacobianCheck(independent=independent, determinants=values)
