from __future__ import annotations

import logging
from dataclasses import dataclass

import sympy as sp

from constants import DEFAULT_SAMPLES, DEFAULT_SEED, RESERVED_NAMES
from app.services.errors import PayloadError
from app.services import expr_core as ec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PointGenerator:
    """xi*d/dx + eta1*d/dy + eta2*d/dz + eta3*d/du.

    ``xi`` is the full coefficient of d/dx; the factor-2 convention used in
    hand calculations (2*xi on d/dx) is never exposed here.
    """

    xi: sp.Expr
    eta: tuple[sp.Expr, sp.Expr, sp.Expr]

    def __post_init__(self):
        xi = ec.normalize(ec.as_expr(self.xi))
        eta = tuple(ec.normalize(ec.as_expr(item)) for item in self.eta)
        if len(eta) != 3:
            raise PayloadError("Generator needs exactly three eta components")
        if xi.has(*ec.DEPENDENT):
            raise PayloadError("xi may depend on x only")
        for part in (xi, *eta):
            if part.has(*ec.FIRST_DERIVATIVES, *ec.SECOND_DERIVATIVES):
                raise PayloadError("Generator components may not contain derivative symbols")
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "eta", eta)

    @classmethod
    def translation(cls) -> "PointGenerator":
        return cls(sp.Integer(1), (0, 0, 0))

    @classmethod
    def scaling(cls) -> "PointGenerator":
        return cls(sp.Integer(0), ec.DEPENDENT)

    @classmethod
    def linear(cls, A, shift=(0, 0, 0), xi=0) -> "PointGenerator":
        """(A*y + shift) . grad, optionally with an x-translation part ``xi``."""
        A = sp.Matrix(A)
        field = A * sp.Matrix(ec.DEPENDENT) + sp.Matrix([ec.as_expr(item) for item in shift])
        return cls(ec.as_expr(xi), tuple(field))

    def apply(self, e) -> sp.Expr:
        """Action of the (unprolonged) vector field on a function of (x, y, z, u)."""
        e = ec.as_expr(e)
        total = self.xi * sp.diff(e, ec.x)
        for coeff, var in zip(self.eta, ec.DEPENDENT):
            total += coeff * sp.diff(e, var)
        return total

    def plus(self, other: "PointGenerator") -> "PointGenerator":
        return PointGenerator(
            self.xi + other.xi,
            tuple(a + b for a, b in zip(self.eta, other.eta)),
        )

    def scaled(self, factor) -> "PointGenerator":
        factor = ec.as_expr(factor)
        return PointGenerator(factor * self.xi, tuple(factor * item for item in self.eta))

    def linear_parts(self) -> tuple[sp.Matrix, sp.Matrix] | None:
        """(M(x), zeta(x)) with eta = M*y + zeta, or None when eta is not affine in (y, z, u)."""
        M = sp.zeros(3, 3)
        for i, component in enumerate(self.eta):
            for j, var in enumerate(ec.DEPENDENT):
                derivative = ec.differentiate(component, var)
                if derivative.has(*ec.DEPENDENT):
                    return None
                M[i, j] = derivative
        zeta = sp.Matrix(
            [ec.substitute(component, {"y": 0, "z": 0, "u": 0}) for component in self.eta]
        )
        return M, zeta

    def is_linear_ansatz(self) -> bool:
        """eta = (xi'/2 + K) y + zeta(x) with constant K."""
        parts = self.linear_parts()
        if parts is None:
            return False
        M, _ = parts
        K = M - sp.eye(3) * sp.diff(self.xi, ec.x) / 2
        return all(ec.is_zero(ec.differentiate(entry, ec.x)) for entry in K)


@dataclass(frozen=True)
class SecondOrderSystem:
    F: sp.Expr
    G: sp.Expr
    H: sp.Expr

    def __post_init__(self):
        values = tuple(ec.normalize(ec.as_expr(item)) for item in (self.F, self.G, self.H))
        object.__setattr__(self, "F", values[0])
        object.__setattr__(self, "G", values[1])
        object.__setattr__(self, "H", values[2])
        self.validate()

    def validate(self) -> None:
        for value in self.rhs:
            reserved = ec.free_symbol_names(value) & RESERVED_NAMES
            if reserved:
                raise PayloadError(
                    f"Derivative symbols {sorted(reserved)} are not allowed in a system"
                )

    @property
    def rhs(self) -> tuple[sp.Expr, sp.Expr, sp.Expr]:
        return (self.F, self.G, self.H)

    @classmethod
    def free_particle(cls) -> "SecondOrderSystem":
        return cls(0, 0, 0)


@dataclass(frozen=True)
class Prolongation:
    first: tuple[sp.Expr, sp.Expr, sp.Expr]
    second: tuple[sp.Expr, sp.Expr, sp.Expr]


@dataclass(frozen=True)
class Residuals:
    components: tuple[sp.Expr, sp.Expr, sp.Expr]

    def __iter__(self):
        return iter(self.components)

    def __getitem__(self, idx):
        return self.components[idx]

    @property
    def has_first_derivatives(self) -> bool:
        return any(item.has(*ec.FIRST_DERIVATIVES) for item in self.components)

    @property
    def is_structurally_zero(self) -> bool:
        return all(item == 0 for item in self.components)


@dataclass(frozen=True)
class Admission:
    admitted: bool
    residuals: Residuals


def total_derivative(e) -> sp.Expr:
    e = ec.as_expr(e)
    result = sp.diff(e, ec.x)
    for dep, first, second in zip(ec.DEPENDENT, ec.FIRST_DERIVATIVES, ec.SECOND_DERIVATIVES):
        result += first * sp.diff(e, dep) + second * sp.diff(e, first)
    return result


def prolong2(X: PointGenerator) -> Prolongation:
    dxi = total_derivative(X.xi)
    first = tuple(
        total_derivative(eta) - dep_first * dxi
        for eta, dep_first in zip(X.eta, ec.FIRST_DERIVATIVES)
    )
    second = tuple(
        total_derivative(zeta) - dep_second * dxi
        for zeta, dep_second in zip(first, ec.SECOND_DERIVATIVES)
    )
    return Prolongation(
        first=tuple(ec.normalize(item) for item in first),
        second=tuple(ec.normalize(item) for item in second),
    )


def determining_residual(X: PointGenerator, S: SecondOrderSystem) -> Residuals:
    """zeta2_i - X(F_i) on the solutions y'' = F, z'' = G, u'' = H."""
    prolonged = prolong2(X)
    on_shell = dict(zip(ec.SECOND_DERIVATIVES, S.rhs))
    components = []
    for zeta2, rhs in zip(prolonged.second, S.rhs):
        residual = zeta2.xreplace(on_shell) - X.apply(rhs)
        components.append(ec.normalize(residual))
    return Residuals(tuple(components))


def check_admitted(
    X: PointGenerator,
    S: SecondOrderSystem,
    seed: int = DEFAULT_SEED,
    samples: int = DEFAULT_SAMPLES,
    exact: bool = False,
) -> Admission:
    residuals = determining_residual(X, S)
    if residuals.is_structurally_zero:
        return Admission(admitted=True, residuals=residuals)
    admitted = all(
        ec.is_zero(component, seed=seed, samples=samples, allow_sampling=not exact)
        for component in residuals
    )
    if not admitted:
        logger.debug("Generator %s rejected by %s", X, S)
    return Admission(admitted=admitted, residuals=residuals)


@dataclass(frozen=True)
class TrivialGenerators:
    scaling: PointGenerator
    template: PointGenerator
    constraints: tuple[sp.Expr, sp.Expr, sp.Expr]


def zeta_functions() -> tuple[sp.Expr, sp.Expr, sp.Expr]:
    return tuple(ec.apply_opaque(f"zeta{i}", ec.x) for i in (1, 2, 3))


def trivial_generators(L) -> TrivialGenerators:
    """Scaling y.grad and the superposition template zeta(x).grad with zeta'' = C zeta."""
    zeta = zeta_functions()
    C = sp.Matrix(L.C)
    Cz = C * sp.Matrix(zeta)
    constraints = tuple(
        ec.normalize(sp.diff(zeta[i], ec.x, 2) - Cz[i]) for i in range(3)
    )
    return TrivialGenerators(
        scaling=PointGenerator.scaling(),
        template=PointGenerator(0, zeta),
        constraints=constraints,
    )
