from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Union

import sympy as sp

from constants import REPARAM_DOMAIN, REPARAM_DOMAIN_SAMPLES
from app.services.errors import (
    EvaluationDomainError,
    NonInvertibleOnDomain,
    PayloadError,
    ReparamConstraintViolated,
    UnsupportedCoefficients,
)
from app.services import expr_core as ec
from app.services.canonical_systems import LinearSystem
from app.services.lie_symmetry import PointGenerator, SecondOrderSystem

logger = logging.getLogger(__name__)


def _x_only(value, label: str) -> sp.Expr:
    expr = ec.normalize(ec.as_expr(value))
    if expr.has(*ec.DEPENDENT, *ec.FIRST_DERIVATIVES, *ec.SECOND_DERIVATIVES):
        raise PayloadError(f"{label} may depend on x only")
    return expr


@dataclass(frozen=True)
class LinearChange:
    """y~ = P y with a constant nonsingular P."""

    P: sp.ImmutableMatrix
    kind = "linear"

    def __post_init__(self):
        P = sp.Matrix(self.P)
        if P.shape != (3, 3):
            raise PayloadError("P must be 3x3")
        P = P.applyfunc(ec.as_expr)
        if any(entry.free_symbols for entry in P):
            raise PayloadError("P must have constant entries")
        if P.det() == 0:
            raise PayloadError("P must be nonsingular")
        object.__setattr__(self, "P", sp.ImmutableMatrix(P))


@dataclass(frozen=True)
class Shift:
    """y~ = y + phi(x)."""

    phi: tuple[sp.Expr, sp.Expr, sp.Expr]
    kind = "shift"

    def __post_init__(self):
        if len(self.phi) != 3:
            raise PayloadError("Shift needs three functions")
        object.__setattr__(self, "phi", tuple(_x_only(item, "Shift function") for item in self.phi))


@dataclass(frozen=True)
class Reparam:
    """x~ = phi(x), y~ = psi(x) y."""

    phi: sp.Expr
    psi: sp.Expr
    kind = "reparam"

    def __post_init__(self):
        phi = _x_only(self.phi, "phi")
        psi = _x_only(self.psi, "psi")
        if ec.is_zero(sp.diff(phi, ec.x) * psi):
            raise PayloadError("phi' * psi must not vanish identically")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "psi", psi)


@dataclass(frozen=True)
class Composite:
    """Transforms applied left to right."""

    steps: tuple
    kind = "composite"


Transform = Union[LinearChange, Shift, Reparam, Composite]


def check_reparam(phi, psi) -> bool:
    phi, psi = ec.as_expr(phi), ec.as_expr(psi)
    condition = sp.diff(phi, ec.x, 2) * psi - 2 * sp.diff(phi, ec.x) * sp.diff(psi, ec.x)
    return ec.is_zero(condition)


def is_traceless(L: LinearSystem) -> bool:
    return ec.is_zero(L.C.trace())


# ---------------------------------------------------------------------------
# Reparametrization helpers
# ---------------------------------------------------------------------------


def _domain_points() -> list[sp.Rational]:
    low, high = (sp.Rational(str(bound)) for bound in REPARAM_DOMAIN)
    step = (high - low) / (REPARAM_DOMAIN_SAMPLES - 1)
    return [low + step * k for k in range(REPARAM_DOMAIN_SAMPLES)]


def _check_domain(T: Reparam) -> None:
    derivative = sp.diff(T.phi, ec.x)
    signs = set()
    for point in _domain_points():
        try:
            slope = float(ec.evaluate(derivative, {"x": point}))
            scale = float(ec.evaluate(T.psi, {"x": point}))
        except (EvaluationDomainError, ZeroDivisionError) as exc:
            raise NonInvertibleOnDomain(f"phi or psi undefined at x={point}: {exc}") from exc
        if slope == 0 or scale == 0:
            raise NonInvertibleOnDomain(f"phi' * psi vanishes at x={point}")
        signs.add(slope > 0)
    if len(signs) > 1:
        raise NonInvertibleOnDomain("phi' changes sign on the working domain")


def _inverse_phi(T: Reparam) -> sp.Expr:
    t = sp.Dummy("t", real=True)
    try:
        candidates = sp.solve(sp.Eq(T.phi.subs(ec.x, t), ec.x), t)
    except NotImplementedError as exc:
        raise NonInvertibleOnDomain(f"Cannot invert phi = {ec.render(T.phi)}") from exc
    midpoint = _domain_points()[REPARAM_DOMAIN_SAMPLES // 2]
    image = T.phi.subs(ec.x, midpoint)
    matching = []
    for candidate in candidates:
        try:
            value = complex(sp.N(candidate.subs(ec.x, image)))
        except (TypeError, ValueError) as exc:
            logger.debug("Skipping inverse candidate %s: %s", candidate, exc)
            continue
        if abs(value.imag) < 1e-9 and abs(value.real - float(midpoint)) < 1e-9:
            matching.append(candidate)
    if len(matching) != 1:
        raise NonInvertibleOnDomain(
            f"phi = {ec.render(T.phi)} has {len(matching)} admissible inverses on the working domain"
        )
    return matching[0]


def _to_new_coordinates(expr: sp.Expr, T: Reparam) -> sp.Expr:
    """Express a function of (x, y) through x~ and y~ = psi y."""
    scaled = {var: var / T.psi for var in ec.DEPENDENT}
    expr = expr.subs(scaled, simultaneous=True)
    return ec.normalize(expr.subs(ec.x, _inverse_phi(T)))


def _reparam_rhs(T: Reparam, S: SecondOrderSystem) -> list[sp.Expr]:
    phi1 = sp.diff(T.phi, ec.x)
    phi2 = sp.diff(T.phi, ec.x, 2)
    psi, psi1, psi2 = T.psi, sp.diff(T.psi, ec.x), sp.diff(T.psi, ec.x, 2)
    on_shell = dict(zip(ec.SECOND_DERIVATIVES, S.rhs))
    result = []
    for dep, first, second in zip(ec.DEPENDENT, ec.FIRST_DERIVATIVES, ec.SECOND_DERIVATIVES):
        numerator = (second * psi + 2 * first * psi1 + dep * psi2) * phi1 - (first * psi + dep * psi1) * phi2
        expr = (numerator / phi1**3).xreplace(on_shell)
        leftover = sp.diff(expr, first)
        if not ec.is_zero(leftover):
            raise ReparamConstraintViolated(
                f"First-derivative term {ec.render(ec.normalize(leftover))} does not cancel"
            )
        result.append(expr.xreplace({first: 0}))
    return result


# ---------------------------------------------------------------------------
# Systems
# ---------------------------------------------------------------------------


def transform_system(T: Transform, S):
    if isinstance(S, LinearSystem):
        return LinearSystem.from_system(transform_system(T, S.to_system()))
    if isinstance(T, Composite):
        for step in T.steps:
            S = transform_system(step, S)
        return S
    if isinstance(T, LinearChange):
        Pinv = T.P.inv()
        old = Pinv * sp.Matrix(ec.DEPENDENT)
        bindings = dict(zip(ec.DEPENDENT, old))
        rhs = T.P * sp.Matrix([item.subs(bindings, simultaneous=True) for item in S.rhs])
        return SecondOrderSystem(*rhs)
    if isinstance(T, Shift):
        bindings = {var: var - phi for var, phi in zip(ec.DEPENDENT, T.phi)}
        rhs = [
            item.subs(bindings, simultaneous=True) + sp.diff(phi, ec.x, 2)
            for item, phi in zip(S.rhs, T.phi)
        ]
        return SecondOrderSystem(*rhs)
    if isinstance(T, Reparam):
        _check_domain(T)
        return SecondOrderSystem(*(_to_new_coordinates(expr, T) for expr in _reparam_rhs(T, S)))
    raise PayloadError(f"Unknown transform {T!r}")


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


def _pushforward_old(T: Transform, X: PointGenerator) -> tuple[sp.Expr, list[sp.Expr]]:
    """New generator components written in the old coordinates."""
    if isinstance(T, LinearChange):
        return X.xi, list(T.P * sp.Matrix(X.eta))
    if isinstance(T, Shift):
        return X.xi, [eta + X.xi * sp.diff(phi, ec.x) for eta, phi in zip(X.eta, T.phi)]
    if isinstance(T, Reparam):
        xi = X.xi * sp.diff(T.phi, ec.x)
        eta = [item * T.psi + dep * sp.diff(T.psi, ec.x) * X.xi for item, dep in zip(X.eta, ec.DEPENDENT)]
        return xi, eta
    raise PayloadError(f"Unknown transform {T!r}")


def pushforward(T: Transform, X: PointGenerator) -> PointGenerator:
    if isinstance(T, Composite):
        for step in T.steps:
            X = pushforward(step, X)
        return X
    xi, eta = _pushforward_old(T, X)
    if isinstance(T, LinearChange):
        bindings = dict(zip(ec.DEPENDENT, T.P.inv() * sp.Matrix(ec.DEPENDENT)))
        return PointGenerator(xi, tuple(item.subs(bindings, simultaneous=True) for item in eta))
    if isinstance(T, Shift):
        bindings = {var: var - phi for var, phi in zip(ec.DEPENDENT, T.phi)}
        return PointGenerator(xi, tuple(item.subs(bindings, simultaneous=True) for item in eta))
    _check_domain(T)
    return PointGenerator(
        _to_new_coordinates(xi, T), tuple(_to_new_coordinates(item, T) for item in eta)
    )


def _steps(T: Transform) -> tuple:
    return T.steps if isinstance(T, Composite) else (T,)


def compose(T2: Transform, T1: Transform) -> Transform:
    """T2 after T1."""
    if isinstance(T1, LinearChange) and isinstance(T2, LinearChange):
        return LinearChange(T2.P * T1.P)
    return Composite(_steps(T1) + _steps(T2))


def inverse(T: Transform) -> Transform:
    if isinstance(T, LinearChange):
        return LinearChange(T.P.inv())
    if isinstance(T, Shift):
        return Shift(tuple(-phi for phi in T.phi))
    if isinstance(T, Reparam):
        back = _inverse_phi(T)
        return Reparam(back, 1 / T.psi.subs(ec.x, back))
    return Composite(tuple(inverse(step) for step in reversed(T.steps)))


# ---------------------------------------------------------------------------
# Normalization of a linear generator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Normalization:
    transforms: tuple
    generator: PointGenerator
    A: sp.ImmutableMatrix
    residual: float


def _matrix_exponential(K: sp.Matrix, theta: sp.Expr) -> sp.Matrix:
    t = sp.Dummy("t", real=True)
    try:
        E = (K * t).exp()
    except (NotImplementedError, ValueError) as exc:
        raise UnsupportedCoefficients(f"Cannot exponentiate K: {exc}") from exc

    def realify(entry):
        entry = sp.expand(entry.rewrite(sp.cos))
        if entry.has(sp.I):
            entry = sp.simplify(entry)
        if entry.has(sp.I):
            raise UnsupportedCoefficients("Matrix exponential of K is not real in closed form")
        return entry

    return E.applyfunc(realify).subs(t, theta)


def _integrate(expr: sp.Expr) -> sp.Expr:
    result = sp.integrate(expr, ec.x)
    if result.has(sp.Integral):
        raise UnsupportedCoefficients(f"No closed-form antiderivative for {ec.render(expr)}")
    return result


def _shift_removing_zeta(xi, M, K, zeta) -> Shift | None:
    if all(ec.is_zero(item) for item in zeta):
        return None
    theta = _integrate(1 / xi)
    fundamental = sp.sqrt(xi) * _matrix_exponential(K, theta)
    inverse_fundamental = fundamental.inv()
    source = inverse_fundamental * (-zeta / xi)
    phi = fundamental * source.applyfunc(_integrate)
    residual = xi * phi.diff(ec.x) - M * phi + zeta
    if not all(ec.is_zero(item) for item in residual):
        raise UnsupportedCoefficients("Shift ODE solution failed verification")
    return Shift(tuple(phi))


def normalize_generator(X: PointGenerator) -> Normalization:
    """Bring xi d/dx + (M y + zeta).grad to d/dx + (A y).grad with constant A."""
    if ec.is_zero(X.xi):
        raise PayloadError("normalize_generator needs xi != 0")
    parts = X.linear_parts()
    if parts is None:
        raise UnsupportedCoefficients("eta is not affine in (y, z, u)")
    M, zeta = parts
    xi = X.xi
    xi1 = sp.diff(xi, ec.x)
    K = (M - sp.eye(3) * xi1 / 2).applyfunc(ec.normalize)
    if not all(ec.is_zero(sp.diff(entry, ec.x)) for entry in K):
        raise UnsupportedCoefficients("M - xi'/2 I is not constant")

    transforms = []
    shift = _shift_removing_zeta(xi, M, K, zeta)
    if shift is not None:
        transforms.append(shift)

    Y = sp.Matrix(ec.DEPENDENT)
    if ec.is_zero(xi1):
        A = K / xi
        expected_xi, expected_eta = xi, list(K * Y)
    else:
        reparam = Reparam(_integrate(1 / xi), (xi / 2) ** sp.Rational(-1, 2))
        transforms.append(reparam)
        A = K
        expected_xi, expected_eta = sp.Integer(1), list(K * Y * reparam.psi)

    # The reparametrization is checked in its source coordinates so no inverse of phi is needed.
    current = X
    for step in transforms[:-1]:
        current = pushforward(step, current)
    last = transforms[-1] if transforms else None
    if isinstance(last, Reparam):
        xi_new, eta_new = _pushforward_old(last, current)
    else:
        if last is not None:
            current = pushforward(last, current)
        xi_new, eta_new = current.xi, list(current.eta)
    checks = [xi_new - expected_xi] + [a - b for a, b in zip(eta_new, expected_eta)]
    if not all(ec.is_zero(item) for item in checks):
        raise UnsupportedCoefficients("Normalized generator failed verification")
    residual = ec.max_abs_residual(checks)

    A = sp.ImmutableMatrix(A.applyfunc(ec.normalize))
    return Normalization(
        transforms=tuple(transforms),
        generator=PointGenerator(1, tuple(A * Y)),
        A=A,
        residual=residual,
    )
