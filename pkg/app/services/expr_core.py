"""Expression engine shared by every service.

Expressions are plain sympy trees over real symbols.  On top of sympy this
module adds:

* opaque function symbols that carry a partial-derivative multi-index, so
  ``d/ds f(s, v, w)`` is ``f__1_0_0(s, v, w)`` and the chain rule stays exact;
* a small infix grammar (``parse``/``render``) used by JSON documents;
* a normal form tuned for exp/sin/cos polynomials and a zero test that falls
  back to seeded rational sampling when the normal form is inconclusive.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import gcd
from typing import Callable, Iterable, Mapping

import sympy as sp
from sympy.printing.precedence import precedence
from sympy.printing.str import StrPrinter

from constants import (
    DEFAULT_OPAQUE_NAMES,
    DEFAULT_SAMPLES,
    DEFAULT_SEED,
    DEFAULT_TOLERANCE,
    DEPENDENT_NAMES,
    FIRST_DERIVATIVE_NAMES,
    INDEPENDENT_NAME,
    OPAQUE_INDEX_SEPARATOR,
    SAMPLE_RANGE,
    SAMPLE_RETRIES,
    SECOND_DERIVATIVE_NAMES,
)
from app.services.errors import (
    EvaluationDomainError,
    ExprSyntaxError,
    UnboundSymbol,
    UnknownFunction,
)

logger = logging.getLogger(__name__)

Expr = sp.Expr
Bindings = Mapping[object, object]


@lru_cache(maxsize=None)
def symbol(name: str) -> sp.Symbol:
    return sp.Symbol(name, real=True)


x = symbol(INDEPENDENT_NAME)
y, z, u = (symbol(name) for name in DEPENDENT_NAMES)
yp, zp, up = (symbol(name) for name in FIRST_DERIVATIVE_NAMES)
ypp, zpp, upp = (symbol(name) for name in SECOND_DERIVATIVE_NAMES)
DEPENDENT = (y, z, u)
FIRST_DERIVATIVES = (yp, zp, up)
SECOND_DERIVATIVES = (ypp, zpp, upp)


class OpaqueFunction(sp.Function):
    """Arbitrary function symbol; ``multi_index`` counts partial derivatives."""

    opaque_name = "f"
    multi_index: tuple[int, ...] = ()

    def fdiff(self, argindex=1):
        index = list(self.multi_index)
        index[argindex - 1] += 1
        return opaque(self.opaque_name, tuple(index))(*self.args)


@lru_cache(maxsize=None)
def opaque(name: str, multi_index: tuple[int, ...]) -> type[OpaqueFunction]:
    if not multi_index or any(entry < 0 for entry in multi_index):
        raise ValueError(f"Invalid multi-index {multi_index!r} for '{name}'")
    class_name = name
    if any(multi_index):
        class_name = name + OPAQUE_INDEX_SEPARATOR + "_".join(str(entry) for entry in multi_index)
    return type(
        class_name,
        (OpaqueFunction,),
        {"opaque_name": name, "multi_index": tuple(multi_index), "nargs": len(multi_index)},
    )


def apply_opaque(name: str, *args) -> Expr:
    return opaque(name, (0,) * len(args))(*[as_expr(arg) for arg in args])


def opaque_atoms(e: Expr) -> set[sp.Expr]:
    return set(sp.sympify(e).atoms(OpaqueFunction))


def as_expr(value, opaque_names: Iterable[str] = DEFAULT_OPAQUE_NAMES) -> Expr:
    if isinstance(value, sp.Basic):
        return value
    if isinstance(value, str):
        return parse(value, opaque_names)
    if isinstance(value, bool):
        raise TypeError("Boolean is not an expression")
    if isinstance(value, (int, Fraction)):
        return sp.Rational(value)
    if isinstance(value, float):
        return sp.Rational(Fraction(value).limit_denominator(10**12))
    raise TypeError(f"Cannot convert {type(value).__name__} to an expression")


def free_symbols(e: Expr) -> set[sp.Symbol]:
    return set(sp.sympify(e).free_symbols)


def free_symbol_names(e: Expr) -> set[str]:
    return {sym.name for sym in free_symbols(e)}


def symbols_of(names: Iterable[str]) -> tuple[sp.Symbol, ...]:
    return tuple(symbol(name) for name in names)


# ---------------------------------------------------------------------------
# Grammar
# ---------------------------------------------------------------------------

BINARY_OPERATORS = [
    [("+", "left"), ("-", "left")],
    [("*", "left"), ("/", "left")],
    [("^", "right")],
]
OPERATOR_PREC = {info[0]: idx + 1 for idx, group in enumerate(BINARY_OPERATORS) for info in group}
OPERATOR_ASSOC = {info[0]: info[1] for group in BINARY_OPERATORS for info in group}
UNARY_MINUS_PREC = OPERATOR_PREC["*"]

SIMPLE_HEADS: dict[str, Callable[[Expr], Expr]] = {
    "exp": sp.exp,
    "sin": sp.sin,
    "cos": sp.cos,
    "ln": sp.log,
    "atan": sp.atan,
}


@dataclass(frozen=True)
class Token:
    kind: str
    value: object
    offset: int


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    idx = 0
    while idx < len(source):
        char = source[idx]
        if char.isspace():
            idx += 1
            continue
        if char.isdigit() or (char == "." and idx + 1 < len(source) and source[idx + 1].isdigit()):
            start = idx
            while idx < len(source) and (source[idx].isdigit() or source[idx] == "."):
                idx += 1
            text = source[start:idx]
            if text.count(".") > 1:
                raise ExprSyntaxError(f"Malformed number '{text}'", start)
            tokens.append(Token("num", sp.Rational(text), start))
            continue
        if char.isalpha() or char == "_":
            start = idx
            while idx < len(source) and (source[idx].isalnum() or source[idx] == "_"):
                idx += 1
            tokens.append(Token("name", source[start:idx], start))
            continue
        if char in OPERATOR_PREC or char in "(),":
            tokens.append(Token("op", char, idx))
            idx += 1
            continue
        raise ExprSyntaxError(f"Unexpected character '{char}'", idx)
    tokens.append(Token("end", None, len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str, opaque_names: Iterable[str]):
        self.source = source
        self.tokens = tokenize(source)
        self.pos = 0
        self.opaque_names = set(opaque_names)

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def expect(self, value: str) -> Token:
        token = self.advance()
        if token.kind != "op" or token.value != value:
            found = "end of input" if token.kind == "end" else f"'{token.value}'"
            raise ExprSyntaxError(f"Expected '{value}' but found {found}", token.offset)
        return token

    def parse(self) -> Expr:
        result = self.expression(0)
        token = self.peek()
        if token.kind != "end":
            raise ExprSyntaxError(f"Unexpected token '{token.value}'", token.offset)
        return result

    def expression(self, min_prec: int) -> Expr:
        lhs = self.unary()
        while True:
            token = self.peek()
            if token.kind != "op" or token.value not in OPERATOR_PREC:
                return lhs
            prec = OPERATOR_PREC[token.value]
            if prec < min_prec:
                return lhs
            self.advance()
            next_prec = prec if OPERATOR_ASSOC[token.value] == "right" else prec + 1
            rhs = self.expression(next_prec)
            lhs = _combine(token, lhs, rhs)

    def unary(self) -> Expr:
        token = self.peek()
        if token.kind == "op" and token.value == "-":
            self.advance()
            operand = self.expression(UNARY_MINUS_PREC + 1)
            return -operand
        if token.kind == "op" and token.value == "+":
            self.advance()
            return self.expression(UNARY_MINUS_PREC + 1)
        return self.atom()

    def atom(self) -> Expr:
        token = self.advance()
        if token.kind == "end":
            raise ExprSyntaxError("Unexpected end of input", token.offset)
        if token.kind == "num":
            return token.value
        if token.kind == "op":
            if token.value == "(":
                inner = self.expression(0)
                self.expect(")")
                return inner
            raise ExprSyntaxError(f"Unexpected operator '{token.value}'", token.offset)
        name = token.value
        following = self.peek()
        if following.kind == "op" and following.value == "(":
            self.advance()
            args = self.arguments()
            return self.call(name, args, token.offset)
        if name in SIMPLE_HEADS:
            raise ExprSyntaxError(f"Function '{name}' requires an argument list", token.offset)
        return symbol(name)

    def arguments(self) -> list[Expr]:
        args: list[Expr] = []
        if self.peek().kind == "op" and self.peek().value == ")":
            self.advance()
            return args
        while True:
            args.append(self.expression(0))
            token = self.advance()
            if token.kind == "op" and token.value == ")":
                return args
            if not (token.kind == "op" and token.value == ","):
                raise ExprSyntaxError("Expected ',' or ')' in argument list", token.offset)

    def call(self, name: str, args: list[Expr], offset: int) -> Expr:
        if name in SIMPLE_HEADS:
            if len(args) != 1:
                raise ExprSyntaxError(f"Function '{name}' takes exactly one argument", offset)
            return SIMPLE_HEADS[name](args[0])
        base, index = _split_opaque_name(name)
        if base in self.opaque_names and args:
            if index is None:
                index = (0,) * len(args)
            if len(index) != len(args):
                raise ExprSyntaxError(
                    f"Derivative index of '{name}' does not match {len(args)} arguments", offset
                )
            return opaque(base, index)(*args)
        raise UnknownFunction(name, offset)


def _combine(token: Token, lhs: Expr, rhs: Expr) -> Expr:
    op = token.value
    if op == "+":
        return lhs + rhs
    if op == "-":
        return lhs - rhs
    if op == "*":
        return lhs * rhs
    if op == "/":
        if rhs == 0:
            raise ExprSyntaxError("Division by zero", token.offset)
        return lhs / rhs
    return sp.Pow(lhs, rhs)


def _split_opaque_name(name: str) -> tuple[str, tuple[int, ...] | None]:
    if OPAQUE_INDEX_SEPARATOR not in name:
        return name, None
    base, _, suffix = name.partition(OPAQUE_INDEX_SEPARATOR)
    parts = suffix.split("_")
    if not base or not all(part.isdigit() for part in parts):
        return name, None
    return base, tuple(int(part) for part in parts)


def parse(text: str, opaque: Iterable[str] = DEFAULT_OPAQUE_NAMES) -> Expr:
    if not isinstance(text, str):
        raise ExprSyntaxError("Expression must be a string", 0)
    return normalize(_Parser(text, opaque).parse())


class _GrammarPrinter(StrPrinter):
    def _print_Pow(self, expr, rational=False):
        prec = precedence(expr)
        exponent = expr.exp
        if exponent.is_Rational and exponent.is_negative:
            positive = sp.Pow(expr.base, -exponent, evaluate=False) if exponent != -1 else expr.base
            return "1/%s" % self.parenthesize(positive, prec, strict=True)
        base = self.parenthesize(expr.base, prec, strict=True)
        if exponent.is_Integer:
            return f"{base}^{exponent}"
        return f"{base}^({self._print(exponent)})"

    def _print_log(self, expr):
        return "ln(%s)" % self._print(expr.args[0])

    def _print_Exp1(self, expr):
        return "exp(1)"

    def _print_Rational(self, expr):
        return f"{expr.p}/{expr.q}"

    def _print_Float(self, expr):
        return str(sp.Rational(str(expr)))


_PRINTER = _GrammarPrinter({"order": "lex"})


def render(e: Expr) -> str:
    return _PRINTER.doprint(sp.sympify(e))


# ---------------------------------------------------------------------------
# Normal form
# ---------------------------------------------------------------------------


def _angle_groups(e: Expr) -> dict[Expr, sp.Expr]:
    """Rewrite trig atoms sharing an angle up to a rational factor onto one base angle."""
    groups: dict[Expr, list[tuple[sp.Rational, sp.Expr]]] = {}
    for atom in e.atoms(sp.sin, sp.cos):
        coeff, angle = atom.args[0].as_coeff_Mul(rational=True)
        groups.setdefault(angle, []).append((sp.Rational(coeff), atom))
    replacements: dict[Expr, sp.Expr] = {}
    theta = sp.Dummy("theta", real=True)
    for angle, members in groups.items():
        numerators = [abs(coeff.p) for coeff, _ in members]
        denominators = [coeff.q for coeff, _ in members]
        num_gcd = 0
        for value in numerators:
            num_gcd = gcd(num_gcd, value)
        den_lcm = 1
        for value in denominators:
            den_lcm = den_lcm * value // gcd(den_lcm, value)
        base = sp.Rational(num_gcd, den_lcm)
        for coeff, atom in members:
            multiple = coeff / base
            if multiple == 1:
                continue
            expanded = sp.expand_trig(atom.func(multiple * theta))
            replacements[atom] = expanded.subs(theta, base * angle)
    return replacements


def _reduce_sine_powers(e: Expr) -> Expr:
    def is_sine_power(node) -> bool:
        return (
            node.is_Pow
            and isinstance(node.base, sp.sin)
            and node.exp.is_Integer
            and node.exp >= 2
        )

    def rewrite(node):
        half, rest = divmod(int(node.exp), 2)
        return node.base**rest * (1 - sp.cos(node.base.args[0]) ** 2) ** half

    return e.replace(is_sine_power, rewrite)


def normalize(e) -> Expr:
    """Canonical expanded form: angle-expanded trig, sin^2 -> 1-cos^2, merged exponentials."""
    e = sp.sympify(e)
    if e.is_Number or e.is_Symbol:
        return e
    replacements = _angle_groups(e)
    if replacements:
        e = e.xreplace(replacements)
    e = sp.expand(e)
    e = _reduce_sine_powers(e)
    e = sp.expand(e)
    e = sp.powsimp(e, deep=True, combine="exp")
    return sp.expand(e, power_exp=False)


def differentiate(e, var) -> Expr:
    var = symbol(var) if isinstance(var, str) else var
    return normalize(sp.diff(as_expr(e), var))


def _binding_key(key) -> sp.Basic:
    if isinstance(key, str):
        return symbol(key)
    return key


def substitute(e, bindings: Bindings) -> Expr:
    mapping = {_binding_key(key): as_expr(value) for key, value in bindings.items()}
    if not mapping:
        return normalize(as_expr(e))
    return normalize(as_expr(e).subs(mapping, simultaneous=True))


# ---------------------------------------------------------------------------
# Evaluation and zero testing
# ---------------------------------------------------------------------------


def _to_number(value) -> sp.Expr:
    if isinstance(value, sp.Basic):
        return value
    if isinstance(value, bool):
        raise TypeError("Boolean is not a number")
    if isinstance(value, (int, Fraction)):
        return sp.Rational(value)
    if isinstance(value, float):
        return sp.Float(value, 30)
    if isinstance(value, str):
        return sp.Rational(value)
    raise TypeError(f"Cannot bind value of type {type(value).__name__}")


def _check_domain(e: Expr) -> None:
    for atom in e.atoms(sp.log):
        arg = atom.args[0]
        if arg.is_number and not (sp.N(arg, 30) > 0):
            raise EvaluationDomainError(f"ln of non-positive value {render(arg)}")
    for atom in e.atoms(sp.Pow):
        if atom.exp.is_number and not atom.exp.is_Integer and atom.base.is_number:
            if not (sp.N(atom.base, 30) > 0):
                raise EvaluationDomainError(f"fractional power of non-positive value {render(atom.base)}")


def _numeric_result(e: Expr):
    if e.has(sp.zoo, sp.nan, sp.oo, -sp.oo):
        raise EvaluationDomainError("evaluation hit a pole")
    if e.is_Rational:
        return Fraction(int(e.p), int(e.q))
    value = complex(sp.N(e, 30))
    if abs(value.imag) > 1e-12 * max(1.0, abs(value.real)):
        raise EvaluationDomainError("evaluation left the real domain")
    return value.real


def evaluate(e, bindings: Bindings | None = None):
    bindings = dict(bindings or {})
    e = as_expr(e)
    by_name = {(key if isinstance(key, str) else str(key)): value for key, value in bindings.items()}
    for atom in sorted(opaque_atoms(e), key=sp.default_sort_key):
        name = type(atom).__name__
        stand_in = by_name.get(name)
        if not callable(stand_in):
            raise UnboundSymbol(name)
        args = [evaluate(arg, bindings) for arg in atom.args]
        e = e.xreplace({atom: _to_number(stand_in(*args))})
    values = {}
    for sym in e.free_symbols:
        if sym.name not in by_name:
            raise UnboundSymbol(sym.name)
        values[sym] = _to_number(by_name[sym.name])
    result = e.xreplace(values)
    _check_domain(result)
    return _numeric_result(result)


def _dummify_opaque(e: Expr) -> Expr:
    atoms = sorted(opaque_atoms(e), key=sp.default_sort_key)
    if not atoms:
        return e
    return e.xreplace({atom: sp.Dummy(type(atom).__name__, real=True) for atom in atoms})


def _random_rational(rng: random.Random, positive: bool) -> sp.Rational:
    low = 1 if positive else -SAMPLE_RANGE
    while True:
        num = rng.randint(low, SAMPLE_RANGE)
        den = rng.randint(1 if positive else -SAMPLE_RANGE, SAMPLE_RANGE)
        if num != 0 and den != 0:
            return sp.Rational(num, den)


def _sample_value(e: Expr, symbols: list[sp.Symbol], rng: random.Random):
    """Evaluate ``e`` at one random point, redrawing on domain errors."""
    last_error: EvaluationDomainError | None = None
    for attempt in range(SAMPLE_RETRIES):
        point = {sym: _random_rational(rng, positive=attempt > 0) for sym in symbols}
        substituted = e.xreplace(point)
        try:
            _check_domain(substituted)
            terms = sp.Add.make_args(substituted)
            value = _numeric_result(substituted)
            scale = sum(abs(_numeric_result(term)) for term in terms) if len(terms) > 1 else abs(value)
            return value, float(scale)
        except (EvaluationDomainError, ZeroDivisionError) as exc:
            logger.debug("Redrawing sample after domain error: %s", exc)
            last_error = exc if isinstance(exc, EvaluationDomainError) else EvaluationDomainError(str(exc))
    raise EvaluationDomainError(f"No admissible sample after {SAMPLE_RETRIES} draws: {last_error}")


def _symbolic_zero(e: Expr) -> tuple[bool, Expr]:
    normal = normalize(e)
    if normal == 0:
        return True, normal
    flat = _dummify_opaque(normal)
    numerator, _ = sp.fraction(sp.together(flat))
    numerator = normalize(numerator)
    return numerator == 0, numerator


def is_zero(
    e,
    seed: int = DEFAULT_SEED,
    samples: int = DEFAULT_SAMPLES,
    tolerance: float = DEFAULT_TOLERANCE,
    allow_sampling: bool = True,
) -> bool:
    e = as_expr(e)
    if e == 0:
        return True
    proved, reduced = _symbolic_zero(e)
    if proved:
        return True
    if not allow_sampling:
        return False
    symbols = sorted(reduced.free_symbols, key=sp.default_sort_key)
    # A constant residual is a single evaluation, not a sampled check.
    log = logger.warning if symbols else logger.debug
    log(
        "Normal form inconclusive (%d operations, %d symbols); sampling %d points",
        sp.count_ops(reduced),
        len(symbols),
        samples,
    )
    rng = random.Random(seed)
    for _ in range(samples if symbols else 1):
        value, scale = _sample_value(reduced, symbols, rng)
        if isinstance(value, Fraction):
            if value != 0:
                return False
            continue
        if abs(value) > tolerance * max(1.0, scale):
            return False
    return True


def sample_values(e, seed: int = DEFAULT_SEED, count: int = 10) -> list[float]:
    """Values of ``e`` at ``count`` seeded rational points; opaque atoms are sampled as free symbols."""
    reduced = _dummify_opaque(normalize(as_expr(e)))
    symbols = sorted(reduced.free_symbols, key=sp.default_sort_key)
    rng = random.Random(seed)
    return [float(_sample_value(reduced, symbols, rng)[0]) for _ in range(count)]


def max_abs_residual(exprs: Iterable, seed: int = DEFAULT_SEED, samples: int = 8) -> float:
    """Largest sampled magnitude over ``exprs``; 0.0 when every entry is structurally zero."""
    worst = 0.0
    rng = random.Random(seed)
    for item in exprs:
        reduced = _dummify_opaque(normalize(as_expr(item)))
        if reduced == 0:
            continue
        symbols = sorted(reduced.free_symbols, key=sp.default_sort_key)
        for _ in range(samples):
            try:
                value, _ = _sample_value(reduced, symbols, rng)
            except EvaluationDomainError:
                continue
            worst = max(worst, abs(float(value)))
    return worst
