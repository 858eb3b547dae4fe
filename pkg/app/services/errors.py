from __future__ import annotations


class Lie3Error(RuntimeError):
    code = "lie3_error"

    def to_payload(self) -> dict:
        return {"code": self.code, "message": str(self)}


class PayloadError(Lie3Error):
    code = "invalid_payload"


class ExprSyntaxError(Lie3Error):
    code = "syntax_error"

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset

    def to_payload(self) -> dict:
        payload = super().to_payload()
        payload["offset"] = self.offset
        return payload


class UnknownFunction(Lie3Error):
    code = "unknown_function"

    def __init__(self, name: str, offset: int | None = None):
        where = f" at offset {offset}" if offset is not None else ""
        super().__init__(f"Unknown function '{name}'{where}")
        self.name = name
        self.offset = offset


class UnboundSymbol(Lie3Error):
    code = "unbound_symbol"

    def __init__(self, name: str):
        super().__init__(f"Symbol '{name}' is not bound")
        self.name = name


class EvaluationDomainError(Lie3Error):
    code = "domain_error"


class IllConditioned(Lie3Error):
    code = "ill_conditioned"


class DegenerateParams(Lie3Error):
    code = "degenerate_params"


class UnknownSubcase(Lie3Error):
    code = "unknown_subcase"


class InconsistentPredicate(Lie3Error):
    code = "inconsistent_predicate"


class ReparamConstraintViolated(Lie3Error):
    code = "reparam_constraint_violated"


class NonInvertibleOnDomain(Lie3Error):
    code = "non_invertible_on_domain"


class UnsupportedCoefficients(Lie3Error):
    code = "unsupported_coefficients"


class UnsupportedAtoms(Lie3Error):
    code = "unsupported_atoms"
