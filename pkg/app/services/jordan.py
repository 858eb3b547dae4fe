from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from constants import (
    DEFAULT_TOLERANCE,
    JORDAN_CONDITION_LIMIT,
    JORDAN_INVERSE_TOLERANCE,
    JORDAN_RESIDUAL_TOLERANCE,
)
from helpers import parse_rational
from app.services.errors import IllConditioned, PayloadError

logger = logging.getLogger(__name__)

PARAM_NAMES = {
    "J1": ("a", "b", "d"),
    "J2": ("a", "b", "c"),
    "J3": ("a", "b"),
    "J4": ("a",),
}


@dataclass(eq=False)
class JordanForm:
    kind: str
    params: dict[str, float]
    P: np.ndarray
    Pinv: np.ndarray
    exact: dict[str, Fraction] = field(default_factory=dict)

    def matrix(self) -> np.ndarray:
        return jordan_matrix(self.kind, self.params)

    def rational_params(self, max_denominator: int = 10**6) -> dict[str, Fraction]:
        return {
            name: Fraction(value).limit_denominator(max_denominator)
            for name, value in self.params.items()
        }


def jordan_matrix(kind, params: dict | None = None) -> np.ndarray:
    if isinstance(kind, JordanForm):
        kind, params = kind.kind, kind.params
    params = params or {}
    a = float(params.get("a", 0.0))
    b = float(params.get("b", 0.0))
    c = float(params.get("c", 0.0))
    d = float(params.get("d", 0.0))
    if kind == "J1":
        return np.diag([a, b, d])
    if kind == "J2":
        return np.array([[a, 0.0, 0.0], [0.0, b, c], [0.0, -c, b]])
    if kind == "J3":
        return np.array([[a, 0.0, 0.0], [0.0, b, 1.0], [0.0, 0.0, b]])
    if kind == "J4":
        return np.array([[a, 1.0, 0.0], [0.0, a, 1.0], [0.0, 0.0, a]])
    raise ValueError(f"Unknown Jordan kind '{kind}'")


def parse_matrix(payload) -> np.ndarray:
    """Matrix JSON (numbers or "p/q" strings) to a finite 3x3 float array."""
    if isinstance(payload, np.ndarray):
        rows = payload.tolist()
    else:
        rows = payload
    if not isinstance(rows, (list, tuple)) or len(rows) != 3:
        raise PayloadError("Matrix must have exactly 3 rows")
    values = []
    for row in rows:
        if not isinstance(row, (list, tuple)) or len(row) != 3:
            raise PayloadError("Each matrix row must have exactly 3 entries")
        try:
            values.append([float(parse_rational(entry)) for entry in row])
        except ValueError as exc:
            raise PayloadError(f"Invalid matrix entry: {exc}") from exc
    matrix = np.array(values, dtype=float)
    if not np.all(np.isfinite(matrix)):
        raise PayloadError("Matrix entries must be finite")
    return matrix


def _exact_entries(A: np.ndarray) -> list[list[Fraction]]:
    return [[Fraction(float(value)) for value in row] for row in A]


def _char_poly_exact(M: list[list[Fraction]]) -> tuple[Fraction, Fraction, Fraction]:
    trace = M[0][0] + M[1][1] + M[2][2]
    minors = (
        M[0][0] * M[1][1] - M[0][1] * M[1][0]
        + M[0][0] * M[2][2] - M[0][2] * M[2][0]
        + M[1][1] * M[2][2] - M[1][2] * M[2][1]
    )
    det = (
        M[0][0] * (M[1][1] * M[2][2] - M[1][2] * M[2][1])
        - M[0][1] * (M[1][0] * M[2][2] - M[1][2] * M[2][0])
        + M[0][2] * (M[1][0] * M[2][1] - M[1][1] * M[2][0])
    )
    return -trace, minors, -det


def characteristic_poly(A) -> tuple[float, float, float]:
    """Coefficients (c2, c1, c0) of det(lambda*I - A) = lambda^3 + c2*lambda^2 + c1*lambda + c0."""
    c2, c1, c0 = _char_poly_exact(_exact_entries(parse_matrix(A)))
    return float(c2), float(c1), float(c0)


def cubic_discriminant(c2, c1, c0):
    return 18 * c2 * c1 * c0 - 4 * c2**3 * c0 + c2**2 * c1**2 - 4 * c1**3 - 27 * c0**2


def _polish_root(root: float, coeffs: tuple[float, float, float]) -> float:
    c2, c1, c0 = coeffs
    for _ in range(3):
        value = ((root + c2) * root + c1) * root + c0
        slope = (3 * root + 2 * c2) * root + c1
        if slope == 0:
            break
        root -= value / slope
    return root


def _rank(M: np.ndarray, tol: float) -> int:
    return int(np.sum(np.linalg.svd(M, compute_uv=False) > tol))


def _canonical_sign(v: np.ndarray) -> np.ndarray:
    idx = int(np.argmax(np.round(np.abs(v), 10)))
    return -v if v[idx] < 0 else v


def _null_basis(M: np.ndarray, dim: int) -> np.ndarray:
    """Orthonormal basis (columns) of the ``dim`` smallest right singular directions."""
    _, _, vh = np.linalg.svd(M)
    return vh[3 - dim:].T


def _canonical_basis(B: np.ndarray) -> list[np.ndarray]:
    """Reduced row echelon basis of span(B) so coordinate subspaces give unit vectors."""
    rows = B.T.copy()
    k = rows.shape[0]
    pivot_row = 0
    for col in range(3):
        if pivot_row >= k:
            break
        best = pivot_row + int(np.argmax(np.abs(rows[pivot_row:, col])))
        if abs(rows[best, col]) < 1e-12:
            continue
        rows[[pivot_row, best]] = rows[[best, pivot_row]]
        rows[pivot_row] /= rows[pivot_row, col]
        for other in range(k):
            if other != pivot_row:
                rows[other] -= rows[other, col] * rows[pivot_row]
        pivot_row += 1
    return [_canonical_sign(row / np.linalg.norm(row)) for row in rows]


def _eigenvector(A: np.ndarray, value: float) -> np.ndarray:
    v = _null_basis(A - value * np.eye(3), 1)[:, 0]
    return _canonical_sign(v)


def _top_direction(M: np.ndarray) -> np.ndarray:
    _, _, vh = np.linalg.svd(M)
    return _canonical_sign(vh[0])


def _complex_pair(A: np.ndarray) -> tuple[str, dict, list[np.ndarray]]:
    values, vectors = np.linalg.eig(A)
    order = np.argsort(np.abs(values.imag))
    real_value = float(values[order[0]].real)
    pair_idx = max(order[1:], key=lambda idx: values[idx].imag)
    lam = values[pair_idx]
    v = vectors[:, pair_idx]
    k = int(np.argmax(np.round(np.abs(v), 10)))
    v = v * np.conj(v[k]) / abs(v[k])
    q2, q3 = v.real, v.imag
    norm = np.linalg.norm(q2)
    q2, q3 = q2 / norm, q3 / norm
    q1 = _eigenvector(A, real_value)
    params = {"a": real_value, "b": float(lam.real), "c": float(lam.imag)}
    return "J2", params, [q1, q2, q3]


def _distinct_real(A: np.ndarray, coeffs) -> tuple[str, dict, list[np.ndarray]]:
    roots = np.roots([1.0, *coeffs])
    values = sorted(_polish_root(float(root.real), coeffs) for root in roots)
    vectors = [_eigenvector(A, value) for value in values]
    return "J1", dict(zip(("a", "b", "d"), values)), vectors


def _double_root(A, double: float, simple: float, tol: float):
    N = A - double * np.eye(3)
    if _rank(N, tol) <= 1:
        eigenspace = _canonical_basis(_null_basis(N, 2))
        pairs = [(double, eigenspace[0]), (double, eigenspace[1]), (simple, _eigenvector(A, simple))]
        pairs.sort(key=lambda item: item[0])
        return "J1", dict(zip(("a", "b", "d"), (p[0] for p in pairs))), [p[1] for p in pairs]
    generalized = _null_basis(N @ N, 2)
    _, _, vh = np.linalg.svd(N @ generalized)
    q3 = _canonical_sign(generalized @ vh[0])
    q2 = N @ q3
    q1 = _eigenvector(A, simple)
    return "J3", {"a": simple, "b": double}, [q1, q2, q3]


def _triple_root(A, root: float, tol: float):
    N = A - root * np.eye(3)
    rank = _rank(N, tol)
    if rank == 0:
        return "J1", {"a": root, "b": root, "d": root}, list(np.eye(3))
    if rank == 1:
        q3 = _top_direction(N)
        q2 = N @ q3
        kernel = _canonical_basis(_null_basis(N, 2))
        unit = q2 / np.linalg.norm(q2)
        candidates = [vec - (vec @ unit) * unit for vec in kernel]
        q1 = max(candidates, key=np.linalg.norm)
        q1 = _canonical_sign(q1 / np.linalg.norm(q1))
        return "J3", {"a": root, "b": root}, [q1, q2, q3]
    q3 = _top_direction(N @ N)
    q2 = N @ q3
    q1 = N @ q2
    return "J4", {"a": root}, [q1, q2, q3]


def jordanize(A, tol: float | None = None) -> JordanForm:
    A = parse_matrix(A)
    scale = 1.0 + float(np.max(np.abs(A)))
    if tol is None:
        tol = DEFAULT_TOLERANCE * scale
    if tol <= 0:
        raise ValueError("tol must be positive")
    relative = tol / scale
    c2, c1, c0 = _char_poly_exact(_exact_entries(A))
    disc = cubic_discriminant(c2, c1, c0)
    disc_tol = relative * scale**6
    exact: dict[str, Fraction] = {}

    if disc < -disc_tol:
        kind, params, columns = _complex_pair(A)
    elif abs(disc) <= disc_tol:
        spread = c2 * c2 - 3 * c1
        if abs(spread) <= relative * scale**2:
            root = -c2 / 3
            exact = {"root": root}
            kind, params, columns = _triple_root(A, float(root), tol)
        else:
            double = (9 * c0 - c2 * c1) / (2 * spread)
            simple = -c2 - 2 * double
            exact = {"double": double, "simple": simple}
            kind, params, columns = _double_root(A, float(double), float(simple), tol)
    else:
        kind, params, columns = _distinct_real(A, (float(c2), float(c1), float(c0)))

    Q = np.column_stack(columns)
    condition = float(np.linalg.cond(Q))
    if not np.isfinite(condition) or condition > JORDAN_CONDITION_LIMIT:
        raise IllConditioned(f"Eigenvector basis has condition number {condition:.3e}")
    if condition > JORDAN_CONDITION_LIMIT * 1e-4:
        logger.warning("Jordan basis is poorly conditioned: %.3e", condition)
    P = np.linalg.inv(Q)
    form = JordanForm(kind=kind, params=params, P=P, Pinv=Q, exact=exact)
    residual = float(np.max(np.abs(P @ A @ Q - form.matrix())))
    if residual > JORDAN_RESIDUAL_TOLERANCE * scale:
        raise IllConditioned(f"Similarity residual {residual:.3e} exceeds tolerance")
    if float(np.max(np.abs(P @ Q - np.eye(3)))) > JORDAN_INVERSE_TOLERANCE * max(1.0, condition):
        raise IllConditioned("Similarity transform is not numerically invertible")
    return form


def reconstruction_residual(form: JordanForm, A) -> float:
    A = parse_matrix(A)
    return float(np.max(np.abs(form.P @ A @ form.Pinv - form.matrix())))
