"""Bundles in a fixed local trivialization U x R^k, derivations, sections.

Frame convention, fixed once for the whole engine: a derivation D with
symbol X and matrix field A acts on the frame by D(e_j) = sum_i A_ij e_i,
so on a component vector e(x):

    (De)(x) = J_e(x) X(x) + A(x) e(x).

The induced linear vector field on the total space is
D_hat(x, v) = (X(x), -A(x) v), and the dual derivation has matrix -A^T.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DimensionError
from .expr import ScalarExpr


@dataclass(frozen=True)
class BoxDomain:
    """Open box (lower, upper) in R^m, optionally with a time interval."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    interval: tuple[float, float] | None = None

    def __post_init__(self):
        lo, up = np.asarray(self.lower), np.asarray(self.upper)
        if lo.shape != up.shape or lo.ndim != 1:
            raise DimensionError("box bounds must be vectors of equal length")
        if not np.all(lo < up):
            raise DimensionError("box requires lower < upper componentwise")
        if self.interval is not None and not self.interval[0] < self.interval[1]:
            raise DimensionError("time interval requires alpha < beta")

    @property
    def dim(self) -> int:
        return len(self.lower)

    def contains(self, x, margin: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        lo = np.asarray(self.lower) + margin
        up = np.asarray(self.upper) - margin
        return bool(np.all(x > lo) and np.all(x < up))

    def shrink(self, fraction: float) -> "BoxDomain":
        """Box shrunk towards its center by `fraction` of each half-width."""
        lo, up = np.asarray(self.lower), np.asarray(self.upper)
        c, h = (lo + up) / 2, (up - lo) / 2
        return BoxDomain(tuple(c - (1 - fraction) * h), tuple(c + (1 - fraction) * h), self.interval)


@dataclass(frozen=True)
class VectorFieldSpec:
    """Vector field on a box: m component expressions."""

    domain: BoxDomain
    components: tuple[ScalarExpr, ...]

    def __post_init__(self):
        if len(self.components) != self.domain.dim:
            raise DimensionError(
                f"vector field has {len(self.components)} components on a "
                f"{self.domain.dim}-dimensional box"
            )

    def at(self, x) -> np.ndarray:
        return np.array([c.eval(x) for c in self.components])

    def jacobian(self, x) -> np.ndarray:
        return np.array([c.eval_jet(x).gradient for c in self.components])


@dataclass(frozen=True)
class SectionSpec:
    """Section of U x R^k: k component expressions over the base."""

    rank: int
    components: tuple[ScalarExpr, ...]

    def __post_init__(self):
        if len(self.components) != self.rank:
            raise DimensionError(f"section has {len(self.components)} components, rank {self.rank}")

    def at(self, x) -> np.ndarray:
        return np.array([c.eval(x) for c in self.components])

    def jacobian(self, x) -> np.ndarray:
        return np.array([c.eval_jet(x).gradient for c in self.components])


# Sections of the dual bundle use the same type in the dual frame; the
# pairing <eps, e> is then the dot product of component vectors.


@dataclass(frozen=True)
class EndoField:
    """Section of End(E): a derivation with symbol zero."""

    entries: tuple[tuple[ScalarExpr, ...], ...]

    def __post_init__(self):
        k = len(self.entries)
        if any(len(row) != k for row in self.entries):
            raise DimensionError("endomorphism field must be square")

    @property
    def rank(self) -> int:
        return len(self.entries)

    def at(self, x) -> np.ndarray:
        return np.array([[e.eval(x) for e in row] for row in self.entries])


@dataclass(frozen=True)
class DerivationSpec:
    """Derivation D = (symbol X, matrix field A) in the fixed frame."""

    base: BoxDomain
    rank: int
    symbol: VectorFieldSpec
    matrix: tuple[tuple[ScalarExpr, ...], ...]

    def __post_init__(self):
        if self.symbol.domain.dim != self.base.dim:
            raise DimensionError("symbol dimension differs from base dimension")
        if len(self.matrix) != self.rank or any(len(r) != self.rank for r in self.matrix):
            raise DimensionError(f"matrix must be {self.rank}x{self.rank}")

    def matrix_at(self, x) -> np.ndarray:
        return np.array([[e.eval(x) for e in row] for row in self.matrix])

    def symbol_at(self, x) -> np.ndarray:
        return self.symbol.at(x)

    def matrix_gradients(self, x) -> np.ndarray:
        """(k, k, m) array of entrywise gradients of A."""
        return np.array([[e.eval_jet(x).gradient for e in row] for row in self.matrix])


@dataclass(frozen=True)
class PointDerivation:
    """Derivation given by point-evaluable symbol and matrix (no AST)."""

    base: BoxDomain
    rank: int
    symbol_at: Callable[[np.ndarray], np.ndarray]
    matrix_at: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class TotalField:
    """Point-evaluable vector field on the total space U x R^k.

    `value` maps p = (x, v) concatenated to a tangent vector of the same
    length; `jacobian` is exact when available, else central differences
    are used by the bracket routine downstream.
    """

    base_dim: int
    rank: int
    value: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray] | None = None


# ---------------------------------------------------------------------------
# Operations


def dual_derivation(D: DerivationSpec) -> DerivationSpec:
    """Dual derivation D*: same symbol, matrix -A^T (frame/dual-frame pair)."""
    from .expr import Neg, ScalarExpr as SE

    k = D.rank
    entries = tuple(
        tuple(
            SE(Neg(D.matrix[j][i].root), D.matrix[j][i].dim, D.matrix[j][i].time_dependent)
            for j in range(k)
        )
        for i in range(k)
    )
    return DerivationSpec(D.base, k, D.symbol, entries)


def tensor_derivation(DE: DerivationSpec, DF: DerivationSpec) -> DerivationSpec:
    """Leibniz derivation on E (x) F: matrix A_E (x) I + I (x) A_F.

    Frame ordering is e_i (x) f_j lexicographic in (i, j), i.e. Kronecker
    row-major, so the matrix is the Kronecker sum."""
    _require_shared_symbol(DE, DF)
    kE, kF = DE.rank, DF.rank
    from .expr import Bin, Const, ScalarExpr as SE

    k = kE * kF
    rows = []
    for i in range(kE):
        for j in range(kF):
            row = []
            for p in range(kE):
                for q in range(kF):
                    terms = []
                    if j == q:
                        terms.append(DE.matrix[i][p].root)
                    if i == p:
                        terms.append(DF.matrix[j][q].root)
                    if not terms:
                        node = Const(0.0)
                    elif len(terms) == 1:
                        node = terms[0]
                    else:
                        node = Bin("+", terms[0], terms[1])
                    row.append(SE(node, DE.matrix[0][0].dim, DE.matrix[0][0].time_dependent))
            rows.append(tuple(row))
    return DerivationSpec(DE.base, k, DE.symbol, tuple(rows))


def _require_shared_symbol(DE: DerivationSpec, DF: DerivationSpec) -> None:
    if DE.base != DF.base:
        raise DimensionError("derivations live over different base domains")
    if tuple(c.root for c in DE.symbol.components) != tuple(c.root for c in DF.symbol.components):
        raise DimensionError("derivations must share the same symbol vector field")


def commutator(D1: DerivationSpec, D2: DerivationSpec) -> PointDerivation:
    """Commutator [D1, D2] as a point-evaluable derivation.

    Symbol [X1, X2](x) = J_{X2} X1 - J_{X1} X2; matrix
    X1(A2) - X2(A1) + [A1, A2], with X(A) the entrywise directional
    derivative."""
    if D1.base != D2.base or D1.rank != D2.rank:
        raise DimensionError("commutator requires same base and rank")

    def symbol_at(x):
        x1, x2 = D1.symbol_at(x), D2.symbol_at(x)
        return D2.symbol.jacobian(x) @ x1 - D1.symbol.jacobian(x) @ x2

    def matrix_at(x):
        x1, x2 = D1.symbol_at(x), D2.symbol_at(x)
        dA1 = D1.matrix_gradients(x) @ x2  # X2(A1)
        dA2 = D2.matrix_gradients(x) @ x1  # X1(A2)
        A1, A2 = D1.matrix_at(x), D2.matrix_at(x)
        return dA2 - dA1 + A1 @ A2 - A2 @ A1

    return PointDerivation(D1.base, D1.rank, symbol_at, matrix_at)


def apply_derivation(D: DerivationSpec | PointDerivation, e: SectionSpec, x) -> np.ndarray:
    """(De)(x) = J_e(x) X(x) + A(x) e(x)."""
    x = np.asarray(x, dtype=float)
    if not D.base.contains(x):
        raise DimensionError(f"point {x.tolist()} outside base domain")
    if isinstance(D, DerivationSpec):
        X, A = D.symbol_at(x), D.matrix_at(x)
    else:
        X, A = D.symbol_at(x), D.matrix_at(x)
    return e.jacobian(x) @ X + A @ e.at(x)


def pairing_leibniz_residual(D: DerivationSpec, eps: SectionSpec, e: SectionSpec, x) -> float:
    """| X<eps,e> - <D* eps, e> - <eps, De> | at x, all terms independent."""
    x = np.asarray(x, dtype=float)
    X = D.symbol_at(x)
    # X<eps, e> by the product rule on component jets
    lhs = float(e.jacobian(x).T @ eps.at(x) @ X + eps.jacobian(x).T @ e.at(x) @ X)
    Dstar = dual_derivation(D)
    rhs = float(apply_derivation(Dstar, eps, x) @ e.at(x) + eps.at(x) @ apply_derivation(D, e, x))
    return abs(lhs - rhs)


def core_lift(e: SectionSpec, base: BoxDomain) -> TotalField:
    """Vertical lift (x, v) -> (0, e(x)); exact flow v -> v + t e(x)."""
    m, k = base.dim, e.rank

    def value(p):
        x = p[:m]
        return np.concatenate([np.zeros(m), e.at(x)])

    def jacobian(p):
        x = p[:m]
        J = np.zeros((m + k, m + k))
        J[m:, :m] = e.jacobian(x)
        return J

    return TotalField(m, k, value, jacobian)


def lift_derivation(D: DerivationSpec | PointDerivation) -> TotalField:
    """Linear vector field D_hat(x, v) = (X(x), -A(x) v) on U x R^k."""
    m, k = D.base.dim, D.rank
    exact = isinstance(D, DerivationSpec)

    def value(p):
        x, v = p[:m], p[m:]
        return np.concatenate([D.symbol_at(x), -D.matrix_at(x) @ v])

    if exact:

        def jacobian(p):
            x, v = p[:m], p[m:]
            J = np.zeros((m + k, m + k))
            J[:m, :m] = D.symbol.jacobian(x)
            J[m:, :m] = -np.einsum("ikm,k->im", D.matrix_gradients(x), v)
            J[m:, m:] = -D.matrix_at(x)
            return J

        return TotalField(m, k, value, jacobian)
    return TotalField(m, k, value, None)


def core_flow(e: SectionSpec, base: BoxDomain, t: float, p) -> np.ndarray:
    """Closed-form flow of the vertical lift: (x, v) -> (x, v + t e(x))."""
    p = np.asarray(p, dtype=float)
    m = base.dim
    out = p.copy()
    out[m:] += t * e.at(p[:m])
    return out
