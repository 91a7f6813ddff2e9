"""Non-autonomous linear ODEs v' = A(t) v solved by suspension.

The time-dependent system on J x R^n becomes the autonomous linear vector
field (s, v) -> (1, A(s) v) over d/ds on the interval J; the fiber part of
its flow is the propagator. Closed forms (matrix exponential, commuting
families) are provided only as oracles, never as the solve path.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DimensionError, IntegrationError, LinflowError
from .expr import Neg, ScalarExpr
from .flow import IntegratorConfig, LinearFlowResult, flow_pointwise, integrate_linear
from .geometry import BoxDomain, DerivationSpec, VectorFieldSpec


@dataclass(frozen=True)
class TimeMatrixSpec:
    """n x n matrix of expressions in the single variable t on J = (alpha, beta)."""

    n: int
    interval: tuple[float, float]
    entries: tuple[tuple[ScalarExpr, ...], ...]

    def __post_init__(self):
        if len(self.entries) != self.n or any(len(r) != self.n for r in self.entries):
            raise DimensionError(f"matrix must be {self.n}x{self.n}")
        if not self.interval[0] < self.interval[1]:
            raise DimensionError("interval requires alpha < beta")

    def at(self, t: float) -> np.ndarray:
        empty = np.zeros(0)
        return np.array([[e.eval(empty, t) for e in row] for row in self.entries])

    def suspension(self) -> DerivationSpec:
        """Linear vector field over d/ds on J x R^n as a derivation spec.

        Convention bridge, applied here and only here: the derivation fiber
        rule is dF/ds = -A_der F, so A_der = -A realizes v' = A(t) v.
        """
        base = BoxDomain((self.interval[0],), (self.interval[1],))
        symbol = VectorFieldSpec(base, (ScalarExpr(_const_one(), 1),))
        rows = tuple(
            tuple(
                ScalarExpr(Neg(e.shift_vars(0, 1, time_to_var=0).root), 1) for e in row
            )
            for row in self.entries
        )
        return DerivationSpec(base, self.n, symbol, rows)


def _const_one():
    from .expr import Const

    return Const(1.0)


def _check_times(A: TimeMatrixSpec, *times: float) -> None:
    a, b = A.interval
    for t in times:
        if not a < t < b:
            raise LinflowError(f"time {t} outside the open interval ({a}, {b})")


def solve_nonautonomous(
    A: TimeMatrixSpec, t0: float, v0, t: float, cfg: IntegratorConfig | None = None
) -> np.ndarray:
    """Solution v(t) of v' = A(s) v, v(t0) = v0, via the suspension flow."""
    _check_times(A, t0, t)
    v0 = np.asarray(v0, dtype=float)
    res = flow_pointwise(A.suspension(), np.array([t0]), v0, t - t0, cfg)
    if not res.complete:
        raise IntegrationError(
            f"suspension trajectory left J at s = {res.escape_time:.12g}"
        )
    return res.vector


def propagator(
    A: TimeMatrixSpec, t0: float, t: float, cfg: IntegratorConfig | None = None
) -> np.ndarray:
    """Fundamental solution P(t, t0) with v(t) = P(t, t0) v0 and P(t0, t0) = I."""
    _check_times(A, t0, t)
    res: LinearFlowResult = integrate_linear(A.suspension(), np.array([t0]), t - t0, cfg)
    if not res.complete:
        raise IntegrationError(
            f"suspension trajectory left J at s = {res.escape_time:.12g}"
        )
    return res.fundamental


# ---------------------------------------------------------------------------
# Matrix exponential: scaling and squaring with the Pade(13) approximant

_PADE13 = (
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
)
_THETA13 = 5.371920351148152


def expm(M) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring with Pade(13)."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError("expm requires a square matrix")
    if not np.all(np.isfinite(M)):
        raise LinflowError("expm requires finite entries")
    norm = np.linalg.norm(M, 1)
    if norm > 1e8:
        raise LinflowError(f"expm overflow guard: 1-norm {norm:.3g} too large")
    s = 0 if norm <= _THETA13 else int(np.ceil(np.log2(norm / _THETA13)))
    A = M / (2.0 ** s)
    n = A.shape[0]
    ident = np.eye(n)
    b = _PADE13
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A2 @ A4
    U = A @ (
        A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
        + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident
    )
    V = (
        A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
        + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident
    )
    R = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        R = R @ R
    return R


# ---------------------------------------------------------------------------
# Adaptive quadrature (Liouville determinant oracle support)


def adaptive_quad(f: Callable[[float], float], a: float, b: float, tol: float = 1e-10) -> float:
    """Adaptive Simpson quadrature."""

    def simpson(lo, hi, flo, fmid, fhi):
        return (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)

    def recurse(lo, hi, flo, fmid, fhi, whole, eps, depth):
        mid = 0.5 * (lo + hi)
        fl = f(0.5 * (lo + mid))
        fr = f(0.5 * (mid + hi))
        left = simpson(lo, mid, flo, fl, fmid)
        right = simpson(mid, hi, fmid, fr, fhi)
        if depth <= 0 or abs(left + right - whole) <= 15.0 * eps:
            return left + right + (left + right - whole) / 15.0
        return recurse(lo, mid, flo, fl, fmid, left, eps / 2.0, depth - 1) + recurse(
            mid, hi, fmid, fr, fhi, right, eps / 2.0, depth - 1
        )

    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = simpson(a, b, fa, fm, fb)
    return recurse(a, b, fa, fm, fb, whole, tol, 48)
