"""Base flows, fundamental matrices, pullbacks, dual/tensor flows.

The fiber matrix F_t(x) solves dF/ds = -A(phi_s(x)) F, F(0) = I, jointly
with the base trajectory so both components see the same adaptive step
sequence (Dormand-Prince 5(4)). Escape from the open box domain is located
by bisection on the last step and reported; nothing is extrapolated past
the flow domain.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConditioningError, DimensionError, DomainEscape, IntegrationError
from .geometry import (
    DerivationSpec,
    PointDerivation,
    SectionSpec,
    TotalField,
    VectorFieldSpec,
    _require_shared_symbol,
)

COND_LIMIT = 1e12


@dataclass(frozen=True)
class IntegratorConfig:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-9
    max_steps: int = 1_000_000
    initial_step: float | None = None

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0 or self.max_steps <= 0:
            raise ValueError("tolerances and max_steps must be positive")


@dataclass(frozen=True)
class BaseFlowResult:
    status: str  # "complete" | "escaped"
    point: np.ndarray
    escape_time: float | None = None

    @property
    def complete(self) -> bool:
        return self.status == "complete"


@dataclass(frozen=True)
class LinearFlowResult:
    status: str
    base_point: np.ndarray
    fundamental: np.ndarray
    condition_estimate: float
    escape_time: float | None = None

    @property
    def complete(self) -> bool:
        return self.status == "complete"


@dataclass(frozen=True)
class PointFlowResult:
    status: str
    base_point: np.ndarray
    vector: np.ndarray
    escape_time: float | None = None

    @property
    def complete(self) -> bool:
        return self.status == "complete"


# ---------------------------------------------------------------------------
# Dormand-Prince 5(4)

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)

_ESCAPE_TIME_TOL = 1e-10


def _rk_step(f, t, y, h):
    """One DoPri step; returns (y5, error_estimate_vector)."""
    k = [f(t, y)]
    for i in range(1, 7):
        yi = y + h * sum(a * ki for a, ki in zip(_A[i], k))
        k.append(f(t + _C[i] * h, yi))
    y5 = y + h * sum(b * ki for b, ki in zip(_B5, k))
    y4 = y + h * sum(b * ki for b, ki in zip(_B4, k))
    return y5, y5 - y4


def _initial_step(f, t0, y0, direction, cfg):
    if cfg.initial_step is not None:
        return abs(cfg.initial_step) * direction
    f0 = f(t0, y0)
    scale = cfg.abs_tol + cfg.rel_tol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    return min(h, 0.1) * direction


def dopri_integrate(
    f: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    y0: np.ndarray,
    t1: float,
    cfg: IntegratorConfig,
    inside: Callable[[np.ndarray], bool] | None = None,
) -> tuple[str, float, np.ndarray]:
    """Integrate dy/dt = f(t, y) from t0 to t1 with escape detection.

    Returns ("complete", t1, y(t1)) or ("escaped", t_escape, y just inside
    the boundary). Raises IntegrationError on step underflow or when the
    step budget is exhausted.
    """
    y = np.asarray(y0, dtype=float).copy()
    if inside is not None and not inside(y):
        return "escaped", t0, y
    if t1 == t0:
        return "complete", t0, y
    direction = 1.0 if t1 > t0 else -1.0
    t = t0
    h = _initial_step(f, t0, y, direction, cfg)
    hmin = 16 * np.finfo(float).eps * max(abs(t0), abs(t1), 1.0)
    for _ in range(cfg.max_steps):
        if direction * (t + h - t1) > 0:
            h = t1 - t
        y_new, err_vec = _rk_step(f, t, y, h)
        scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))
        if err <= 1.0:
            if inside is not None and not inside(y_new):
                return _locate_escape(f, t, y, h, cfg, inside)
            t, y = t + h, y_new
            if direction * (t - t1) >= 0:
                return "complete", t1, y
            factor = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
        else:
            factor = max(0.2, 0.9 * err ** -0.2)
        h *= factor
        if abs(h) < hmin:
            raise IntegrationError(
                f"step size underflow at t = {t:.12g} (stiffness failure)"
            )
    raise IntegrationError(f"max_steps = {cfg.max_steps} exceeded at t = {t:.12g}")


def _locate_escape(f, t, y, h, cfg, inside):
    """Bisect the step fraction until the escape time is bracketed to 1e-10."""
    lo, hi = 0.0, 1.0  # inside at lo*h, outside at hi*h
    y_lo = y
    while abs(h) * (hi - lo) > _ESCAPE_TIME_TOL:
        mid = 0.5 * (lo + hi)
        y_mid, _ = _rk_step(f, t, y, mid * h)
        if inside(y_mid):
            lo, y_lo = mid, y_mid
        else:
            hi = mid
    return "escaped", t + lo * h, y_lo


# ---------------------------------------------------------------------------
# Flow operations


def integrate_base(
    X: VectorFieldSpec, x0, t: float, cfg: IntegratorConfig | None = None
) -> BaseFlowResult:
    """Base flow phi_t(x0) of X on its open box, with escape bracketing."""
    cfg = cfg or IntegratorConfig()
    x0 = np.asarray(x0, dtype=float)
    box = X.domain

    def f(_s, y):
        return X.at(y)

    status, t_reach, y = dopri_integrate(f, 0.0, x0, t, cfg, inside=box.contains)
    if status == "escaped":
        return BaseFlowResult("escaped", y, escape_time=t_reach)
    return BaseFlowResult("complete", y)


def integrate_linear(
    D: DerivationSpec | PointDerivation, x0, t: float, cfg: IntegratorConfig | None = None
) -> LinearFlowResult:
    """Joint base + fundamental-matrix integration: returns (phi_t(x0), F_t(x0)).

    The escape test sees only the base component; the fiber never terminates
    the integration on its own.
    """
    cfg = cfg or IntegratorConfig()
    x0 = np.asarray(x0, dtype=float)
    m, k = D.base.dim, D.rank
    y0 = np.concatenate([x0, np.eye(k).ravel()])

    def f(_s, y):
        x = y[:m]
        F = y[m:].reshape(k, k)
        return np.concatenate([D.symbol_at(x), (-D.matrix_at(x) @ F).ravel()])

    def inside(y):
        return D.base.contains(y[:m])

    status, t_reach, y = dopri_integrate(f, 0.0, y0, t, cfg, inside=inside)
    F = y[m:].reshape(k, k)
    cond = float(np.linalg.cond(F, 1))
    if status == "escaped":
        return LinearFlowResult("escaped", y[:m], F, cond, escape_time=t_reach)
    return LinearFlowResult("complete", y[:m], F, cond)


def flow_pointwise(
    D: DerivationSpec | PointDerivation,
    x0,
    v0,
    t: float,
    cfg: IntegratorConfig | None = None,
) -> PointFlowResult:
    """Integrate the (m+k)-dimensional system (X(x), -A(x)v) directly.

    Structure-agnostic route: no linearity is used, so this serves as the
    independent oracle for the fundamental-matrix path.
    """
    cfg = cfg or IntegratorConfig()
    x0 = np.asarray(x0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    m = D.base.dim
    if v0.shape != (D.rank,):
        raise DimensionError(f"v0 has shape {v0.shape}, expected ({D.rank},)")

    def f(_s, y):
        x, v = y[:m], y[m:]
        return np.concatenate([D.symbol_at(x), -D.matrix_at(x) @ v])

    def inside(y):
        return D.base.contains(y[:m])

    status, t_reach, y = dopri_integrate(f, 0.0, np.concatenate([x0, v0]), t, cfg, inside=inside)
    if status == "escaped":
        return PointFlowResult("escaped", y[:m], y[m:], escape_time=t_reach)
    return PointFlowResult("complete", y[:m], y[m:])


def solve_with_condition_check(F: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    cond = float(np.linalg.cond(F, 1))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise ConditioningError(f"fundamental matrix condition {cond:.3g} exceeds {COND_LIMIT:.1g}")
    return np.linalg.solve(F, rhs)


def pullback_section(
    D: DerivationSpec | PointDerivation,
    e: SectionSpec,
    t: float,
    x,
    cfg: IntegratorConfig | None = None,
) -> np.ndarray:
    """(Phi_t^* e)(x) = F_t(x)^{-1} e(phi_t(x))."""
    res = integrate_linear(D, x, t, cfg)
    if not res.complete:
        raise DomainEscape(res.escape_time)
    return solve_with_condition_check(res.fundamental, e.at(res.base_point))


def dual_flow(
    D: DerivationSpec | PointDerivation, x, t: float, cfg: IntegratorConfig | None = None
) -> np.ndarray:
    """Fiber matrix of the dual flow: G_t(x) = (F_t(x)^T)^{-1}."""
    res = integrate_linear(D, x, t, cfg)
    if not res.complete:
        raise DomainEscape(res.escape_time)
    return solve_with_condition_check(res.fundamental.T, np.eye(D.rank))


def tensor_flow(
    DE: DerivationSpec, DF: DerivationSpec, x, t: float, cfg: IntegratorConfig | None = None
) -> np.ndarray:
    """Fiber matrix of the tensor-product flow: F^E_t(x) (x) F^F_t(x)."""
    _require_shared_symbol(DE, DF)
    rE = integrate_linear(DE, x, t, cfg)
    if not rE.complete:
        raise DomainEscape(rE.escape_time)
    rF = integrate_linear(DF, x, t, cfg)
    if not rF.complete:
        raise DomainEscape(rF.escape_time)
    return np.kron(rE.fundamental, rF.fundamental)


# ---------------------------------------------------------------------------
# Brackets on the total space

_FD_H = 1e-5


def _numeric_jacobian(value: Callable[[np.ndarray], np.ndarray], p: np.ndarray) -> np.ndarray:
    n = len(p)
    cols = []
    for i in range(n):
        dp = np.zeros(n)
        dp[i] = _FD_H
        cols.append((value(p + dp) - value(p - dp)) / (2 * _FD_H))
    return np.column_stack(cols)


def bracket_vf(Y: TotalField, Z: TotalField, p) -> np.ndarray:
    """[Y, Z](p) = J_Z(p) Y(p) - J_Y(p) Z(p)."""
    p = np.asarray(p, dtype=float)
    JY = Y.jacobian(p) if Y.jacobian is not None else _numeric_jacobian(Y.value, p)
    JZ = Z.jacobian(p) if Z.jacobian is not None else _numeric_jacobian(Z.value, p)
    return JZ @ Y.value(p) - JY @ Z.value(p)


def richardson_time_derivative(g: Callable[[float], np.ndarray], h: float = 1e-4) -> np.ndarray:
    """d/dt g(t)|_0 via central differences with one Richardson halving."""
    d1 = (g(h) - g(-h)) / (2 * h)
    d2 = (g(h / 2) - g(-h / 2)) / h
    return (4 * d2 - d1) / 3
