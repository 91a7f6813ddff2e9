"""Flows of linear vector fields on vector bundles.

A derivation D = (symbol X, matrix field A) of sections of a trivialized
rank-k bundle over an open box induces a flow by fiberwise-linear maps:
the base flow of X paired with the fundamental matrix of dF/dt = -A F.
This package integrates those flows, their dual/tensor companions, and the
induced transport on section pullbacks; it also covers non-autonomous
linear systems by suspension, cylinder and cocycle trivializations, and
transport certificates for bundles of Lie algebras.
"""

from .errors import (
    ConditioningError,
    DimensionError,
    DomainEscape,
    EvalDomainError,
    ExprError,
    IntegrationError,
    LinflowError,
    ParseError,
    PreconditionError,
    SceneError,
)
from .expr import ScalarExpr, parse
from .flow import (
    IntegratorConfig,
    dual_flow,
    flow_pointwise,
    integrate_base,
    integrate_linear,
    pullback_section,
    tensor_flow,
)
from .geometry import (
    BoxDomain,
    DerivationSpec,
    SectionSpec,
    VectorFieldSpec,
    apply_derivation,
    commutator,
    dual_derivation,
    tensor_derivation,
)
from .odesolve import TimeMatrixSpec, expm, propagator, solve_nonautonomous
from .report import CheckRecord, Report
from .scene import SceneFile, load_scene
from .verify import run_verify

__version__ = "0.1.0"

__all__ = [
    "BoxDomain",
    "CheckRecord",
    "ConditioningError",
    "DerivationSpec",
    "DimensionError",
    "DomainEscape",
    "EvalDomainError",
    "ExprError",
    "IntegrationError",
    "IntegratorConfig",
    "LinflowError",
    "ParseError",
    "PreconditionError",
    "Report",
    "ScalarExpr",
    "SceneError",
    "SceneFile",
    "SectionSpec",
    "TimeMatrixSpec",
    "VectorFieldSpec",
    "apply_derivation",
    "commutator",
    "dual_derivation",
    "dual_flow",
    "expm",
    "flow_pointwise",
    "integrate_base",
    "integrate_linear",
    "load_scene",
    "parse",
    "propagator",
    "pullback_section",
    "run_verify",
    "solve_nonautonomous",
    "tensor_derivation",
    "tensor_flow",
    "__version__",
]
