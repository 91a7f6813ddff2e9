"""Transitive Lie algebroid kernel data over a chart box.

The kernel is presented by structure functions C^l_ij(x) (bracket of the
kernel frame) and by connection matrices A_i(x) of nabla_{a_i} = [a_i, .]
with anchor lifts rho(a_i) = d/dx_i. Fibers are certified pairwise
isomorphic as Lie algebras by transporting the bracket tensor with the
composed axis flows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainEscape, PreconditionError
from .expr import ScalarExpr
from .flow import IntegratorConfig, integrate_linear
from .geometry import BoxDomain, DerivationSpec, VectorFieldSpec
from .report import CheckRecord, Report

STRUCTURE_TOL = 1e-9
FLATNESS_TOL = 1e-8
BRACKET_TOL = 1e-6


@dataclass(frozen=True)
class AlgebroidSpec:
    """Kernel structure functions and anchor-lift connection matrices.

    structure[l][i][j] = C^l_ij with [k_i, k_j] = sum_l C^l_ij k_l;
    connection[i] is the r x r matrix field of nabla_{a_i}.
    """

    base: BoxDomain
    rank: int
    structure: tuple  # r x r x r of ScalarExpr
    connection: tuple  # m matrices, each r x r of ScalarExpr

    def __post_init__(self):
        r, m = self.rank, self.base.dim
        if len(self.structure) != r or any(
            len(mat) != r or any(len(row) != r for row in mat) for mat in self.structure
        ):
            raise DimensionError(f"structure functions must be {r}x{r}x{r}")
        if len(self.connection) != m or any(
            len(mat) != r or any(len(row) != r for row in mat) for mat in self.connection
        ):
            raise DimensionError(f"connection must hold {m} matrices of size {r}x{r}")

    def structure_at(self, x) -> np.ndarray:
        """(r, r, r) array with [l, i, j] = C^l_ij(x)."""
        return np.array(
            [[[e.eval(x) for e in row] for row in mat] for mat in self.structure]
        )

    def structure_gradients(self, x) -> np.ndarray:
        """(r, r, r, m) entrywise gradients of C."""
        return np.array(
            [[[e.eval_jet(x).gradient for e in row] for row in mat] for mat in self.structure]
        )

    def connection_at(self, direction: int, x) -> np.ndarray:
        return np.array(
            [[e.eval(x) for e in row] for row in self.connection[direction]]
        )

    def axis_derivation(self, direction: int) -> DerivationSpec:
        """Derivation with symbol d/dx_i and matrix A_i (the flow generator)."""
        from .expr import Const

        m = self.base.dim
        comps = tuple(
            ScalarExpr(Const(1.0 if d == direction else 0.0), m) for d in range(m)
        )
        return DerivationSpec(
            self.base, self.rank, VectorFieldSpec(self.base, comps), self.connection[direction]
        )


def bracket_at(S: AlgebroidSpec, x, v, w) -> np.ndarray:
    """Fiber bracket B_x(v, w) = sum_ij v_i w_j C^._ij(x)."""
    C = S.structure_at(x)
    return np.einsum("lij,i,j->l", C, v, w)


def check_fiber_structure(S: AlgebroidSpec, samples) -> Report:
    """Antisymmetry and fiberwise Jacobi residuals at the sample points."""
    report = Report()
    worst_anti, worst_jac = 0.0, 0.0
    pt_anti, pt_jac = (), ()
    for x in samples:
        C = S.structure_at(x)
        anti = float(np.max(np.abs(C + np.swapaxes(C, 1, 2))))
        # cyclic sum over (i, j, k) of sum_u C^u_jk C^l_iu
        term = np.einsum("ujk,liu->lijk", C, C)
        jac = term + np.transpose(term, (0, 2, 3, 1)) + np.transpose(term, (0, 3, 1, 2))
        jacr = float(np.max(np.abs(jac)))
        if anti > worst_anti:
            worst_anti, pt_anti = anti, tuple(float(v) for v in x)
        if jacr > worst_jac:
            worst_jac, pt_jac = jacr, tuple(float(v) for v in x)
    n = len(samples)
    report.add(CheckRecord("algebroid", "antisymmetry", n, worst_anti, STRUCTURE_TOL,
                           worst_anti <= STRUCTURE_TOL, pt_anti))
    report.add(CheckRecord("algebroid", "jacobi", n, worst_jac, STRUCTURE_TOL,
                           worst_jac <= STRUCTURE_TOL, pt_jac))
    return report


def flatness_residual(S: AlgebroidSpec, x) -> float:
    """max over directions i of | nabla_i B | at x.

    Componentwise: d_i C^._jk + A_i C^._jk - sum_l A_i[l,j] C^._lk
    - sum_l A_i[l,k] C^._jl."""
    C = S.structure_at(x)
    dC = S.structure_gradients(x)
    worst = 0.0
    for i in range(S.base.dim):
        A = S.connection_at(i, x)
        res = (
            dC[:, :, :, i]
            + np.einsum("lu,ujk->ljk", A, C)
            - np.einsum("lj,ulk->ujk", A, C)
            - np.einsum("lk,ujl->ujk", A, C)
        )
        worst = max(worst, float(np.max(np.abs(res))))
    return worst


def check_flatness(S: AlgebroidSpec, samples) -> Report:
    report = Report()
    worst, pt = 0.0, ()
    for x in samples:
        r = flatness_residual(S, x)
        if r > worst:
            worst, pt = r, tuple(float(v) for v in x)
    report.add(CheckRecord("algebroid", "flatness", len(samples), worst, FLATNESS_TOL,
                           worst <= FLATNESS_TOL, pt))
    return report


def fiber_isomorphism(
    S: AlgebroidSpec, x, y, cfg: IntegratorConfig | None = None
) -> np.ndarray:
    """Psi_{x->y}: composed axis-flow fundamental matrices along the broken
    coordinate path (direction 1 first, direction m last)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    psi = np.eye(S.rank)
    pos = x.copy()
    for i in range(S.base.dim):
        d = y[i] - x[i]
        if d == 0.0:
            continue
        res = integrate_linear(S.axis_derivation(i), pos, d, cfg)
        if not res.complete:
            raise DomainEscape(res.escape_time)
        psi = res.fundamental @ psi
        pos = res.base_point
    return psi


def certify_lab(
    S: AlgebroidSpec,
    basepoint,
    samples,
    cfg: IntegratorConfig | None = None,
) -> Report:
    """Certify all fibers isomorphic as Lie algebras via flow transport.

    Preconditions (gated): fiber structure and flatness residuals pass at
    the sample points. The certificate residual at a sample y is
    max_{i,j} | Psi B_x(k_i, k_j) - B_y(Psi k_i, Psi k_j) |.
    """
    basepoint = np.asarray(basepoint, dtype=float)
    pre = check_fiber_structure(S, samples)
    pre_flat = check_flatness(S, samples)
    for rec in pre.records + pre_flat.records:
        if not rec.passed:
            raise PreconditionError(
                f"certify_lab precondition failed: {rec.check} residual "
                f"{rec.max_error:.3e} exceeds {rec.tolerance:.1e}"
            )
    report = Report()
    report.records.extend(pre.records)
    report.records.extend(pre_flat.records)
    Cx = S.structure_at(basepoint)
    worst, pt = 0.0, ()
    for y in samples:
        psi = fiber_isomorphism(S, basepoint, y, cfg)
        Cy = S.structure_at(y)
        lhs = np.einsum("ml,lij->mij", psi, Cx)
        rhs = np.einsum("mab,ai,bj->mij", Cy, psi, psi)
        r = float(np.max(np.abs(lhs - rhs)))
        if r > worst:
            worst, pt = r, tuple(float(v) for v in y)
    report.add(CheckRecord("algebroid", "bracket_preservation", len(samples), worst,
                           BRACKET_TOL, worst <= BRACKET_TOL, pt))
    return report
