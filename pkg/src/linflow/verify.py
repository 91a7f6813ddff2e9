"""Verification suites run over seeded quasi-random sample points.

Every suite is deterministic given (scene, seed, samples): sample points
come from a Halton sequence mapped into the domain shrunk by a 5% margin,
and suites always run in registry order.
"""

from __future__ import annotations

import time

import numpy as np

from . import algebroid as alg
from .errors import DomainEscape, LinflowError, PreconditionError, SceneError
from .flow import (
    IntegratorConfig,
    bracket_vf,
    dual_flow,
    flow_pointwise,
    integrate_linear,
    pullback_section,
    tensor_flow,
)
from .geometry import (
    apply_derivation,
    core_lift,
    commutator,
    dual_derivation,
    lift_derivation,
    tensor_derivation,
)
from .report import CheckRecord, Report
from .sampling import halton_points, sample_box
from .scene import SceneFile
from .trivialize import (
    bump_value,
    connection_from_cocycle,
    global_frame,
    trivialize_cylinder,
    trivialize_cylinder_inverse,
    validate_cocycle,
)

SUITE_ORDER = (
    "flows",
    "brackets",
    "sections",
    "flat-section",
    "dualtensor",
    "ode",
    "cylinder",
    "cocycle",
    "algebroid",
)


class _Ctx:
    def __init__(self, scene: SceneFile, seed: int, samples: int):
        self.scene = scene
        self.seed = seed
        self.samples = samples
        self.tol = scene.verify.tolerances
        self.T = scene.verify.time_horizon
        self.cfg = IntegratorConfig()
        self.records: list[CheckRecord] = []

    def draws(self, extra_dim: int) -> np.ndarray:
        """(samples, m + 1 + extra_dim): base point, time in [-T, T], extras in (-1,1)."""
        m = self.scene.base.dim
        u = halton_points(self.samples, m + 1 + extra_dim, self.seed)
        box = self.scene.base.shrink(0.1)
        lo, up = np.asarray(box.lower), np.asarray(box.upper)
        out = np.empty_like(u)
        out[:, :m] = lo + u[:, :m] * (up - lo)
        out[:, m] = -self.T + u[:, m] * 2 * self.T
        out[:, m + 1:] = 2 * u[:, m + 1:] - 1
        return out

    def record(self, suite, check, n, worst, tol, worst_point=(), detail=""):
        self.records.append(
            CheckRecord(suite, check, n, worst, tol, worst <= tol, worst_point, detail)
        )


class _Worst:
    """Track max residual plus the point and compared values realizing it."""

    def __init__(self):
        self.value = -1.0
        self.point: tuple = ()
        self.detail = ""

    def update(self, residual: float, point, lhs=None, rhs=None):
        if residual > self.value:
            self.value = residual
            self.point = tuple(float(v) for v in np.atleast_1d(point))
            if lhs is not None:
                self.detail = f"lhs={np.asarray(lhs).ravel()[:4]} rhs={np.asarray(rhs).ravel()[:4]}"

    @property
    def max(self) -> float:
        return max(self.value, 0.0)


# ---------------------------------------------------------------------------
# Suites


def _suite_flows(ctx: _Ctx):
    tol_flow = ctx.tol["flow"]
    tol_fd = ctx.tol["fd"]
    m = ctx.scene.base.dim
    for name in sorted(ctx.scene.derivations):
        D = ctx.scene.derivation(name)
        k = D.rank
        draws = ctx.draws(2 * k + 2)
        agree, linear, zero, cocycle, inverse = _Worst(), _Worst(), _Worst(), _Worst(), _Worst()
        domain_mismatch = _Worst()
        n_valid = 0
        for row in draws:
            x, t = row[:m], row[m]
            v, w = row[m + 1 : m + 1 + k], row[m + 1 + k : m + 1 + 2 * k]
            a, b = row[m + 1 + 2 * k], row[m + 2 + 2 * k]
            lin = integrate_linear(D, x, t, ctx.cfg)
            pw = flow_pointwise(D, x, v, t, ctx.cfg)
            if lin.status != pw.status:
                domain_mismatch.update(1.0, x)
            if not lin.complete:
                continue
            n_valid += 1
            F = lin.fundamental
            # pointwise vs fundamental-matrix route
            agree.update(
                float(np.max(np.abs(pw.vector - F @ v))) / (1 + np.linalg.norm(v)),
                x, pw.vector, F @ v,
            )
            # fiberwise linearity of the structure-agnostic route
            pw_w = flow_pointwise(D, x, w, t, ctx.cfg)
            pw_c = flow_pointwise(D, x, a * v + b * w, t, ctx.cfg)
            if pw_w.complete and pw_c.complete:
                combo = a * pw.vector + b * pw_w.vector
                linear.update(float(np.max(np.abs(pw_c.vector - combo))), x, pw_c.vector, combo)
            # zero-section invariance
            pz = flow_pointwise(D, x, np.zeros(k), t, ctx.cfg)
            if pz.complete:
                zero.update(float(np.linalg.norm(pz.vector)), x)
            # cocycle and inverse laws
            s = 0.5 * t
            rs = integrate_linear(D, x, s, ctx.cfg)
            if rs.complete:
                rts = integrate_linear(D, rs.base_point, t - s, ctx.cfg)
                if rts.complete:
                    lhsF = rts.fundamental @ rs.fundamental
                    scale = 1 + float(np.linalg.norm(F))
                    cocycle.update(
                        max(
                            float(np.max(np.abs(lhsF - F))) / scale,
                            float(np.max(np.abs(rts.base_point - lin.base_point))),
                        ),
                        x, lhsF, F,
                    )
            rb = integrate_linear(D, lin.base_point, -t, ctx.cfg)
            if rb.complete:
                inverse.update(
                    float(np.max(np.abs(rb.fundamental @ F - np.eye(k)))), x
                )
        ctx.record("flows", f"{name}.pointwise_vs_fundamental", n_valid, agree.max, tol_fd,
                   agree.point, agree.detail)
        ctx.record("flows", f"{name}.fiberwise_linearity", n_valid, linear.max, tol_fd,
                   linear.point, linear.detail)
        ctx.record("flows", f"{name}.zero_section", n_valid, zero.max, 1e-10, zero.point)
        ctx.record("flows", f"{name}.cocycle_law", n_valid, cocycle.max, tol_flow,
                   cocycle.point, cocycle.detail)
        ctx.record("flows", f"{name}.inverse_law", n_valid, inverse.max, tol_flow, inverse.point)
        ctx.record("flows", f"{name}.flow_domain_equality", len(draws), domain_mismatch.max,
                   0.0, domain_mismatch.point)


def _suite_brackets(ctx: _Ctx):
    tol = ctx.tol["fd"]
    scene = ctx.scene
    m = scene.base.dim
    names = sorted(scene.derivations)
    pairs = [(a, b) for i, a in enumerate(names) for b in names[i:]
             if scene.derivations[a][0] == scene.derivations[b][0]]
    for a, b in pairs:
        Da, Db = scene.derivation(a), scene.derivation(b)
        k = Da.rank
        draws = ctx.draws(k)
        C = commutator(Da, Db)
        liftC = lift_derivation(C)
        Ya, Yb = lift_derivation(Da), lift_derivation(Db)
        worst = _Worst()
        for row in draws:
            p = np.concatenate([row[:m], row[m + 1 :]])
            lhs = bracket_vf(Ya, Yb, p)
            rhs = liftC.value(p)
            worst.update(float(np.max(np.abs(lhs - rhs))), p, lhs, rhs)
        ctx.record("brackets", f"[{a},{b}].lift_commutator", len(draws), worst.max, tol,
                   worst.point, worst.detail)
    for dname in names:
        bundle, D = scene.derivations[dname]
        k = D.rank
        YD = lift_derivation(D)
        for sname in sorted(scene.sections):
            sb, e = scene.sections[sname]
            if sb != bundle:
                continue
            draws = ctx.draws(k)
            worst = _Worst()
            for row in draws:
                p = np.concatenate([row[:m], row[m + 1 :]])
                lhs = bracket_vf(YD, core_lift(e, scene.base), p)
                rhs = np.concatenate([np.zeros(m), apply_derivation(D, e, p[:m])])
                worst.update(float(np.max(np.abs(lhs - rhs))), p, lhs, rhs)
            ctx.record("brackets", f"[{dname},{sname}^].core_bracket", len(draws), worst.max,
                       tol, worst.point, worst.detail)
    snames = sorted(scene.sections)
    for i, a in enumerate(snames):
        for b in snames[i:]:
            if scene.sections[a][0] != scene.sections[b][0]:
                continue
            ea, eb = scene.sections[a][1], scene.sections[b][1]
            k = ea.rank
            draws = ctx.draws(k)
            worst = _Worst()
            for row in draws:
                p = np.concatenate([row[:m], row[m + 1 :]])
                lhs = bracket_vf(core_lift(ea, scene.base), core_lift(eb, scene.base), p)
                worst.update(float(np.max(np.abs(lhs))), p)
            ctx.record("brackets", f"[{a}^,{b}^].core_core", len(draws), worst.max, tol,
                       worst.point)


def _suite_sections(ctx: _Ctx):
    tol = ctx.tol["fd"]
    scene = ctx.scene
    m = scene.base.dim
    h = 1e-4
    for dname in sorted(scene.derivations):
        bundle, D = scene.derivations[dname]
        for sname in sorted(scene.sections):
            sb, e = scene.sections[sname]
            if sb != bundle:
                continue
            draws = ctx.draws(0)
            d_worst, flow_worst = _Worst(), _Worst()
            for row in draws:
                x, t = row[:m], row[m]
                try:
                    # d/dt Phi_t^* e at 0 (Richardson) vs De
                    d1 = (pullback_section(D, e, h, x, ctx.cfg)
                          - pullback_section(D, e, -h, x, ctx.cfg)) / (2 * h)
                    d2 = (pullback_section(D, e, h / 2, x, ctx.cfg)
                          - pullback_section(D, e, -h / 2, x, ctx.cfg)) / h
                    fd = (4 * d2 - d1) / 3
                    de = apply_derivation(D, e, x)
                    d_worst.update(float(np.max(np.abs(fd - de))), x, fd, de)
                    # Phi_t^*(De) = D(Phi_t^* e), both routes independent
                    lhs = _pullback_applied(D, e, t, x, ctx.cfg)
                    rhs = _apply_to_pullback(D, e, t, x, ctx.cfg)
                    flow_worst.update(float(np.max(np.abs(lhs - rhs))), x, lhs, rhs)
                except DomainEscape:
                    continue
            ctx.record("sections", f"{dname}({sname}).derivative_of_pullback", len(draws),
                       d_worst.max, tol, d_worst.point, d_worst.detail)
            ctx.record("sections", f"{dname}({sname}).pullback_commutes", len(draws),
                       flow_worst.max, tol, flow_worst.point, flow_worst.detail)


def _pullback_applied(D, e, t, x, cfg):
    """Phi_t^*(De) at x: F_t(x)^{-1} (De)(phi_t(x))."""
    from .flow import solve_with_condition_check

    res = integrate_linear(D, x, t, cfg)
    if not res.complete:
        raise DomainEscape(res.escape_time)
    return solve_with_condition_check(
        res.fundamental, apply_derivation(D, e, res.base_point)
    )


def _apply_to_pullback(D, e, t, x, cfg, h: float = 1e-4):
    """D(Phi_t^* e) at x: Jacobian of the pullback section by central
    differences, then the Leibniz formula."""
    x = np.asarray(x, dtype=float)
    m = len(x)
    cols = []
    for i in range(m):
        dx = np.zeros(m)
        dx[i] = h
        cols.append(
            (pullback_section(D, e, t, x + dx, cfg) - pullback_section(D, e, t, x - dx, cfg))
            / (2 * h)
        )
    J = np.column_stack(cols)
    return J @ D.symbol_at(x) + D.matrix_at(x) @ pullback_section(D, e, t, x, cfg)


def _suite_flat_section(ctx: _Ctx):
    tol = ctx.tol["flow"]
    scene = ctx.scene
    m = scene.base.dim
    for sname in scene.verify.flat_sections:
        bundle, e = scene.sections[sname]
        dnames = [n for n in sorted(scene.derivations) if scene.derivations[n][0] == bundle]
        for dname in dnames:
            D = scene.derivation(dname)
            draws = ctx.draws(0)
            worst = _Worst()
            for row in draws:
                x, t = row[:m], row[m]
                try:
                    pb = pullback_section(D, e, t, x, ctx.cfg)
                except DomainEscape:
                    continue
                worst.update(float(np.max(np.abs(pb - e.at(x)))), x, pb, e.at(x))
            ctx.record("flat-section", f"{dname}({sname}).invariant", len(draws),
                       worst.max, tol, worst.point, worst.detail)


def _suite_dualtensor(ctx: _Ctx):
    tol_flow = ctx.tol["flow"]
    tol_pair = ctx.tol["pairing"]
    scene = ctx.scene
    m = scene.base.dim
    names = sorted(scene.derivations)
    for name in names:
        D = scene.derivation(name)
        k = D.rank
        Dstar = dual_derivation(D)
        draws = ctx.draws(2 * k)
        pairing, two_route = _Worst(), _Worst()
        for row in draws:
            x, t = row[:m], row[m]
            eps, v = row[m + 1 : m + 1 + k], row[m + 1 + k :]
            try:
                G = dual_flow(D, x, t, ctx.cfg)
                lin = integrate_linear(D, x, t, ctx.cfg)
                Gint = integrate_linear(Dstar, x, t, ctx.cfg)
            except DomainEscape:
                continue
            if not (lin.complete and Gint.complete):
                continue
            F = lin.fundamental
            pairing.update(abs(float((G @ eps) @ (F @ v)) - float(eps @ v)), x)
            two_route.update(float(np.max(np.abs(G - Gint.fundamental))), x,
                             G, Gint.fundamental)
        ctx.record("dualtensor", f"{name}.pairing_preservation", len(draws), pairing.max,
                   tol_pair, pairing.point)
        ctx.record("dualtensor", f"{name}.dual_two_route", len(draws), two_route.max,
                   tol_flow, two_route.point, two_route.detail)
    # tensor pairs: derivations sharing base and symbol (always include (D, D))
    pairs = []
    for i, a in enumerate(names):
        for b in names[i:]:
            Da, Db = scene.derivation(a), scene.derivation(b)
            if tuple(c.root for c in Da.symbol.components) == tuple(
                c.root for c in Db.symbol.components
            ):
                pairs.append((a, b))
    for a, b in pairs:
        Da, Db = scene.derivation(a), scene.derivation(b)
        kE, kF = Da.rank, Db.rank
        Dt = tensor_derivation(Da, Db)
        draws = ctx.draws(kE + kF)
        two_route, elementary = _Worst(), _Worst()
        for row in draws:
            x, t = row[:m], row[m]
            v, w = row[m + 1 : m + 1 + kE], row[m + 1 + kE :]
            try:
                T = tensor_flow(Da, Db, x, t, ctx.cfg)
                rT = integrate_linear(Dt, x, t, ctx.cfg)
                rE = integrate_linear(Da, x, t, ctx.cfg)
                rF = integrate_linear(Db, x, t, ctx.cfg)
            except DomainEscape:
                continue
            if not (rT.complete and rE.complete and rF.complete):
                continue
            two_route.update(float(np.max(np.abs(T - rT.fundamental))), x, T, rT.fundamental)
            lhs = T @ np.kron(v, w)
            rhs = np.kron(rE.fundamental @ v, rF.fundamental @ w)
            elementary.update(float(np.max(np.abs(lhs - rhs))), x, lhs, rhs)
        ctx.record("dualtensor", f"[{a},{b}].tensor_two_route", len(draws), two_route.max,
                   tol_flow, two_route.point, two_route.detail)
        ctx.record("dualtensor", f"[{a},{b}].tensor_elementary", len(draws),
                   elementary.max, 1e-8, elementary.point, elementary.detail)


def _suite_ode(ctx: _Ctx):
    from .odesolve import adaptive_quad, propagator, solve_nonautonomous

    scene = ctx.scene
    A = scene.ode
    n = A.n
    a, b = A.interval
    u = halton_points(ctx.samples, 3 + 2 * n, ctx.seed)
    w = b - a
    lin, comp, inv, liou = _Worst(), _Worst(), _Worst(), _Worst()
    for row in u:
        t0, t1, t2 = (a + 0.05 * w + r * 0.9 * w for r in row[:3])
        v = 2 * row[3 : 3 + n] - 1
        wvec = 2 * row[3 + n :] - 1
        # linearity in the initial vector
        sv = solve_nonautonomous(A, t0, v, t1, ctx.cfg)
        sw = solve_nonautonomous(A, t0, wvec, t1, ctx.cfg)
        svw = solve_nonautonomous(A, t0, 0.3 * v + 0.7 * wvec, t1, ctx.cfg)
        lin.update(float(np.max(np.abs(svw - 0.3 * sv - 0.7 * sw))), [t0, t1])
        # propagator composition and inverse
        P10 = propagator(A, t0, t1, ctx.cfg)
        P21 = propagator(A, t1, t2, ctx.cfg)
        P20 = propagator(A, t0, t2, ctx.cfg)
        comp.update(float(np.max(np.abs(P21 @ P10 - P20))), [t0, t1, t2], P21 @ P10, P20)
        P01 = propagator(A, t1, t0, ctx.cfg)
        inv.update(float(np.max(np.abs(P01 @ P10 - np.eye(n)))), [t0, t1])
        # Liouville: det P(t1, t0) = exp(int tr A)
        tr = adaptive_quad(lambda s: float(np.trace(A.at(s))), t0, t1)
        det = float(np.linalg.det(P10))
        liou.update(abs(det - np.exp(tr)) / abs(np.exp(tr)), [t0, t1], det, np.exp(tr))
    ctx.record("ode", "linearity", ctx.samples, lin.max, 1e-8, lin.point)
    ctx.record("ode", "propagator_composition", ctx.samples, comp.max, ctx.tol["flow"],
               comp.point, comp.detail)
    ctx.record("ode", "propagator_inverse", ctx.samples, inv.max, ctx.tol["flow"], inv.point)
    ctx.record("ode", "liouville_determinant", ctx.samples, liou.max, ctx.tol["fd"],
               liou.point, liou.detail)


def _suite_cylinder(ctx: _Ctx):
    scene = ctx.scene
    B = scene.cylinder
    a, b = B.interval
    t0 = 0.5 * (a + b)
    m = B.base.dim
    u = halton_points(ctx.samples, 1 + m, ctx.seed)
    box = B.base.shrink(0.1)
    lo, up = np.asarray(box.lower), np.asarray(box.upper)
    ident_worst, inv_worst = _Worst(), _Worst()
    for row in u:
        t = a + 0.05 * (b - a) + row[0] * 0.9 * (b - a)
        x = lo + row[1:] * (up - lo)
        theta = trivialize_cylinder(B, t0, t, x, ctx.cfg)
        theta_inv = trivialize_cylinder_inverse(B, t0, t, x, ctx.cfg)
        k = B.rank
        r = max(
            float(np.max(np.abs(theta_inv @ theta - np.eye(k)))),
            float(np.max(np.abs(theta @ theta_inv - np.eye(k)))),
        )
        inv_worst.update(r, np.concatenate([[t], x]))
        ident_worst.update(
            float(np.max(np.abs(trivialize_cylinder(B, t0, t0, x, ctx.cfg) - np.eye(k)))),
            np.concatenate([[t0], x]),
        )
    ctx.record("cylinder", "theta_at_t0_identity", ctx.samples, ident_worst.max, 0.0,
               ident_worst.point)
    ctx.record("cylinder", "theta_inverse", ctx.samples, inv_worst.max, 1e-8,
               inv_worst.point)


def _suite_cocycle(ctx: _Ctx):
    scene = ctx.scene
    B = scene.cocycle
    results = validate_cocycle(B, samples_per_overlap=max(4, ctx.samples // 8))
    for name, residual in results:
        ctx.record("cocycle", name, ctx.samples, residual, 1e-9)
    conn = connection_from_cocycle(B)
    m = B.patches[0].dim
    # partition of unity: pointwise sum and boundary vanishing of the bump
    lo = np.min([p.lower for p in B.patches], axis=0)
    up = np.max([p.upper for p in B.patches], axis=0)
    from .geometry import BoxDomain

    hull = BoxDomain(tuple(lo), tuple(up))
    sum_worst, bnd_worst = _Worst(), _Worst()
    for x in sample_box(hull, ctx.samples, ctx.seed, margin=0.05):
        try:
            rho = conn.partition(x)
        except LinflowError:
            continue
        sum_worst.update(abs(float(rho.sum()) - 1.0), x)
    for p in B.patches:
        center = 0.5 * (np.asarray(p.lower) + np.asarray(p.upper))
        half = 0.5 * (np.asarray(p.upper) - np.asarray(p.lower))
        for axis in range(m):
            for side in (-1.0, 1.0):
                xb = center.copy()
                xb[axis] += side * half[axis] * (1 - 1e-3)  # just inside one face
                val = bump_value(p, xb)
                grad = np.array([
                    (bump_value(p, xb + 1e-6 * e) - bump_value(p, xb - 1e-6 * e)) / 2e-6
                    for e in np.eye(m)
                ])
                bnd_worst.update(max(val, float(np.max(np.abs(grad)))), xb)
    ctx.record("cocycle", "partition_of_unity_sum", ctx.samples, sum_worst.max, 1e-12,
               sum_worst.point)
    ctx.record("cocycle", "bump_boundary_vanishing", ctx.samples, bnd_worst.max, 1e-6,
               bnd_worst.point)
    # two-frame transport compatibility across an overlap
    trans_worst = _Worst()
    checked = 0
    for (a, b) in sorted(B.transitions):
        ov = B.overlap(a, b)
        if ov is None:
            continue
        pts = sample_box(ov, 4, ctx.seed, margin=0.2)
        p0 = pts[0]
        for q in pts[1:]:
            va = np.ones(B.rank)
            ra = _transport_straight(conn, a, p0, q, va, ctx.cfg)
            vb = B.transition_at(b, a, p0) @ va
            rb = _transport_straight(conn, b, p0, q, vb, ctx.cfg)
            back = B.transition_at(a, b, q) @ rb
            trans_worst.update(float(np.max(np.abs(ra - back))), q, ra, back)
            checked += 1
    ctx.record("cocycle", "two_frame_transport", checked, trans_worst.max,
               ctx.tol["flow"], trans_worst.point, trans_worst.detail)
    # global frame overlap residual on a coarse grid
    basepoint = 0.5 * (np.asarray(B.patches[0].lower) + np.asarray(B.patches[0].upper))
    frame = global_frame(B, basepoint, grid=8, cfg=ctx.cfg)
    ctx.record("cocycle", "global_frame_overlap", len(frame.records),
               frame.overlap_residual, ctx.tol["fd"])


def _transport_straight(conn, frame_idx, p0, p1, v, cfg):
    """Transport v in one fixed frame along the broken coordinate path."""
    pos = np.asarray(p0, dtype=float).copy()
    out = np.asarray(v, dtype=float).copy()
    for i in range(len(pos)):
        d = p1[i] - pos[i]
        if d == 0.0:
            continue
        D = conn.derivation(frame_idx, i, conn.bundle.patches[frame_idx])
        res = integrate_linear(D, pos, d, cfg)
        if not res.complete:
            raise DomainEscape(res.escape_time)
        out = res.fundamental @ out
        pos = res.base_point
    return out


def _suite_algebroid(ctx: _Ctx):
    scene = ctx.scene
    S = scene.algebroid
    samples = sample_box(S.base, ctx.samples, ctx.seed, margin=0.1)
    ctx.records.extend(alg.check_fiber_structure(S, samples).records)
    flat = alg.check_flatness(S, samples)
    ctx.records.extend(flat.records)
    basepoint = 0.5 * (np.asarray(S.base.lower) + np.asarray(S.base.upper))
    try:
        cert = alg.certify_lab(S, basepoint, samples, ctx.cfg)
        ctx.records.append(cert.records[-1])
    except PreconditionError as exc:
        ctx.record("algebroid", "bracket_preservation", len(samples), float("inf"), 1e-6,
                   detail=str(exc))
        return
    # Psi path composition and invertibility
    comp_worst, inv_worst = _Worst(), _Worst()
    m = S.base.dim
    for y in samples[: max(4, ctx.samples // 4)]:
        psi = alg.fiber_isomorphism(S, basepoint, y, ctx.cfg)
        mid = y.copy()
        mid[m // 2 :] = basepoint[m // 2 :]
        psi2 = alg.fiber_isomorphism(S, mid, y, ctx.cfg) @ alg.fiber_isomorphism(
            S, basepoint, mid, ctx.cfg
        )
        comp_worst.update(float(np.max(np.abs(psi - psi2))), y, psi, psi2)
        back = _reverse_transport(S, basepoint, y, ctx.cfg)
        inv_worst.update(float(np.max(np.abs(back @ psi - np.eye(S.rank)))), y)
    nshow = max(4, ctx.samples // 4)
    ctx.record("algebroid", "psi_path_composition", nshow, comp_worst.max,
               ctx.tol["flow"], comp_worst.point, comp_worst.detail)
    ctx.record("algebroid", "psi_invertibility", nshow, inv_worst.max,
               ctx.tol["flow"], inv_worst.point)


def _reverse_transport(S, x, y, cfg):
    """Transport back along reversed segments in reversed order."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    pos = np.empty_like(y)
    pos[:] = y
    psi = np.eye(S.rank)
    for i in reversed(range(S.base.dim)):
        d = x[i] - y[i]
        if d == 0.0:
            continue
        res = integrate_linear(S.axis_derivation(i), pos, d, cfg)
        if not res.complete:
            raise DomainEscape(res.escape_time)
        psi = res.fundamental @ psi
        pos = res.base_point
    return psi


# ---------------------------------------------------------------------------
# Orchestration

_SUITES = {
    "flows": (_suite_flows, lambda s: bool(s.derivations)),
    "brackets": (_suite_brackets, lambda s: bool(s.derivations)),
    "sections": (
        _suite_sections,
        lambda s: any(
            s.derivations[d][0] == s.sections[e][0]
            for d in s.derivations
            for e in s.sections
        ),
    ),
    "flat-section": (_suite_flat_section, lambda s: bool(s.verify.flat_sections)),
    "dualtensor": (_suite_dualtensor, lambda s: bool(s.derivations)),
    "ode": (_suite_ode, lambda s: s.ode is not None),
    "cylinder": (_suite_cylinder, lambda s: s.cylinder is not None),
    "cocycle": (_suite_cocycle, lambda s: s.cocycle is not None),
    "algebroid": (_suite_algebroid, lambda s: s.algebroid is not None),
}


def run_verify(
    scene: SceneFile,
    suites: list[str] | None = None,
    seed: int | None = None,
    samples: int | None = None,
) -> Report:
    """Run verification suites; deterministic given (scene, seed, samples)."""
    requested = suites if suites is not None else scene.verify.suites
    seed = scene.verify.seed if seed is None else seed
    samples = scene.verify.samples if samples is None else samples
    if requested == ["all"] or requested == "all":
        selected = [n for n in SUITE_ORDER if _SUITES[n][1](scene)]
    else:
        selected = []
        for name in requested:
            if name not in _SUITES:
                raise SceneError(f"unknown suite {name!r}; known: {', '.join(SUITE_ORDER)}")
            if not _SUITES[name][1](scene):
                raise SceneError(f"suite {name!r} is not applicable to this scene")
            selected.append(name)
        selected = [n for n in SUITE_ORDER if n in selected]
    start = time.monotonic()
    ctx = _Ctx(scene, seed, samples)
    for name in selected:
        _SUITES[name][0](ctx)
    report = Report(records=ctx.records, seed=seed)
    report.runtime = time.monotonic() - start
    return report
