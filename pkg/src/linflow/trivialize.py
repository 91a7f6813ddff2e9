"""Flow-based trivialization over cylinders and cocycle-presented bundles.

Over a cylinder I x U the fiber matrix Theta(t, x) is the fundamental
matrix of the lifted field integrated from (t, x) for time t0 - t, so
Theta(t0, .) is the identity. Cocycle bundles over box covers get a glued
connection from a bump-function partition of unity, and a global frame by
parallel transport along broken coordinate paths from a basepoint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DomainEscape, LinflowError
from .expr import ScalarExpr
from .flow import IntegratorConfig, integrate_linear
from .geometry import BoxDomain, DerivationSpec, PointDerivation, VectorFieldSpec


@dataclass(frozen=True)
class CylinderBundle:
    """Rank-k bundle over I x U with a lift matrix A(t, x) over d/dt."""

    interval: tuple[float, float]
    base: BoxDomain
    rank: int
    matrix: tuple[tuple[ScalarExpr, ...], ...]  # entries in t and x1..xm

    def __post_init__(self):
        if len(self.matrix) != self.rank or any(len(r) != self.rank for r in self.matrix):
            raise DimensionError(f"lift matrix must be {self.rank}x{self.rank}")

    def lifted_derivation(self) -> DerivationSpec:
        """Derivation over the (1+m)-box (I, U) with symbol d/dt (= d/dx1)."""
        from .expr import Const

        m = self.base.dim
        box = BoxDomain(
            (self.interval[0],) + self.base.lower,
            (self.interval[1],) + self.base.upper,
        )
        comps = tuple(
            ScalarExpr(Const(1.0 if i == 0 else 0.0), m + 1) for i in range(m + 1)
        )
        rows = tuple(
            tuple(e.shift_vars(1, m + 1, time_to_var=0) for e in row) for row in self.matrix
        )
        return DerivationSpec(box, self.rank, VectorFieldSpec(box, comps), rows)


def trivialize_cylinder(
    B: CylinderBundle, t0: float, t: float, x, cfg: IntegratorConfig | None = None
) -> np.ndarray:
    """Fiber matrix Theta(t, x): transport from (t, x) back to the slice t0."""
    x = np.asarray(x, dtype=float)
    p = np.concatenate([[t], x])
    res = integrate_linear(B.lifted_derivation(), p, t0 - t, cfg)
    if not res.complete:
        raise DomainEscape(res.escape_time)
    return res.fundamental


def trivialize_cylinder_inverse(
    B: CylinderBundle, t0: float, t: float, x, cfg: IntegratorConfig | None = None
) -> np.ndarray:
    """Independently integrated inverse: transport from (t0, x) to the slice t."""
    x = np.asarray(x, dtype=float)
    p = np.concatenate([[t0], x])
    res = integrate_linear(B.lifted_derivation(), p, t - t0, cfg)
    if not res.complete:
        raise DomainEscape(res.escape_time)
    return res.fundamental


# ---------------------------------------------------------------------------
# Cocycle bundles


@dataclass(frozen=True)
class CocycleBundle:
    """Bundle presented by transitions g_ab on overlaps of a box cover."""

    patches: tuple[BoxDomain, ...]
    rank: int
    transitions: dict  # (a, b) -> k x k tuple-of-tuples of ScalarExpr

    def overlap(self, a: int, b: int) -> BoxDomain | None:
        lo = np.maximum(self.patches[a].lower, self.patches[b].lower)
        up = np.minimum(self.patches[a].upper, self.patches[b].upper)
        if np.all(lo < up):
            return BoxDomain(tuple(lo), tuple(up))
        return None

    def transition_at(self, a: int, b: int, x) -> np.ndarray:
        """g_ab(x) with v_a = g_ab(x) v_b on the overlap."""
        if a == b:
            return np.eye(self.rank)
        if (a, b) in self.transitions:
            rows = self.transitions[(a, b)]
            return np.array([[e.eval(x) for e in row] for row in rows])
        if (b, a) in self.transitions:
            rows = self.transitions[(b, a)]
            g = np.array([[e.eval(x) for e in row] for row in rows])
            return np.linalg.inv(g)
        raise LinflowError(f"no transition between patches {a} and {b}")

    def transition_gradients(self, a: int, b: int, x) -> np.ndarray:
        """(k, k, m) entrywise gradients of g_ab(x)."""
        if (a, b) in self.transitions:
            rows = self.transitions[(a, b)]
            return np.array([[e.eval_jet(x).gradient for e in row] for row in rows])
        if (b, a) in self.transitions:
            # d(g^{-1}) = -g^{-1} (dg) g^{-1}
            rows = self.transitions[(b, a)]
            g = np.array([[e.eval(x) for e in row] for row in rows])
            dg = np.array([[e.eval_jet(x).gradient for e in row] for row in rows])
            gi = np.linalg.inv(g)
            return -np.einsum("ip,pqm,qj->ijm", gi, dg, gi)
        raise LinflowError(f"no transition between patches {a} and {b}")

    def patches_containing(self, x, margin: float = 0.0) -> list[int]:
        return [i for i, p in enumerate(self.patches) if p.contains(x, margin)]


def _bump(s: float) -> float:
    if abs(s) >= 1.0:
        return 0.0
    return math.exp(-1.0 / (1.0 - s * s))


def bump_value(patch: BoxDomain, x) -> float:
    """Product bump, vanishing with all derivatives on the patch boundary."""
    x = np.asarray(x, dtype=float)
    lo, up = np.asarray(patch.lower), np.asarray(patch.upper)
    s = (2 * x - (lo + up)) / (up - lo)
    out = 1.0
    for si in s:
        out *= _bump(float(si))
    return out


@dataclass
class GluedConnection:
    """Connection glued from trivial patch connections by a partition of unity.

    In frame a, the matrix of nabla_{d/dx_i} is
    sum_b rho_b(x) * (-(d_i g_ab) g_ab^{-1}).
    """

    bundle: CocycleBundle

    def partition(self, x) -> np.ndarray:
        vals = np.array([bump_value(p, x) for p in self.bundle.patches])
        total = vals.sum()
        if total <= 0.0:
            raise LinflowError(f"point {np.asarray(x).tolist()} not covered by any patch")
        return vals / total

    def matrix(self, alpha: int, direction: int, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        k = self.bundle.rank
        rho = self.partition(x)
        A = np.zeros((k, k))
        for beta, w in enumerate(rho):
            if w == 0.0 or beta == alpha:
                continue
            g = self.bundle.transition_at(alpha, beta, x)
            dg = self.bundle.transition_gradients(alpha, beta, x)[:, :, direction]
            A += w * (-(dg @ np.linalg.inv(g)))
        return A

    def derivation(self, alpha: int, direction: int, base: BoxDomain) -> PointDerivation:
        m = base.dim

        def symbol_at(_x):
            e = np.zeros(m)
            e[direction] = 1.0
            return e

        def matrix_at(x):
            return self.matrix(alpha, direction, x)

        return PointDerivation(base, self.bundle.rank, symbol_at, matrix_at)


def connection_from_cocycle(B: CocycleBundle) -> GluedConnection:
    return GluedConnection(B)


def validate_cocycle(B: CocycleBundle, samples_per_overlap: int = 8, tol: float = 1e-9):
    """Check cocycle condition and invertibility at overlap samples.

    Returns list of (name, max_residual) pairs; raises if a transition is
    numerically singular.
    """
    from .sampling import sample_box

    results = []
    n = len(B.patches)
    worst_cocycle = 0.0
    worst_inv = 0.0
    for a in range(n):
        for b in range(n):
            if a == b:
                continue
            ov = B.overlap(a, b)
            if ov is None:
                continue
            for x in sample_box(ov, samples_per_overlap, seed=0, margin=0.05):
                g = B.transition_at(a, b, x)
                cond = float(np.linalg.cond(g, 1))
                worst_inv = max(worst_inv, cond)
                gba = B.transition_at(b, a, x)
                worst_cocycle = max(
                    worst_cocycle, float(np.max(np.abs(g @ gba - np.eye(B.rank))))
                )
            for c in range(n):
                if c in (a, b):
                    continue
                lo = np.maximum(ov.lower, B.patches[c].lower)
                up = np.minimum(ov.upper, B.patches[c].upper)
                if not np.all(lo < up):
                    continue
                triple = BoxDomain(tuple(lo), tuple(up))
                for x in sample_box(triple, samples_per_overlap, seed=0, margin=0.05):
                    lhs = B.transition_at(a, b, x) @ B.transition_at(b, c, x)
                    rhs = B.transition_at(a, c, x)
                    worst_cocycle = max(worst_cocycle, float(np.max(np.abs(lhs - rhs))))
    if worst_inv > 1e12:
        raise LinflowError(f"transition condition number {worst_inv:.3g} exceeds 1e12")
    results.append(("cocycle_condition", worst_cocycle))
    return results


# ---------------------------------------------------------------------------
# Global frames by broken-path transport


@dataclass
class GlobalFrame:
    """Per-patch frame matrices sampled on a grid."""

    bundle: CocycleBundle
    basepoint: np.ndarray
    grid: int
    # records: (patch_id, coords tuple, k x k matrix)
    records: list = field(default_factory=list)
    overlap_residual: float = 0.0


def _transport(
    conn: GluedConnection,
    start: np.ndarray,
    target: np.ndarray,
    prefer: int,
    h0: np.ndarray,
    cfg: IntegratorConfig,
) -> tuple[int, np.ndarray]:
    """Parallel-transport frame h0 along the broken coordinate path.

    Moves axis by axis from `start` to `target`. The connection matrix is
    read in the frame of the active patch; at patch boundaries the frame is
    converted through the transition and integration resumes. Returns the
    final active patch and the transported frame in that patch's frame.
    """
    B = conn.bundle
    m = len(start)
    pos = np.asarray(start, dtype=float).copy()
    containing = B.patches_containing(pos)
    if not containing:
        raise LinflowError(f"basepoint {pos.tolist()} not covered")
    active = prefer if prefer in containing else containing[0]
    h = np.asarray(h0, dtype=float).copy()
    for i in range(m):
        # switch to the preferred frame as soon as it covers the path, so
        # runs with different `prefer` integrate genuinely different systems
        if active != prefer and prefer in B.patches_containing(pos, margin=1e-9):
            h = B.transition_at(prefer, active, pos) @ h
            active = prefer
        remaining = target[i] - pos[i]
        guard = 0
        while abs(remaining) > 1e-12:
            D = conn.derivation(active, i, B.patches[active])
            res = integrate_linear(D, pos, remaining, cfg)
            h = res.fundamental @ h
            pos = res.base_point
            if res.complete:
                remaining = 0.0
            else:
                remaining -= res.escape_time
                others = [
                    p for p in B.patches_containing(pos, margin=1e-9) if p != active
                ]
                if not others:
                    raise DomainEscape(res.escape_time)
                nxt = prefer if prefer in others else others[0]
                h = B.transition_at(nxt, active, pos) @ h
                active = nxt
            guard += 1
            if guard > 64:
                raise LinflowError("patch switching did not converge along transport path")
    if prefer in B.patches_containing(pos) and active != prefer:
        h = B.transition_at(prefer, active, pos) @ h
        active = prefer
    return active, h


def global_frame(
    B: CocycleBundle,
    basepoint,
    grid: int,
    cfg: IntegratorConfig | None = None,
) -> GlobalFrame:
    """Frames on a grid over the cover by broken-path transport from basepoint.

    For each grid point and each patch containing it, the transport run
    prefers that patch throughout, so frames on overlaps come from genuinely
    different routes and their compatibility residual is meaningful.
    """
    cfg = cfg or IntegratorConfig()
    basepoint = np.asarray(basepoint, dtype=float)
    conn = connection_from_cocycle(B)
    if not B.patches_containing(basepoint):
        raise LinflowError(f"basepoint {basepoint.tolist()} not in any patch")
    m = basepoint.shape[0]
    lo = np.min([p.lower for p in B.patches], axis=0)
    up = np.max([p.upper for p in B.patches], axis=0)
    pad = 0.05 * (up - lo)
    axes = [np.linspace(lo[d] + pad[d], up[d] - pad[d], grid) for d in range(m)]
    frame = GlobalFrame(B, basepoint, grid)
    worst = 0.0
    k = B.rank
    for idx in np.ndindex(*([grid] * m)):
        y = np.array([axes[d][idx[d]] for d in range(m)])
        owners = B.patches_containing(y, margin=1e-9)
        if not owners:
            continue
        per_patch = {}
        ok = True
        for a in owners:
            try:
                _act, h = _transport(conn, basepoint, y, a, np.eye(k), cfg)
            except (DomainEscape, LinflowError):
                ok = False
                break
            per_patch[a] = h
        if not ok:
            continue
        for a in owners:
            frame.records.append((a, tuple(float(v) for v in y), per_patch[a]))
        for ai in range(len(owners)):
            for bi in range(ai + 1, len(owners)):
                a, b = owners[ai], owners[bi]
                res = float(
                    np.max(np.abs(per_patch[a] - B.transition_at(a, b, y) @ per_patch[b]))
                )
                worst = max(worst, res)
    frame.overlap_residual = worst
    return frame


def write_global_frame(frame: GlobalFrame, path: str, tolerance: float = 1e-6) -> None:
    """Structured text document: header, then per-patch grid records.

    Deterministic ordering: patches by index, grid points lexicographic;
    numbers with 17 significant digits, matrices row-major.
    """
    B = frame.bundle
    lines = ["linflow-global-frame 1", f"rank {B.rank}", f"patches {len(B.patches)}"]
    for i, p in enumerate(B.patches):
        lo = " ".join(format(v, ".17g") for v in p.lower)
        up = " ".join(format(v, ".17g") for v in p.upper)
        lines.append(f"patch {i} lower {lo} upper {up}")
    lines.append("basepoint " + " ".join(format(v, ".17g") for v in frame.basepoint))
    lines.append(f"grid {frame.grid}")
    lines.append(f"tolerance {format(tolerance, '.17g')}")
    lines.append(f"overlap_residual {format(frame.overlap_residual, '.17g')}")
    for patch_id, coords, h in sorted(frame.records, key=lambda r: (r[0], r[1])):
        cs = " ".join(format(v, ".17g") for v in coords)
        ms = " ".join(format(v, ".17g") for v in np.asarray(h).ravel())
        lines.append(f"record {patch_id} {cs} {ms}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
