"""Command-line interface.

Exit codes: 0 success / verification passed, 1 verification failure,
2 usage or scene error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .errors import LinflowError, SceneError
from .flow import IntegratorConfig, flow_pointwise, integrate_linear
from .odesolve import propagator, solve_nonautonomous
from .scene import load_scene
from .trivialize import global_frame, trivialize_cylinder, write_global_frame
from .verify import SUITE_ORDER, run_verify

_FMT = "{:.17g}"


def _csv_floats(text: str) -> np.ndarray:
    try:
        return np.array([float(s) for s in text.split(",") if s.strip()])
    except ValueError as exc:
        raise SceneError(f"expected comma-separated reals, got {text!r}") from exc


def _fmt_vec(v) -> str:
    return ", ".join(_FMT.format(float(x)) for x in np.atleast_1d(v))


def _fmt_mat(M) -> str:
    return "\n".join("  [" + _fmt_vec(row) + "]" for row in np.atleast_2d(M))


def _cmd_flow(args) -> int:
    scene = load_scene(args.scene)
    D = scene.derivation(args.deriv)
    x = _csv_floats(args.x)
    if len(x) != D.base.dim:
        raise SceneError(f"--x must have {D.base.dim} components")
    res = integrate_linear(D, x, args.t, IntegratorConfig())
    if not res.complete:
        print(f"escaped: base trajectory left the domain at t = "
              + _FMT.format(res.escape_time))
        return 0
    print("base point:", _fmt_vec(res.base_point))
    print("fundamental matrix:")
    print(_fmt_mat(res.fundamental))
    print("condition (1-norm):", _FMT.format(res.condition_estimate))
    if args.vector is not None:
        v = _csv_floats(args.vector)
        if len(v) != D.rank:
            raise SceneError(f"--vector must have {D.rank} components")
        pw = flow_pointwise(D, x, v, args.t, IntegratorConfig())
        print("transported vector:", _fmt_vec(pw.vector))
    return 0


def _cmd_ode(args) -> int:
    scene = load_scene(args.scene)
    if scene.ode is None:
        raise SceneError("scene has no [ode] section")
    v0 = _csv_floats(args.v0)
    if len(v0) != scene.ode.n:
        raise SceneError(f"--v0 must have {scene.ode.n} components")
    v = solve_nonautonomous(scene.ode, args.t0, v0, args.t)
    P = propagator(scene.ode, args.t0, args.t)
    print("solution:", _fmt_vec(v))
    print("propagator:")
    print(_fmt_mat(P))
    return 0


def _cmd_trivialize(args) -> int:
    scene = load_scene(args.scene)
    if scene.cocycle is not None:
        B = scene.cocycle
        basepoint = 0.5 * (
            np.asarray(B.patches[0].lower) + np.asarray(B.patches[0].upper)
        ) if args.basepoint is None else _csv_floats(args.basepoint)
        frame = global_frame(B, basepoint, grid=args.grid)
        write_global_frame(frame, args.out)
        print(f"wrote global frame ({len(frame.records)} grid records) to {args.out}")
        print("overlap residual:", _FMT.format(frame.overlap_residual))
        return 0
    if scene.cylinder is not None:
        B = scene.cylinder
        a, b = B.interval
        t0 = 0.5 * (a + b) if args.t0 is None else args.t0
        lo = np.asarray(B.base.lower)
        up = np.asarray(B.base.upper)
        pad = 0.05 * (up - lo)
        lines = ["cylinder trivialization",
                 f"t0 = {_FMT.format(t0)}",
                 f"grid = {args.grid}"]
        ts = np.linspace(a + 0.05 * (b - a), b - 0.05 * (b - a), args.grid)
        xs = np.linspace(lo + pad, up - pad, args.grid)
        for t in ts:
            for x in xs:
                theta = trivialize_cylinder(B, t0, float(t), x)
                lines.append(
                    "t=" + _FMT.format(t)
                    + " x=" + ";".join(_FMT.format(c) for c in x)
                    + " theta=" + ";".join(_FMT.format(c) for c in theta.ravel())
                )
        with open(args.out, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        print(f"wrote cylinder trivialization ({args.grid}x{args.grid} samples) to {args.out}")
        return 0
    raise SceneError("scene has neither [cocycle] nor [cylinder] section")


def _cmd_algebroid(args) -> int:
    from . import algebroid as alg
    from .sampling import sample_box

    scene = load_scene(args.scene)
    if scene.algebroid is None:
        raise SceneError("scene has no [algebroid] section")
    S = scene.algebroid
    samples = sample_box(S.base, args.samples, seed=0, margin=0.1)
    checks = args.check.split(",") if args.check != "all" else [
        "structure", "flatness", "bracket"
    ]
    basepoint = (
        0.5 * (np.asarray(S.base.lower) + np.asarray(S.base.upper))
        if args.basepoint is None
        else _csv_floats(args.basepoint)
    )
    ok = True
    for check in checks:
        if check == "structure":
            rep = alg.check_fiber_structure(S, samples)
        elif check == "flatness":
            rep = alg.check_flatness(S, samples)
        elif check == "bracket":
            rep = alg.certify_lab(S, basepoint, samples)
        else:
            raise SceneError(f"unknown check {check!r}; known: structure, flatness, bracket")
        print(rep.render_text())
        ok = ok and rep.passed
    return 0 if ok else 1


def _cmd_verify(args) -> int:
    scene = load_scene(args.scene)
    suites = None if args.suite is None else args.suite.split(",")
    if args.tol is not None:
        for key in scene.verify.tolerances:
            scene.verify.tolerances[key] = args.tol
    report = run_verify(scene, suites=suites, seed=args.seed, samples=args.samples)
    out = report.render_machine() if args.format == "machine" else report.render_text()
    print(out)
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="linflow",
        description="Flows of linear vector fields on vector bundles: "
        "transport, verification, and trivialization tools.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("flow", help="transport a fiber vector along the base flow")
    f.add_argument("--scene", required=True)
    f.add_argument("--deriv", required=True, help="derivation name from the scene")
    f.add_argument("--x", required=True, help="base point, comma-separated")
    f.add_argument("--t", type=float, required=True)
    f.add_argument("--vector", help="optional fiber vector, comma-separated")
    f.set_defaults(func=_cmd_flow)

    o = sub.add_parser("ode", help="solve the non-autonomous linear system of the scene")
    o.add_argument("--scene", required=True)
    o.add_argument("--t0", type=float, required=True)
    o.add_argument("--v0", required=True, help="initial vector, comma-separated")
    o.add_argument("--t", type=float, required=True)
    o.set_defaults(func=_cmd_ode)

    tr = sub.add_parser("trivialize", help="write a trivialization document")
    tr.add_argument("--scene", required=True)
    tr.add_argument("--t0", type=float, default=None, help="cylinder reference time")
    tr.add_argument("--basepoint", default=None, help="cocycle transport basepoint")
    tr.add_argument("--grid", type=int, default=8)
    tr.add_argument("--out", required=True)
    tr.set_defaults(func=_cmd_trivialize)

    al = sub.add_parser("algebroid", help="run algebroid structure checks")
    al.add_argument("--scene", required=True)
    al.add_argument("--check", default="all", help="comma list: structure,flatness,bracket")
    al.add_argument("--basepoint", default=None, help="comma-separated base point")
    al.add_argument("--samples", type=int, default=32)
    al.set_defaults(func=_cmd_algebroid)

    v = sub.add_parser("verify", help="run verification suites against a scene")
    v.add_argument("--scene", required=True)
    v.add_argument("--suite", default=None,
                   help="comma list from: " + ", ".join(SUITE_ORDER) + " (default: scene setting)")
    v.add_argument("--samples", type=int, default=None)
    v.add_argument("--seed", type=int, default=None)
    v.add_argument("--tol", type=float, default=None,
                   help="override every tolerance with this value")
    v.add_argument("--format", choices=("text", "machine"), default="text")
    v.set_defaults(func=_cmd_verify)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except SceneError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except LinflowError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
