"""Scene files: declarative TOML description of bundles, derivations,
sections, ODE systems, cylinder/cocycle data and algebroid data.

The format is versioned through the top-level `schema` key; all numbers in
emitted documents are serialized with 17 significant digits.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .algebroid import AlgebroidSpec
from .errors import ExprError, SceneError
from .expr import ScalarExpr, parse
from .geometry import BoxDomain, DerivationSpec, SectionSpec, VectorFieldSpec
from .odesolve import TimeMatrixSpec
from .trivialize import CocycleBundle, CylinderBundle

SCHEMA_VERSION = 1

DEFAULT_TOLERANCES = {"flow": 1e-7, "fd": 1e-6, "pairing": 1e-9, "exact": 1e-10}


@dataclass
class VerifySettings:
    suites: list[str] = field(default_factory=lambda: ["all"])
    samples: int = 64
    seed: int = 0
    time_horizon: float = 0.5
    flat_sections: list[str] = field(default_factory=list)
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))


@dataclass
class SceneFile:
    path: str
    base: BoxDomain | None
    bundles: dict  # name -> rank
    derivations: dict  # name -> (bundle_name, DerivationSpec)
    sections: dict  # name -> (bundle_name, SectionSpec)
    ode: TimeMatrixSpec | None
    cylinder: CylinderBundle | None
    cocycle: CocycleBundle | None
    algebroid: AlgebroidSpec | None
    verify: VerifySettings

    def derivation(self, name: str) -> DerivationSpec:
        if name not in self.derivations:
            raise SceneError(f"derivation '{name}' not declared", "derivations", name)
        return self.derivations[name][1]


def _parse_expr(text, dim, section, key, time_dependent=False) -> ScalarExpr:
    if not isinstance(text, str):
        raise SceneError(f"expected an expression string, got {text!r}", section, key)
    try:
        return parse(text, dim, time_dependent)
    except ExprError as exc:
        raise SceneError(f"bad expression {text!r}: {exc}", section, key) from exc


def _parse_matrix(rows, k, dim, section, key, time_dependent=False):
    if not isinstance(rows, list) or len(rows) != k or any(
        not isinstance(r, list) or len(r) != k for r in rows
    ):
        raise SceneError(f"matrix must be {k}x{k}", section, key)
    return tuple(
        tuple(_parse_expr(e, dim, section, key, time_dependent) for e in row) for row in rows
    )


def _box(table, section) -> BoxDomain:
    for req in ("lower", "upper"):
        if req not in table:
            raise SceneError("box requires lower and upper", section, req)
    lower, upper = table["lower"], table["upper"]
    if len(lower) != len(upper):
        raise SceneError("lower and upper lengths differ", section)
    interval = tuple(table["interval"]) if "interval" in table else None
    try:
        return BoxDomain(tuple(map(float, lower)), tuple(map(float, upper)), interval)
    except Exception as exc:
        raise SceneError(str(exc), section) from exc


def load_scene(path: str) -> SceneFile:
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise SceneError(f"scene file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise SceneError(f"scene file is not valid TOML: {exc}") from exc

    if doc.get("schema") != SCHEMA_VERSION:
        raise SceneError(
            f"unsupported or missing schema version {doc.get('schema')!r} "
            f"(expected {SCHEMA_VERSION})",
            "schema",
        )

    base = _box(doc["base"], "base") if "base" in doc else None
    m = base.dim if base is not None else 0

    bundles = {}
    for name, spec in doc.get("bundles", {}).items():
        rank = spec.get("rank")
        if not isinstance(rank, int) or rank < 1:
            raise SceneError("bundle rank must be a positive integer", f"bundles.{name}", "rank")
        bundles[name] = rank

    derivations = {}
    for name, spec in doc.get("derivations", {}).items():
        section = f"derivations.{name}"
        if base is None:
            raise SceneError("derivations require a [base] section", section)
        bname = spec.get("bundle")
        if bname not in bundles:
            raise SceneError(f"unknown bundle {bname!r}", section, "bundle")
        k = bundles[bname]
        symbol = spec.get("symbol")
        if not isinstance(symbol, list) or len(symbol) != m:
            raise SceneError(f"symbol must list {m} component expressions", section, "symbol")
        comps = tuple(_parse_expr(s, m, section, "symbol") for s in symbol)
        matrix = _parse_matrix(spec.get("matrix"), k, m, section, "matrix")
        derivations[name] = (
            bname,
            DerivationSpec(base, k, VectorFieldSpec(base, comps), matrix),
        )

    sections = {}
    for name, spec in doc.get("sections", {}).items():
        section = f"sections.{name}"
        if base is None:
            raise SceneError("sections require a [base] section", section)
        bname = spec.get("bundle")
        if bname not in bundles:
            raise SceneError(f"unknown bundle {bname!r}", section, "bundle")
        k = bundles[bname]
        comps = spec.get("components")
        if not isinstance(comps, list) or len(comps) != k:
            raise SceneError(f"section must list {k} component expressions", section, "components")
        sections[name] = (
            bname,
            SectionSpec(k, tuple(_parse_expr(s, m, section, "components") for s in comps)),
        )

    ode = None
    if "ode" in doc:
        spec = doc["ode"]
        n = spec.get("n")
        if not isinstance(n, int) or n < 1:
            raise SceneError("ode.n must be a positive integer", "ode", "n")
        interval = spec.get("interval")
        if not isinstance(interval, list) or len(interval) != 2:
            raise SceneError("ode.interval must be [alpha, beta]", "ode", "interval")
        entries = _parse_matrix(spec.get("matrix"), n, 0, "ode", "matrix", time_dependent=True)
        ode = TimeMatrixSpec(n, (float(interval[0]), float(interval[1])), entries)

    cylinder = None
    if "cylinder" in doc:
        spec = doc["cylinder"]
        if base is None:
            raise SceneError("cylinder requires a [base] section", "cylinder")
        interval = spec.get("interval")
        if not isinstance(interval, list) or len(interval) != 2:
            raise SceneError("cylinder.interval must be [alpha, beta]", "cylinder", "interval")
        rank = spec.get("rank")
        if not isinstance(rank, int) or rank < 1:
            raise SceneError("cylinder.rank must be a positive integer", "cylinder", "rank")
        matrix = _parse_matrix(spec.get("matrix"), rank, m, "cylinder", "matrix", time_dependent=True)
        cylinder = CylinderBundle((float(interval[0]), float(interval[1])), base, rank, matrix)

    cocycle = None
    if "cocycle" in doc:
        spec = doc["cocycle"]
        rank = spec.get("rank")
        if not isinstance(rank, int) or rank < 1:
            raise SceneError("cocycle.rank must be a positive integer", "cocycle", "rank")
        patch_tables = spec.get("patches")
        if not isinstance(patch_tables, list) or not patch_tables:
            raise SceneError("cocycle.patches must be a nonempty list", "cocycle", "patches")
        patches = tuple(_box(p, f"cocycle.patches[{i}]") for i, p in enumerate(patch_tables))
        mdim = patches[0].dim
        if any(p.dim != mdim for p in patches):
            raise SceneError("all patches must share one dimension", "cocycle", "patches")
        transitions = {}
        for i, tr in enumerate(spec.get("transitions", [])):
            a, b = tr.get("from"), tr.get("to")
            if not (isinstance(a, int) and isinstance(b, int)) or not (
                0 <= a < len(patches) and 0 <= b < len(patches)
            ):
                raise SceneError("transition from/to must be patch indices",
                                 f"cocycle.transitions[{i}]")
            transitions[(a, b)] = _parse_matrix(
                tr.get("matrix"), rank, mdim, f"cocycle.transitions[{i}]", "matrix"
            )
        cocycle = CocycleBundle(patches, rank, transitions)

    algebroid = None
    if "algebroid" in doc:
        spec = doc["algebroid"]
        if base is None:
            raise SceneError("algebroid requires a [base] section", "algebroid")
        r = spec.get("rank")
        if not isinstance(r, int) or r < 1:
            raise SceneError("algebroid.rank must be a positive integer", "algebroid", "rank")
        struct = spec.get("structure")
        if not isinstance(struct, list) or len(struct) != r:
            raise SceneError(f"structure must list {r} matrices (C^l)", "algebroid", "structure")
        structure = tuple(
            _parse_matrix(matl, r, m, "algebroid", f"structure[{l}]") for l, matl in enumerate(struct)
        )
        conn = spec.get("connection")
        if not isinstance(conn, list) or len(conn) != m:
            raise SceneError(f"connection must list {m} matrices", "algebroid", "connection")
        connection = tuple(
            _parse_matrix(mat, r, m, "algebroid", f"connection[{i}]") for i, mat in enumerate(conn)
        )
        algebroid = AlgebroidSpec(base, r, structure, connection)

    verify = VerifySettings()
    if "verify" in doc:
        spec = doc["verify"]
        verify.suites = list(spec.get("suites", verify.suites))
        verify.samples = int(spec.get("samples", verify.samples))
        verify.seed = int(spec.get("seed", verify.seed))
        verify.time_horizon = float(spec.get("time_horizon", verify.time_horizon))
        verify.flat_sections = list(spec.get("flat_sections", []))
        for key, val in spec.get("tolerances", {}).items():
            if key not in DEFAULT_TOLERANCES:
                raise SceneError(f"unknown tolerance key {key!r}", "verify.tolerances", key)
            verify.tolerances[key] = float(val)
        for name in verify.flat_sections:
            if name not in sections:
                raise SceneError(f"flat section {name!r} not declared", "verify", "flat_sections")

    return SceneFile(
        path=path,
        base=base,
        bundles=bundles,
        derivations=derivations,
        sections=sections,
        ode=ode,
        cylinder=cylinder,
        cocycle=cocycle,
        algebroid=algebroid,
        verify=verify,
    )
