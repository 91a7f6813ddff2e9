import numpy as np
import pytest

from conftest import scene_path
from linflow.cli import main
from linflow.errors import SceneError
from linflow.scene import load_scene
from linflow.verify import run_verify

ALL_SCENES = [
    "demo.toml",
    "flat1d.toml",
    "rotation.toml",
    "threed.toml",
    "tensorpair.toml",
    "ode_rotation.toml",
    "cylinder.toml",
    "cocycle2.toml",
    "so3.toml",
    "so3_broken.toml",
]


@pytest.mark.parametrize("name", ALL_SCENES)
def test_bundled_scenes_load(name):
    sc = load_scene(scene_path(name))
    assert sc.verify.samples > 0


def _write(tmp_path, text):
    p = tmp_path / "scene.toml"
    p.write_text(text)
    return str(p)


def test_missing_schema_rejected(tmp_path):
    with pytest.raises(SceneError) as exc:
        load_scene(_write(tmp_path, "[base]\nlower=[0.0]\nupper=[1.0]\n"))
    assert "schema" in str(exc.value)


def test_bad_matrix_shape_names_section(tmp_path):
    text = """schema = 1
[base]
lower = [-1.0]
upper = [1.0]
[bundles.E]
rank = 2
[derivations.D]
bundle = "E"
symbol = ["1"]
matrix = [["0", "1"]]
"""
    with pytest.raises(SceneError) as exc:
        load_scene(_write(tmp_path, text))
    assert exc.value.section == "derivations.D"
    assert "2x2" in str(exc.value)


def test_unknown_bundle_rejected(tmp_path):
    text = """schema = 1
[base]
lower = [-1.0]
upper = [1.0]
[bundles.E]
rank = 1
[sections.s]
bundle = "F"
components = ["x1"]
"""
    with pytest.raises(SceneError) as exc:
        load_scene(_write(tmp_path, text))
    assert "F" in str(exc.value)


def test_bad_expression_offset_in_message(tmp_path):
    text = """schema = 1
[base]
lower = [-1.0]
upper = [1.0]
[bundles.E]
rank = 1
[derivations.D]
bundle = "E"
symbol = ["x1 + * 2"]
matrix = [["0"]]
"""
    with pytest.raises(SceneError) as exc:
        load_scene(_write(tmp_path, text))
    assert "x1 + * 2" in str(exc.value)


def test_unknown_tolerance_key(tmp_path):
    text = """schema = 1
[verify.tolerances]
bogus = 1.0
"""
    with pytest.raises(SceneError):
        load_scene(_write(tmp_path, text))


def test_undeclared_flat_section(tmp_path):
    text = """schema = 1
[verify]
flat_sections = ["ghost"]
"""
    with pytest.raises(SceneError):
        load_scene(_write(tmp_path, text))


def test_unknown_suite_and_inapplicable_suite():
    sc = load_scene(scene_path("demo.toml"))
    with pytest.raises(SceneError):
        run_verify(sc, suites=["frobnicate"])
    with pytest.raises(SceneError):
        run_verify(sc, suites=["ode"])  # demo has no [ode] section
    with pytest.raises(SceneError):
        run_verify(sc, suites=["flat-section"])  # no flat sections declared


def test_verify_report_determinism():
    sc = load_scene(scene_path("rotation.toml"))
    r1 = run_verify(sc, seed=5, samples=8)
    r2 = run_verify(sc, seed=5, samples=8)
    assert r1.render_machine() == r2.render_machine()
    r3 = run_verify(sc, seed=6, samples=8)
    assert r3.render_machine() != r1.render_machine()


# ---------------------------------------------------------------------------
# CLI exit codes and output


def test_cli_verify_pass_exit_zero(capsys):
    rc = main(["verify", "--scene", scene_path("rotation.toml"), "--samples", "8"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "overall: PASS" in out


def test_cli_verify_failure_exit_one(capsys):
    rc = main(["verify", "--scene", scene_path("so3_broken.toml"), "--samples", "8"])
    out = capsys.readouterr().out
    assert rc == 1
    assert "[FAIL]" in out and "overall: FAIL" in out


def test_cli_usage_errors_exit_two(capsys, tmp_path):
    assert main(["verify", "--scene", str(tmp_path / "missing.toml")]) == 2
    assert main(["flow", "--scene", scene_path("demo.toml"),
                 "--deriv", "nope", "--x", "0,0", "--t", "0.1"]) == 2
    assert main(["verify", "--scene", scene_path("demo.toml"),
                 "--suite", "ode"]) == 2
    capsys.readouterr()


def test_cli_numerical_failure_exit_three(tmp_path, capsys):
    text = """schema = 1
[base]
lower = [-2.0]
upper = [2.0]
[bundles.E]
rank = 1
[derivations.D]
bundle = "E"
symbol = ["log(x1 - 10)"]
matrix = [["0"]]
"""
    p = tmp_path / "bad.toml"
    p.write_text(text)
    rc = main(["verify", "--scene", str(p), "--samples", "4"])
    capsys.readouterr()
    assert rc == 3


def test_cli_flow_reports_escape(capsys):
    rc = main(["flow", "--scene", scene_path("flat1d.toml"),
               "--deriv", "D", "--x", "3.9", "--t", "1.0"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "escaped" in out


def test_cli_machine_format_deterministic(capsys):
    argv = ["verify", "--scene", scene_path("rotation.toml"),
            "--samples", "8", "--format", "machine"]
    assert main(argv) == 0
    first = capsys.readouterr().out
    assert main(argv) == 0
    second = capsys.readouterr().out
    assert first == second
    assert first.startswith("suite\tcheck\t")


def test_cli_ode_solution(capsys):
    rc = main(["ode", "--scene", scene_path("ode_rotation.toml"),
               "--t0", "0", "--v0", "1,0", "--t", "2"])
    out = capsys.readouterr().out
    assert rc == 0
    v = [float(s) for s in out.splitlines()[0].split(":")[1].split(",")]
    assert v == pytest.approx([np.cos(2.0), -np.sin(2.0)], abs=1e-7)


def test_cli_trivialize_documents(tmp_path, capsys):
    out1 = tmp_path / "frame.txt"
    rc = main(["trivialize", "--scene", scene_path("cocycle2.toml"),
               "--grid", "4", "--out", str(out1)])
    assert rc == 0
    assert out1.exists()
    out2 = tmp_path / "cyl.txt"
    rc = main(["trivialize", "--scene", scene_path("cylinder.toml"),
               "--grid", "4", "--out", str(out2)])
    assert rc == 0
    assert "theta=" in out2.read_text()
    capsys.readouterr()


def test_cli_algebroid_check(capsys):
    rc = main(["algebroid", "--scene", scene_path("so3.toml"),
               "--check", "structure,flatness", "--samples", "8"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "antisymmetry" in out and "flatness" in out
