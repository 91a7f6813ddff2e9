import numpy as np
import pytest
import scipy.linalg

from conftest import scene_path
from linflow.errors import LinflowError
from linflow.expr import parse
from linflow.geometry import BoxDomain
from linflow.scene import load_scene
from linflow.trivialize import (
    CocycleBundle,
    CylinderBundle,
    bump_value,
    connection_from_cocycle,
    global_frame,
    trivialize_cylinder,
    trivialize_cylinder_inverse,
    validate_cocycle,
    write_global_frame,
)


def _x_free_cylinder():
    """A(t, x) independent of x: Theta must match the propagator."""
    base = BoxDomain((-2.0,), (2.0,))
    mat = tuple(
        tuple(parse(e, 1, time_dependent=True) for e in row)
        for row in [["0", "t"], ["-t", "0"]]
    )
    return CylinderBundle((-1.5, 1.5), base, 2, mat)


def test_theta_identity_at_reference_time():
    B = _x_free_cylinder()
    theta = trivialize_cylinder(B, 0.5, 0.5, [0.3])
    assert np.array_equal(theta, np.eye(2))


def test_theta_against_propagator_oracle():
    B = _x_free_cylinder()
    J = np.array([[0.0, 1.0], [-1.0, 0.0]])
    for t0, t in [(0.0, 1.0), (-0.5, 1.2), (1.0, -1.0)]:
        theta = trivialize_cylinder(B, t0, t, [0.3])
        # the fiber solves F' = -A(s) F from s = t to s = t0 with A(s) = sJ
        # commuting, so Theta = expm(-(t0^2 - t^2)/2 J)
        expected = scipy.linalg.expm((t * t - t0 * t0) / 2 * J)
        assert theta == pytest.approx(expected, abs=1e-8)


def test_theta_inverse_round_trip():
    sc = load_scene(scene_path("cylinder.toml"))
    B = sc.cylinder
    for t, x in [(0.3, 0.5), (-0.8, -1.2), (0.9, 1.5)]:
        f = trivialize_cylinder(B, 0.0, t, [x])
        g = trivialize_cylinder_inverse(B, 0.0, t, [x])
        assert f @ g == pytest.approx(np.eye(2), abs=1e-8)
        assert g @ f == pytest.approx(np.eye(2), abs=1e-8)


def test_bump_positive_inside_vanishes_at_boundary():
    patch = BoxDomain((-1.0, 0.0), (1.0, 2.0))
    assert bump_value(patch, [0.0, 1.0]) > 0.0
    assert bump_value(patch, [0.999, 1.0]) < 1e-100
    assert bump_value(patch, [2.0, 1.0]) == 0.0  # outside


def _two_patch_bundle():
    return load_scene(scene_path("cocycle2.toml")).cocycle


def test_validate_cocycle():
    B = _two_patch_bundle()
    results = dict(validate_cocycle(B))
    assert results["cocycle_condition"] < 1e-9


def test_transition_inverse_route():
    B = _two_patch_bundle()
    # drop the explicit (1, 0) transition; the inverse route must supply it
    reduced = CocycleBundle(B.patches, B.rank, {(0, 1): B.transitions[(0, 1)]})
    x = np.array([0.1, 0.2])
    assert reduced.transition_at(1, 0, x) == pytest.approx(
        np.linalg.inv(reduced.transition_at(0, 1, x))
    )


def test_partition_sums_to_one_and_rejects_uncovered():
    B = _two_patch_bundle()
    conn = connection_from_cocycle(B)
    rho = conn.partition([0.0, 0.0])
    assert rho.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.all(rho >= 0.0)
    with pytest.raises(LinflowError):
        conn.partition([5.0, 0.0])


def test_glued_connection_transforms_correctly():
    # nabla matrices in the two frames must be related by the gauge law
    # A_beta = g_ba A_alpha g_ba^{-1} - (d_i g_ba) g_ba^{-1}
    B = _two_patch_bundle()
    conn = connection_from_cocycle(B)
    x = np.array([0.1, 0.3])
    for i in (0, 1):
        Aa = conn.matrix(0, i, x)
        Ab = conn.matrix(1, i, x)
        g = B.transition_at(1, 0, x)
        dg = B.transition_gradients(1, 0, x)[:, :, i]
        gauge = g @ Aa @ np.linalg.inv(g) - dg @ np.linalg.inv(g)
        assert Ab == pytest.approx(gauge, abs=1e-9)


def test_global_frame_residual_and_document(tmp_path):
    B = _two_patch_bundle()
    frame = global_frame(B, [-0.75, 0.0], grid=6)
    assert frame.records
    assert 0.0 < frame.overlap_residual < 1e-6
    p1 = tmp_path / "frame1.txt"
    p2 = tmp_path / "frame2.txt"
    write_global_frame(frame, str(p1))
    write_global_frame(global_frame(B, [-0.75, 0.0], grid=6), str(p2))
    assert p1.read_bytes() == p2.read_bytes()
    text = p1.read_text()
    assert "overlap_residual" in text and "basepoint" in text


def test_global_frame_rejects_uncovered_basepoint():
    B = _two_patch_bundle()
    with pytest.raises(LinflowError):
        global_frame(B, [9.0, 0.0], grid=4)
