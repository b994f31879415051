import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from camisac.vision import (
    BoundingBox,
    CameraPose,
    DetectorNoise,
    camera_coords,
    default_rate_table,
    detect_activities,
    estimate_angles,
    estimate_distance,
    estimate_range,
    load_rate_table,
    min_rate_for_activity,
    project_to_image,
    render_box,
    rotation_matrix,
    transform_matrix,
)

angles = st.floats(-2 * math.pi, 2 * math.pi)


def test_rotation_identity_and_yaw():
    np.testing.assert_allclose(rotation_matrix(0, 0, 0), np.eye(3))
    np.testing.assert_allclose(rotation_matrix(0, 0, math.pi / 2),
                               [[0, 1, 0], [-1, 0, 0], [0, 0, 1]], atol=1e-15)


@settings(max_examples=200, deadline=None)
@given(angles, angles, angles)
def test_rotation_in_so3(r, p, y):
    R = rotation_matrix(r, p, y)
    np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-12)
    assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-12)


def test_transform_matrix_static_scene():
    T = transform_matrix(CameraPose(roll=0.3, pitch=0.1, yaw=-0.2))
    np.testing.assert_array_equal(T[:3, 3], 0)
    np.testing.assert_array_equal(T[3], [0, 0, 0, 1])


def test_projection_axis_and_similar_triangles():
    pose = CameraPose(focal_length=0.004)
    assert project_to_image([0, 0, 10], pose) == (0.0, 0.0)
    bx1, by1 = project_to_image([1.0, 0.5, 10], pose)
    bx2, by2 = project_to_image([1.0, 0.5, 20], pose)
    assert bx2 == pytest.approx(bx1 / 2)
    assert by2 == pytest.approx(by1 / 2)
    with pytest.raises(ValueError):
        project_to_image([0, 0, -1], pose)


def test_distance_ratio():
    box = BoundingBox(0.0, 0.0, 0.002, 0.001)
    assert estimate_distance(box, 0.004, 2.0) == pytest.approx(4.0)
    half = BoundingBox(0.0, 0.0, 0.001, 0.001)
    assert estimate_distance(half, 0.004, 2.0) == pytest.approx(8.0)


def test_box_must_have_positive_size():
    with pytest.raises(ValueError):
        BoundingBox(0, 0, 0.0, 1.0)


def test_angle_cases():
    assert estimate_angles(BoundingBox(0, 0, 1, 1), 0.004) == (0, 0, 0)
    a, b, g = estimate_angles(BoundingBox(0.004, 0, 1, 1), 0.004)
    assert (a, b, g) == pytest.approx((math.pi / 4, 0, math.pi / 4))


@settings(max_examples=100, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(1e-4, 1))
def test_gamma_dominates(bx, by, fl):
    a, b, g = estimate_angles(BoundingBox(bx, by, 1, 1), fl)
    assert g >= max(abs(a), abs(b)) - 1e-15
    # gamma recomposed from the tangents of alpha and beta
    assert g == pytest.approx(math.atan(math.hypot(math.tan(a), math.tan(b))), abs=1e-12)


def test_noise_free_round_trip():
    rng = np.random.default_rng(0)
    pose = CameraPose(roll=math.pi, pitch=0.05, yaw=0.3, focal_length=0.004, position=(0, 0, 25))
    for _ in range(200):
        p = np.array([*rng.uniform(-80, 80, 2), 0.85])
        pc = camera_coords(p, pose)
        box = render_box(p, 1.7, 0.5, pose)
        assert estimate_distance(box, pose.focal_length, 1.7) == pytest.approx(pc[2], rel=1e-12)
        assert estimate_range(box, pose.focal_length, 1.7) == pytest.approx(
            np.linalg.norm(p - np.array(pose.position)), rel=1e-12)
        a, b, _ = estimate_angles(box, pose.focal_length)
        assert a == pytest.approx(math.atan2(pc[0], pc[2]), abs=1e-12)
        assert b == pytest.approx(math.atan2(pc[1], pc[2]), abs=1e-12)


def _scene(n, rng):
    centers = np.column_stack([rng.uniform(-50, 50, (n, 2)), np.full(n, 0.85)])
    truth = rng.integers(1, 61, n)
    return centers, truth


POSE = CameraPose(roll=math.pi, focal_length=0.004, position=(0, 0, 25))


def test_detector_exact_without_noise():
    rng = np.random.default_rng(1)
    centers, truth = _scene(5, rng)
    boxes, prof, det = detect_activities(centers, truth, POSE, DetectorNoise(0.0, 0.0), rng)
    assert det.all()
    np.testing.assert_array_equal(prof.activities, truth)
    for c, b in zip(centers, boxes):
        ref = render_box(c, 1.7, 0.5, POSE)
        assert (b.b_x, b.b_y, b.b_h, b.b_w) == (ref.b_x, ref.b_y, ref.b_h, ref.b_w)


def test_detector_forced_flip():
    rng = np.random.default_rng(2)
    centers, truth = _scene(50, rng)
    _, prof, _ = detect_activities(centers, truth, POSE, DetectorNoise(0.0, 1.0), rng)
    assert np.all(prof.activities != truth)
    assert prof.activities.min() >= 1 and prof.activities.max() <= 60


def test_detector_error_rate():
    rng = np.random.default_rng(3)
    centers, truth = _scene(10_000, rng)
    _, prof, _ = detect_activities(centers, truth, POSE, DetectorNoise(0.0, 0.05), rng)
    assert np.mean(prof.activities != truth) == pytest.approx(0.05, abs=0.02)


def test_detector_marks_out_of_view():
    rng = np.random.default_rng(4)
    pose = CameraPose(focal_length=0.004)  # looking along +z
    centers = np.array([[0, 0, 10.0], [0, 0, -10.0], [100.0, 0, 1.0]])
    boxes, _, det = detect_activities(centers, [1, 2, 3], pose, DetectorNoise(0, 0, math.radians(60)), rng)
    assert det.tolist() == [True, False, False]
    assert boxes[1] is None and boxes[2] is None


def test_rate_table_lookup():
    const = np.full(60, 3e6)
    assert {min_rate_for_activity(a, const) for a in range(1, 61)} == {3e6}
    table = default_rate_table()
    table[2] = 5e6
    assert min_rate_for_activity(3, table) == 5e6
    with pytest.raises(ValueError):
        min_rate_for_activity(61, table)
    with pytest.raises(ValueError):
        min_rate_for_activity(0, table)


def test_default_tiers_round_robin():
    table = default_rate_table()
    tiers = {1: 1e6, 2: 5e6, 3: 20e6, 0: 50e6}
    for a in range(1, 61):
        assert table[a - 1] == tiers[a % 4]


def test_load_rate_table(tmp_path):
    path = tmp_path / "rates.txt"
    path.write_text("# tiers\n" + "\n".join(f"{a} = {a * 1000}" for a in range(1, 5)) + "\n")
    np.testing.assert_array_equal(load_rate_table(path, n_classes=4), [1000, 2000, 3000, 4000])
    path.write_text("1 = 5\n2 = x\n")
    with pytest.raises(ValueError, match=":2:"):
        load_rate_table(path, n_classes=2)
    path.write_text("1 = 5\n")
    with pytest.raises(ValueError, match="missing"):
        load_rate_table(path, n_classes=2)
