from dataclasses import replace

import numpy as np
import pytest

from crossview.alignment import exo_to_ego_transform
from crossview.geometry import (
    NEAR_PLANE,
    PointCloud,
    depth_validity,
    project_points,
)
from crossview.synthetic import (
    CameraRig,
    SceneConfig,
    _look_at_pose,
    ground_truth_transform,
    hand_depth_map,
    hand_pose_in_camera,
    make_scene,
    occlusion_edge_mask,
    oracle_render,
)

SMALL = SceneConfig(width=96, height=96)


def kp_pixels(scene, which):
    cam = scene.ego_camera if which == "ego" else scene.exo_camera
    K = cam.intrinsics
    kp = hand_pose_in_camera(scene, which).keypoints
    us = np.rint(K.fx * kp[:, 0] / kp[:, 2] + K.cx).astype(int)
    vs = np.rint(K.fy * kp[:, 1] / kp[:, 2] + K.cy).astype(int)
    return us, vs, kp[:, 2]


def test_make_scene_deterministic():
    a = make_scene(7, SMALL)
    b = make_scene(7, SMALL)
    np.testing.assert_array_equal(a.surfels.positions, b.surfels.positions)
    np.testing.assert_array_equal(a.surfels.colors, b.surfels.colors)
    np.testing.assert_array_equal(a.hand_keypoints_world, b.hand_keypoints_world)
    for cam_a, cam_b in ((a.ego_camera, b.ego_camera), (a.exo_camera, b.exo_camera)):
        assert cam_a.intrinsics == cam_b.intrinsics
        np.testing.assert_array_equal(cam_a.pose.rotation, cam_b.pose.rotation)
        np.testing.assert_array_equal(cam_a.pose.translation, cam_b.pose.translation)


def test_seeds_vary_content():
    a = make_scene(0, SMALL)
    b = make_scene(1, SMALL)
    assert not np.array_equal(a.hand_keypoints_world, b.hand_keypoints_world)
    assert a.exo_camera.intrinsics.fx != b.exo_camera.intrinsics.fx
    n = min(len(a.surfels.colors), len(b.surfels.colors))
    assert not np.array_equal(a.surfels.colors[:n], b.surfels.colors[:n])


def test_keypoints_visible_in_both_views():
    for seed in range(20):
        scene = make_scene(seed)
        for which in ("ego", "exo"):
            us, vs, zs = kp_pixels(scene, which)
            K = (scene.ego_camera if which == "ego" else scene.exo_camera).intrinsics
            assert (zs > 0.05).all(), (seed, which)
            assert ((us >= 0) & (us < K.width)).all(), (seed, which)
            assert ((vs >= 0) & (vs < K.height)).all(), (seed, which)


def test_two_hands_are_distinct():
    kp = make_scene(4, SMALL).hand_keypoints_world
    assert kp.shape == (42, 3)
    assert not np.allclose(kp[:21], kp[21:])
    # wrists sit apart by a plausible interhand gap
    assert 0.05 < np.linalg.norm(kp[0] - kp[21]) < 1.0


def test_look_at_pose_geometry():
    pos = np.array([0.3, -0.2, -1.1])
    target = np.array([0.0, 0.1, 0.9])
    pose = _look_at_pose(pos, target)
    R = pose.rotation
    np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-12)
    assert np.linalg.det(R) > 0.99
    assert pose.scale == 1.0
    np.testing.assert_allclose(pose.apply(pos[None])[0], 0.0, atol=1e-12)
    cam_target = pose.apply(target[None])[0]
    np.testing.assert_allclose(
        cam_target, [0.0, 0.0, np.linalg.norm(target - pos)], atol=1e-12
    )
    with pytest.raises(ValueError):
        _look_at_pose([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        _look_at_pose([0.0, 0.0, 0.0], [0.0, -5.0, 0.0])  # along the up axis


def test_scene_config_validation():
    with pytest.raises(ValueError):
        SceneConfig(width=16)
    with pytest.raises(ValueError):
        SceneConfig(pixel_spacing=0.0)
    with pytest.raises(ValueError):
        SceneConfig(pixel_spacing=3.5)


def test_facing_away_camera_sees_nothing():
    scene = make_scene(0, SMALL)
    away = CameraRig(
        scene.exo_camera.intrinsics, _look_at_pose([0.0, 0.0, -1.0], [0.0, 0.0, -10.0])
    )
    rgb, depth = oracle_render(replace(scene, exo_camera=away), "exo")
    assert not depth_validity(depth).any()
    assert (rgb == 0.5).all()


def test_scene_surfaces_lie_behind_hands():
    scene = make_scene(1, SMALL)
    for which in ("ego", "exo"):
        _, depth = oracle_render(scene, which)
        us, vs, zs = kp_pixels(scene, which)
        hit = depth[vs, us]
        assert (hit > 0).all()  # backdrop covers every keypoint pixel
        assert (hit > zs).all()  # and sits behind the hand itself


def test_oracle_matches_vectorized_projection():
    scene = make_scene(3, SceneConfig(width=192, height=192))
    for which in ("ego", "exo"):
        cam = scene.ego_camera if which == "ego" else scene.exo_camera
        rgb_o, depth_o = oracle_render(scene, which)
        pts_cam = scene.surfels.positions @ cam.pose.rotation.T + cam.pose.translation
        cloud = PointCloud(pts_cam, scene.surfels.colors)
        smap = project_points(cloud, cam.intrinsics, splat_radius=1)
        np.testing.assert_array_equal(smap.validity, depth_validity(depth_o))
        np.testing.assert_array_equal(smap.depth_buffer, depth_o)
        np.testing.assert_array_equal(smap.rgb, rgb_o)


def test_ground_truth_transform_identities():
    scene = make_scene(2, SMALL)
    gt = ground_truth_transform(scene)
    assert gt.scale == 1.0
    kp_exo = hand_pose_in_camera(scene, "exo").keypoints
    kp_ego = hand_pose_in_camera(scene, "ego").keypoints
    np.testing.assert_allclose(gt.apply(kp_exo), kp_ego, atol=1e-12)

    same = replace(scene, exo_camera=scene.ego_camera)
    ident = ground_truth_transform(same)
    np.testing.assert_allclose(ident.rotation, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(ident.translation, 0.0, atol=1e-12)


def test_pose_alignment_recovers_ground_truth():
    for seed in range(5):
        scene = make_scene(seed, SMALL)
        gt = ground_truth_transform(scene)
        est = exo_to_ego_transform(
            hand_pose_in_camera(scene, "exo"), hand_pose_in_camera(scene, "ego")
        )
        assert abs(est.scale - 1.0) < 1e-9
        assert np.linalg.norm(est.rotation - gt.rotation) < 1e-9
        assert np.linalg.norm(est.translation - gt.translation) < 1e-9


def test_hand_depth_map_properties():
    scene = make_scene(5, SMALL)
    _, depth = oracle_render(scene, "exo")
    got = hand_depth_map(scene, depth, "exo")
    valid = depth_validity(got)
    assert valid.any()
    assert (got[valid] == depth[valid]).all()
    assert not got[~depth_validity(depth)].any()

    # independent full-image reconstruction of the disk mask
    cam = scene.exo_camera
    K = cam.intrinsics
    kp = hand_pose_in_camera(scene, "exo").keypoints
    r = max(6.0, K.width / 32.0)
    uu = np.arange(K.width, dtype=np.float64)
    vv = np.arange(K.height, dtype=np.float64)
    expect = np.zeros((K.height, K.width), dtype=bool)
    for x, y, z in kp:
        if z <= NEAR_PLANE:
            continue
        u = K.fx * x / z + K.cx
        v = K.fy * y / z + K.cy
        expect |= (vv[:, None] - v) ** 2 + (uu[None, :] - u) ** 2 <= r * r
    expect &= depth_validity(depth)
    np.testing.assert_array_equal(valid, expect)

    tight = depth_validity(hand_depth_map(scene, depth, "exo", radius_px=3.0))
    wide = depth_validity(hand_depth_map(scene, depth, "exo", radius_px=8.0))
    assert tight.sum() < wide.sum()
    assert (wide | ~tight).all()  # tight is a subset of wide


def test_hand_depth_map_validation():
    scene = make_scene(5, SMALL)
    with pytest.raises(ValueError):
        hand_depth_map(scene, np.ones((10, 10)), "exo")
    _, depth = oracle_render(scene, "exo")
    with pytest.raises(ValueError):
        hand_depth_map(scene, depth, "sideways")


def test_occlusion_edge_mask_enumerated():
    d = np.full((5, 5), 2.0)
    d[2, 2] = 2.04  # within threshold of the backdrop
    d[1, 1] = 0.0  # invalid
    d[3, 3] = 2.10  # genuine depth step
    got = occlusion_edge_mask(d, threshold=0.05)
    expect = np.ones((5, 5), dtype=bool)  # borders always flagged
    expect[1:4, 1:4] = [
        [True, True, False],
        [True, True, True],
        [False, True, True],
    ]
    np.testing.assert_array_equal(got, expect)


def test_occlusion_edge_mask_flat_and_invalid():
    flat = occlusion_edge_mask(np.full((7, 7), 2.0))
    assert flat[0].all() and flat[-1].all() and flat[:, 0].all() and flat[:, -1].all()
    assert not flat[1:-1, 1:-1].any()
    assert occlusion_edge_mask(np.zeros((5, 5))).all()
