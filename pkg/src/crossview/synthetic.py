"""Seeded synthetic paired scenes with an independent reference renderer.

A scene is a surfel cloud (a textured background plane plus a box for
parallax and occlusion), two-hand keypoints floating in front, and a rigid
egocentric/exocentric camera pair looking at the hands from deliberately
tilted angles, so no two surfels land on a pixel at exactly equal depth by
construction. Surfel spacing is tied to the egocentric pixel pitch so a
splat radius of 1 closes sampling gaps, and the textures are low-frequency
sinusoids, keeping color differences under sub-pixel registration error far
below visual tolerance.

``oracle_render`` rasterizes with a per-point Python loop that shares no code
with the vectorized projection path (only primitive arithmetic), giving the
tests a reference both views can be checked against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .alignment import HandPose
from .geometry import (
    NEAR_PLANE,
    CameraIntrinsics,
    PointCloud,
    SimilarityTransform,
    compose_transforms,
    depth_validity,
    invert_transform,
    validate_depth_map,
)


@dataclass(frozen=True)
class SceneConfig:
    """Scene geometry constants; sizes in meters, spacing in egocentric pixels."""

    width: int = 512
    height: int = 512
    focal_factor: float = 0.8
    plane_depth: float = 1.8
    plane_half_x: float = 3.0
    plane_half_y: float = 2.25
    box_size: float = 0.35
    box_center: tuple = (-0.45, 0.28, 0.78)
    pixel_spacing: float = 2.2

    def __post_init__(self):
        if self.width < 32 or self.height < 32:
            raise ValueError("image size must be at least 32x32")
        if not (0 < self.pixel_spacing <= 3.0):
            raise ValueError("pixel_spacing must be in (0, 3] to leave no holes")
        object.__setattr__(self, "box_center", tuple(float(v) for v in self.box_center))


@dataclass(frozen=True)
class CameraRig:
    """A camera: intrinsics plus its world -> camera rigid pose."""

    intrinsics: CameraIntrinsics
    pose: SimilarityTransform


@dataclass(frozen=True)
class SyntheticScene:
    seed: int
    config: SceneConfig
    surfels: PointCloud
    hand_keypoints_world: np.ndarray
    ego_camera: CameraRig
    exo_camera: CameraRig

    def __post_init__(self):
        kp = np.array(self.hand_keypoints_world, dtype=np.float64)
        if kp.shape != (42, 3):
            raise ValueError("hand keypoints must be (42, 3)")
        kp.flags.writeable = False
        object.__setattr__(self, "hand_keypoints_world", kp)


def _axis_angle(axis, angle: float) -> np.ndarray:
    a = np.asarray(axis, dtype=np.float64)
    a = a / np.linalg.norm(a)
    K = np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]])
    return np.eye(3) + math.sin(angle) * K + (1.0 - math.cos(angle)) * (K @ K)


def _look_at_pose(position, target, roll: float = 0.0) -> SimilarityTransform:
    """World -> camera rigid pose with +z toward ``target`` and world -y as up."""
    position = np.asarray(position, dtype=np.float64)
    f = np.asarray(target, dtype=np.float64) - position
    nf = np.linalg.norm(f)
    if nf < 1e-9:
        raise ValueError("camera position and target coincide")
    f = f / nf
    up = np.array([0.0, -1.0, 0.0])
    r = np.cross(f, up)
    nr = np.linalg.norm(r)
    if nr < 1e-9:
        raise ValueError("view direction is parallel to the up axis")
    r = r / nr
    d = np.cross(f, r)
    cr, sr = math.cos(roll), math.sin(roll)
    R = np.stack([cr * r + sr * d, -sr * r + cr * d, f])
    return SimilarityTransform(1.0, R, -R @ position)


# Hand skeleton template: five 4-joint chains fanned around the wrist, with a
# cumulative out-of-plane curl so the keypoints are never coplanar.
_FINGER_ANGLES = (-0.96, -0.35, 0.0, 0.31, 0.66)
_MCP_RADII = (0.046, 0.092, 0.096, 0.090, 0.080)
_SEG_LENGTHS = (
    (0.042, 0.032, 0.026),
    (0.040, 0.026, 0.020),
    (0.044, 0.028, 0.022),
    (0.040, 0.026, 0.022),
    (0.032, 0.021, 0.018),
)
_CURL = (0.18, 0.42, 0.72)


def _hand_template(curl_scale: float) -> np.ndarray:
    pts = np.zeros((21, 3))
    for f in range(5):
        a = _FINGER_ANGLES[f]
        pts[1 + 4 * f] = _MCP_RADII[f] * np.array([math.sin(a), -math.cos(a), 0.0])
        p = pts[1 + 4 * f]
        for k, seg in enumerate(_SEG_LENGTHS[f]):
            c = _CURL[k] * curl_scale
            d = np.array(
                [math.sin(a) * math.cos(c), -math.cos(a) * math.cos(c), math.sin(c)]
            )
            p = p + seg * d
            pts[2 + 4 * f + k] = p
    return pts


def _hand_keypoints(rng: np.random.Generator) -> np.ndarray:
    left = _hand_template(rng.uniform(0.7, 1.2)) * np.array([-1.0, 1.0, 1.0])
    right = _hand_template(rng.uniform(0.7, 1.2))
    blocks = []
    for tpl, off in ((left, (-0.085, 0.012, 0.015)), (right, (0.085, -0.012, -0.005))):
        R = _axis_angle(rng.normal(size=3), rng.uniform(0.0, 0.35))
        jitter = rng.normal(0.0, 0.004, size=(21, 3))
        blocks.append(tpl @ R.T + np.asarray(off) + jitter)
    return np.concatenate(blocks, axis=0)


def _smooth_colors(rng, U, V, base_lo, base_hi, amp_lo, amp_hi, f_lo, f_hi):
    cols = np.empty((U.size, 3))
    for c in range(3):
        base = rng.uniform(base_lo, base_hi)
        amp = rng.uniform(amp_lo, amp_hi)
        fu = rng.uniform(f_lo, f_hi)
        fv = rng.uniform(f_lo, f_hi)
        ph = rng.uniform(0.0, 2.0 * math.pi)
        cols[:, c] = base + amp * np.sin(fu * U + fv * V + ph)
    return np.clip(cols, 0.02, 0.98)


def _plane_surfels(rng, cfg: SceneConfig, spacing: float):
    xs = np.arange(-cfg.plane_half_x, cfg.plane_half_x + spacing / 2, spacing)
    ys = np.arange(-cfg.plane_half_y, cfg.plane_half_y + spacing / 2, spacing)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    X, Y = X.ravel(), Y.ravel()
    pos = np.stack([X, Y, np.full_like(X, cfg.plane_depth)], axis=1)
    col = _smooth_colors(rng, X, Y, 0.30, 0.60, 0.10, 0.16, 0.45, 0.95)
    return pos, col


def _box_surfels(rng, cfg: SceneConfig, spacing: float):
    h = cfg.box_size / 2.0
    center = np.asarray(cfg.box_center)
    uu = np.arange(-h, h + spacing / 2, spacing)
    U, V = np.meshgrid(uu, uu, indexing="xy")
    U, V = U.ravel(), V.ravel()
    pos_parts, col_parts = [], []
    for axis in range(3):
        for sign in (-1.0, 1.0):
            P = np.empty((U.size, 3))
            P[:, axis] = sign * h
            P[:, (axis + 1) % 3] = U
            P[:, (axis + 2) % 3] = V
            pos_parts.append(P + center)
            col_parts.append(_smooth_colors(rng, U, V, 0.25, 0.75, 0.05, 0.10, 0.8, 1.6))
    return np.concatenate(pos_parts), np.concatenate(col_parts)


def make_scene(seed: int = 0, config: SceneConfig | None = None) -> SyntheticScene:
    """Deterministically generate a paired-view scene from the seed.

    Draw order is fixed (hands, egocentric camera, exocentric camera,
    intrinsics, plane, box), so equal seeds give bit-identical scenes and
    different seeds vary every sampled quantity, textures included.
    """
    cfg = config if config is not None else SceneConfig()
    rng = np.random.default_rng(seed)

    hand = _hand_keypoints(rng)
    centroid = hand.mean(axis=0)

    ego_pos = np.array(
        [rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), -rng.uniform(0.50, 0.62)]
    )
    ego_pose = _look_at_pose(
        ego_pos, centroid + rng.normal(0.0, 0.01, 3), rng.uniform(-0.14, 0.14)
    )

    side = 1.0 if rng.random() < 0.5 else -1.0
    az = side * rng.uniform(0.26, 0.61)
    el = rng.uniform(0.14, 0.38)
    dist = rng.uniform(1.25, 1.55)
    exo_pos = np.array(
        [
            dist * math.sin(az) * math.cos(el),
            -dist * math.sin(el),
            -dist * math.cos(az) * math.cos(el),
        ]
    )
    exo_pose = _look_at_pose(
        exo_pos, centroid + rng.normal(0.0, 0.01, 3), rng.uniform(-0.10, 0.10)
    )

    f_ego = cfg.focal_factor * cfg.width
    ego_K = CameraIntrinsics(
        f_ego, f_ego, (cfg.width - 1) / 2.0, (cfg.height - 1) / 2.0, cfg.width, cfg.height
    )
    f_exo = rng.uniform(0.75, 0.90) * cfg.width
    exo_K = CameraIntrinsics(
        f_exo, f_exo, (cfg.width - 1) / 2.0, (cfg.height - 1) / 2.0, cfg.width, cfg.height
    )

    # Surfel pitch tracks the nearest viewing distance so projected gaps stay
    # under pixel_spacing (<= 3 px; a radius-1 splat bridges them).
    plane_spacing = cfg.pixel_spacing * (cfg.plane_depth - ego_pos[2]) / f_ego
    box_near = (cfg.box_center[2] - cfg.box_size / 2.0) - ego_pos[2]
    box_spacing = cfg.pixel_spacing * box_near / f_ego
    plane_pos, plane_col = _plane_surfels(rng, cfg, plane_spacing)
    box_pos, box_col = _box_surfels(rng, cfg, box_spacing)

    surfels = PointCloud(
        np.concatenate([plane_pos, box_pos]), np.concatenate([plane_col, box_col])
    )
    return SyntheticScene(
        seed=seed,
        config=cfg,
        surfels=surfels,
        hand_keypoints_world=hand,
        ego_camera=CameraRig(ego_K, ego_pose),
        exo_camera=CameraRig(exo_K, exo_pose),
    )


def _camera(scene: SyntheticScene, which: str) -> CameraRig:
    if which == "ego":
        return scene.ego_camera
    if which == "exo":
        return scene.exo_camera
    raise ValueError("which must be 'ego' or 'exo'")


def oracle_render(scene: SyntheticScene, which: str):
    """Reference rasterization of the surfels into one camera.

    Pure per-point Python loop: round-half-even projection, radius-1 splat,
    nearest depth wins, exact ties to the lower point index. Returns
    ``(rgb, depth)`` with mid-gray fill and zero depth on unhit pixels.
    """
    cam = _camera(scene, which)
    K = cam.intrinsics
    H, W = K.height, K.width
    pts = scene.surfels.positions @ cam.pose.rotation.T + cam.pose.translation
    fx, fy, cx, cy = K.fx, K.fy, K.cx, K.cy

    xs = pts[:, 0].tolist()
    ys = pts[:, 1].tolist()
    zs = pts[:, 2].tolist()
    inf = math.inf
    zbuf = [inf] * (H * W)
    owner = [-1] * (H * W)
    for i in range(len(zs)):
        z = zs[i]
        if z <= NEAR_PLANE:
            continue
        u = round(fx * xs[i] / z + cx)
        v = round(fy * ys[i] / z + cy)
        if u < 0 or u >= W or v < 0 or v >= H:
            continue
        for vv in (v - 1, v, v + 1):
            if vv < 0 or vv >= H:
                continue
            row = vv * W
            for uu in (u - 1, u, u + 1):
                if uu < 0 or uu >= W:
                    continue
                at = row + uu
                zb = zbuf[at]
                if z < zb or (z == zb and i < owner[at]):
                    zbuf[at] = z
                    owner[at] = i

    own = np.array(owner, dtype=np.int64).reshape(H, W)
    hit = own >= 0
    rgb = np.full((H, W, 3), 0.5)
    rgb[hit] = scene.surfels.colors[own[hit]]
    depth = np.zeros((H, W))
    zarr = np.array(zbuf).reshape(H, W)
    depth[hit] = zarr[hit]
    return rgb, depth


def ground_truth_transform(scene: SyntheticScene) -> SimilarityTransform:
    """Exact exocentric-camera -> egocentric-camera transform (rigid, scale 1)."""
    return compose_transforms(scene.ego_camera.pose, invert_transform(scene.exo_camera.pose))


def hand_pose_in_camera(scene: SyntheticScene, which: str) -> HandPose:
    """The 42 hand keypoints expressed in one camera's frame."""
    cam = _camera(scene, which)
    kp = scene.hand_keypoints_world @ cam.pose.rotation.T + cam.pose.translation
    return HandPose(kp, layout="two_hands_42")


def hand_depth_map(
    scene: SyntheticScene,
    depth: np.ndarray,
    which: str = "exo",
    radius_px: float | None = None,
) -> np.ndarray:
    """Metric reference depth restricted to disks around the projected keypoints.

    Plays the role of a sensor that only measures depth near the hands: pixels
    within ``radius_px`` of a visible projected keypoint keep their rendered
    depth, everything else becomes 0 (invalid).
    """
    cam = _camera(scene, which)
    K = cam.intrinsics
    d = validate_depth_map(depth)
    if d.shape != (K.height, K.width):
        raise ValueError("depth map size does not match the camera")
    if radius_px is None:
        radius_px = max(6.0, K.width / 32.0)
    kp = scene.hand_keypoints_world @ cam.pose.rotation.T + cam.pose.translation
    mask = np.zeros(d.shape, dtype=bool)
    for x, y, z in kp:
        if z <= NEAR_PLANE:
            continue
        u = K.fx * x / z + K.cx
        v = K.fy * y / z + K.cy
        x0 = max(0, int(math.floor(u - radius_px)))
        x1 = min(K.width - 1, int(math.ceil(u + radius_px)))
        y0 = max(0, int(math.floor(v - radius_px)))
        y1 = min(K.height - 1, int(math.ceil(v + radius_px)))
        if x0 > x1 or y0 > y1:
            continue
        gx = np.arange(x0, x1 + 1) - u
        gy = np.arange(y0, y1 + 1) - v
        disk = gy[:, None] ** 2 + gx[None, :] ** 2 <= radius_px * radius_px
        mask[y0 : y1 + 1, x0 : x1 + 1] |= disk
    mask &= depth_validity(d)
    return np.where(mask, d, 0.0)


def occlusion_edge_mask(depth: np.ndarray, threshold: float = 0.05) -> np.ndarray:
    """Mask of pixels to exclude from photometric comparison at depth edges.

    A pixel is excluded when its 3x3 neighborhood contains an invalid depth
    (image borders count as invalid) or spans more than ``threshold`` meters,
    i.e. where a half-pixel registration difference legitimately changes which
    surface is sampled.
    """
    d = validate_depth_map(depth)
    work = np.where(depth_validity(d), d, np.nan)
    pad = np.pad(work, 1, constant_values=np.nan)
    win = np.lib.stride_tricks.sliding_window_view(pad, (3, 3))
    span = win.max(axis=(2, 3)) - win.min(axis=(2, 3))
    return ~np.isfinite(span) | (span > threshold)
