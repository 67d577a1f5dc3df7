"""Exocentric -> egocentric translation: sparse RGB reprojection and pose maps.

``build_sparse_ego_map`` chains the geometric pipeline: optionally rescale the
exocentric depth to metric using the hand region, lift color+depth to a point
cloud, carry it through the keypoint-aligned similarity transform, and splat it
into the egocentric camera. ``rasterize_pose_map`` draws the hand skeleton as a
color-coded conditioning image.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .alignment import HandPose, exo_to_ego_transform
from .calibration import apply_scale, compute_scale, hand_region_from_depth
from .geometry import (
    NEAR_PLANE,
    CameraIntrinsics,
    SparseEgoMap,
    apply_transform,
    project_points,
    unproject,
)


class NoValidDepthError(ValueError):
    """The exocentric depth map has no valid pixels to reproject."""


# Parent joint of each keypoint in a 21-point hand; joint 0 is the wrist, each
# finger is a 4-joint chain rooted there (thumb 1-4, index 5-8, middle 9-12,
# ring 13-16, little 17-20).
HAND_PARENTS = (0, 0, 1, 2, 3, 0, 5, 6, 7, 0, 9, 10, 11, 0, 13, 14, 15, 0, 17, 18, 19)

_FINGER_HUES = (
    (0.90, 0.30, 0.20),  # thumb
    (0.95, 0.75, 0.10),  # index
    (0.20, 0.80, 0.30),  # middle
    (0.15, 0.55, 0.95),  # ring
    (0.70, 0.35, 0.90),  # little
)
_WRIST_COLOR = (0.85, 0.85, 0.85)

COLOR_SCHEMES = ("per_finger", "plain")


@dataclass(frozen=True)
class PoseMapStyle:
    """Rendering parameters for skeleton conditioning images."""

    keypoint_radius: float = 4.0
    bone_thickness: float = 2.0
    color_scheme: str = "per_finger"
    background: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.keypoint_radius < 1:
            raise ValueError("keypoint_radius must be >= 1 pixel")
        if self.bone_thickness < 1:
            raise ValueError("bone_thickness must be >= 1 pixel")
        if self.color_scheme not in COLOR_SCHEMES:
            raise ValueError(f"color_scheme must be one of {COLOR_SCHEMES}")
        bg = tuple(float(b) for b in self.background)
        if len(bg) != 3 or min(bg) < 0 or max(bg) > 1:
            raise ValueError("background must be an RGB triple in [0, 1]")
        object.__setattr__(self, "background", bg)


def joint_color(style: PoseMapStyle, joint: int) -> tuple:
    """Color of a joint index within one 21-point hand block."""
    if style.color_scheme == "plain" or joint == 0:
        return _WRIST_COLOR
    return _FINGER_HUES[(joint - 1) // 4]


def build_sparse_ego_map(
    exo_rgb: np.ndarray,
    exo_depth: np.ndarray,
    exo_intrinsics: CameraIntrinsics,
    pose_exo: HandPose,
    pose_ego: HandPose,
    ego_intrinsics: CameraIntrinsics,
    hand_depth: np.ndarray | None = None,
    delta: float = 1e-6,
    splat_radius: int = 1,
) -> SparseEgoMap:
    """Reproject an exocentric RGB-D view into the egocentric camera.

    Stages, in order: (1) if ``hand_depth`` is given, recover the metric scale
    on its valid region and rescale ``exo_depth``; (2) unproject every valid
    exocentric pixel to a colored point; (3) estimate the exocentric ->
    egocentric similarity from the keypoint correspondences (egocentric ->
    exocentric fit, inverted); (4) transform the cloud and z-buffer splat it
    through the egocentric intrinsics. Pixels no point reaches keep the
    mid-gray fill and are marked invalid.

    Raises
    ------
    NoValidDepthError
        If the (rescaled) exocentric depth has no valid pixels.
    """
    depth = exo_depth
    if hand_depth is not None:
        region = hand_region_from_depth(hand_depth)
        scale = compute_scale(hand_depth, exo_depth, region, delta=delta)
        depth = apply_scale(exo_depth, scale)
    cloud = unproject(depth, exo_rgb, exo_intrinsics)
    if len(cloud) == 0:
        raise NoValidDepthError("exocentric depth map has no valid pixels")
    xform = exo_to_ego_transform(pose_exo, pose_ego)
    return project_points(apply_transform(cloud, xform), ego_intrinsics, splat_radius)


def _paint_disk(img, cu, cv, radius, color):
    H, W = img.shape[:2]
    x0 = max(0, int(np.floor(cu - radius)))
    x1 = min(W - 1, int(np.ceil(cu + radius)))
    y0 = max(0, int(np.floor(cv - radius)))
    y1 = min(H - 1, int(np.ceil(cv + radius)))
    if x0 > x1 or y0 > y1:
        return
    xs = np.arange(x0, x1 + 1)
    ys = np.arange(y0, y1 + 1)
    dx = xs[None, :] - cu
    dy = ys[:, None] - cv
    mask = dx * dx + dy * dy <= radius * radius
    img[y0 : y1 + 1, x0 : x1 + 1][mask] = color


def _paint_capsule(img, a, b, half_width, color):
    # Pixels within half_width of the segment a-b (distance to the clamped
    # projection onto the segment).
    H, W = img.shape[:2]
    x0 = max(0, int(np.floor(min(a[0], b[0]) - half_width)))
    x1 = min(W - 1, int(np.ceil(max(a[0], b[0]) + half_width)))
    y0 = max(0, int(np.floor(min(a[1], b[1]) - half_width)))
    y1 = min(H - 1, int(np.ceil(max(a[1], b[1]) + half_width)))
    if x0 > x1 or y0 > y1:
        return
    xs = np.arange(x0, x1 + 1, dtype=np.float64)
    ys = np.arange(y0, y1 + 1, dtype=np.float64)
    px = np.broadcast_to(xs[None, :], (ys.size, xs.size))
    py = np.broadcast_to(ys[:, None], (ys.size, xs.size))
    ex, ey = b[0] - a[0], b[1] - a[1]
    ll = ex * ex + ey * ey
    if ll == 0:
        t = np.zeros_like(px)
    else:
        t = np.clip(((px - a[0]) * ex + (py - a[1]) * ey) / ll, 0.0, 1.0)
    dx = px - (a[0] + t * ex)
    dy = py - (a[1] + t * ey)
    mask = dx * dx + dy * dy <= half_width * half_width
    img[y0 : y1 + 1, x0 : x1 + 1][mask] = color


def rasterize_pose_map(
    pose: HandPose, intrinsics: CameraIntrinsics, style: PoseMapStyle | None = None
) -> np.ndarray:
    """Draw the hand skeleton as an RGB conditioning image.

    Keypoints project through the pinhole at unrounded coordinates and are
    drawn as filled disks; bones are capsules of width ``bone_thickness``
    colored by the finger of the child joint. Keypoints with camera depth
    ``z <= NEAR_PLANE`` are skipped, as is any bone with a skipped endpoint.
    Bones are painted first, then disks; within each pass hands and joints are
    visited in index order, later paint overwriting earlier.
    """
    if style is None:
        style = PoseMapStyle()
    kp = pose.keypoints
    H, W = intrinsics.height, intrinsics.width
    img = np.empty((H, W, 3), dtype=np.float64)
    img[:] = style.background

    z = kp[:, 2]
    visible = z > NEAR_PLANE
    with np.errstate(divide="ignore", invalid="ignore"):
        us = intrinsics.fx * kp[:, 0] / z + intrinsics.cx
        vs = intrinsics.fy * kp[:, 1] / z + intrinsics.cy

    half = style.bone_thickness / 2.0
    n_hands = len(pose) // 21
    for h in range(n_hands):
        base = 21 * h
        for j in range(1, 21):
            i, p = base + j, base + HAND_PARENTS[j]
            if visible[i] and visible[p]:
                _paint_capsule(
                    img, (us[p], vs[p]), (us[i], vs[i]), half, joint_color(style, j)
                )
    for h in range(n_hands):
        base = 21 * h
        for j in range(21):
            i = base + j
            if visible[i]:
                _paint_disk(
                    img, us[i], vs[i], style.keypoint_radius, joint_color(style, j)
                )
    return img
