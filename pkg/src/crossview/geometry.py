"""Pinhole camera geometry: unprojection, similarity transforms, z-buffered splatting.

Conventions shared across the package:

* Depth maps are ``(H, W)`` float arrays in meters. Entries that are ``<= 0`` or
  non-finite are invalid (no measurement).
* RGB images are ``(H, W, 3)`` float arrays with channel values in ``[0, 1]``.
* A pixel index ``(u, v) = (column, row)`` addresses the pixel *center*, so
  unprojection uses the integer indices directly and projection rounds to the
  nearest integer pixel with ties to even.
* Camera frames are right-handed with +x right, +y down, +z forward (optical axis).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Points closer than this to the camera plane are dropped before projection.
NEAR_PLANE = 1e-6

# Fill color for pixels that no point reached (mid-gray, matches the latent fill).
INVALID_RGB = 0.5

_ROT_TOL = 1e-9


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics plus the image size they apply to."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (np.isfinite(self.cx) and np.isfinite(self.cy)):
            raise ValueError("principal point must be finite")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image size must be positive")

    @property
    def matrix(self) -> np.ndarray:
        """3x3 calibration matrix."""
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )


@dataclass(frozen=True)
class SimilarityTransform:
    """Scaled rigid motion ``p -> scale * rotation @ p + translation``.

    ``rotation`` must be a proper rotation (orthonormal, det +1) and ``scale``
    strictly positive, so every instance is invertible.
    """

    scale: float
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.array(self.rotation, dtype=np.float64)
        t = np.array(self.translation, dtype=np.float64)
        if R.shape != (3, 3):
            raise ValueError("rotation must be 3x3")
        if t.shape != (3,):
            raise ValueError("translation must be a 3-vector")
        if not np.isfinite(R).all() or not np.isfinite(t).all():
            raise ValueError("transform entries must be finite")
        if np.linalg.norm(R.T @ R - np.eye(3)) > _ROT_TOL:
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > _ROT_TOL:
            raise ValueError("rotation must have determinant +1 (no reflections)")
        s = float(self.scale)
        if not np.isfinite(s) or s <= 0:
            raise ValueError("scale must be finite and positive")
        object.__setattr__(self, "scale", s)
        object.__setattr__(self, "rotation", _freeze(R))
        object.__setattr__(self, "translation", _freeze(t))

    @classmethod
    def identity(cls) -> "SimilarityTransform":
        return cls(1.0, np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map an ``(N, 3)`` array of points through the transform."""
        p = np.asarray(points, dtype=np.float64)
        return self.scale * (p @ self.rotation.T) + self.translation

    @property
    def matrix(self) -> np.ndarray:
        """4x4 homogeneous form."""
        M = np.eye(4)
        M[:3, :3] = self.scale * self.rotation
        M[:3, 3] = self.translation
        return M


@dataclass(frozen=True)
class PointCloud:
    """Colored 3-D points: ``positions`` (N, 3) meters, ``colors`` (N, 3) in [0, 1]."""

    positions: np.ndarray
    colors: np.ndarray

    def __post_init__(self):
        p = np.array(self.positions, dtype=np.float64)
        c = np.array(self.colors, dtype=np.float64)
        if p.ndim != 2 or p.shape[1] != 3:
            raise ValueError("positions must be (N, 3)")
        if c.shape != p.shape:
            raise ValueError("colors must match positions in shape")
        if not np.isfinite(p).all():
            raise ValueError("positions must be finite")
        if c.size and (c.min() < 0.0 or c.max() > 1.0):
            raise ValueError("colors must lie in [0, 1]")
        object.__setattr__(self, "positions", _freeze(p))
        object.__setattr__(self, "colors", _freeze(c))

    def __len__(self) -> int:
        return self.positions.shape[0]

    @classmethod
    def empty(cls) -> "PointCloud":
        return cls(np.zeros((0, 3)), np.zeros((0, 3)))


@dataclass(frozen=True)
class SparseEgoMap:
    """Partial rendering: RGB plus a validity mask and the z-buffer that produced it.

    ``rgb`` holds the fill value on invalid pixels; ``depth_buffer`` holds the
    winning camera-frame depth on valid pixels and 0 elsewhere, so
    ``validity`` is exactly the set of pixels with a usable depth.
    """

    rgb: np.ndarray
    validity: np.ndarray
    depth_buffer: np.ndarray

    def __post_init__(self):
        rgb = np.array(self.rgb, dtype=np.float64)
        val = np.array(self.validity, dtype=bool)
        dep = np.array(self.depth_buffer, dtype=np.float64)
        if rgb.ndim != 3 or rgb.shape[2] != 3:
            raise ValueError("rgb must be (H, W, 3)")
        if val.shape != rgb.shape[:2] or dep.shape != rgb.shape[:2]:
            raise ValueError("validity and depth_buffer must be (H, W)")
        ok = np.isfinite(dep) & (dep > 0)
        if not np.array_equal(val, ok):
            raise ValueError("validity must equal the set of valid depth entries")
        object.__setattr__(self, "rgb", _freeze(rgb))
        object.__setattr__(self, "depth_buffer", _freeze(dep))
        val = val.copy()
        val.flags.writeable = False
        object.__setattr__(self, "validity", val)

    @property
    def valid_fraction(self) -> float:
        return float(self.validity.mean())


def validate_depth_map(depth: np.ndarray) -> np.ndarray:
    d = np.asarray(depth, dtype=np.float64)
    if d.ndim != 2:
        raise ValueError("depth map must be 2-D (H, W)")
    return d


def depth_validity(depth: np.ndarray) -> np.ndarray:
    """Boolean mask of usable depth entries (finite and strictly positive)."""
    d = validate_depth_map(depth)
    with np.errstate(invalid="ignore"):
        return np.isfinite(d) & (d > 0)


def validate_rgb_image(rgb: np.ndarray) -> np.ndarray:
    c = np.asarray(rgb, dtype=np.float64)
    if c.ndim != 3 or c.shape[2] != 3:
        raise ValueError("rgb image must be (H, W, 3)")
    if c.size and (np.nanmin(c) < 0.0 or np.nanmax(c) > 1.0):
        raise ValueError("rgb values must lie in [0, 1]")
    return c


def unproject(
    depth: np.ndarray, color: np.ndarray, intrinsics: CameraIntrinsics
) -> PointCloud:
    """Lift every valid depth pixel to a colored 3-D point in the camera frame.

    Parameters
    ----------
    depth : (H, W) ndarray
        Metric depth along the optical axis; invalid entries are skipped.
    color : (H, W, 3) ndarray
        Per-pixel RGB in [0, 1], sampled at the same pixels.
    intrinsics : CameraIntrinsics
        Must match the image size.

    Returns
    -------
    PointCloud
        One point per valid pixel, in row-major pixel order:
        ``((u - cx) d / fx, (v - cy) d / fy, d)``.
    """
    d = validate_depth_map(depth)
    c = validate_rgb_image(color)
    if c.shape[:2] != d.shape:
        raise ValueError("depth and color sizes differ")
    if d.shape != (intrinsics.height, intrinsics.width):
        raise ValueError("intrinsics image size does not match the depth map")
    mask = depth_validity(d)
    vs, us = np.nonzero(mask)
    dv = d[vs, us]
    x = (us - intrinsics.cx) * dv / intrinsics.fx
    y = (vs - intrinsics.cy) * dv / intrinsics.fy
    return PointCloud(np.stack([x, y, dv], axis=1), c[vs, us])


def apply_transform(cloud: PointCloud, transform: SimilarityTransform) -> PointCloud:
    """Map a point cloud through a similarity transform; colors ride along."""
    return PointCloud(transform.apply(cloud.positions), cloud.colors)


def invert_transform(transform: SimilarityTransform) -> SimilarityTransform:
    """Exact closed-form inverse: ``(1/s, R^T, -(1/s) R^T t)``."""
    Rt = transform.rotation.T
    s = 1.0 / transform.scale
    return SimilarityTransform(s, Rt, -s * (Rt @ transform.translation))


def compose_transforms(
    outer: SimilarityTransform, inner: SimilarityTransform
) -> SimilarityTransform:
    """Composition ``outer after inner``: applies ``inner`` first."""
    return SimilarityTransform(
        outer.scale * inner.scale,
        outer.rotation @ inner.rotation,
        outer.scale * (outer.rotation @ inner.translation) + outer.translation,
    )


def project_points(
    cloud: PointCloud, intrinsics: CameraIntrinsics, splat_radius: int = 1
) -> SparseEgoMap:
    """Rasterize a point cloud with a z-buffer, nearest point winning each pixel.

    Each point projects to ``u = rint(fx x / z + cx)``, ``v = rint(fy y / z + cy)``
    (ties to even). Points with ``z <= NEAR_PLANE`` or a center outside the image
    are discarded; surviving points paint a ``(2r+1)^2`` neighborhood (clipped to
    the image) under the same z-buffer. Exactly equal depths are broken toward the
    lower point index, so the result is deterministic regardless of input chunking.

    Parameters
    ----------
    cloud : PointCloud
        Points in the target camera frame.
    intrinsics : CameraIntrinsics
        Target camera; fixes the output size.
    splat_radius : int
        Neighborhood half-width in pixels; 0 paints single pixels. Default 1
        closes the gaps a metrically-sampled cloud leaves between pixel centers.

    Returns
    -------
    SparseEgoMap
        RGB with mid-gray fill on untouched pixels, validity mask, and z-buffer.
    """
    if splat_radius < 0:
        raise ValueError("splat_radius must be >= 0")
    H, W = intrinsics.height, intrinsics.width
    rgb = np.full((H, W, 3), INVALID_RGB, dtype=np.float64)
    dep = np.zeros((H, W), dtype=np.float64)
    val = np.zeros((H, W), dtype=bool)

    def done() -> SparseEgoMap:
        return SparseEgoMap(rgb=rgb, validity=val, depth_buffer=dep)

    if len(cloud) == 0:
        return done()
    pos = cloud.positions
    z = pos[:, 2]
    keep = z > NEAR_PLANE
    if not keep.any():
        return done()
    idx = np.nonzero(keep)[0]
    zk = z[keep]
    u = np.rint(intrinsics.fx * pos[keep, 0] / zk + intrinsics.cx)
    v = np.rint(intrinsics.fy * pos[keep, 1] / zk + intrinsics.cy)
    inb = (u >= 0) & (u < W) & (v >= 0) & (v < H)
    if not inb.any():
        return done()
    u = u[inb].astype(np.int64)
    v = v[inb].astype(np.int64)
    zk = zk[inb]
    idx = idx[inb]

    if splat_radius > 0:
        k = 2 * splat_radius + 1
        off = np.arange(-splat_radius, splat_radius + 1)
        du = np.tile(off, k)
        dv = np.repeat(off, k)
        u = (u[:, None] + du[None, :]).ravel()
        v = (v[:, None] + dv[None, :]).ravel()
        zk = np.repeat(zk, k * k)
        idx = np.repeat(idx, k * k)
        inb = (u >= 0) & (u < W) & (v >= 0) & (v < H)
        u, v, zk, idx = u[inb], v[inb], zk[inb], idx[inb]

    lin = v * W + u
    # Sort by pixel, then depth, then original point index; the first entry per
    # pixel is the deterministic winner.
    order = np.lexsort((idx, zk, lin))
    lin_sorted = lin[order]
    first = np.ones(lin_sorted.size, dtype=bool)
    first[1:] = lin_sorted[1:] != lin_sorted[:-1]
    win = order[first]
    pu, pv = u[win], v[win]
    rgb[pv, pu] = cloud.colors[idx[win]]
    dep[pv, pu] = zk[win]
    val[pv, pu] = True
    return done()
