"""Closed-form similarity alignment between corresponding 3-D keypoint sets.

Solves ``argmin_{s,R,t} (1/N) sum_i || y_i - (s R x_i + t) ||^2`` over proper
rotations via the SVD of the cross-covariance (the classic least-squares
similarity estimate). Used to relate hand keypoints seen from two cameras:
solve the egocentric -> exocentric fit, then invert it to map exocentric points
into the egocentric frame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import SimilarityTransform, invert_transform

# Supported keypoint layouts -> expected point count.
LAYOUTS = {"single_hand_21": 21, "two_hands_42": 42}

# Minimum mean squared deviation of the source points from their centroid;
# below this the scale estimate s = tr(DS)/var_x is meaningless.
_MIN_SOURCE_VAR = 1e-12

# Covariance singular-value ratio below which the correspondence is rank <= 1
# (collinear or coincident points): rotation about the degenerate axis is free.
_MIN_SV_RATIO = 1e-9


class InsufficientPointsError(ValueError):
    """Fewer than 3 correspondences: the similarity fit is underdetermined."""


class DegenerateConfigurationError(ValueError):
    """Point configuration leaves the fit non-unique (coincident or collinear)."""


@dataclass(frozen=True)
class HandPose:
    """Keypoints ``(N, 3)`` in meters plus the layout that fixes N and ordering."""

    keypoints: np.ndarray
    layout: str = "two_hands_42"

    def __post_init__(self):
        if self.layout not in LAYOUTS:
            raise ValueError(f"unknown layout {self.layout!r}")
        k = np.array(self.keypoints, dtype=np.float64)
        if k.ndim != 2 or k.shape[1] != 3:
            raise ValueError("keypoints must be (N, 3)")
        if k.shape[0] != LAYOUTS[self.layout]:
            raise ValueError(
                f"layout {self.layout!r} expects {LAYOUTS[self.layout]} keypoints, "
                f"got {k.shape[0]}"
            )
        if not np.isfinite(k).all():
            raise ValueError("keypoints must be finite")
        k.flags.writeable = False
        object.__setattr__(self, "keypoints", k)

    def __len__(self) -> int:
        return self.keypoints.shape[0]


def umeyama(source: HandPose, target: HandPose) -> SimilarityTransform:
    """Least-squares similarity ``target ~= s R source + t``.

    Centroids ``xbar, ybar``; cross-covariance
    ``Sigma = (1/N) sum (y_i - ybar)(x_i - xbar)^T`` with SVD ``U D V^T``;
    ``S = diag(1, 1, sign(det U det V))`` forces a proper rotation, then
    ``R = U S V^T``, ``s = tr(D S) / var_x``, ``t = ybar - s R xbar``.
    """
    x = source.keypoints
    y = target.keypoints
    if x.shape != y.shape:
        raise ValueError("source and target must have the same point count")
    n = x.shape[0]
    if n < 3:
        raise InsufficientPointsError(f"need at least 3 correspondences, got {n}")
    mx = x.mean(axis=0)
    my = y.mean(axis=0)
    xc = x - mx
    yc = y - my
    var_x = float((xc**2).sum()) / n
    if var_x < _MIN_SOURCE_VAR:
        raise DegenerateConfigurationError("source points are nearly coincident")
    cov = (yc.T @ xc) / n
    U, D, Vt = np.linalg.svd(cov)
    if D[0] <= 0 or D[1] / D[0] < _MIN_SV_RATIO:
        raise DegenerateConfigurationError(
            "correspondence covariance has rank <= 1 (collinear points)"
        )
    S = np.ones(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        S[2] = -1.0
    R = (U * S) @ Vt
    s = float((D * S).sum()) / var_x
    t = my - s * (R @ mx)
    return SimilarityTransform(scale=s, rotation=R, translation=t)


def exo_to_ego_transform(pose_exo: HandPose, pose_ego: HandPose) -> SimilarityTransform:
    """Transform taking exocentric-frame points into the egocentric frame.

    Fits the egocentric -> exocentric similarity on the keypoints and returns
    its exact inverse; with metric poses from rigid cameras the recovered scale
    is 1 up to noise.
    """
    return invert_transform(umeyama(source=pose_ego, target=pose_exo))


def alignment_residual(
    source: HandPose, target: HandPose, transform: SimilarityTransform
) -> float:
    """RMS distance (meters) between transformed source and target keypoints."""
    if len(source) != len(target):
        raise ValueError("source and target must have the same point count")
    diff = target.keypoints - transform.apply(source.keypoints)
    return float(np.sqrt((diff**2).sum(axis=1).mean()))
