"""Metric scale recovery for relative depth via a robust per-pixel ratio median.

A monocular depth estimate is correct only up to an unknown global scale. Where a
metric reference depth exists on some pixel region (here: around the hands), the
scale is the median of per-pixel ratios ``reference / (estimate + delta)``; the
median makes the estimate robust to a minority of corrupted samples and ``delta``
guards the division.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import depth_validity, validate_depth_map


class EmptyRegionError(ValueError):
    """The calibration region contains no pixels."""


class InvalidSampleError(ValueError):
    """A sample inside the calibration region is unusable."""


@dataclass(frozen=True)
class ScaleFactor:
    """A recovered metric scale and how many region pixels supported it."""

    value: float
    sample_count: int

    def __post_init__(self):
        if not np.isfinite(self.value) or self.value <= 0:
            raise ValueError("scale value must be finite and positive")
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")


def hand_region_from_depth(hand_depth: np.ndarray) -> np.ndarray:
    """Region mask = pixels where the reference hand depth is valid."""
    return depth_validity(hand_depth)


def compute_scale(
    hand_depth: np.ndarray,
    est_depth: np.ndarray,
    region: np.ndarray,
    delta: float = 1e-6,
) -> ScaleFactor:
    """Median of ``hand_depth / (est_depth + delta)`` over the region pixels.

    Every region pixel must carry a valid sample in both maps; an even sample
    count takes the midpoint of the two central order statistics.

    Raises
    ------
    EmptyRegionError
        If ``region`` selects no pixels.
    InvalidSampleError
        If any selected sample is invalid in either map.
    """
    if delta < 0:
        raise ValueError("delta must be >= 0")
    dh = validate_depth_map(hand_depth)
    de = validate_depth_map(est_depth)
    reg = np.asarray(region, dtype=bool)
    if dh.shape != de.shape or reg.shape != dh.shape:
        raise ValueError("hand depth, estimated depth, and region sizes differ")
    n = int(reg.sum())
    if n == 0:
        raise EmptyRegionError("calibration region is empty")
    if not depth_validity(de)[reg].all():
        raise InvalidSampleError("estimated depth invalid inside the region")
    if not depth_validity(dh)[reg].all():
        raise InvalidSampleError("hand depth invalid inside the region")
    ratios = dh[reg] / (de[reg] + delta)
    value = float(np.median(ratios))
    return ScaleFactor(value=value, sample_count=n)


def apply_scale(depth: np.ndarray, scale: ScaleFactor | float) -> np.ndarray:
    """Multiply valid depth entries by the scale; invalid entries pass through."""
    d = validate_depth_map(depth)
    s = scale.value if isinstance(scale, ScaleFactor) else float(scale)
    if not np.isfinite(s) or s <= 0:
        raise ValueError("scale must be finite and positive")
    ok = depth_validity(d)
    out = d.copy()
    out[ok] = d[ok] * s
    return out
