"""Shared helpers: seeded random rotations/transforms and grid-quantized images."""

import numpy as np

from crossview.geometry import SimilarityTransform


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform-ish proper rotation from a QR factorization with sign fixing."""
    A = rng.standard_normal((3, 3))
    Q, R = np.linalg.qr(A)
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 2] = -Q[:, 2]
    return Q


def random_transform(
    rng: np.random.Generator,
    scale_range=(0.5, 2.0),
    t_sigma: float = 1.0,
) -> SimilarityTransform:
    return SimilarityTransform(
        scale=float(rng.uniform(*scale_range)),
        rotation=random_rotation(rng),
        translation=rng.normal(0.0, t_sigma, 3),
    )


def grid_image(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    """Random RGB image whose values sit exactly on the 8-bit grid k/255."""
    return rng.integers(0, 256, size=(h, w, 3)).astype(np.float64) / 255.0


def rot_error(Ra: np.ndarray, Rb: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(Ra) - np.asarray(Rb)))
