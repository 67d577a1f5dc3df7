"""File formats: 8-bit PNG images, PFM depth maps, JSON documents, manifests.

Quantization contracts: RGB saves as ``rint(value * 255)`` (ties to even) and
loads back as ``value / 255``; masks save as 0/255; depth saves as f32 PFM
(grayscale ``Pf``, negative scale = little-endian, bottom-up rows), bit-exact
for values already on the f32 grid. JSON documents round-trip floats exactly
via repr. All writers are deterministic: identical inputs give identical bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .alignment import LAYOUTS, HandPose
from .geometry import CameraIntrinsics, SimilarityTransform, SparseEgoMap

POSE_UNITS = "meters"


class ParseError(ValueError):
    """A file's bytes do not parse as the expected format."""


class ValidationError(ValueError):
    """Parsed content violates the format's contract."""


# -- PNG ---------------------------------------------------------------------


def save_rgb_png(path, image: np.ndarray) -> None:
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError("rgb image must be (H, W, 3)")
    q = np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(q, mode="RGB").save(str(path), format="PNG")


def load_rgb_png(path) -> np.ndarray:
    try:
        with Image.open(str(path)) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.float64)
    except OSError as e:
        raise ParseError(f"{path}: not a readable PNG ({e})") from e
    return arr / 255.0


def save_mask_png(path, mask: np.ndarray) -> None:
    m = np.asarray(mask)
    if m.ndim != 2:
        raise ValueError("mask must be (H, W)")
    Image.fromarray(np.where(m.astype(bool), 255, 0).astype(np.uint8), mode="L").save(
        str(path), format="PNG"
    )


def load_mask_png(path) -> np.ndarray:
    try:
        with Image.open(str(path)) as im:
            arr = np.asarray(im.convert("L"))
    except OSError as e:
        raise ParseError(f"{path}: not a readable PNG ({e})") from e
    return arr > 127


# -- PFM ---------------------------------------------------------------------


def save_depth_pfm(path, depth: np.ndarray) -> None:
    d = np.asarray(depth, dtype=np.float64)
    if d.ndim != 2:
        raise ValueError("depth must be (H, W)")
    h, w = d.shape
    with open(path, "wb") as f:
        f.write(b"Pf\n")
        f.write(f"{w} {h}\n".encode("ascii"))
        f.write(b"-1.0\n")
        f.write(np.flipud(d).astype("<f4").tobytes())


def _pfm_line(f, path) -> str:
    line = f.readline()
    if not line.endswith(b"\n"):
        raise ParseError(f"{path}: truncated header at byte {f.tell()}")
    return line.decode("ascii", errors="replace").strip()


def load_depth_pfm(path) -> np.ndarray:
    with open(path, "rb") as f:
        magic = _pfm_line(f, path)
        if magic == "PF":
            raise ParseError(f"{path}: color PFM not supported, expected grayscale 'Pf'")
        if magic != "Pf":
            raise ParseError(f"{path}: bad magic {magic!r} at byte 0")
        dims = _pfm_line(f, path).split()
        if len(dims) != 2 or not all(s.lstrip("+").isdigit() for s in dims):
            raise ParseError(f"{path}: bad dimensions line at byte {f.tell()}")
        w, h = int(dims[0]), int(dims[1])
        if w <= 0 or h <= 0:
            raise ParseError(f"{path}: non-positive dimensions at byte {f.tell()}")
        try:
            scale = float(_pfm_line(f, path))
        except ValueError as e:
            raise ParseError(f"{path}: bad scale line at byte {f.tell()}") from e
        if scale == 0:
            raise ParseError(f"{path}: zero scale at byte {f.tell()}")
        offset = f.tell()
        payload = f.read(4 * w * h)
        if len(payload) != 4 * w * h:
            raise ParseError(
                f"{path}: payload truncated at byte {offset + len(payload)}, "
                f"expected {4 * w * h} bytes"
            )
        dtype = "<f4" if scale < 0 else ">f4"
        rows = np.frombuffer(payload, dtype=dtype).reshape(h, w)
        return np.flipud(rows).astype(np.float64)


# -- JSON documents ----------------------------------------------------------


def _write_json(path, doc: dict) -> None:
    with open(path, "w", encoding="ascii") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def _read_json(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: invalid JSON at byte {e.pos}") from e
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: top level must be an object")
    return doc


def _field(doc: dict, key: str, path) -> object:
    if key not in doc:
        raise ValidationError(f"{path}: missing field {key!r}")
    return doc[key]


def save_pose_json(path, pose: HandPose) -> None:
    _write_json(
        path,
        {
            "layout": pose.layout,
            "units": POSE_UNITS,
            "keypoints": [[float(v) for v in row] for row in pose.keypoints],
        },
    )


def load_pose_json(path) -> HandPose:
    doc = _read_json(path)
    layout = _field(doc, "layout", path)
    units = _field(doc, "units", path)
    if units != POSE_UNITS:
        raise ValidationError(f"{path}: units must be {POSE_UNITS!r}, got {units!r}")
    if layout not in LAYOUTS:
        raise ValidationError(f"{path}: layout: unknown layout {layout!r}")
    kp = _field(doc, "keypoints", path)
    try:
        return HandPose(np.asarray(kp, dtype=np.float64), layout=layout)
    except ValueError as e:
        raise ValidationError(f"{path}: keypoints: {e}") from e


def save_intrinsics_json(path, intr: CameraIntrinsics) -> None:
    _write_json(
        path,
        {
            "fx": intr.fx,
            "fy": intr.fy,
            "cx": intr.cx,
            "cy": intr.cy,
            "width": intr.width,
            "height": intr.height,
        },
    )


def load_intrinsics_json(path) -> CameraIntrinsics:
    doc = _read_json(path)
    vals = {k: _field(doc, k, path) for k in ("fx", "fy", "cx", "cy", "width", "height")}
    try:
        return CameraIntrinsics(
            fx=float(vals["fx"]),
            fy=float(vals["fy"]),
            cx=float(vals["cx"]),
            cy=float(vals["cy"]),
            width=int(vals["width"]),
            height=int(vals["height"]),
        )
    except ValueError as e:
        raise ValidationError(f"{path}: {e}") from e


def save_transform_json(path, transform: SimilarityTransform) -> None:
    _write_json(
        path,
        {
            "scale": transform.scale,
            "rotation": [float(v) for v in transform.rotation.ravel()],
            "translation": [float(v) for v in transform.translation],
        },
    )


def load_transform_json(path) -> SimilarityTransform:
    doc = _read_json(path)
    scale = _field(doc, "scale", path)
    rot = np.asarray(_field(doc, "rotation", path), dtype=np.float64)
    if rot.shape != (9,):
        raise ValidationError(f"{path}: rotation: must hold 9 row-major entries")
    tr = np.asarray(_field(doc, "translation", path), dtype=np.float64)
    try:
        return SimilarityTransform(float(scale), rot.reshape(3, 3), tr)
    except ValueError as e:
        raise ValidationError(f"{path}: rotation/scale/translation: {e}") from e


# -- Sparse map triple -------------------------------------------------------


def save_sparse_map(prefix, smap: SparseEgoMap) -> dict:
    """Write ``<prefix>_rgb.png``, ``<prefix>_mask.png``, ``<prefix>_depth.pfm``."""
    prefix = str(prefix)
    paths = {
        "rgb": prefix + "_rgb.png",
        "mask": prefix + "_mask.png",
        "depth": prefix + "_depth.pfm",
    }
    save_rgb_png(paths["rgb"], smap.rgb)
    save_mask_png(paths["mask"], smap.validity)
    save_depth_pfm(paths["depth"], smap.depth_buffer)
    return paths


def load_sparse_map(prefix) -> SparseEgoMap:
    prefix = str(prefix)
    rgb = load_rgb_png(prefix + "_rgb.png")
    mask = load_mask_png(prefix + "_mask.png")
    depth = load_depth_pfm(prefix + "_depth.pfm")
    depth = np.where(mask, depth, 0.0)
    try:
        return SparseEgoMap(rgb=rgb, validity=mask, depth_buffer=depth)
    except ValueError as e:
        raise ValidationError(f"{prefix}: {e}") from e


# -- Manifest ----------------------------------------------------------------

_ENTRY_REQUIRED = (
    "exo_image_path",
    "exo_depth_path",
    "exo_pose_path",
    "ego_pose_path",
    "exo_intrinsics_path",
    "ego_intrinsics_path",
)
_ENTRY_OPTIONAL = ("hand_depth_path", "ego_gt_image_path")


@dataclass(frozen=True)
class ManifestEntry:
    """One paired recording; paths are absolute after loading."""

    exo_image_path: Path
    exo_depth_path: Path
    exo_pose_path: Path
    ego_pose_path: Path
    exo_intrinsics_path: Path
    ego_intrinsics_path: Path
    hand_depth_path: Path | None = None
    ego_gt_image_path: Path | None = None


@dataclass(frozen=True)
class Manifest:
    entries: tuple


def load_manifest(path) -> Manifest:
    """Load a manifest; relative paths resolve against the manifest's directory.

    Every referenced file must exist, checked at load time so downstream
    stages never chase a dangling path.
    """
    doc = _read_json(path)
    raw_entries = _field(doc, "entries", path)
    if not isinstance(raw_entries, list):
        raise ValidationError(f"{path}: entries: must be a list")
    base = Path(path).resolve().parent
    entries = []
    for i, raw in enumerate(raw_entries):
        if not isinstance(raw, dict):
            raise ValidationError(f"{path}: entries[{i}]: must be an object")
        kw = {}
        for key in _ENTRY_REQUIRED + _ENTRY_OPTIONAL:
            if key in _ENTRY_REQUIRED and key not in raw:
                raise ValidationError(f"{path}: entries[{i}].{key}: missing")
            if key in raw and raw[key] is not None:
                p = Path(raw[key])
                if not p.is_absolute():
                    p = base / p
                if not p.is_file():
                    raise ValidationError(
                        f"{path}: entries[{i}].{key}: file not found: {p}"
                    )
                kw[key] = p
        entries.append(ManifestEntry(**kw))
    return Manifest(entries=tuple(entries))


def save_manifest(path, entries: list[dict]) -> None:
    """Write a manifest of entry dicts holding (relative) path strings."""
    for i, e in enumerate(entries):
        for key in _ENTRY_REQUIRED:
            if key not in e:
                raise ValidationError(f"entries[{i}].{key}: missing")
        for key in e:
            if key not in _ENTRY_REQUIRED + _ENTRY_OPTIONAL:
                raise ValidationError(f"entries[{i}].{key}: unknown field")
    _write_json(path, {"entries": entries})
