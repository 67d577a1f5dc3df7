"""Render the hand-skeleton conditioning image under a few styles.

Writes a small gallery into demos/out/posemaps/ plus the matching pose and
intrinsics documents, so the files double as CLI inputs:

    crossview posemap --pose pose.json --intrinsics intrinsics.json --out x.png
"""

from pathlib import Path

from crossview.io import save_intrinsics_json, save_pose_json, save_rgb_png
from crossview.reprojection import PoseMapStyle, rasterize_pose_map
from crossview.synthetic import SceneConfig, hand_pose_in_camera, make_scene

STYLES = {
    "default.png": PoseMapStyle(),
    "thick.png": PoseMapStyle(keypoint_radius=7.0, bone_thickness=5.0),
    "plain_on_white.png": PoseMapStyle(
        color_scheme="plain", background=(1.0, 1.0, 1.0)
    ),
    "thin_gray_bg.png": PoseMapStyle(
        keypoint_radius=2.0, bone_thickness=1.0, background=(0.25, 0.25, 0.25)
    ),
}


def main() -> None:
    out = Path(__file__).parent / "out" / "posemaps"
    out.mkdir(parents=True, exist_ok=True)

    scene = make_scene(2, SceneConfig(width=320, height=320))
    pose = hand_pose_in_camera(scene, "ego")
    intr = scene.ego_camera.intrinsics
    save_pose_json(out / "pose.json", pose)
    save_intrinsics_json(out / "intrinsics.json", intr)

    for name, style in STYLES.items():
        img = rasterize_pose_map(pose, intr, style)
        painted = (img != style.background).any(axis=2).mean()
        save_rgb_png(out / name, img)
        print(f"{name}: {painted:.3%} of pixels painted")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
