"""Walk one synthetic recording through the full view-translation pipeline.

Generates a paired scene, pretends the exocentric depth arrived at the wrong
scale, recovers metric units from the hand region, aligns the cameras from the
42 keypoint correspondences, and splats the exocentric pixels into the
egocentric view. Artifacts land in demos/out/walkthrough/.
"""

import sys
from pathlib import Path

import numpy as np

from crossview.alignment import alignment_residual, exo_to_ego_transform
from crossview.calibration import compute_scale, hand_region_from_depth
from crossview.geometry import depth_validity
from crossview.io import save_depth_pfm, save_mask_png, save_rgb_png
from crossview.reprojection import build_sparse_ego_map
from crossview.synthetic import (
    SceneConfig,
    ground_truth_transform,
    hand_depth_map,
    hand_pose_in_camera,
    make_scene,
    occlusion_edge_mask,
    oracle_render,
)


def main(seed: int = 0, size: int = 256) -> None:
    out = Path(__file__).parent / "out" / "walkthrough"
    out.mkdir(parents=True, exist_ok=True)

    scene = make_scene(seed, SceneConfig(width=size, height=size))
    exo_rgb, exo_depth = oracle_render(scene, "exo")
    ego_rgb, ego_depth = oracle_render(scene, "ego")
    pose_exo = hand_pose_in_camera(scene, "exo")
    pose_ego = hand_pose_in_camera(scene, "ego")
    print(f"scene seed={seed}: {len(scene.surfels)} surfels, "
          f"exo valid={depth_validity(exo_depth).mean():.3f}")

    # the "estimated" exocentric depth: right shape, wrong scale
    est_depth = exo_depth / 2.0
    hand = hand_depth_map(scene, exo_depth, "exo")
    region = hand_region_from_depth(hand)
    scale = compute_scale(hand, est_depth, region, delta=0.0)
    print(f"hand region: {scale.sample_count} px, recovered scale {scale.value}")

    xform = exo_to_ego_transform(pose_exo, pose_ego)
    gt = ground_truth_transform(scene)
    residual = alignment_residual(pose_exo, pose_ego, xform)
    print(f"alignment: |R err|={np.linalg.norm(xform.rotation - gt.rotation):.2e} "
          f"|t err|={np.linalg.norm(xform.translation - gt.translation):.2e} "
          f"residual_m={residual:.2e}")

    smap = build_sparse_ego_map(
        exo_rgb, est_depth, scene.exo_camera.intrinsics,
        pose_exo, pose_ego, scene.ego_camera.intrinsics,
        hand_depth=hand, delta=0.0,
    )
    compare = smap.validity & depth_validity(ego_depth) & ~occlusion_edge_mask(ego_depth)
    close = (np.abs(smap.rgb - ego_rgb) <= 2.0 / 255.0).all(axis=2)
    print(f"reprojection: valid={smap.valid_fraction:.3f} "
          f"agreement={close[compare].mean():.4f} on {int(compare.sum())} px")

    save_rgb_png(out / "exo.png", exo_rgb)
    save_rgb_png(out / "ego_reference.png", ego_rgb)
    save_rgb_png(out / "ego_translated.png", smap.rgb)
    save_mask_png(out / "ego_validity.png", smap.validity)
    save_depth_pfm(out / "ego_depth.pfm", smap.depth_buffer)
    print(f"wrote {out}")


if __name__ == "__main__":
    main(*(int(a) for a in sys.argv[1:3]))
