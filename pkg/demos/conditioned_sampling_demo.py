"""Tour of the conditioned-sampling arithmetic on a masked-image toy problem.

The denoiser here is the oracle that knows the clean latent, so the point is
not image quality: it is watching the schedule, the conditioning bundle, the
eta family of reverse steps, and the framed subprocess protocol all slot
together and reproduce bit-for-bit under a fixed seed.
"""

import sys

import numpy as np

from crossview.diffusion import (
    ConditioningBundle,
    IdentityCodec,
    SubprocessDenoiser,
    channel_reduce,
    forward_noise,
    linear_beta_schedule,
    make_oracle_denoiser,
    reverse_sample,
)
from crossview.metrics import psnr
from crossview.reprojection import rasterize_pose_map
from crossview.synthetic import SceneConfig, hand_pose_in_camera, make_scene

WORKER = (
    "import sys\n"
    "import numpy as np\n"
    "from crossview.diffusion import run_denoiser_server\n"
    "def blind(z, t, text=None):\n"
    "    return np.zeros_like(z[:, :, -3:])\n"
    "run_denoiser_server(blind, sys.stdin.buffer, sys.stdout.buffer)\n"
)


def main(seed: int = 0, size: int = 64, steps: int = 40) -> None:
    rng = np.random.default_rng(seed)
    schedule = linear_beta_schedule(T=steps, beta_start=1e-4, beta_end=min(0.9, 18.4 / steps))
    ab = schedule.alpha_bar
    print(f"schedule T={steps}: alpha_bar[1]={ab[1]:.6f} alpha_bar[T]={ab[-1]:.3e}")

    scene = make_scene(seed, SceneConfig(width=size, height=size))
    image = rng.uniform(0.0, 1.0, (size, size, 3))
    known = rng.random((size, size)) < 0.4
    sparse = np.where(known[:, :, None], image, 0.5)
    pose_img = rasterize_pose_map(
        hand_pose_in_camera(scene, "ego"), scene.ego_camera.intrinsics
    )

    codec = IdentityCodec()
    z0 = codec.encode(image)
    bundle = ConditioningBundle(
        sparse_latent=codec.encode(sparse),
        pose_latent=channel_reduce(
            np.concatenate([pose_img, pose_img[:, :, :1]], axis=2), "first_channel"
        ),
        text_embedding=rng.standard_normal(8),
        text_raw="hands over a textured table",
    )

    t_mid = steps // 2
    z_mid = forward_noise(z0, t_mid, rng.standard_normal(z0.shape), schedule)
    print(f"forward t={t_mid}: latent var {z_mid.var():.3f} (z0 var {z0.var():.3f})")

    oracle = make_oracle_denoiser(z0, schedule)
    for eta in (0.0, 0.5, 1.0):
        recon = codec.decode(
            reverse_sample(oracle, bundle, schedule, w=1.5, eta=eta, seed=seed,
                           noise_channels=3)
        )
        print(f"eta={eta}: reconstruction psnr {psnr(recon, image):.1f} dB")

    a = reverse_sample(oracle, bundle, schedule, eta=1.0, seed=7, noise_channels=3)
    b = reverse_sample(oracle, bundle, schedule, eta=1.0, seed=7, noise_channels=3)
    print(f"same seed twice: identical={np.array_equal(a, b)}")

    with SubprocessDenoiser([sys.executable, "-c", WORKER]) as remote:
        z = reverse_sample(remote, bundle, schedule, eta=0.0, seed=seed, noise_channels=3)
    print(f"subprocess denoiser (predicts pure signal): output var {z.var():.3f}")


if __name__ == "__main__":
    main(*(int(a) for a in sys.argv[1:4]))
