"""Denoising-diffusion arithmetic for conditioned latent inpainting.

Everything here is exact array math around an externally supplied noise
predictor: cumulative-alpha schedules, the forward noising identity, assembly
of the conditioned latent (sparse-view channels + reduced pose channel + noisy
channels), classifier-free guidance, and an eta-generalized reverse sampler
that is deterministic at eta=0 and ancestral at eta=1.

A denoiser is any callable ``eps_hat = f(z_prime, t, text_embedding)`` whose
output matches the noisy block's shape. ``SubprocessDenoiser`` adapts an
external process speaking a framed stdin/stdout tensor protocol (little-endian
f32 payloads, uint32 dimension headers); ``run_denoiser_server`` is the
process-side loop of the same protocol.
"""

from __future__ import annotations

import struct
import subprocess
from dataclasses import dataclass

import numpy as np

REDUCE_MODES = ("mean", "first_channel")


def _as_latent(a: np.ndarray, name: str) -> np.ndarray:
    out = np.asarray(a, dtype=np.float64)
    if out.ndim != 3:
        raise ValueError(f"{name} must be a 3-D (H, W, C) array")
    if not np.isfinite(out).all():
        raise ValueError(f"{name} must be finite")
    return out


@dataclass(frozen=True)
class NoiseSchedule:
    """Cumulative signal fractions ``alpha_bar[0..T]`` with ``alpha_bar[0] = 1``."""

    T: int
    alpha_bar: np.ndarray

    def __post_init__(self):
        ab = np.array(self.alpha_bar, dtype=np.float64)
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if ab.shape != (self.T + 1,):
            raise ValueError("alpha_bar must have T + 1 entries")
        if ab[0] != 1.0:
            raise ValueError("alpha_bar[0] must be exactly 1")
        if not ((ab > 0) & (ab <= 1)).all():
            raise ValueError("alpha_bar values must lie in (0, 1]")
        if not (np.diff(ab) < 0).all():
            raise ValueError("alpha_bar must be strictly decreasing")
        ab.flags.writeable = False
        object.__setattr__(self, "alpha_bar", ab)


@dataclass(frozen=True)
class ConditioningBundle:
    """Per-step conditioning: sparse-view latent, 1-channel pose latent, optional text."""

    sparse_latent: np.ndarray
    pose_latent: np.ndarray
    text_embedding: np.ndarray | None = None
    text_raw: str | None = None

    def __post_init__(self):
        sp = _as_latent(self.sparse_latent, "sparse_latent")
        po = _as_latent(self.pose_latent, "pose_latent")
        if po.shape[:2] != sp.shape[:2]:
            raise ValueError("sparse and pose latents must share spatial dims")
        if po.shape[2] != 1:
            raise ValueError("pose_latent must have exactly 1 channel")
        te = self.text_embedding
        if te is not None:
            te = np.asarray(te, dtype=np.float64)
            if te.ndim != 1 or te.size == 0:
                raise ValueError("text_embedding must be a non-empty 1-D vector")
        object.__setattr__(self, "sparse_latent", sp)
        object.__setattr__(self, "pose_latent", po)
        object.__setattr__(self, "text_embedding", te)


def linear_beta_schedule(
    T: int = 1000, beta_start: float = 1e-4, beta_end: float = 0.02
) -> NoiseSchedule:
    """Schedule from linearly spaced per-step noise rates: ``alpha_bar_t = prod(1 - beta_i)``."""
    if T < 1:
        raise ValueError("T must be >= 1")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ValueError("need 0 < beta_start <= beta_end < 1")
    betas = np.linspace(beta_start, beta_end, T)
    alpha_bar = np.concatenate([[1.0], np.cumprod(1.0 - betas)])
    return NoiseSchedule(T=T, alpha_bar=alpha_bar)


def forward_noise(
    z0: np.ndarray, t: int, eps: np.ndarray, schedule: NoiseSchedule
) -> np.ndarray:
    """Noising identity ``z_t = sqrt(ab_t) z0 + sqrt(1 - ab_t) eps`` for ``1 <= t <= T``."""
    z0 = _as_latent(z0, "z0")
    eps = _as_latent(eps, "eps")
    if z0.shape != eps.shape:
        raise ValueError("z0 and eps must have the same shape")
    if not 1 <= t <= schedule.T:
        raise ValueError(f"t must be in [1, {schedule.T}]")
    ab = schedule.alpha_bar[t]
    return np.sqrt(ab) * z0 + np.sqrt(1.0 - ab) * eps


def predict_x0(
    z_t: np.ndarray, eps_hat: np.ndarray, t: int, schedule: NoiseSchedule
) -> np.ndarray:
    """Invert the noising identity: ``(z_t - sqrt(1 - ab_t) eps_hat) / sqrt(ab_t)``.

    ``t = 0`` is allowed (``alpha_bar_0 = 1``) and returns ``z_t`` unchanged.
    """
    z_t = _as_latent(z_t, "z_t")
    eps_hat = _as_latent(eps_hat, "eps_hat")
    if z_t.shape != eps_hat.shape:
        raise ValueError("z_t and eps_hat must have the same shape")
    if not 0 <= t <= schedule.T:
        raise ValueError(f"t must be in [0, {schedule.T}]")
    ab = schedule.alpha_bar[t]
    return (z_t - np.sqrt(1.0 - ab) * eps_hat) / np.sqrt(ab)


def channel_reduce(latent: np.ndarray, mode: str = "mean") -> np.ndarray:
    """Collapse a 4-channel latent to 1 channel (channel mean or first channel)."""
    lat = _as_latent(latent, "latent")
    if lat.shape[2] != 4:
        raise ValueError("channel_reduce expects a 4-channel latent")
    if mode not in REDUCE_MODES:
        raise ValueError(f"mode must be one of {REDUCE_MODES}")
    if mode == "mean":
        return lat.mean(axis=2, keepdims=True)
    return lat[:, :, :1].copy()


def assemble_latent(bundle: ConditioningBundle, noisy: np.ndarray) -> np.ndarray:
    """Concatenate ``[sparse | pose | noisy]`` along channels (default 4+1+4 = 9)."""
    noisy = _as_latent(noisy, "noisy")
    if noisy.shape[:2] != bundle.sparse_latent.shape[:2]:
        raise ValueError("noisy latent spatial dims must match the bundle")
    return np.concatenate([bundle.sparse_latent, bundle.pose_latent, noisy], axis=2)


def denoiser_loss(
    z0: np.ndarray,
    bundle: ConditioningBundle,
    t: int,
    eps: np.ndarray,
    schedule: NoiseSchedule,
    denoiser,
) -> float:
    """Training objective for one sample: noise ``z0`` to step ``t``, assemble the
    conditioned latent, query the denoiser, and return the summed squared error
    between ``eps`` and the prediction."""
    z_t = forward_noise(z0, t, eps, schedule)
    eps_hat = np.asarray(
        denoiser(assemble_latent(bundle, z_t), t, bundle.text_embedding),
        dtype=np.float64,
    )
    if eps_hat.shape != np.shape(eps):
        raise ValueError("denoiser output shape must match eps")
    d = np.asarray(eps, dtype=np.float64) - eps_hat
    return float((d * d).sum())


def cfg_combine(
    eps_cond: np.ndarray, eps_uncond: np.ndarray, w: float
) -> np.ndarray:
    """Classifier-free guidance: ``(1 + w) eps_cond - w eps_uncond``.

    Evaluated as ``eps_cond + w (eps_cond - eps_uncond)`` so agreement between
    the two branches passes through exactly for any w.
    """
    eps_cond = _as_latent(eps_cond, "eps_cond")
    eps_uncond = _as_latent(eps_uncond, "eps_uncond")
    if eps_cond.shape != eps_uncond.shape:
        raise ValueError("guidance inputs must have the same shape")
    return eps_cond + w * (eps_cond - eps_uncond)


def reverse_sample(
    denoiser,
    bundle: ConditioningBundle,
    schedule: NoiseSchedule,
    w: float = 0.0,
    eta: float = 0.0,
    seed: int = 0,
    noise_channels: int = 4,
) -> np.ndarray:
    """Run the eta-generalized reverse process and return the final clean estimate.

    Starts from a seeded standard-normal ``z_T`` and walks t = T..1. Each step
    assembles the conditioned latent, queries the denoiser (twice, combined via
    ``cfg_combine``, when text conditioning is present and ``w != 0``), forms
    ``x0 = predict_x0``, and moves to

        ``z_{t-1} = sqrt(ab_{t-1}) x0 + sqrt(1 - ab_{t-1} - sigma_t^2) eps_hat
        + sigma_t * noise``,
        ``sigma_t = eta sqrt((1 - ab_{t-1}) / (1 - ab_t)) sqrt(1 - ab_t / ab_{t-1})``.

    eta=0 makes every step deterministic; eta=1 matches ancestral sampling.
    Denoiser queries are sequential and all randomness comes from the seeded
    counter-based generator, so results are reproducible for a fixed seed.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    if noise_channels < 1:
        raise ValueError("noise_channels must be >= 1")
    rng = np.random.Generator(np.random.Philox(seed))
    h, w_px = bundle.sparse_latent.shape[:2]
    z = rng.standard_normal((h, w_px, noise_channels))
    ab = schedule.alpha_bar
    use_cfg = bundle.text_embedding is not None and w != 0.0
    x0 = z
    for t in range(schedule.T, 0, -1):
        z_prime = assemble_latent(bundle, z)
        if use_cfg:
            eps_c = denoiser(z_prime, t, bundle.text_embedding)
            eps_u = denoiser(z_prime, t, None)
            eps_hat = cfg_combine(eps_c, eps_u, w)
        else:
            eps_hat = np.asarray(
                denoiser(z_prime, t, bundle.text_embedding), dtype=np.float64
            )
        if eps_hat.shape != z.shape:
            raise ValueError("denoiser output shape must match the noisy latent")
        x0 = predict_x0(z, eps_hat, t, schedule)
        ab_prev, ab_t = ab[t - 1], ab[t]
        sigma = eta * np.sqrt((1.0 - ab_prev) / (1.0 - ab_t)) * np.sqrt(
            1.0 - ab_t / ab_prev
        )
        dir_coef = np.sqrt(max(1.0 - ab_prev - sigma * sigma, 0.0))
        z = np.sqrt(ab_prev) * x0 + dir_coef * eps_hat
        if sigma > 0:
            z = z + sigma * rng.standard_normal(z.shape)
    return x0


def make_oracle_denoiser(z0: np.ndarray, schedule: NoiseSchedule):
    """Denoiser that knows the clean latent: inverts the noising identity exactly.

    Reads the trailing ``z0.shape[2]`` channels of the assembled latent as the
    noisy block and returns ``(z_t - sqrt(ab_t) z0) / sqrt(1 - ab_t)``.
    """
    z0 = _as_latent(z0, "z0")
    c = z0.shape[2]

    def denoiser(z_prime, t, text_embedding=None):
        z_t = np.asarray(z_prime, dtype=np.float64)[:, :, -c:]
        ab = schedule.alpha_bar[t]
        return (z_t - np.sqrt(ab) * z0) / np.sqrt(1.0 - ab)

    return denoiser


class IdentityCodec:
    """Pixel-space 'latent': encode copies the image, decode clips back to [0, 1]."""

    stride = 1

    def encode(self, image: np.ndarray) -> np.ndarray:
        return _as_latent(image, "image").copy()

    def decode(self, latent: np.ndarray) -> np.ndarray:
        return np.clip(_as_latent(latent, "latent"), 0.0, 1.0)


class DownsampleCodec:
    """Block-mean downsampling codec: encode shrinks by the stride, decode maps
    the latent grid back into image value range at latent resolution."""

    def __init__(self, stride: int = 8):
        if stride < 1:
            raise ValueError("stride must be >= 1")
        self.stride = stride

    def encode(self, image: np.ndarray) -> np.ndarray:
        img = _as_latent(image, "image")
        H, W, C = img.shape
        s = self.stride
        if H % s or W % s:
            raise ValueError("image dims must be divisible by the stride")
        return img.reshape(H // s, s, W // s, s, C).mean(axis=(1, 3))

    def decode(self, latent: np.ndarray) -> np.ndarray:
        return np.clip(_as_latent(latent, "latent"), 0.0, 1.0)


# ---------------------------------------------------------------------------
# Framed stdin/stdout tensor protocol.
#
# One frame = uint32 ndim, uint32 dims[ndim], then prod(dims) little-endian f32
# values in C order. A request is three frames: assembled latent, timestep as a
# shape-(1,) array, text embedding (shape-(0,) when absent). The response is a
# single frame holding eps_hat.

_MAX_NDIM = 8


class ProtocolError(RuntimeError):
    """Malformed or truncated frame on the wire."""


def write_frame(stream, array: np.ndarray) -> None:
    # asarray, not ascontiguousarray: the latter would promote 0-d to 1-d
    a = np.asarray(array, dtype="<f4")
    stream.write(struct.pack("<I", a.ndim))
    if a.ndim:
        stream.write(struct.pack(f"<{a.ndim}I", *a.shape))
    stream.write(a.tobytes())


def _read_exact(stream, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = stream.read(n - len(buf))
        if not chunk:
            raise ProtocolError(f"stream ended {n - len(buf)} bytes short of a frame")
        buf += chunk
    return buf


def read_frame(stream) -> np.ndarray:
    (ndim,) = struct.unpack("<I", _read_exact(stream, 4))
    if ndim > _MAX_NDIM:
        raise ProtocolError(f"frame header claims {ndim} dims")
    dims = struct.unpack(f"<{ndim}I", _read_exact(stream, 4 * ndim)) if ndim else ()
    count = 1
    for d in dims:
        count *= d
    data = _read_exact(stream, 4 * count)
    return np.frombuffer(data, dtype="<f4").reshape(dims).astype(np.float64)


def _try_read_frame(stream) -> np.ndarray | None:
    """read_frame, but a clean EOF before any header byte returns None."""
    first = stream.read(4)
    if not first:
        return None
    if len(first) < 4:
        raise ProtocolError("stream ended inside a frame header")
    (ndim,) = struct.unpack("<I", first)
    if ndim > _MAX_NDIM:
        raise ProtocolError(f"frame header claims {ndim} dims")
    dims = struct.unpack(f"<{ndim}I", _read_exact(stream, 4 * ndim)) if ndim else ()
    count = 1
    for d in dims:
        count *= d
    data = _read_exact(stream, 4 * count)
    return np.frombuffer(data, dtype="<f4").reshape(dims).astype(np.float64)


def run_denoiser_server(denoiser, stdin, stdout) -> None:
    """Process-side loop: answer framed requests until EOF on ``stdin``."""
    while True:
        z_prime = _try_read_frame(stdin)
        if z_prime is None:
            return
        t_arr = read_frame(stdin)
        text = read_frame(stdin)
        t = int(round(float(t_arr.reshape(-1)[0])))
        eps_hat = denoiser(z_prime, t, text if text.size else None)
        write_frame(stdout, np.asarray(eps_hat))
        stdout.flush()


class SubprocessDenoiser:
    """Adapter exposing an external denoiser process as a plain callable.

    The child is launched once and queried over the framed protocol; payloads
    travel as f32, so answers carry f32 precision. Use as a context manager or
    call ``close()`` to end the child cleanly.
    """

    def __init__(self, argv: list[str]):
        self._proc = subprocess.Popen(
            argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE
        )

    def __call__(self, z_prime, t, text_embedding=None):
        if self._proc.poll() is not None:
            raise ProtocolError("denoiser process has exited")
        stdin, stdout = self._proc.stdin, self._proc.stdout
        write_frame(stdin, np.asarray(z_prime))
        write_frame(stdin, np.array([float(t)]))
        if text_embedding is None:
            write_frame(stdin, np.zeros(0))
        else:
            write_frame(stdin, np.asarray(text_embedding))
        stdin.flush()
        return read_frame(stdout)

    def close(self) -> None:
        if self._proc.poll() is None:
            self._proc.stdin.close()
            self._proc.wait(timeout=10)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
