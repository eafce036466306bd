"""Seeded synthetic imagery with natural-image-like statistics.

Two generators cover the experiment needs without shipping a dataset:
single frames made of smooth multi-octave gradients plus noise, and a
video-clip-like corpus whose frames share one coarse scene but differ in
fine detail. Both compress well under INT8+DEFLATE and carry spatial
structure at multiple scales, so stage merging actually discards detail.
"""

from __future__ import annotations

import numpy as np

from .model import Tensor
from .rng import SplitMix64, derive_seed


def _field(h: int, w: int, rng: SplitMix64, lo_oct: int, hi_oct: int) -> np.ndarray:
    """Bilinearly upsampled noise grids over an octave band, coarse to fine."""
    out = np.zeros((h, w))
    yy = np.linspace(0.0, 1.0, h)
    xx = np.linspace(0.0, 1.0, w)
    for o in range(lo_oct, hi_oct):
        n = 2 ** (o + 2)  # grid edge: 4 at octave 0
        grid = rng.fill_uniform((n + 1) * (n + 1), -1.0, 1.0).reshape(n + 1, n + 1)
        gy = yy * n
        gx = xx * n
        iy = np.minimum(gy.astype(int), n - 1)
        ix = np.minimum(gx.astype(int), n - 1)
        fy = (gy - iy)[:, None]
        fx = (gx - ix)[None, :]
        top = grid[iy][:, ix] * (1 - fx) + grid[iy][:, ix + 1] * fx
        bot = grid[iy + 1][:, ix] * (1 - fx) + grid[iy + 1][:, ix + 1] * fx
        out += (top * (1 - fy) + bot * fy) / 1.6 ** (o - lo_oct)
    return out


def _normalize(band: np.ndarray) -> np.ndarray:
    lo, hi = band.min(), band.max()
    return (band - lo) / (hi - lo) if hi > lo else np.zeros_like(band)


def synthetic_frame(shape: tuple[int, int, int], seed: int) -> Tensor:
    """One [channels, H, W] frame in [0, 1]: smooth gradients plus noise."""
    c, h, w = shape
    rng = SplitMix64(derive_seed(seed, "frame"))
    base = _field(h, w, rng, 0, 4)
    chans = []
    for _ in range(c):
        band = 0.6 * base + 0.4 * _field(h, w, rng, 0, 4)
        band = band + rng.fill_uniform(h * w, -0.02, 0.02).reshape(h, w)
        chans.append(_normalize(band))
    return Tensor.from_array(np.stack(chans))


def synthetic_frames(count: int, shape: tuple[int, int, int], seed: int) -> list[Tensor]:
    """A clip-like corpus: shared coarse scene, per-frame fine detail.

    Frame distances are dominated by detail that stage merging averages
    away, so deeper boundary activations genuinely reveal less about the
    individual frame than shallow ones.
    """
    c, h, w = shape
    scene_rng = SplitMix64(derive_seed(seed, "scene"))
    scene = [_field(h, w, scene_rng, 0, 3) for _ in range(c)]
    out = []
    for i in range(count):
        rng = SplitMix64(derive_seed(seed, "detail", i))
        chans = []
        for ci in range(c):
            fine = _field(h, w, rng, 3, 6)
            band = 0.7 * scene[ci] + 0.3 * fine
            band = band + rng.fill_uniform(h * w, -0.05, 0.05).reshape(h, w)
            chans.append(_normalize(band))
        out.append(Tensor.from_array(np.stack(chans)))
    return out


def synthetic_activation(shape: tuple[int, int, int], seed: int) -> Tensor:
    """A feature-map-like tensor: correlated smooth channels squashed by tanh.

    Channels share a common scene component with per-channel mixing, giving
    saturated regions and smooth slopes comparable to what a bounded backbone
    emits at a stage boundary.
    """
    c, h, w = shape
    rng = SplitMix64(derive_seed(seed, "activation"))
    scene = _field(h, w, rng, 0, 3)
    second = _field(h, w, rng, 0, 3)
    gains = rng.fill_uniform(c, -2.5, 2.5)
    mix = rng.fill_uniform(c, 0.0, 1.0)
    bias = rng.fill_uniform(c, -0.3, 0.3)
    out = np.empty((c, h, w), dtype=np.float32)
    noise = rng.fill_uniform(h * w, -0.008, 0.008).reshape(h, w)
    for i in range(c):
        field = gains[i] * (mix[i] * scene + (1 - mix[i]) * second) + bias[i]
        out[i] = np.tanh(field + noise)
    return Tensor.from_array(out)


def activation_shape_for_bytes(
    split: int, raw_bytes: int, embed_channels: int = 96
) -> tuple[int, int, int]:
    """Square [C, H, H] shape whose FP32 size is close to raw_bytes."""
    channels = embed_channels * 2 ** (split - 1)
    side = max(1, int(round(np.sqrt(raw_bytes / 4.0 / channels))))
    return (channels, side, side)
