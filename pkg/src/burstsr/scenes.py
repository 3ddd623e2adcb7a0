"""Deterministic synthetic scenes used by the demos and the repo benchmarks."""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

from .bayer import RgbImage


def textured_scene(size: int = 464, seed: int = 7) -> RgbImage:
    """Fixed multi-scale texture with edges; sRGB, values in [0.02, 0.98].

    Combines band-passed noise at several scales with a few hard-edged
    shapes, so a 4x reconstruction has genuine high-frequency content to
    recover. Deterministic for a given (size, seed).
    """
    rng = np.random.default_rng(seed)
    img = np.zeros((size, size, 3))
    for sigma, amp in [(12.0, 0.35), (4.0, 0.25), (1.2, 0.22)]:
        layer = gaussian_filter(rng.standard_normal((size, size, 3)),
                                sigma=sigma, axes=(0, 1))
        layer /= layer.std((0, 1), keepdims=True)
        img += amp * layer
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64) / size
    img[:, :, 0] += 0.25 * np.sin(2 * np.pi * 7 * xs) * (ys > 0.5)
    img[:, :, 1] += 0.3 * ((xs + ys) % 0.21 < 0.1) * (xs < 0.55)
    img[:, :, 2] += 0.2 * np.sign(np.sin(2 * np.pi * 11 * ys * xs + 1.0))
    img = 0.5 + 0.22 * (img - img.mean((0, 1))) / img.std((0, 1))
    return RgbImage(np.clip(img, 0.02, 0.98), "srgb")
