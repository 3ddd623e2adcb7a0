"""Bayer CFA handling: image containers, mosaicking, bilinear demosaicking.

All intensities are linear, real-valued, nominally in [0, 1] but never
clamped here; clamping happens only at file export.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import convolve

from .errors import DimensionError

# channel index (0=R, 1=G, 2=B) at tile position (i % 2, j % 2)
_PHASE_TILES = {
    "RGGB": ((0, 1), (1, 2)),
    "GRBG": ((1, 0), (2, 1)),
    "GBRG": ((1, 2), (0, 1)),
    "BGGR": ((2, 1), (1, 0)),
}

# bilinear interpolation kernels for normalized (mask-weighted) convolution
_KERNEL_G = np.array([[0.0, 1.0, 0.0], [1.0, 4.0, 1.0], [0.0, 1.0, 0.0]])
_KERNEL_RB = np.array([[1.0, 2.0, 1.0], [2.0, 4.0, 2.0], [1.0, 2.0, 1.0]])


@dataclass(frozen=True)
class CfaPattern:
    """One of the four 2x2 Bayer phases."""

    phase: str = "RGGB"

    def __post_init__(self):
        if self.phase not in _PHASE_TILES:
            raise ValueError(f"unknown Bayer phase {self.phase!r}, "
                             f"expected one of {sorted(_PHASE_TILES)}")

    def channel_at(self, i: int, j: int) -> int:
        return _PHASE_TILES[self.phase][i % 2][j % 2]

    def channel_map(self, height: int, width: int) -> np.ndarray:
        """(H, W) int array of the channel sampled at each pixel."""
        tile = np.asarray(_PHASE_TILES[self.phase], dtype=np.intp)
        ii = np.arange(height)[:, None] % 2
        jj = np.arange(width)[None, :] % 2
        return tile[ii, jj]

    def masks(self, height: int, width: int) -> np.ndarray:
        """(3, H, W) boolean sampling masks, one per channel."""
        cmap = self.channel_map(height, width)
        return np.stack([cmap == c for c in range(3)])

    @property
    def transposed(self) -> "CfaPattern":
        tile = _PHASE_TILES[self.phase]
        swapped = ((tile[0][0], tile[1][0]), (tile[0][1], tile[1][1]))
        for name, t in _PHASE_TILES.items():
            if t == swapped:
                return CfaPattern(name)
        raise AssertionError("unreachable")

    @property
    def transpose_invariant(self) -> bool:
        return self.transposed == self


def _check_finite(data: np.ndarray, what: str):
    if not np.all(np.isfinite(data)):
        raise ValueError(f"{what} contains non-finite values")


@dataclass
class RawBayerImage:
    """Single-channel mosaicked frame with its CFA phase."""

    data: np.ndarray
    cfa: CfaPattern = field(default_factory=CfaPattern)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise DimensionError(f"raw image must be 2-D, got shape {self.data.shape}")
        h, w = self.data.shape
        if h % 2 or w % 2:
            raise DimensionError(f"raw dimensions must be even, got {h}x{w}")
        _check_finite(self.data, "raw image")

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


@dataclass
class RgbImage:
    """3-channel image with a colorspace tag ('linear' sensor space or 'srgb')."""

    data: np.ndarray
    colorspace: str = "linear"

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3 or self.data.shape[2] != 3:
            raise DimensionError(f"rgb image must be HxWx3, got shape {self.data.shape}")
        if self.colorspace not in ("linear", "srgb"):
            raise ValueError(f"unknown colorspace tag {self.colorspace!r}")
        _check_finite(self.data, "rgb image")

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[:2]


@dataclass
class Burst:
    """Ordered RAW frames sharing dimensions and CFA; frame 0 is the reference."""

    frames: list[RawBayerImage]

    def __post_init__(self):
        if len(self.frames) < 1:
            raise ValueError("burst needs at least one frame")
        ref = self.frames[0]
        for k, f in enumerate(self.frames):
            if f.shape != ref.shape:
                raise DimensionError(f"frame {k} shape {f.shape} != reference {ref.shape}")
            if f.cfa != ref.cfa:
                raise ValueError(f"frame {k} CFA {f.cfa.phase} != reference {ref.cfa.phase}")

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def cfa(self) -> CfaPattern:
        return self.frames[0].cfa

    @property
    def frame_shape(self) -> tuple[int, int]:
        return self.frames[0].shape


def mosaic(rgb: RgbImage, cfa: CfaPattern) -> RawBayerImage:
    """Sample one channel per pixel according to the CFA; no interpolation."""
    h, w = rgb.shape
    if h % 2 or w % 2:
        raise DimensionError(f"mosaic needs even dimensions, got {h}x{w}")
    return RawBayerImage(mosaic_array(rgb.data, cfa), cfa)


def mosaic_array(rgb: np.ndarray, cfa: CfaPattern) -> np.ndarray:
    cmap = cfa.channel_map(*rgb.shape[:2])
    return np.take_along_axis(rgb, cmap[:, :, None], axis=2)[:, :, 0]


def demosaic_bilinear(raw: RawBayerImage) -> RgbImage:
    """Fill missing channels by bilinear interpolation of same-channel neighbors.

    Sampled sites are preserved exactly; boundaries use reflected (reflect-101)
    neighbors. Implemented as normalized convolution, so the operation is linear.
    """
    return RgbImage(demosaic_bilinear_array(raw.data, raw.cfa), colorspace="linear")


def demosaic_bilinear_array(raw: np.ndarray, cfa: CfaPattern) -> np.ndarray:
    masks = cfa.masks(*raw.shape).astype(np.float64)
    out = np.empty(raw.shape + (3,), dtype=np.float64)
    for c in range(3):
        kernel = _KERNEL_G if c == 1 else _KERNEL_RB
        num = convolve(raw * masks[c], kernel, mode="mirror")
        den = convolve(masks[c], kernel, mode="mirror")
        out[:, :, c] = num / den
    return out


def raw_to_gray(raw: RawBayerImage) -> np.ndarray:
    """Grayscale for registration: unweighted channel mean of the demosaic."""
    return demosaic_bilinear_array(raw.data, raw.cfa).mean(axis=2)
