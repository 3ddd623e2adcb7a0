"""Scoring in linear sensor space: PSNR, SSIM, and the alignment-based protocol.

The aligned protocol estimates a dense displacement field with block-wise
multiscale Lucas-Kanade (a classical substitute for a learned flow network),
warps the prediction onto the ground truth, fits a global 3x3 color
correction by least squares, and scores only pixels the alignment kept valid.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate1d

from .bayer import RgbImage
from .errors import DimensionError
from .registration import BlockFlowConfig, block_translation_flow
from .operators import warp_dense

PSNR_CAP_DB = 100.0


@dataclass
class SsimConfig:
    window: int = 11
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 1.0


@dataclass
class AlignedScoreConfig:
    # flow runs on mean/contrast-normalized grays, so the Huber threshold is
    # in normalized units rather than linear intensities
    flow: BlockFlowConfig = field(default_factory=lambda: BlockFlowConfig(robust_threshold=0.2))
    ssim: SsimConfig = field(default_factory=SsimConfig)
    peak: float = 1.0
    rounds: int = 2  # alternate spatial alignment and color fitting


@dataclass
class MetricReport:
    psnr_db: float
    ssim: float
    valid_fraction: float = 1.0
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return dict(psnr_db=self.psnr_db, ssim=self.ssim,
                    valid_fraction=self.valid_fraction, flags=list(self.flags))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


@dataclass
class ColorMapFit:
    matrix: np.ndarray
    degenerate: bool = False


def _linear_data(img) -> np.ndarray:
    if isinstance(img, RgbImage):
        if img.colorspace != "linear":
            raise ValueError("metrics operate in linear sensor space; "
                             f"got a {img.colorspace!r}-tagged image")
        return img.data
    return np.asarray(img, dtype=np.float64)


def psnr(pred, gt, peak: float = 1.0, mask: np.ndarray | None = None) -> float:
    """10 log10(peak^2 / MSE), capped at 100 dB for near-exact matches."""
    a, b = _linear_data(pred), _linear_data(gt)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    sq = (a - b) ** 2
    if mask is not None:
        if not mask.any():
            raise ValueError("empty mask")
        sq = sq[mask]
    mse = float(sq.mean())
    if mse < peak ** 2 * 1e-10:
        return PSNR_CAP_DB
    return float(10.0 * np.log10(peak ** 2 / mse))


def _window_taps(cfg: SsimConfig) -> np.ndarray:
    r = cfg.window // 2
    u = np.arange(-r, r + 1, dtype=np.float64)
    t = np.exp(-0.5 * (u / cfg.sigma) ** 2)
    return t / t.sum()


def _local_mean(x: np.ndarray, taps: np.ndarray) -> np.ndarray:
    out = correlate1d(x, taps, axis=0, mode="mirror")
    return correlate1d(out, taps, axis=1, mode="mirror")


def ssim_map(pred, gt, cfg: SsimConfig | None = None) -> np.ndarray:
    """Per-pixel mean SSIM over channels (Gaussian-window local statistics)."""
    cfg = cfg or SsimConfig()
    a, b = _linear_data(pred), _linear_data(gt)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    if min(a.shape[:2]) < cfg.window:
        raise DimensionError(f"image smaller than the {cfg.window}x{cfg.window} SSIM window")
    if a.ndim == 2:
        a, b = a[:, :, None], b[:, :, None]
    taps = _window_taps(cfg)
    c1 = (cfg.k1 * cfg.dynamic_range) ** 2
    c2 = (cfg.k2 * cfg.dynamic_range) ** 2
    maps = []
    for c in range(a.shape[2]):
        x, y = a[:, :, c], b[:, :, c]
        mx, my = _local_mean(x, taps), _local_mean(y, taps)
        vx = _local_mean(x * x, taps) - mx * mx
        vy = _local_mean(y * y, taps) - my * my
        cov = _local_mean(x * y, taps) - mx * my
        maps.append(((2 * mx * my + c1) * (2 * cov + c2)) /
                    ((mx * mx + my * my + c1) * (vx + vy + c2)))
    return np.mean(maps, axis=0)


def ssim(pred, gt, cfg: SsimConfig | None = None,
         mask: np.ndarray | None = None) -> float:
    m = ssim_map(pred, gt, cfg)
    if mask is not None:
        if not mask.any():
            raise ValueError("empty mask")
        m = m[mask]
    return float(m.mean())


def fit_color_map(pred, gt, mask: np.ndarray | None = None) -> ColorMapFit:
    """Least-squares 3x3 M minimizing sum ||M pred_i - gt_i||^2 over the mask."""
    a, b = _linear_data(pred), _linear_data(gt)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    pa = a.reshape(-1, 3)
    pb = b.reshape(-1, 3)
    if mask is not None:
        flat = mask.ravel()
        pa, pb = pa[flat], pb[flat]
    if pa.shape[0] < 3:
        return ColorMapFit(np.eye(3), degenerate=True)
    gram = pa.T @ pa
    eig = np.linalg.eigvalsh(gram)
    if eig[0] <= 0 or eig[-1] / eig[0] > 1e12:
        return ColorMapFit(np.eye(3), degenerate=True)
    m = np.linalg.solve(gram, pa.T @ pb).T
    return ColorMapFit(m, degenerate=False)


def aligned_score(pred: RgbImage, gt: RgbImage,
                  cfg: AlignedScoreConfig | None = None) -> MetricReport:
    """Alignment-based scoring: align spatially, color-correct, then PSNR/SSIM.

    Alignment and the 3x3 color fit alternate for cfg.rounds passes: a global
    color map commutes with warping, so refitting the flow on color-corrected
    images removes the brightness-induced flow bias of the first pass. Only
    the final pass's flow and validity determine the scored geometry.
    """
    cfg = cfg or AlignedScoreConfig()
    a, b = _linear_data(pred), _linear_data(gt)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    flags = []

    # normalize the grays so color/brightness differences between pred and
    # gt do not masquerade as displacement
    def _norm(g):
        return (g - g.mean()) / (g.std() + 1e-12)

    current = a  # color-corrected-so-far prediction, unwarped
    for _ in range(max(cfg.rounds, 1)):
        flow_x, flow_y = block_translation_flow(_norm(current.mean(axis=2)),
                                                _norm(b.mean(axis=2)), cfg.flow)
        warped, valid = warp_dense(current, flow_x, flow_y)
        fit = fit_color_map(warped, b, mask=valid)
        if fit.degenerate:
            if "color_fit_degenerate" not in flags:
                flags.append("color_fit_degenerate")
            break
        current = current @ fit.matrix.T
    corrected, valid = warp_dense(current, flow_x, flow_y)
    return MetricReport(
        psnr_db=psnr(corrected, b, peak=cfg.peak, mask=valid),
        ssim=ssim(corrected, b, cfg.ssim, mask=valid),
        valid_fraction=float(valid.mean()),
        flags=flags,
    )
