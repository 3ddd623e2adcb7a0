"""Invertible simplified camera pipeline and synthetic RAW burst generation.

The sRGB <-> linear-sensor conversion is a gamma + color matrix + white
balance stand-in with configurable parameters; it is exactly invertible on
in-gamut values, which makes the whole synthesis chain testable. The default
color matrix is constructed so its inverse has non-negative entries, keeping
unprocessed values non-negative for any sRGB input.

Burst synthesis warps the linear HR canvas per frame, center-crops to the
ground-truth window, then runs the same blur/decimate/mosaic code as the
forward operator, and finally adds shot/read noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bayer import Burst, CfaPattern, RawBayerImage, RgbImage
from .errors import DimensionError, ParameterError
from .motion import MotionModel, MotionParams
from .operators import (BlurKernel, ObservationModel, blur_apply_array,
                        decimate_mosaic_apply_array, warp_apply_array)

# camera-RGB -> sRGB matrix whose inverse is entrywise non-negative
_DEFAULT_UNMIX = np.array([[0.70, 0.20, 0.10],
                           [0.15, 0.70, 0.15],
                           [0.10, 0.20, 0.70]])
DEFAULT_CCM = np.linalg.inv(_DEFAULT_UNMIX)


@dataclass
class ColorPipelineParams:
    wb_gains: np.ndarray = field(default_factory=lambda: np.array([2.0, 1.0, 1.7]))
    ccm: np.ndarray = field(default_factory=lambda: DEFAULT_CCM.copy())
    gamma: float = 2.2

    def __post_init__(self):
        self.wb_gains = np.asarray(self.wb_gains, dtype=np.float64)
        self.ccm = np.asarray(self.ccm, dtype=np.float64)
        if self.wb_gains.shape != (3,) or np.any(self.wb_gains <= 0):
            raise ParameterError("wb_gains must be 3 positive values")
        if self.ccm.shape != (3, 3) or abs(np.linalg.det(self.ccm)) < 1e-8:
            raise ParameterError("ccm must be an invertible 3x3 matrix")
        if self.gamma <= 0:
            raise ParameterError("gamma must be positive")

    @classmethod
    def identity(cls) -> "ColorPipelineParams":
        return cls(np.ones(3), np.eye(3), 1.0)


@dataclass(frozen=True)
class NoiseParams:
    """Heteroscedastic Gaussian: Var(y|x) = shot_slope * x + read_var."""

    shot_slope: float = 2.6e-3
    read_var: float = 2.5e-4

    def __post_init__(self):
        if self.shot_slope < 0 or self.read_var < 0:
            raise ParameterError("noise parameters must be non-negative")

    def variance(self, signal: np.ndarray) -> np.ndarray:
        return self.shot_slope * np.maximum(signal, 0.0) + self.read_var

    @classmethod
    def none(cls) -> "NoiseParams":
        return cls(0.0, 0.0)


@dataclass
class SynthConfig:
    frames: int = 14
    sr_factor: int = 4
    lr_height: int = 96
    lr_width: int = 96
    max_translation: float = 24.0  # HR pixels
    max_rotation: float = 1.0      # degrees
    noise: NoiseParams = field(default_factory=NoiseParams)
    seed: int = 0
    cfa: CfaPattern = field(default_factory=CfaPattern)
    kernel: BlurKernel | None = None  # None -> box of width sr_factor

    def __post_init__(self):
        if self.frames < 1:
            raise ParameterError("need at least one frame")
        if self.sr_factor < 1:
            raise ParameterError("sr_factor must be >= 1")

    def observation_model(self) -> ObservationModel:
        return ObservationModel((self.lr_height, self.lr_width), self.sr_factor,
                                kernel=self.kernel, cfa=self.cfa)

    def margin(self) -> int:
        """Canvas margin covering translation + rotation reach + blur support."""
        model = self.observation_model()
        hh, ww = model.hr_shape
        reach = np.sin(np.deg2rad(abs(self.max_rotation))) * 0.5 * np.hypot(hh, ww)
        return int(np.ceil(self.max_translation + reach + model.kernel.radius + 2))


@dataclass
class SyntheticBurstSample:
    burst: Burst
    gt_linear: RgbImage
    gt_motions: list[MotionParams]  # HR scale, identity for frame 0
    noise: NoiseParams


def unprocess(srgb: RgbImage, params: ColorPipelineParams) -> RgbImage:
    """sRGB -> linear sensor: inverse gamma, inverse CCM, inverse WB gains."""
    if srgb.colorspace != "srgb":
        raise ValueError("unprocess expects an sRGB-tagged image")
    x = np.power(np.maximum(srgb.data, 0.0), params.gamma)
    x = x @ np.linalg.inv(params.ccm).T
    x = x / params.wb_gains
    return RgbImage(x, "linear")


def process(linear: RgbImage, params: ColorPipelineParams) -> RgbImage:
    """Linear sensor -> sRGB for visualization: WB, CCM, gamma, clamp."""
    if linear.colorspace != "linear":
        raise ValueError("process expects a linear-tagged image")
    x = linear.data * params.wb_gains
    x = x @ params.ccm.T
    x = np.power(np.maximum(x, 0.0), 1.0 / params.gamma)
    return RgbImage(np.clip(x, 0.0, 1.0), "srgb")


def add_noise(raw: RawBayerImage, noise: NoiseParams, seed: int) -> RawBayerImage:
    """Add per-pixel Gaussian noise with the affine variance law; deterministic."""
    if noise.shot_slope == 0.0 and noise.read_var == 0.0:
        return RawBayerImage(raw.data.copy(), raw.cfa)
    rng = np.random.default_rng(seed)
    sigma = np.sqrt(noise.variance(raw.data))
    return RawBayerImage(raw.data + sigma * rng.standard_normal(raw.data.shape), raw.cfa)


def sample_motions(cfg: SynthConfig, rng: np.random.Generator) -> list[MotionParams]:
    """Identity for frame 0; uniform translation/rotation for the rest."""
    motions = [MotionParams.identity(MotionModel.EUCLIDEAN)]
    for _ in range(cfg.frames - 1):
        tx, ty = rng.uniform(-cfg.max_translation, cfg.max_translation, size=2)
        theta = np.deg2rad(rng.uniform(-cfg.max_rotation, cfg.max_rotation))
        motions.append(MotionParams(MotionModel.EUCLIDEAN, np.array([tx, ty, theta])))
    return motions


def render_frame(canvas_linear: np.ndarray, motion: MotionParams,
                 model: ObservationModel) -> RawBayerImage:
    """Warp the full canvas, center-crop to the GT window, blur+decimate+mosaic.

    Shares the operator code paths, so forward(gt, motions) reproduces the
    result wherever the warp footprint stays inside the GT crop.
    """
    hh, ww = model.hr_shape
    ch, cw = canvas_linear.shape[:2]
    if ch < hh or cw < ww or (ch - hh) % 2 or (cw - ww) % 2:
        raise DimensionError("canvas must exceed the GT window by symmetric margins")
    warped, valid = warp_apply_array(canvas_linear, motion)
    my, mx = (ch - hh) // 2, (cw - ww) // 2
    crop = warped[my:my + hh, mx:mx + ww]
    if not valid[my:my + hh, mx:mx + ww].all():
        raise DimensionError("margin too small: warp left the canvas inside the GT window")
    lowres = decimate_mosaic_apply_array(blur_apply_array(crop, model.kernel), model)
    return RawBayerImage(lowres, model.cfa)


def synthesize_burst(hr_srgb: RgbImage, pipeline: ColorPipelineParams,
                     cfg: SynthConfig,
                     motions: list[MotionParams] | None = None) -> SyntheticBurstSample:
    """Generate a noisy RAW burst plus aligned linear ground truth.

    Pass `motions` to inject known per-frame warps instead of sampling them
    (frame 0 must be the identity).
    """
    model = cfg.observation_model()
    hh, ww = model.hr_shape
    margin = cfg.margin()
    need_h, need_w = hh + 2 * margin, ww + 2 * margin
    ih, iw = hr_srgb.shape
    if ih < need_h or iw < need_w:
        raise DimensionError(f"input {ih}x{iw} too small: need at least "
                             f"{need_h}x{need_w} for a {hh}x{ww} GT plus margin {margin}")
    oy, ox = (ih - need_h) // 2, (iw - need_w) // 2
    canvas_srgb = RgbImage(hr_srgb.data[oy:oy + need_h, ox:ox + need_w], "srgb")
    canvas = unprocess(canvas_srgb, pipeline).data
    gt = canvas[margin:margin + hh, margin:margin + ww]

    rng = np.random.default_rng(cfg.seed)
    if motions is None:
        motions = sample_motions(cfg, rng)
    else:
        motions = list(motions)
        if len(motions) != cfg.frames:
            raise ValueError(f"got {len(motions)} motions for {cfg.frames} frames")
        if not motions[0].is_identity:
            raise ValueError("frame 0 must carry the identity motion")
    frame_seeds = rng.integers(0, 2**63 - 1, size=cfg.frames)
    frames = []
    for k, p in enumerate(motions):
        clean = render_frame(canvas, p, model)
        frames.append(add_noise(clean, cfg.noise, int(frame_seeds[k])))
    return SyntheticBurstSample(Burst(frames), RgbImage(gt, "linear"), motions, cfg.noise)
