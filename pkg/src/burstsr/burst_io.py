"""On-disk burst format: 16-bit PNGs plus a meta.json sidecar.

A burst directory holds frame_00.png ... frame_{K-1}.png (single channel,
linear intensities scaled by 65535), optionally gt.png (16-bit RGB linear),
and meta.json with the CFA phase, frame count, SR factor, noise parameters
and optional ground-truth motions. Values are clipped to [0, 1] on write;
in-range data round-trips within 1/65535.
"""

from __future__ import annotations

import json
from pathlib import Path

import cv2
import numpy as np

from .bayer import Burst, CfaPattern, RawBayerImage, RgbImage
from .camera import NoiseParams, SyntheticBurstSample
from .motion import MotionModel, MotionParams

_SCALE = 65535.0


def save_png16(path, img: np.ndarray):
    """Write a [0,1] float image (HxW or HxWx3) as 16-bit PNG."""
    arr = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    q = np.round(arr * _SCALE).astype(np.uint16)
    if q.ndim == 3:
        q = q[:, :, ::-1]  # RGB -> BGR for OpenCV
    if not cv2.imwrite(str(path), q):
        raise IOError(f"failed to write {path}")


def load_png16(path) -> np.ndarray:
    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise IOError(f"failed to read {path}")
    if img.dtype != np.uint16:
        raise IOError(f"{path} is not 16-bit")
    out = img.astype(np.float64) / _SCALE
    if out.ndim == 3:
        out = out[:, :, ::-1].copy()
    return out


def load_image_srgb(path) -> RgbImage:
    """Read an 8- or 16-bit image as [0,1] sRGB RGB."""
    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise IOError(f"failed to read {path}")
    peak = 65535.0 if img.dtype == np.uint16 else 255.0
    data = img.astype(np.float64) / peak
    if data.ndim == 2:
        data = np.repeat(data[:, :, None], 3, axis=2)
    elif data.shape[2] == 4:
        data = data[:, :, :3]
    if data.ndim == 3:
        data = data[:, :, ::-1].copy()
    return RgbImage(np.clip(data, 0.0, 1.0), "srgb")


def _motion_to_dict(m: MotionParams) -> dict:
    return dict(model=m.model.value, p=[float(v) for v in m.p])


def _motion_from_dict(d: dict) -> MotionParams:
    return MotionParams(MotionModel(d["model"]), np.array(d["p"], dtype=np.float64))


def write_burst(directory, burst: Burst, sr_factor: int, noise: NoiseParams,
                gt: RgbImage | None = None,
                gt_motions: list[MotionParams] | None = None):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for k, frame in enumerate(burst.frames):
        save_png16(directory / f"frame_{k:02d}.png", frame.data)
    meta = dict(
        cfa=burst.cfa.phase,
        num_frames=len(burst),
        sr_factor=int(sr_factor),
        noise=dict(shot_slope=noise.shot_slope, read_var=noise.read_var),
    )
    if gt is not None:
        save_png16(directory / "gt.png", gt.data)
        meta["gt"] = "gt.png"
    if gt_motions is not None:
        meta["gt_motions"] = [_motion_to_dict(m) for m in gt_motions]
    (directory / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def write_sample(directory, sample: SyntheticBurstSample, sr_factor: int):
    write_burst(directory, sample.burst, sr_factor, sample.noise,
                gt=sample.gt_linear, gt_motions=sample.gt_motions)


def read_burst(directory):
    """Load a burst directory. Returns (burst, meta) with parsed fields.

    meta keys: 'sr_factor', 'noise' (NoiseParams), optional 'gt' (RgbImage,
    linear) and 'gt_motions' (list of MotionParams).
    """
    directory = Path(directory)
    meta_path = directory / "meta.json"
    if not meta_path.exists():
        raise IOError(f"{directory} has no meta.json")
    raw_meta = json.loads(meta_path.read_text())
    cfa = CfaPattern(raw_meta["cfa"])
    k = int(raw_meta["num_frames"])
    frames = []
    for i in range(k):
        data = load_png16(directory / f"frame_{i:02d}.png")
        if data.ndim != 2:
            raise IOError(f"frame_{i:02d}.png is not single-channel")
        frames.append(RawBayerImage(data, cfa))
    meta = dict(
        sr_factor=int(raw_meta["sr_factor"]),
        noise=NoiseParams(**raw_meta["noise"]),
    )
    if "gt" in raw_meta:
        gt = load_png16(directory / raw_meta["gt"])
        meta["gt"] = RgbImage(gt, "linear")
    if "gt_motions" in raw_meta:
        meta["gt_motions"] = [_motion_from_dict(d) for d in raw_meta["gt_motions"]]
    return Burst(frames), meta
