#!/usr/bin/env python3
"""Test-time augmentation and burst-subset ensembling.

The transpose augmentation maps RGGB mosaics onto themselves, so a burst can
be solved transposed and un-transposed afterwards; frame shuffles probe order
sensitivity. Subset ensembling splits a long burst into reference-anchored
chunks, solves each, and averages.
"""

import numpy as np

from burstsr.camera import ColorPipelineParams, SynthConfig, synthesize_burst
from burstsr.ensemble import (AugDescriptor, augment, burst_subsets,
                              default_descriptors, subset_ensemble, tta_solve)
from burstsr.metrics import psnr
from burstsr.motion import MotionModel
from burstsr.operators import ObservationModel
from burstsr.priors import TvPrior
from burstsr.registration import align_burst
from burstsr.solver import HqsConfig, hqs_solve
from burstsr.scenes import textured_scene

cfg = SynthConfig(frames=8, lr_height=48, lr_width=48, seed=31)
sample = synthesize_burst(textured_scene(size=300, seed=3), ColorPipelineParams(), cfg)
gt = sample.gt_linear.data


def solve(burst):
    motions = [r.motion.scaled(cfg.sr_factor)
               for r in align_burst(burst, MotionModel.EUCLIDEAN)]
    model = ObservationModel(burst.frame_shape, cfg.sr_factor, cfa=burst.cfa)
    est = hqs_solve(burst, motions, model,
                    TvPrior(inner_iters=100, tol=1e-8, warm_start=True),
                    HqsConfig(outer_iters=5, lam=1e-3, cg_iters=30))
    return est.image


# a transposed burst is still a valid RGGB burst
aug = augment(sample.burst, AugDescriptor.transpose())
print(f"transposed frames: {aug.frame_shape}, CFA still {aug.cfa.phase}")

plain = solve(sample.burst)
print(f"plain solve  : {psnr(plain.data, gt):6.2f} dB")

tta = tta_solve(solve, sample.burst, default_descriptors(len(sample.burst), seed=0))
print(f"3-way TTA    : {psnr(tta.data, gt):6.2f} dB "
      f"(identity + transpose + shuffle)")

for size in [5, 8]:
    subs = burst_subsets(sample.burst, size)
    out = subset_ensemble(solve, sample.burst, size)
    print(f"subsets of {size}: {len(subs)} solves -> {psnr(out.data, gt):6.2f} dB")
