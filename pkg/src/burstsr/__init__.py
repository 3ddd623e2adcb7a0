"""Model-based RAW burst super-resolution toolkit.

Pipeline: synthesize (or load) a RAW burst -> register frames to the
reference with robust multiscale Lucas-Kanade -> reconstruct the 4x HR RGB
image by solving the joint demosaicking/denoising/SR inverse problem (HQS or
proximal gradient descent under classical priors) -> score in linear sensor
space, optionally with spatial alignment and color correction.
"""

from .bayer import (Burst, CfaPattern, RawBayerImage, RgbImage,
                    demosaic_bilinear, mosaic, raw_to_gray)
from .camera import (ColorPipelineParams, NoiseParams, SynthConfig,
                     SyntheticBurstSample, add_noise, process,
                     synthesize_burst, unprocess)
from .ensemble import (AugDescriptor, augment, default_descriptors,
                       invert_output, subset_ensemble, tta_solve)
from .errors import (DimensionError, ParameterError, SolverNumericalError,
                     UnsupportedPhaseError)
from .metrics import (AlignedScoreConfig, ColorMapFit, MetricReport,
                      aligned_score, fit_color_map, psnr, ssim)
from .motion import MotionModel, MotionParams
from .operators import (BlurKernel, BurstOperator, ObservationModel,
                        blur, box_kernel, decimate_mosaic, forward,
                        gaussian_kernel, warp, warp_jacobian)
from .priors import NoPrior, TikhonovPrior, TvPrior, make_prior, tv_prox
from .registration import (BlockFlowConfig, LkConfig, LkResult, align_burst,
                           block_translation_flow, build_pyramid, lk_align)
from .solver import (HqsConfig, PgdConfig, SrEstimate, hqs_solve,
                     init_estimate, p_step, pgd_solve, single_frame_baseline,
                     x_step, z_step)

__version__ = "0.1.0"
