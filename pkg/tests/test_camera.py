import numpy as np
import pytest

from burstsr.bayer import RawBayerImage, RgbImage
from burstsr.camera import (ColorPipelineParams, NoiseParams, SynthConfig,
                            add_noise, process, synthesize_burst, unprocess)
from burstsr.errors import DimensionError, ParameterError
from burstsr.motion import MotionModel, MotionParams
from burstsr.operators import forward
from burstsr.scenes import textured_scene

from conftest import smooth_texture


def test_identity_params_identity(rng):
    x = RgbImage(rng.random((8, 8, 3)), "srgb")
    out = unprocess(x, ColorPipelineParams.identity())
    np.testing.assert_allclose(out.data, x.data, atol=1e-12)
    assert out.colorspace == "linear"


def test_process_unprocess_roundtrip(rng):
    params = ColorPipelineParams()
    x = RgbImage(rng.uniform(0.01, 1.0, (16, 16, 3)), "srgb")
    lin = unprocess(x, params)
    assert lin.data.min() >= 0  # default CCM inverse is non-negative
    back = process(lin, params)
    np.testing.assert_allclose(back.data, x.data, atol=1e-6)


def test_unprocess_process_roundtrip(rng):
    params = ColorPipelineParams()
    lin = RgbImage(unprocess(RgbImage(rng.uniform(0.05, 0.95, (12, 12, 3)), "srgb"),
                             params).data, "linear")
    rt = unprocess(process(lin, params), params)
    np.testing.assert_allclose(rt.data, lin.data, atol=1e-6)


def test_unprocess_scalar_oracle():
    params = ColorPipelineParams(np.array([2.0, 1.0, 1.5]), np.eye(3), 2.2)
    out = unprocess(RgbImage(np.full((2, 2, 3), 0.5), "srgb"), params)
    expected = 0.5 ** 2.2 / np.array([2.0, 1.0, 1.5])
    np.testing.assert_allclose(out.data[0, 0], expected, atol=1e-12)


def test_process_clamps_negative_linear():
    params = ColorPipelineParams(np.ones(3), np.eye(3), 2.2)
    lin = RgbImage(np.full((2, 2, 3), -0.25), "linear")
    out = process(lin, params)
    np.testing.assert_array_equal(out.data, 0.0)


def test_singular_ccm_rejected():
    with pytest.raises(ParameterError):
        ColorPipelineParams(np.ones(3), np.zeros((3, 3)), 2.2)


def test_colorspace_tags_enforced():
    lin = RgbImage(np.zeros((2, 2, 3)), "linear")
    with pytest.raises(ValueError):
        unprocess(lin, ColorPipelineParams())


def test_add_noise_zero_is_bitwise_copy(rng):
    raw = RawBayerImage(rng.random((8, 8)))
    out = add_noise(raw, NoiseParams.none(), seed=3)
    assert np.array_equal(out.data, raw.data)


def test_add_noise_deterministic(rng):
    raw = RawBayerImage(rng.random((8, 8)))
    nz = NoiseParams(0.01, 1e-4)
    a = add_noise(raw, nz, seed=5)
    b = add_noise(raw, nz, seed=5)
    c = add_noise(raw, nz, seed=6)
    assert np.array_equal(a.data, b.data)
    assert not np.array_equal(a.data, c.data)


def test_noise_variance_and_mean():
    n = 1000
    raw = RawBayerImage(np.full((n, n), 0.5))
    nz = NoiseParams(0.01, 1e-4)
    noise = add_noise(raw, nz, seed=11).data - 0.5
    expected = 0.01 * 0.5 + 1e-4
    assert abs(noise.var() / expected - 1.0) < 0.02
    sigma = np.sqrt(expected)
    assert abs(noise.mean()) < 4 * sigma / n  # unbiased within 4 sigma / sqrt(N)


def test_synth_default_shapes():
    scene = textured_scene()
    sample = synthesize_burst(scene, ColorPipelineParams(),
                              SynthConfig(noise=NoiseParams.none(), seed=0))
    assert len(sample.burst) == 14
    assert sample.burst.frame_shape == (96, 96)
    assert sample.gt_linear.shape == (384, 384)
    assert sample.gt_motions[0].is_identity


def test_synth_no_motion_no_noise_identical_frames():
    scene = textured_scene(size=256)
    cfg = SynthConfig(frames=3, lr_height=48, lr_width=48, max_translation=0,
                      max_rotation=0, noise=NoiseParams.none(), seed=1)
    sample = synthesize_burst(scene, ColorPipelineParams(), cfg)
    for f in sample.burst.frames[1:]:
        assert np.array_equal(f.data, sample.burst.frames[0].data)


def test_synth_rejects_small_input():
    small = RgbImage(np.full((100, 100, 3), 0.5), "srgb")
    with pytest.raises(DimensionError):
        synthesize_burst(small, ColorPipelineParams(), SynthConfig())


def test_synth_injected_motions_match_forward_operator():
    scene = textured_scene(size=320)
    cfg = SynthConfig(frames=3, lr_height=48, lr_width=48,
                      noise=NoiseParams.none(), seed=2)
    motions = [MotionParams.identity(),
               MotionParams(MotionModel.EUCLIDEAN, np.array([5.0, -3.5, np.deg2rad(0.5)])),
               MotionParams(MotionModel.EUCLIDEAN, np.array([-11.25, 7.5, np.deg2rad(-0.9)]))]
    sample = synthesize_burst(scene, ColorPipelineParams(), cfg, motions=motions)
    frames, masks = forward(sample.gt_linear, motions, cfg.observation_model())
    for k in range(3):
        diff = np.abs(sample.burst.frames[k].data - frames[k])[masks[k]]
        assert diff.max() < 1e-5


def test_synth_deterministic_per_seed():
    scene = textured_scene(size=256)
    cfg = SynthConfig(frames=2, lr_height=48, lr_width=48, seed=9)
    a = synthesize_burst(scene, ColorPipelineParams(), cfg)
    b = synthesize_burst(scene, ColorPipelineParams(), cfg)
    for fa, fb in zip(a.burst.frames, b.burst.frames):
        assert np.array_equal(fa.data, fb.data)
    for ma, mb in zip(a.gt_motions, b.gt_motions):
        assert np.array_equal(ma.p, mb.p)
