import json
from pathlib import Path

import numpy as np
import pytest

from burstsr.bayer import CfaPattern, RawBayerImage, RgbImage, mosaic
from burstsr.burst_io import (load_png16, read_burst, save_png16, write_burst,
                              write_sample)
from burstsr.camera import ColorPipelineParams, NoiseParams, SynthConfig, synthesize_burst
from burstsr.cli import load_config_file, main
from burstsr.scenes import textured_scene


@pytest.fixture
def scene_png(tmp_path):
    path = tmp_path / "scene.png"
    save_png16(path, textured_scene(size=300).data)
    return str(path)


def _synth_args(scene_png, out_dir, extra=()):
    return ["synth", scene_png, str(out_dir), "--frames", "3", "--lr-height", "32",
            "--lr-width", "32", "--seed", "5", *extra]


# ---------------------------------------------------------------------------
# io round trips


def test_png16_roundtrip(tmp_path, rng):
    img = rng.random((16, 20, 3))
    save_png16(tmp_path / "x.png", img)
    back = load_png16(tmp_path / "x.png")
    assert np.abs(back - img).max() <= 1.0 / 65535


def test_png16_roundtrip_gray(tmp_path, rng):
    img = rng.random((16, 16))
    save_png16(tmp_path / "g.png", img)
    back = load_png16(tmp_path / "g.png")
    assert back.ndim == 2
    assert np.abs(back - img).max() <= 1.0 / 65535


def test_burst_dir_roundtrip(tmp_path, rng):
    sample = synthesize_burst(textured_scene(size=260), ColorPipelineParams(),
                              SynthConfig(frames=3, lr_height=32, lr_width=32, seed=1))
    write_sample(tmp_path / "b", sample, 4)
    burst, meta = read_burst(tmp_path / "b")
    assert len(burst) == 3
    assert meta["sr_factor"] == 4
    assert isinstance(meta["noise"], NoiseParams)
    assert meta["gt"].shape == (128, 128)
    for m_in, m_out in zip(sample.gt_motions, meta["gt_motions"]):
        np.testing.assert_array_equal(m_in.p, m_out.p)
    for f_in, f_out in zip(sample.burst.frames, burst.frames):
        clipped = np.clip(f_in.data, 0.0, 1.0)
        assert np.abs(clipped - f_out.data).max() <= 1.0 / 65535


def test_read_burst_missing_meta(tmp_path):
    (tmp_path / "empty").mkdir()
    with pytest.raises(IOError):
        read_burst(tmp_path / "empty")


# ---------------------------------------------------------------------------
# config handling


def test_config_file_precedence(tmp_path, scene_png):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("frames=2\nseed=9\n# comment line\n\nlr_height=32\n")
    out = tmp_path / "b"
    rc = main(["synth", scene_png, str(out), "--config", str(cfg),
               "--lr-width", "32", "--frames", "4"])
    assert rc == 0
    _, meta = read_burst(out)
    burst, _ = read_burst(out)
    assert len(burst) == 4  # flag beats file value of 2


def test_config_unknown_key_rejected(tmp_path, scene_png):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("not_a_knob=3\n")
    rc = main(["synth", scene_png, str(tmp_path / "b"), "--config", str(cfg)])
    assert rc == 2
    with pytest.raises(ValueError, match="valid keys"):
        load_config_file(cfg)


def test_config_malformed_line(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("frames 14\n")
    with pytest.raises(ValueError, match="key=value"):
        load_config_file(cfg)


# ---------------------------------------------------------------------------
# synth


def test_synth_writes_burst_and_gt(tmp_path, scene_png):
    out = tmp_path / "b"
    assert main(_synth_args(scene_png, out)) == 0
    burst, meta = read_burst(out)
    assert len(burst) == 3
    assert burst.frame_shape == (32, 32)
    assert meta["gt"].shape == (128, 128)
    assert len(meta["gt_motions"]) == 3


def test_synth_deterministic_bytes(tmp_path, scene_png):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(_synth_args(scene_png, a)) == 0
    assert main(_synth_args(scene_png, b)) == 0
    for name in sorted(p.name for p in a.iterdir()):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_synth_missing_input(tmp_path):
    assert main(["synth", str(tmp_path / "nope.png"), str(tmp_path / "b")]) == 2


def test_synth_noise_off_flag(tmp_path, scene_png):
    out = tmp_path / "b"
    rc = main(_synth_args(scene_png, out, extra=["--noise", "off"]))
    assert rc == 0
    _, meta = read_burst(out)
    assert meta["noise"].shot_slope == 0.0 and meta["noise"].read_var == 0.0
    assert main(_synth_args(scene_png, tmp_path / "c", extra=["--noise", "maybe"])) == 2


def test_synth_no_motion_frame_matches_operator(tmp_path, scene_png):
    out = tmp_path / "b"
    rc = main(_synth_args(scene_png, out,
                          extra=["--max-translation", "0", "--max-rotation", "0",
                                 "--shot-slope", "0", "--read-var", "0"]))
    assert rc == 0
    burst, meta = read_burst(out)
    from burstsr.operators import (ObservationModel, blur_apply_array,
                                   decimate_mosaic_apply_array)
    model = ObservationModel((32, 32), 4, cfa=burst.cfa)
    recomputed = decimate_mosaic_apply_array(
        blur_apply_array(meta["gt"].data, model.kernel), model)
    assert np.abs(burst.frames[0].data - np.clip(recomputed, 0, 1)).max() <= 2.0 / 65535


# ---------------------------------------------------------------------------
# align / sr / eval


def test_align_dump(tmp_path, scene_png):
    out = tmp_path / "b"
    main(_synth_args(scene_png, out))
    rc = main(["align", str(out)])
    assert rc == 0
    payload = json.loads((out / "alignment.json").read_text())
    assert len(payload) == 3
    assert payload[0]["p"] == [0.0, 0.0, 0.0]


def test_sr_hqs_shapes_and_diagnostics(tmp_path, scene_png):
    burst_dir = tmp_path / "b"
    main(_synth_args(scene_png, burst_dir))
    out = tmp_path / "sr.png"
    rc = main(["sr", str(burst_dir), str(out), "--outer-iters", "3", "--cg-iters", "20"])
    assert rc == 0
    img = load_png16(out)
    assert img.shape == (128, 128, 3)
    diag = json.loads((tmp_path / "sr_diagnostics.json").read_text())
    assert len(diag["energy_after_x"]) == 3
    assert len(diag["motions"]) == 3


def test_sr_use_gt_motion_close_to_estimated(tmp_path, scene_png):
    # noise-free: registration is near-exact, so reconstructions from true
    # and estimated motions score within 0.5 dB of each other
    from burstsr.metrics import psnr
    burst_dir = tmp_path / "b"
    main(_synth_args(scene_png, burst_dir,
                     extra=["--shot-slope", "0", "--read-var", "0"]))
    common = ["--outer-iters", "4", "--cg-iters", "30", "--lam", "1e-4"]
    assert main(["sr", str(burst_dir), str(tmp_path / "gtm.png"),
                 "--use-gt-motion", "true", *common]) == 0
    assert main(["sr", str(burst_dir), str(tmp_path / "est.png"), *common]) == 0
    _, meta = read_burst(burst_dir)
    gt = meta["gt"].data
    p_gtm = psnr(load_png16(tmp_path / "gtm.png"), gt)
    p_est = psnr(load_png16(tmp_path / "est.png"), gt)
    assert abs(p_gtm - p_est) <= 0.5


def test_sr_pgd_none_prior_reproduces_mosaic_sites(tmp_path, scene_png):
    # 1 frame, no motion, no noise, s=1: the observed mosaic sites are
    # reproduced by the data-consistent solution
    burst_dir = tmp_path / "b"
    main(["synth", scene_png, str(burst_dir), "--frames", "1", "--lr-height", "32",
          "--lr-width", "32", "--sr-factor", "1", "--max-translation", "0",
          "--max-rotation", "0", "--shot-slope", "0", "--read-var", "0"])
    out = tmp_path / "sr.png"
    rc = main(["sr", str(burst_dir), str(out), "--method", "pgd", "--prior", "none",
               "--pgd-iters", "300", "--use-gt-motion", "true"])
    assert rc == 0
    burst, meta = read_burst(burst_dir)
    recon = RgbImage(load_png16(out), "linear")
    remosaic = mosaic(recon, burst.cfa)
    assert np.abs(remosaic.data - burst.frames[0].data).max() < 5e-3


def test_eval_exact_match(tmp_path, rng):
    img = rng.random((32, 32, 3))
    a, b = tmp_path / "a.png", tmp_path / "gt.png"
    save_png16(a, img)
    save_png16(b, img)
    rc = main(["eval", str(a), str(b)])
    assert rc == 0
    rep = json.loads((tmp_path / "a_metrics.json").read_text())
    assert rep["psnr_db"] == 100.0
    assert abs(rep["ssim"] - 1.0) < 1e-9


def test_eval_offset_20db(tmp_path, rng):
    gt = rng.random((32, 32, 3)) * 0.5
    save_png16(tmp_path / "gt.png", gt)
    save_png16(tmp_path / "p.png", gt + 0.1)
    rc = main(["eval", str(tmp_path / "p.png"), str(tmp_path / "gt.png")])
    assert rc == 0
    rep = json.loads((tmp_path / "p_metrics.json").read_text())
    assert abs(rep["psnr_db"] - 20.0) < 0.02  # quantization of the 16-bit store


def test_eval_dim_mismatch(tmp_path, rng):
    save_png16(tmp_path / "a.png", rng.random((16, 16, 3)))
    save_png16(tmp_path / "b.png", rng.random((32, 32, 3)))
    assert main(["eval", str(tmp_path / "a.png"), str(tmp_path / "b.png")]) == 2


def test_eval_aligned_beats_plain_on_shift(tmp_path):
    from burstsr.motion import MotionModel, MotionParams
    from burstsr.operators import warp_apply_array
    from conftest import smooth_texture
    gt = smooth_texture(128, 128, seed=9, channels=3)
    shifted, _ = warp_apply_array(gt, MotionParams(MotionModel.TRANSLATION,
                                                   np.array([2.0, 0.0])))
    save_png16(tmp_path / "gt.png", gt)
    save_png16(tmp_path / "p.png", shifted)
    assert main(["eval", str(tmp_path / "p.png"), str(tmp_path / "gt.png"),
                 "--out", str(tmp_path / "plain.json")]) == 0
    assert main(["eval", str(tmp_path / "p.png"), str(tmp_path / "gt.png"),
                 "--aligned", "true", "--out", str(tmp_path / "aligned.json")]) == 0
    plain = json.loads((tmp_path / "plain.json").read_text())
    aligned = json.loads((tmp_path / "aligned.json").read_text())
    assert aligned["psnr_db"] > plain["psnr_db"]


# ---------------------------------------------------------------------------
# bench


def _make_corpus(tmp_path, scene_png, n=2):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    for i in range(n):
        main(["synth", scene_png, str(corpus / f"sample_{i:02d}"), "--frames", "3",
              "--lr-height", "32", "--lr-width", "32", "--seed", str(100 + i)])
    return corpus


def test_bench_empty_corpus(tmp_path):
    empty = tmp_path / "corpus"
    empty.mkdir()
    assert main(["bench", str(empty)]) == 2


def test_bench_report_and_determinism(tmp_path, scene_png):
    corpus = _make_corpus(tmp_path, scene_png)
    args = ["bench", str(corpus), "--methods", "baseline,hqs", "--outer-iters", "3",
            "--cg-iters", "20", "--out-dir", str(tmp_path / "r1")]
    assert main(args) == 0
    report = json.loads((tmp_path / "r1" / "report.json").read_text())
    assert set(report["samples"]) == {"sample_00", "sample_01"}
    for s in report["samples"].values():
        assert s["hqs"]["psnr_db"] > s["baseline"]["psnr_db"]
    args2 = args[:-1] + [str(tmp_path / "r2")]
    assert main(args2) == 0
    assert (tmp_path / "r1" / "report.json").read_bytes() == \
        (tmp_path / "r2" / "report.json").read_bytes()
    assert (tmp_path / "r1" / "report.txt").read_bytes() == \
        (tmp_path / "r2" / "report.txt").read_bytes()


def test_bench_records_failures_and_continues(tmp_path, scene_png, rng):
    corpus = _make_corpus(tmp_path, scene_png, n=1)
    # a sample without ground truth must fail but not kill the run
    bad = corpus / "sample_bad"
    frames = [RawBayerImage(rng.random((32, 32))) for _ in range(2)]
    from burstsr.bayer import Burst
    write_burst(bad, Burst(frames), 4, NoiseParams())
    rc = main(["bench", str(corpus), "--methods", "baseline", "--out-dir",
               str(tmp_path / "r")])
    assert rc == 1
    report = json.loads((tmp_path / "r" / "report.json").read_text())
    assert "sample_bad" in report["errors"]
    assert "sample_00" in report["samples"]


def test_bench_threads_match_serial(tmp_path, scene_png):
    corpus = _make_corpus(tmp_path, scene_png)
    base = ["bench", str(corpus), "--methods", "baseline,hqs", "--outer-iters", "2",
            "--cg-iters", "15"]
    assert main(base + ["--out-dir", str(tmp_path / "s"), "--threads", "1"]) == 0
    assert main(base + ["--out-dir", str(tmp_path / "t"), "--threads", "2"]) == 0
    assert (tmp_path / "s" / "report.json").read_bytes() == \
        (tmp_path / "t" / "report.json").read_bytes()
