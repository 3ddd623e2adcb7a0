import numpy as np
import pytest

from burstsr.bayer import Burst, CfaPattern, RawBayerImage, RgbImage, demosaic_bilinear, mosaic
from burstsr.ensemble import (AugDescriptor, augment, burst_subsets,
                              default_descriptors, invert_output,
                              subset_ensemble, tta_solve)
from burstsr.errors import UnsupportedPhaseError
from burstsr.operators import ObservationModel
from burstsr.solver import single_frame_baseline


def _burst(rng, k=5, n=16, phase="RGGB"):
    cfa = CfaPattern(phase)
    return Burst([RawBayerImage(rng.random((n, n)), cfa) for _ in range(k)])


def test_identity_descriptor_noop(rng):
    b = _burst(rng)
    out = augment(b, AugDescriptor.identity())
    for a, c in zip(out.frames, b.frames):
        assert np.array_equal(a.data, c.data)


def test_transpose_roundtrip(rng):
    b = _burst(rng)
    d = AugDescriptor.transpose()
    back = augment(augment(b, d), d)
    for a, c in zip(back.frames, b.frames):
        assert np.array_equal(a.data, c.data)


def test_shuffle_roundtrip(rng):
    b = _burst(rng, k=6)
    d = AugDescriptor.shuffle(6, seed=3)
    inv = AugDescriptor(frame_permutation=d.inverse_permutation())
    back = augment(augment(b, d), inv)
    for a, c in zip(back.frames, b.frames):
        assert np.array_equal(a.data, c.data)


def test_shuffle_keeps_reference_first(rng):
    b = _burst(rng, k=6)
    d = AugDescriptor.shuffle(6, seed=1)
    out = augment(b, d)
    assert np.array_equal(out.frames[0].data, b.frames[0].data)


def test_transpose_preserves_rggb_sites(rng):
    b = _burst(rng, k=1)
    out = augment(b, AugDescriptor.transpose())
    raw, t = b.frames[0].data, out.frames[0].data
    assert t[0, 0] == raw[0, 0]          # R site maps to R site
    assert t[0, 1] == raw[1, 0]          # the two G sites swap
    assert t[1, 1] == raw[1, 1]          # B stays


def test_transpose_remosaic_consistency(rng):
    # demosaic of the augmented raw, re-mosaicked under the original CFA,
    # reproduces the augmented raw (pattern preservation)
    b = _burst(rng, k=1)
    aug = augment(b, AugDescriptor.transpose()).frames[0]
    re = mosaic(demosaic_bilinear(aug), aug.cfa)
    np.testing.assert_allclose(re.data, aug.data, atol=1e-12)


def test_transpose_rejected_for_grbg(rng):
    b = _burst(rng, phase="GRBG")
    with pytest.raises(UnsupportedPhaseError):
        augment(b, AugDescriptor.transpose())


def test_invert_output_transpose(rng):
    x = RgbImage(rng.random((8, 10, 3)), "linear")
    out = invert_output(RgbImage(x.data.transpose(1, 0, 2), "linear"),
                        AugDescriptor.transpose())
    assert np.array_equal(out.data, x.data)


def test_bad_permutation_rejected():
    with pytest.raises(ValueError):
        AugDescriptor(frame_permutation=(1, 1, 3))


def _baseline_solver(model):
    def solve(b: Burst) -> RgbImage:
        m = ObservationModel(b.frame_shape, model.sr_factor, cfa=b.cfa)
        return RgbImage(single_frame_baseline(b.frames[0].data, m), "linear")
    return solve


def test_tta_single_identity_equals_plain(rng):
    b = _burst(rng)
    model = ObservationModel(b.frame_shape, 2)
    solve = _baseline_solver(model)
    out = tta_solve(solve, b, [AugDescriptor.identity()])
    np.testing.assert_array_equal(out.data, solve(b).data)


def test_tta_requires_identity(rng):
    b = _burst(rng)
    with pytest.raises(ValueError):
        tta_solve(_baseline_solver(ObservationModel(b.frame_shape, 2)), b,
                  [AugDescriptor.transpose()])


def test_tta_duplicates_equal_dedup(rng):
    b = _burst(rng)
    solve = _baseline_solver(ObservationModel(b.frame_shape, 2))
    descs = default_descriptors(len(b))
    a = tta_solve(solve, b, descs)
    c = tta_solve(solve, b, descs + descs)
    np.testing.assert_array_equal(a.data, c.data)


def test_tta_order_invariant(rng):
    b = _burst(rng)
    solve = _baseline_solver(ObservationModel(b.frame_shape, 2))
    descs = default_descriptors(len(b))
    a = tta_solve(solve, b, descs)
    c = tta_solve(solve, b, descs[::-1])
    np.testing.assert_array_equal(a.data, c.data)


def test_tta_equivariant_dummy_solver_unchanged(rng):
    # the baseline solver commutes with transpose and ignores frame order,
    # so 3-descriptor TTA must reproduce the plain solve
    b = _burst(rng, k=6, n=24)
    solve = _baseline_solver(ObservationModel(b.frame_shape, 2))
    plain = solve(b)
    out = tta_solve(solve, b, default_descriptors(len(b)))
    np.testing.assert_allclose(out.data, plain.data, atol=1e-6)


def test_subsets_whole_burst(rng):
    b = _burst(rng, k=5)
    subs = burst_subsets(b, 5)
    assert len(subs) == 1
    for a, c in zip(subs[0].frames, b.frames):
        assert np.array_equal(a.data, c.data)


def test_subsets_pairings(rng):
    b = _burst(rng, k=14)
    assert len(burst_subsets(b, 2)) == 13
    subs = burst_subsets(b, 8)
    assert len(subs) == 2  # ceil(13 / 7)
    assert all(len(s) == 8 for s in subs)
    # last group padded with the reference
    assert np.array_equal(subs[1].frames[-1].data, b.frames[0].data)


def test_subsets_always_lead_with_reference(rng):
    b = _burst(rng, k=9)
    for s in burst_subsets(b, 4):
        assert np.array_equal(s.frames[0].data, b.frames[0].data)


def test_subset_size_validation(rng):
    with pytest.raises(ValueError):
        burst_subsets(_burst(rng), 1)


def test_subset_ensemble_equals_plain_for_full_size(rng):
    b = _burst(rng, k=5)
    solve = _baseline_solver(ObservationModel(b.frame_shape, 2))
    out = subset_ensemble(solve, b, 5)
    np.testing.assert_array_equal(out.data, solve(b).data)
