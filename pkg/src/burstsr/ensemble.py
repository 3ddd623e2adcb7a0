"""Bayer-preserving test-time augmentation and burst-subset ensembling.

Only the transpose is offered as a spatial transform: it maps RGGB/BGGR
mosaics onto themselves, so augmented bursts stay valid without re-phasing
crops. Frame shuffles keep the reference at index 0 because the
reconstruction is anchored to it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bayer import Burst, RawBayerImage, RgbImage
from .errors import UnsupportedPhaseError


@dataclass(frozen=True)
class AugDescriptor:
    transform: str = "identity"  # "identity" | "transpose"
    frame_permutation: tuple[int, ...] | None = None  # permutation of 1..K-1

    def __post_init__(self):
        if self.transform not in ("identity", "transpose"):
            raise ValueError(f"unknown transform {self.transform!r}")
        if self.frame_permutation is not None:
            perm = tuple(self.frame_permutation)
            if sorted(perm) != list(range(1, len(perm) + 1)):
                raise ValueError("frame_permutation must be a permutation of 1..K-1")
            object.__setattr__(self, "frame_permutation", perm)

    @classmethod
    def identity(cls) -> "AugDescriptor":
        return cls()

    @classmethod
    def transpose(cls) -> "AugDescriptor":
        return cls(transform="transpose")

    @classmethod
    def shuffle(cls, n_frames: int, seed: int = 0) -> "AugDescriptor":
        rng = np.random.default_rng(seed)
        perm = tuple(int(i) for i in rng.permutation(np.arange(1, n_frames)))
        return cls(frame_permutation=perm)

    @property
    def is_identity(self) -> bool:
        trivial_perm = (self.frame_permutation is None or
                        self.frame_permutation == tuple(range(1, len(self.frame_permutation) + 1)))
        return self.transform == "identity" and trivial_perm

    def inverse_permutation(self) -> tuple[int, ...] | None:
        if self.frame_permutation is None:
            return None
        inv = [0] * len(self.frame_permutation)
        for i, j in enumerate(self.frame_permutation, start=1):
            inv[j - 1] = i
        return tuple(inv)

    def key(self) -> tuple:
        return (self.transform, self.frame_permutation or ())


def default_descriptors(n_frames: int, seed: int = 0) -> list[AugDescriptor]:
    """The 3-descriptor set: identity, transpose, and a frame shuffle."""
    return [AugDescriptor.identity(), AugDescriptor.transpose(),
            AugDescriptor.shuffle(n_frames, seed)]


def augment(burst: Burst, d: AugDescriptor) -> Burst:
    """Transform every frame, then permute frames 1..K-1; CFA tag unchanged."""
    if d.transform == "transpose" and not burst.cfa.transpose_invariant:
        raise UnsupportedPhaseError(
            f"transpose would change phase {burst.cfa.phase}; only RGGB/BGGR supported")
    frames = burst.frames
    if d.transform == "transpose":
        frames = [RawBayerImage(f.data.T.copy(), f.cfa) for f in frames]
    else:
        frames = [RawBayerImage(f.data.copy(), f.cfa) for f in frames]
    if d.frame_permutation is not None:
        if len(d.frame_permutation) != len(frames) - 1:
            raise ValueError("permutation length does not match burst size")
        frames = [frames[0]] + [frames[j] for j in d.frame_permutation]
    return Burst(frames)


def invert_output(sr: RgbImage, d: AugDescriptor) -> RgbImage:
    """Undo the spatial transform on the HR output (shuffles have no effect)."""
    if d.transform == "transpose":
        return RgbImage(sr.data.transpose(1, 0, 2).copy(), sr.colorspace)
    return RgbImage(sr.data.copy(), sr.colorspace)


def tta_solve(solve_fn, burst: Burst, descriptors: list[AugDescriptor]) -> RgbImage:
    """Average solve_fn over augmented bursts after undoing each augmentation.

    Descriptors are deduplicated and processed in a canonical order, so the
    result does not depend on how the list was arranged.
    """
    unique = sorted({d.key(): d for d in descriptors}.values(), key=lambda d: d.key())
    if not any(d.is_identity for d in unique):
        raise ValueError("descriptor set must include the identity")
    outputs = []
    colorspace = None
    for d in unique:
        sr = invert_output(solve_fn(augment(burst, d)), d)
        outputs.append(sr.data)
        colorspace = sr.colorspace
    return RgbImage(np.mean(outputs, axis=0), colorspace)


def burst_subsets(burst: Burst, subset_size: int) -> list[Burst]:
    """Chunks of subset_size frames, each starting with the reference.

    Frames 1..K-1 are split in order into groups of subset_size-1; the last
    group is padded by repeating the reference frame.
    """
    if subset_size < 2:
        raise ValueError("subset_size must be >= 2")
    rest = burst.frames[1:]
    per = subset_size - 1
    subsets = []
    for start in range(0, max(len(rest), 1), per):
        group = rest[start:start + per]
        if not group:
            break
        while len(group) < per:
            group.append(burst.frames[0])
        subsets.append(Burst([burst.frames[0]] + group))
    if not subsets:  # K == 1
        subsets = [Burst([burst.frames[0]] * subset_size)]
    return subsets


def subset_ensemble(solve_fn, burst: Burst, subset_size: int) -> RgbImage:
    """Solve each reference-anchored subset and average the outputs."""
    outputs = []
    colorspace = None
    for sub in burst_subsets(burst, subset_size):
        sr = solve_fn(sub)
        outputs.append(sr.data)
        colorspace = sr.colorspace
    return RgbImage(np.mean(outputs, axis=0), colorspace)
