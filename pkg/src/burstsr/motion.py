"""Parametric 2-D motions: translation, Euclidean (rigid), affine.

Convention used everywhere (synthesis, registration, solver): a motion p maps
reference coordinates q to frame coordinates u,

    u = T_p(q) = A (q - c) + c + t,

with (x, y) = (column, row) order, c = image center ((W-1)/2, (H-1)/2), and
A = I for translation, A = R(theta) for Euclidean, A = I + M for affine.
Warping an image by p therefore samples the reference at T_p^{-1}(u) for every
output pixel u; positive tx moves content toward +x. The identity motion is
the all-zeros parameter vector for every model.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class MotionModel(Enum):
    TRANSLATION = "translation"
    EUCLIDEAN = "euclidean"
    AFFINE = "affine"

    @property
    def n_params(self) -> int:
        return {MotionModel.TRANSLATION: 2,
                MotionModel.EUCLIDEAN: 3,
                MotionModel.AFFINE: 6}[self]


@dataclass
class MotionParams:
    """Parameter vector for one frame.

    Layout: translation (tx, ty); Euclidean (tx, ty, theta) with theta in
    radians; affine (tx, ty, a11, a12, a21, a22) where A = I + [[a11,a12],
    [a21,a22]]. Translations are in pixels at the scale of the image the
    motion acts on.
    """

    model: MotionModel = MotionModel.EUCLIDEAN
    p: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.p is None:
            self.p = np.zeros(self.model.n_params)
        self.p = np.asarray(self.p, dtype=np.float64)
        if self.p.shape != (self.model.n_params,):
            raise ValueError(f"{self.model.value} motion needs "
                             f"{self.model.n_params} parameters, got {self.p.shape}")
        if not np.all(np.isfinite(self.p)):
            raise ValueError("motion parameters must be finite")

    @classmethod
    def identity(cls, model: MotionModel = MotionModel.EUCLIDEAN) -> "MotionParams":
        return cls(model, np.zeros(model.n_params))

    @property
    def is_identity(self) -> bool:
        return bool(np.all(self.p == 0.0))

    @property
    def translation(self) -> np.ndarray:
        return self.p[:2]

    def linear_part(self) -> np.ndarray:
        """The 2x2 matrix A of the coordinate map."""
        if self.model == MotionModel.TRANSLATION:
            return np.eye(2)
        if self.model == MotionModel.EUCLIDEAN:
            c, s = np.cos(self.p[2]), np.sin(self.p[2])
            return np.array([[c, -s], [s, c]])
        a11, a12, a21, a22 = self.p[2:]
        return np.array([[1.0 + a11, a12], [a21, 1.0 + a22]])

    def scaled(self, factor: float) -> "MotionParams":
        """Same motion expressed on a grid scaled by `factor` (e.g. LR -> HR).

        Translations scale; the linear part (rotation/affine terms) does not.
        Exact for translations; for rotating models the center offset between
        scales is a fraction of a pixel and is ignored.
        """
        q = self.p.copy()
        q[:2] *= factor
        return MotionParams(self.model, q)

    def ref_to_frame(self, coords_xy: np.ndarray, center_xy: np.ndarray) -> np.ndarray:
        """Apply T_p to an (..., 2) array of (x, y) reference coordinates."""
        a = self.linear_part()
        v = coords_xy - center_xy
        return v @ a.T + center_xy + self.translation

    def frame_to_ref(self, coords_xy: np.ndarray, center_xy: np.ndarray) -> np.ndarray:
        """Apply T_p^{-1} to an (..., 2) array of (x, y) frame coordinates."""
        a_inv = np.linalg.inv(self.linear_part())
        v = coords_xy - center_xy - self.translation
        return v @ a_inv.T + center_xy
