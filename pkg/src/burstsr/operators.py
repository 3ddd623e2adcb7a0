"""Linear observation operator: warp W_p, blur B, decimate+mosaic D.

Each stage has an exact adjoint (the transpose of the same sampling/convolution
matrix), so gradients and conjugate-gradient solves on the normal equations are
consistent to machine precision. Boundary policy is zero outside the domain
plus a validity mask, which keeps every stage exactly linear.

Per-frame observation: y_k = M_k D B W_{p_k} x, where M_k zeroes LR pixels
whose warped-and-blurred footprint left the HR domain. The warp convention
lives in `motion.py`: W_p samples the reference at T_p^{-1}(u).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.ndimage import convolve1d, correlate1d, minimum_filter1d

from .bayer import Burst, CfaPattern, RawBayerImage, RgbImage, mosaic_array
from .errors import DimensionError
from .motion import MotionModel, MotionParams

# ---------------------------------------------------------------------------
# blur kernels


@dataclass(frozen=True)
class BlurKernel:
    """Separable blur with odd-length 1-D taps summing to 1."""

    taps: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "taps", np.asarray(self.taps, dtype=np.float64))
        if self.taps.ndim != 1 or len(self.taps) % 2 == 0:
            raise ValueError("blur taps must be a 1-D odd-length vector")
        if abs(self.taps.sum() - 1.0) > 1e-9:
            raise ValueError("blur taps must sum to 1")

    @classmethod
    def delta(cls) -> "BlurKernel":
        return cls(np.array([1.0]))

    @property
    def radius(self) -> int:
        return len(self.taps) // 2

    @property
    def is_delta(self) -> bool:
        return len(self.taps) == 1


def box_kernel(width: int) -> BlurKernel:
    """Pixel-integration box of the given width as symmetric odd taps.

    Even widths are realized with half-weight end taps ([1,2,...,2,1]/2w),
    which is the width-w box sampled at integer offsets.
    """
    if width < 1:
        raise ValueError("box width must be >= 1")
    if width % 2:
        taps = np.full(width, 1.0 / width)
    else:
        taps = np.full(width + 1, 1.0 / width)
        taps[0] = taps[-1] = 0.5 / width
    return BlurKernel(taps)


def gaussian_kernel(sigma: float, radius: int | None = None) -> BlurKernel:
    if sigma <= 0:
        return BlurKernel.delta()
    if radius is None:
        radius = max(1, int(np.ceil(3.0 * sigma)))
    u = np.arange(-radius, radius + 1, dtype=np.float64)
    taps = np.exp(-0.5 * (u / sigma) ** 2)
    return BlurKernel(taps / taps.sum())


# ---------------------------------------------------------------------------
# observation model


@dataclass
class ObservationModel:
    """Dimensions, kernel and CFA of the stacked operator U_p.

    `cfa=None` disables spectral decimation (frames stay 3-channel), which is
    useful for reduced test systems.
    """

    lr_shape: tuple[int, int]
    sr_factor: int = 4
    kernel: BlurKernel = None
    cfa: CfaPattern | None = field(default_factory=CfaPattern)

    def __post_init__(self):
        if self.sr_factor < 1:
            raise ValueError("sr_factor must be >= 1")
        if self.kernel is None:
            self.kernel = box_kernel(self.sr_factor)
        h, w = self.lr_shape
        if self.cfa is not None and (h % 2 or w % 2):
            raise DimensionError(f"LR dims must be even for mosaicking, got {h}x{w}")

    @property
    def hr_shape(self) -> tuple[int, int]:
        return (self.lr_shape[0] * self.sr_factor, self.lr_shape[1] * self.sr_factor)


# ---------------------------------------------------------------------------
# bilinear sampling machinery


def _grid_coords(shape: tuple[int, int]) -> np.ndarray:
    h, w = shape
    ys, xs = np.meshgrid(np.arange(h, dtype=np.float64),
                         np.arange(w, dtype=np.float64), indexing="ij")
    return np.stack([xs, ys], axis=-1)


def _center(shape: tuple[int, int]) -> np.ndarray:
    h, w = shape
    return np.array([(w - 1) / 2.0, (h - 1) / 2.0])


def bilinear_taps(sx: np.ndarray, sy: np.ndarray, shape: tuple[int, int]):
    """Tap indices/weights for bilinear sampling of an HxW image.

    Returns (idx, wts, valid): idx and wts have shape (4, N) over flattened
    sample points; weights are zeroed where the sampling footprint leaves the
    domain, so gather (apply) and scatter-add (adjoint) share them.
    """
    h, w = shape
    sx = sx.ravel()
    sy = sy.ravel()
    eps = 1e-9  # do not invalidate samples that grazed the border by rounding
    valid = (sx >= -eps) & (sx <= w - 1 + eps) & (sy >= -eps) & (sy <= h - 1 + eps)
    x0 = np.floor(sx)
    y0 = np.floor(sy)
    fx = sx - x0
    fy = sy - y0
    x0 = x0.astype(np.intp)
    y0 = y0.astype(np.intp)
    x0c = np.clip(x0, 0, w - 1)
    x1c = np.clip(x0 + 1, 0, w - 1)
    y0c = np.clip(y0, 0, h - 1)
    y1c = np.clip(y0 + 1, 0, h - 1)
    idx = np.stack([y0c * w + x0c, y0c * w + x1c, y1c * w + x0c, y1c * w + x1c])
    wts = np.stack([(1 - fy) * (1 - fx), (1 - fy) * fx, fy * (1 - fx), fy * fx])
    wts *= valid
    return idx, wts, valid


def _gather(img: np.ndarray, idx: np.ndarray, wts: np.ndarray,
            out_shape: tuple[int, int]) -> np.ndarray:
    flat = img.reshape(-1, img.shape[2]) if img.ndim == 3 else img.reshape(-1, 1)
    out = np.zeros((idx.shape[1], flat.shape[1]))
    for t in range(4):
        out += wts[t][:, None] * flat[idx[t]]
    if img.ndim == 3:
        return out.reshape(out_shape + (img.shape[2],))
    return out[:, 0].reshape(out_shape)


def _scatter(img: np.ndarray, idx: np.ndarray, wts: np.ndarray,
             out_shape: tuple[int, int]) -> np.ndarray:
    n = out_shape[0] * out_shape[1]
    flat = img.reshape(-1, img.shape[2]) if img.ndim == 3 else img.reshape(-1, 1)
    out = np.zeros((n, flat.shape[1]))
    for c in range(flat.shape[1]):
        vals = flat[:, c]
        acc = np.zeros(n)
        for t in range(4):
            acc += np.bincount(idx[t], weights=wts[t] * vals, minlength=n)
        out[:, c] = acc
    if img.ndim == 3:
        return out.reshape(out_shape + (img.shape[2],))
    return out[:, 0].reshape(out_shape)


def warp_sampler(motion: MotionParams, shape: tuple[int, int]):
    """Precompute bilinear taps for warping an image of `shape` by `motion`."""
    coords = _grid_coords(shape)
    src = motion.frame_to_ref(coords, _center(shape))
    return bilinear_taps(src[..., 0], src[..., 1], shape)


def warp_apply_array(x: np.ndarray, motion: MotionParams,
                     sampler=None) -> tuple[np.ndarray, np.ndarray]:
    """(W_p x, validity mask). Identity motions short-circuit to a copy."""
    shape = x.shape[:2]
    if sampler is None:
        if motion.is_identity:
            return x.copy(), np.ones(shape, dtype=bool)
        sampler = warp_sampler(motion, shape)
    idx, wts, valid = sampler
    return _gather(x, idx, wts, shape), valid.reshape(shape)


def warp_adjoint_array(y: np.ndarray, motion: MotionParams,
                       sampler=None) -> np.ndarray:
    shape = y.shape[:2]
    if sampler is None:
        if motion.is_identity:
            return y.copy()
        sampler = warp_sampler(motion, shape)
    idx, wts, _ = sampler
    return _scatter(y, idx, wts, shape)


def warp_dense(img: np.ndarray, flow_x: np.ndarray,
               flow_y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sample img at (x + flow_x, y + flow_y); returns (warped, valid mask)."""
    shape = img.shape[:2]
    coords = _grid_coords(shape)
    idx, wts, valid = bilinear_taps(coords[..., 0] + flow_x, coords[..., 1] + flow_y, shape)
    return _gather(img, idx, wts, shape), valid.reshape(shape)


def upsample_bilinear(img: np.ndarray, factor: int) -> np.ndarray:
    """Bilinear zoom matching the decimation phase (LR pixel i sits at HR s*i)."""
    h, w = img.shape[:2]
    ys = np.clip(np.arange(h * factor, dtype=np.float64) / factor, 0, h - 1)
    xs = np.clip(np.arange(w * factor, dtype=np.float64) / factor, 0, w - 1)
    gx, gy = np.meshgrid(xs, ys)
    idx, wts, _ = bilinear_taps(gx, gy, (h, w))
    return _gather(img, idx, wts, (h * factor, w * factor))


# ---------------------------------------------------------------------------
# motion jacobians


def _coord_jacobian(motion: MotionParams, coords_xy: np.ndarray,
                    center_xy: np.ndarray) -> np.ndarray:
    """d(T_p^{-1}(u))/dp_j, shape (n_params, H, W, 2)."""
    v = coords_xy - center_xy - motion.translation
    n = motion.model.n_params
    out = np.zeros((n,) + coords_xy.shape)
    if motion.model == MotionModel.TRANSLATION:
        out[0, ..., 0] = -1.0
        out[1, ..., 1] = -1.0
        return out
    a_inv = np.linalg.inv(motion.linear_part())
    out[0] = -a_inv[:, 0]
    out[1] = -a_inv[:, 1]
    if motion.model == MotionModel.EUCLIDEAN:
        th = motion.p[2]
        c, s = np.cos(th), np.sin(th)
        # d(R^T)/dtheta applied to v
        out[2, ..., 0] = -s * v[..., 0] + c * v[..., 1]
        out[2, ..., 1] = -c * v[..., 0] - s * v[..., 1]
        return out
    # affine: d(A^{-1} v)/da_kl = -A^{-1} E_kl A^{-1} v
    w_vec = v @ a_inv.T
    for j, (k, l) in enumerate([(0, 0), (0, 1), (1, 0), (1, 1)]):
        out[2 + j] = -w_vec[..., l][..., None] * a_inv[:, k]
    return out


def warp_jacobian(x: np.ndarray, motion: MotionParams) -> np.ndarray:
    """d(W_p x)/dp as an (n_params, ...) stack of images shaped like x.

    Uses the exact coordinate derivative of the bilinear interpolant, so the
    result is the true derivative of `warp_apply_array` wherever the sampling
    point does not cross a pixel-cell boundary.
    """
    shape = x.shape[:2]
    h, w = shape
    coords = _grid_coords(shape)
    center = _center(shape)
    src = motion.frame_to_ref(coords, center)
    sx, sy = src[..., 0].ravel(), src[..., 1].ravel()
    valid = (sx >= 0) & (sx <= w - 1) & (sy >= 0) & (sy <= h - 1)
    x0 = np.floor(sx).astype(np.intp)
    y0 = np.floor(sy).astype(np.intp)
    fx = sx - x0
    fy = sy - y0
    x0c, x1c = np.clip(x0, 0, w - 1), np.clip(x0 + 1, 0, w - 1)
    y0c, y1c = np.clip(y0, 0, h - 1), np.clip(y0 + 1, 0, h - 1)
    flat = x.reshape(-1, x.shape[2]) if x.ndim == 3 else x.reshape(-1, 1)
    v00, v01 = flat[y0c * w + x0c], flat[y0c * w + x1c]
    v10, v11 = flat[y1c * w + x0c], flat[y1c * w + x1c]
    gx = (v01 - v00) * (1 - fy)[:, None] + (v11 - v10) * fy[:, None]
    gy = (v10 - v00) * (1 - fx)[:, None] + (v11 - v01) * fx[:, None]
    gx *= valid[:, None]
    gy *= valid[:, None]
    dsrc = _coord_jacobian(motion, coords, center)
    jac = np.empty((motion.model.n_params,) + x.shape)
    for j in range(motion.model.n_params):
        comp = gx * dsrc[j, ..., 0].ravel()[:, None] + gy * dsrc[j, ..., 1].ravel()[:, None]
        jac[j] = comp.reshape(x.shape) if x.ndim == 3 else comp[:, 0].reshape(shape)
    return jac


# ---------------------------------------------------------------------------
# blur and decimate/mosaic stages


def blur_apply_array(x: np.ndarray, kernel: BlurKernel) -> np.ndarray:
    if kernel.is_delta:
        return x.copy()
    out = convolve1d(x, kernel.taps, axis=0, mode="constant", cval=0.0)
    return convolve1d(out, kernel.taps, axis=1, mode="constant", cval=0.0)


def blur_adjoint_array(y: np.ndarray, kernel: BlurKernel) -> np.ndarray:
    if kernel.is_delta:
        return y.copy()
    out = correlate1d(y, kernel.taps, axis=0, mode="constant", cval=0.0)
    return correlate1d(out, kernel.taps, axis=1, mode="constant", cval=0.0)


def decimate_mosaic_apply_array(x: np.ndarray, model: ObservationModel) -> np.ndarray:
    s = model.sr_factor
    h, w = x.shape[:2]
    if h % s or w % s:
        raise DimensionError(f"dims {h}x{w} not divisible by factor {s}")
    xs = x[::s, ::s]
    if model.cfa is None:
        return xs.copy()
    return mosaic_array(xs, model.cfa)


def decimate_mosaic_adjoint_array(y: np.ndarray, model: ObservationModel) -> np.ndarray:
    s = model.sr_factor
    if model.cfa is not None:
        cmap = model.cfa.channel_map(*y.shape[:2])
        rgb = np.zeros(y.shape[:2] + (3,))
        np.put_along_axis(rgb, cmap[:, :, None], y[:, :, None], axis=2)
    else:
        rgb = y
    out = np.zeros((rgb.shape[0] * s, rgb.shape[1] * s, rgb.shape[2]))
    out[::s, ::s] = rgb
    return out


def lr_valid_mask(hr_valid: np.ndarray, kernel: BlurKernel, s: int) -> np.ndarray:
    """LR pixels whose blur support touched only warp-valid HR pixels."""
    m = hr_valid.astype(np.float64)
    if not kernel.is_delta:
        size = len(kernel.taps)
        m = minimum_filter1d(m, size, axis=0, mode="constant", cval=0.0)
        m = minimum_filter1d(m, size, axis=1, mode="constant", cval=0.0)
    return m[::s, ::s] > 0.5


# ---------------------------------------------------------------------------
# stacked burst operator


def _warp_matrix(motion: MotionParams, shape: tuple[int, int]) -> sp.csr_matrix:
    """The HR->HR bilinear sampling matrix of W_p (already mask-zeroed)."""
    n = shape[0] * shape[1]
    if motion.is_identity:
        return sp.identity(n, format="csr")
    idx, wts, _ = warp_sampler(motion, shape)
    rows = np.tile(np.arange(n), 4)
    mat = sp.coo_matrix((wts.ravel(), (rows, idx.ravel())), shape=(n, n))
    return mat.tocsr()


def _decimate_blur_matrix(model: ObservationModel) -> sp.csr_matrix:
    """D*B on one channel: rows are LR pixels, columns HR pixels (zero-padded)."""
    hh, ww = model.hr_shape
    lh, lw = model.lr_shape
    s = model.sr_factor
    taps = model.kernel.taps
    r = model.kernel.radius
    ly, lx = np.meshgrid(np.arange(lh), np.arange(lw), indexing="ij")
    hy0 = (ly * s).ravel()
    hx0 = (lx * s).ravel()
    rows_all, cols_all, vals_all = [], [], []
    lr_rows = np.arange(lh * lw)
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            yy = hy0 + dy
            xx = hx0 + dx
            inside = (yy >= 0) & (yy < hh) & (xx >= 0) & (xx < ww)
            rows_all.append(lr_rows[inside])
            cols_all.append(yy[inside] * ww + xx[inside])
            vals_all.append(np.full(inside.sum(), taps[dy + r] * taps[dx + r]))
    mat = sp.coo_matrix((np.concatenate(vals_all),
                         (np.concatenate(rows_all), np.concatenate(cols_all))),
                        shape=(lh * lw, hh * ww))
    return mat.tocsr()


class BurstOperator:
    """U_p and its exact adjoint, precomputed once per motion set.

    Each frame's D*B*W_{p_k} chain (including the CFA channel selection and
    the validity mask) is composed into one sparse matrix, so repeated
    applications inside CG/PGD cost a single sparse matvec per frame. The
    matrices are built from the same samplers as the functional operator
    chain and agree with it to machine precision.
    """

    def __init__(self, model: ObservationModel, motions: list[MotionParams]):
        self.model = model
        self.motions = list(motions)
        hr = model.hr_shape
        n = hr[0] * hr[1]
        db = _decimate_blur_matrix(model)
        if model.cfa is not None:
            cmap_lr = model.cfa.channel_map(*model.lr_shape).ravel()
        self.masks = []
        self._mats = []
        self._mats_t = []
        for p in self.motions:
            if p.is_identity:
                hr_valid = np.ones(hr, dtype=bool)
                m = db.copy()
            else:
                sampler = warp_sampler(p, hr)
                hr_valid = sampler[2].reshape(hr)
                rows = np.tile(np.arange(n), 4)
                wmat = sp.coo_matrix((sampler[1].ravel(), (rows, sampler[0].ravel())),
                                     shape=(n, n)).tocsr()
                m = db @ wmat
            mask = lr_valid_mask(hr_valid, model.kernel, model.sr_factor)
            self.masks.append(mask)
            if model.cfa is not None:
                # route each LR row to its CFA channel's column block
                row_nnz = np.diff(m.indptr)
                chan = np.repeat(cmap_lr, row_nnz)
                row_mask = np.repeat(mask.ravel(), row_nnz)
                u = sp.csr_matrix((m.data * row_mask, m.indices * 3 + chan, m.indptr),
                                  shape=(m.shape[0], 3 * n))
            else:
                mm = sp.csr_matrix((m.data * np.repeat(mask.ravel(), np.diff(m.indptr)),
                                    m.indices, m.indptr), shape=m.shape)
                u = sp.kron(mm, sp.identity(3, format="csr"), format="csr")
            u.sum_duplicates()
            self._mats.append(u)
            self._mats_t.append(u.T.tocsr())

    def __len__(self) -> int:
        return len(self.motions)

    def _frame_shape(self) -> tuple:
        if self.model.cfa is not None:
            return self.model.lr_shape
        return self.model.lr_shape + (3,)

    def apply_frame(self, x: np.ndarray, k: int) -> np.ndarray:
        return (self._mats[k] @ x.ravel()).reshape(self._frame_shape())

    def adjoint_frame(self, y: np.ndarray, k: int) -> np.ndarray:
        return (self._mats_t[k] @ y.ravel()).reshape(self.model.hr_shape + (3,))

    def apply(self, x: np.ndarray) -> list[np.ndarray]:
        flat = x.ravel()
        shape = self._frame_shape()
        return [(m @ flat).reshape(shape) for m in self._mats]

    def adjoint(self, frames: list[np.ndarray]) -> np.ndarray:
        acc = np.zeros(self.model.hr_shape[0] * self.model.hr_shape[1] * 3)
        for mt, y in zip(self._mats_t, frames):
            acc += mt @ y.ravel()
        return acc.reshape(self.model.hr_shape + (3,))

    def normal(self, x: np.ndarray) -> np.ndarray:
        return self.adjoint(self.apply(x))

    def _mask_like(self, f: np.ndarray, k: int) -> np.ndarray:
        m = self.masks[k]
        return m[:, :, None] if f.ndim == 3 else m


def apply_frame_chain(x: np.ndarray, motion: MotionParams,
                      model: ObservationModel) -> tuple[np.ndarray, np.ndarray]:
    """One frame of the forward model via the functional chain (reference path).

    Returns (masked frame, LR validity mask); agrees with BurstOperator.
    """
    w, hr_valid = warp_apply_array(x, motion)
    b = blur_apply_array(w, model.kernel)
    f = decimate_mosaic_apply_array(b, model)
    mask = lr_valid_mask(hr_valid, model.kernel, model.sr_factor)
    return f * (mask if f.ndim == 2 else mask[:, :, None]), mask


def adjoint_frame_chain(y: np.ndarray, motion: MotionParams,
                        model: ObservationModel, mask: np.ndarray) -> np.ndarray:
    y = y * (mask if y.ndim == 2 else mask[:, :, None])
    u = decimate_mosaic_adjoint_array(y, model)
    b = blur_adjoint_array(u, model.kernel)
    return warp_adjoint_array(b, motion)


# ---------------------------------------------------------------------------
# typed wrappers matching the container types


def warp(x: RgbImage, p: MotionParams, direction: str = "apply"):
    """Warp an HR image (or transpose-warp it for direction='adjoint')."""
    if direction == "apply":
        out, mask = warp_apply_array(x.data, p)
        return RgbImage(out, x.colorspace), mask
    if direction == "adjoint":
        return RgbImage(warp_adjoint_array(x.data, p), x.colorspace)
    raise ValueError(f"unknown direction {direction!r}")


def blur(x: RgbImage, kernel: BlurKernel, direction: str = "apply") -> RgbImage:
    fn = blur_apply_array if direction == "apply" else blur_adjoint_array
    return RgbImage(fn(x.data, kernel), x.colorspace)


def decimate_mosaic(x, model: ObservationModel, direction: str = "apply"):
    if direction == "apply":
        out = decimate_mosaic_apply_array(x.data, model)
        if model.cfa is None:
            return RgbImage(out, x.colorspace)
        return RawBayerImage(out, model.cfa)
    raw = x.data if hasattr(x, "data") else np.asarray(x)
    return RgbImage(decimate_mosaic_adjoint_array(raw, model), "linear")


def forward(x, motions: list[MotionParams], model: ObservationModel,
            direction: str = "apply"):
    """Apply the stacked operator: x -> (frames, masks), or its adjoint."""
    op = BurstOperator(model, motions)
    if direction == "apply":
        frames = op.apply(x.data if isinstance(x, RgbImage) else x)
        return frames, op.masks
    frames = x.frames if isinstance(x, Burst) else x
    arrays = [f.data if isinstance(f, RawBayerImage) else f for f in frames]
    return op.adjoint(arrays)
