"""Coarse parametric motion estimation with robust multiscale Lucas-Kanade.

Forward-additive Gauss-Newton on the robustified SSD

    cost(p) = sum_u rho( ref(T_p^{-1}(u)) - mov(u) )

with a Huber rho, i.e. the fitted p satisfies warp(ref, p) ~ mov under the
package-wide warp convention. Out-of-bounds samples are excluded from the
residual; steps that would increase the cost are halved and finally reverted,
so the per-level cost never increases.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from .bayer import Burst, raw_to_gray
from .errors import DimensionError
from .motion import MotionModel, MotionParams
from .operators import _center, _coord_jacobian, _grid_coords, bilinear_taps


@dataclass
class LkConfig:
    pyramid_levels: int = 3
    iters_per_level: int = 50
    robust_threshold: float = 0.05  # Huber delta, linear intensity units
    convergence_tol: float = 1e-4   # parameter-update norm
    max_halvings: int = 5
    condition_limit: float = 1e8

    def __post_init__(self):
        if self.pyramid_levels < 1:
            raise ValueError("need at least one pyramid level")
        if self.robust_threshold <= 0:
            raise ValueError("robust threshold must be positive")


@dataclass
class LkResult:
    motion: MotionParams
    degenerate: bool = False
    converged: bool = True
    level_costs: list[tuple[float, float]] = field(default_factory=list)  # (entry, exit)


def build_pyramid(gray: np.ndarray, levels: int) -> list[np.ndarray]:
    """Level 0 is the input; each next level is sigma=1 Gaussian blur + 2x decimate."""
    if levels < 1:
        raise ValueError("levels must be >= 1")
    h, w = gray.shape
    if min(h, w) // (2 ** (levels - 1)) < 8:
        raise DimensionError(f"{h}x{w} image too small for {levels} pyramid levels")
    pyr = [np.asarray(gray, dtype=np.float64)]
    for _ in range(levels - 1):
        smoothed = gaussian_filter(pyr[-1], sigma=1.0, mode="mirror")
        pyr.append(smoothed[::2, ::2])
    return pyr


def _huber_cost(r: np.ndarray, delta: float) -> float:
    a = np.abs(r)
    quad = a <= delta
    return float(np.sum(0.5 * r[quad] ** 2) + np.sum(delta * (a[~quad] - 0.5 * delta)))


def _sample(img: np.ndarray, sx: np.ndarray, sy: np.ndarray):
    idx, wts, valid = bilinear_taps(sx, sy, img.shape)
    flat = img.ravel()
    out = sum(wts[t] * flat[idx[t]] for t in range(4))
    return out, valid


def _residual_cost(ref, mov, motion, coords, center, delta):
    src = motion.frame_to_ref(coords, center)
    warped, valid = _sample(ref, src[..., 0].ravel(), src[..., 1].ravel())
    r = warped[valid] - mov.ravel()[valid]
    return _huber_cost(r, delta)


def _lk_level(ref, mov, motion, cfg: LkConfig):
    """One pyramid level of robust Gauss-Newton. Returns (motion, info)."""
    gy, gx = np.gradient(ref)  # central differences on the reference
    coords = _grid_coords(mov.shape)
    center = _center(mov.shape)
    mov_flat = mov.ravel()
    delta = cfg.robust_threshold
    n = motion.model.n_params
    cost = _residual_cost(ref, mov, motion, coords, center, delta)
    entry_cost = cost
    converged = False
    for _ in range(cfg.iters_per_level):
        src = motion.frame_to_ref(coords, center)
        sx, sy = src[..., 0].ravel(), src[..., 1].ravel()
        warped, valid = _sample(ref, sx, sy)
        gxs, _ = _sample(gx, sx, sy)
        gys, _ = _sample(gy, sx, sy)
        r = warped - mov_flat
        w = np.ones_like(r)
        big = np.abs(r) > delta
        w[big] = delta / np.abs(r[big])
        w *= valid
        dsrc = _coord_jacobian(motion, coords, center)
        jac = np.empty((r.size, n))
        for j in range(n):
            jac[:, j] = gxs * dsrc[j, ..., 0].ravel() + gys * dsrc[j, ..., 1].ravel()
        jw = jac * w[:, None]
        hess = jw.T @ jac
        grad = jw.T @ r
        if not np.all(np.isfinite(hess)) or np.linalg.cond(hess) > cfg.condition_limit:
            return motion, dict(entry=entry_cost, exit=cost, degenerate=True,
                                converged=False)
        step = -np.linalg.solve(hess, grad)
        # step halving: never accept an increase of the robust cost
        accepted = False
        for _ in range(cfg.max_halvings + 1):
            cand = MotionParams(motion.model, motion.p + step)
            cand_cost = _residual_cost(ref, mov, cand, coords, center, delta)
            if cand_cost <= cost:
                accepted = True
                break
            step = step / 2.0
        if not accepted:
            break
        motion, cost = cand, cand_cost
        if np.linalg.norm(step) < cfg.convergence_tol:
            converged = True
            break
    return motion, dict(entry=entry_cost, exit=cost, degenerate=False,
                        converged=converged)


def lk_align(ref: np.ndarray, mov: np.ndarray, model: MotionModel = MotionModel.EUCLIDEAN,
             cfg: LkConfig | None = None, init: MotionParams | None = None) -> LkResult:
    """Estimate p with warp(ref, p) ~ mov, coarse to fine.

    On a degenerate normal matrix the initial motion is returned with the
    `degenerate` flag set.
    """
    cfg = cfg or LkConfig()
    if ref.shape != mov.shape:
        raise DimensionError(f"ref {ref.shape} and mov {mov.shape} differ")
    if init is None:
        init = MotionParams.identity(model)
    if init.model != model:
        raise ValueError("init motion model does not match requested model")
    ref_pyr = build_pyramid(ref, cfg.pyramid_levels)
    mov_pyr = build_pyramid(mov, cfg.pyramid_levels)
    motion = init.scaled(0.5 ** (cfg.pyramid_levels - 1))
    level_costs = []
    converged = True
    for level in range(cfg.pyramid_levels - 1, -1, -1):
        motion, info = _lk_level(ref_pyr[level], mov_pyr[level], motion, cfg)
        level_costs.append((info["entry"], info["exit"]))
        if info["degenerate"]:
            return LkResult(init, degenerate=True, converged=False, level_costs=level_costs)
        converged = info["converged"]
        if level > 0:
            motion = motion.scaled(2.0)
    return LkResult(motion, degenerate=False, converged=converged, level_costs=level_costs)


def align_burst(burst: Burst, model: MotionModel = MotionModel.EUCLIDEAN,
                cfg: LkConfig | None = None) -> list[LkResult]:
    """Align every frame to frame 0 on demosaicked grayscale; entry 0 is identity."""
    results = [LkResult(MotionParams.identity(model))]
    ref_gray = raw_to_gray(burst.frames[0])
    for frame in burst.frames[1:]:
        results.append(lk_align(ref_gray, raw_to_gray(frame), model, cfg))
    return results


# ---------------------------------------------------------------------------
# block-parametric translation flow (dense-flow stand-in for evaluation)


@dataclass
class BlockFlowConfig:
    block_size: int = 16
    pyramid_levels: int = 3
    iters_per_level: int = 8
    robust_threshold: float = 0.05
    convergence_tol: float = 1e-3
    min_valid_fraction: float = 0.5

    def levels_for(self, shape: tuple[int, int]) -> int:
        levels = self.pyramid_levels
        while levels > 1 and min(shape) // (2 ** (levels - 1)) < 2 * self.block_size:
            levels -= 1
        return levels


def _block_translation(ref, gx, gy, mov_block, rows, cols, init_t, cfg: BlockFlowConfig):
    """Translation-only LK for one block; full-image sampling of ref."""
    ys, xs = np.meshgrid(rows.astype(np.float64), cols.astype(np.float64), indexing="ij")
    mov_flat = mov_block.ravel()
    t = init_t.copy()
    delta = cfg.robust_threshold
    for _ in range(cfg.iters_per_level):
        sx = (xs - t[0]).ravel()
        sy = (ys - t[1]).ravel()
        warped, valid = _sample(ref, sx, sy)
        if valid.mean() < cfg.min_valid_fraction:
            return init_t
        gxs, _ = _sample(gx, sx, sy)
        gys, _ = _sample(gy, sx, sy)
        r = warped - mov_flat
        w = np.ones_like(r)
        big = np.abs(r) > delta
        w[big] = delta / np.abs(r[big])
        w *= valid
        jx, jy = -gxs, -gys
        h11 = np.sum(w * jx * jx)
        h12 = np.sum(w * jx * jy)
        h22 = np.sum(w * jy * jy)
        det = h11 * h22 - h12 * h12
        if not np.isfinite(det) or det < 1e-12 or min(h11, h22) <= 0:
            return t
        b1 = np.sum(w * jx * r)
        b2 = np.sum(w * jy * r)
        dtx = -(h22 * b1 - h12 * b2) / det
        dty = -(-h12 * b1 + h11 * b2) / det
        t = t + np.array([dtx, dty])
        if np.hypot(dtx, dty) < cfg.convergence_tol:
            break
    return t


def block_translation_flow(ref: np.ndarray, mov: np.ndarray,
                           cfg: BlockFlowConfig | None = None):
    """Dense displacement aligning `ref` to `mov`, block-wise and coarse to fine.

    Returns (flow_x, flow_y) such that ref sampled at (x + flow_x, y + flow_y)
    approximates mov. Per block this is the translation-model LK estimate; the
    block grid is bilinearly interpolated to per-pixel flow.
    """
    cfg = cfg or BlockFlowConfig()
    if ref.shape != mov.shape:
        raise DimensionError("images must share dimensions")
    levels = cfg.levels_for(ref.shape)
    ref_pyr = build_pyramid(ref, levels)
    mov_pyr = build_pyramid(mov, levels)
    tx = ty = None
    for level in range(levels - 1, -1, -1):
        r, m = ref_pyr[level], mov_pyr[level]
        gy, gx = np.gradient(r)
        h, w = m.shape
        nby = max(1, h // cfg.block_size)
        nbx = max(1, w // cfg.block_size)
        edges_y = np.linspace(0, h, nby + 1).astype(int)
        edges_x = np.linspace(0, w, nbx + 1).astype(int)
        cy = 0.5 * (edges_y[:-1] + edges_y[1:] - 1)
        cx = 0.5 * (edges_x[:-1] + edges_x[1:] - 1)
        if tx is None:
            tx = np.zeros((nby, nbx))
            ty = np.zeros((nby, nbx))
        else:
            tx = 2.0 * _resample_grid(tx, cy_prev, cx_prev, cy / 2.0, cx / 2.0)
            ty = 2.0 * _resample_grid(ty, cy_prev, cx_prev, cy / 2.0, cx / 2.0)
        for bi in range(nby):
            for bj in range(nbx):
                rows = np.arange(edges_y[bi], edges_y[bi + 1])
                cols = np.arange(edges_x[bj], edges_x[bj + 1])
                block = m[edges_y[bi]:edges_y[bi + 1], edges_x[bj]:edges_x[bj + 1]]
                t = _block_translation(r, gx, gy, block, rows, cols,
                                       np.array([tx[bi, bj], ty[bi, bj]]), cfg)
                tx[bi, bj], ty[bi, bj] = t
        cy_prev, cx_prev = cy, cx
    h, w = ref.shape
    ys = np.arange(h, dtype=np.float64)
    xs = np.arange(w, dtype=np.float64)
    flow_x = -_resample_grid(tx, cy_prev, cx_prev, ys, xs)
    flow_y = -_resample_grid(ty, cy_prev, cx_prev, ys, xs)
    return flow_x, flow_y


def _resample_grid(values, ys, xs, new_ys, new_xs):
    """Separable linear interpolation of a coarse grid, clamped at the borders."""
    out = np.empty((len(new_ys), values.shape[1]))
    for j in range(values.shape[1]):
        out[:, j] = np.interp(new_ys, ys, values[:, j])
    final = np.empty((len(new_ys), len(new_xs)))
    for i in range(len(new_ys)):
        final[i] = np.interp(new_xs, xs, out[i])
    return final
