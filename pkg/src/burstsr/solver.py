"""Joint HR image and motion estimation from a RAW burst.

Two solvers over the same masked observation operator U_p:

* hqs_solve: half-quadratic splitting with an auxiliary variable z and an
  increasing penalty mu_t. The z-step is a conjugate-gradient solve of
  (U^T U + mu I) z = U^T y + mu x, the x-step is the prior's prox, and the
  optional p-step refines per-frame motions by Gauss-Newton.
* pgd_solve: proximal gradient descent on
  1/(2 sigma^2 K) sum_k ||y_k - U_k x||^2 + lambda R(x),
  with the step picked from a power-iteration estimate of the Lipschitz
  constant.

Both record per-iteration energies so descent is checkable, and both are
deterministic for fixed inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bayer import Burst, RawBayerImage, RgbImage, demosaic_bilinear_array
from .camera import NoiseParams
from .errors import SolverNumericalError
from .motion import MotionParams
from .operators import (BurstOperator, ObservationModel, apply_frame_chain,
                        blur_apply_array, decimate_mosaic_apply_array,
                        upsample_bilinear, warp_jacobian)
from .priors import NoPrior


@dataclass
class HqsConfig:
    outer_iters: int = 6
    mu0: float = 1e-2
    mu_growth: float = 4.0
    lam: float = 1e-3
    cg_iters: int = 50
    cg_tol: float = 1e-6
    motion_refine: bool = False
    gn_iters: int = 3
    alternations_per_mu: int = 1  # extra z/x passes tighten each penalty subproblem

    def __post_init__(self):
        if self.mu0 <= 0 or self.mu_growth <= 1.0:
            raise ValueError("need mu0 > 0 and mu_growth > 1 for an increasing schedule")
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        if self.alternations_per_mu < 1:
            raise ValueError("need at least one z/x pass per mu")

    def mu(self, t: int) -> float:
        return self.mu0 * self.mu_growth ** t


@dataclass
class PgdConfig:
    iters: int = 200
    lam: float = 1e-3
    step: float | None = None       # None -> 1 / L via power iteration
    sigma2: float | None = None     # None -> from noise params and burst mean
    noise: NoiseParams | None = None
    power_iters: int = 20

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be non-negative")


@dataclass
class SrEstimate:
    image: RgbImage
    motions: list[MotionParams]
    diagnostics: dict = field(default_factory=dict)


def _frame_arrays(burst) -> list[np.ndarray]:
    if isinstance(burst, Burst):
        return [f.data for f in burst.frames]
    return [f.data if isinstance(f, RawBayerImage) else np.asarray(f, dtype=np.float64)
            for f in burst]


def _vdot(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.vdot(a, b))


def single_frame_baseline(frame0: np.ndarray, model: ObservationModel) -> np.ndarray:
    """Classical floor: bilinear demosaic of the reference + bilinear upsample."""
    rgb_lr = demosaic_bilinear_array(frame0, model.cfa) if model.cfa is not None else frame0
    if model.sr_factor == 1:
        return rgb_lr.copy()
    return upsample_bilinear(rgb_lr, model.sr_factor)


def init_estimate(burst, motions: list[MotionParams], model: ObservationModel,
                  op: BurstOperator | None = None) -> np.ndarray:
    """Weighted shift-and-add: adjoint of the data over adjoint of ones.

    HR pixels no frame covers fall back to the upsampled demosaicked reference.
    """
    frames = _frame_arrays(burst)
    if op is None:
        op = BurstOperator(model, motions)
    num = op.adjoint(frames)
    den = op.adjoint([np.ones_like(f) for f in frames])
    x0 = num / (den + 1e-8)
    fallback = single_frame_baseline(frames[0], model)
    uncovered = den < 1e-6
    x0[uncovered] = fallback[uncovered]
    return x0


def _masked_frames(frames: list[np.ndarray], op: BurstOperator) -> list[np.ndarray]:
    return [f * op._mask_like(f, k) for k, f in enumerate(frames)]


def _data_term(x: np.ndarray, my: list[np.ndarray], op: BurstOperator) -> float:
    pred = op.apply(x)
    return 0.5 * sum(_vdot(y - p, y - p) for y, p in zip(my, pred))


def hqs_energy(x, z, my, op, mu, lam, prior) -> float:
    return _data_term(z, my, op) + 0.5 * mu * _vdot(z - x, z - x) + lam * prior.value(x)


def z_step(x: np.ndarray, op: BurstOperator, my: list[np.ndarray], mu: float,
           cg_iters: int = 50, cg_tol: float = 1e-6,
           z0: np.ndarray | None = None) -> tuple[np.ndarray, list[float]]:
    """CG on (U^T U + mu I) z = U^T y + mu x, warm-started at z0 (or x)."""
    b = op.adjoint(my) + mu * x
    z = (z0 if z0 is not None else x).copy()
    r = b - (op.normal(z) + mu * z)
    d = r.copy()
    rs = _vdot(r, r)
    b_norm = np.sqrt(_vdot(b, b)) + 1e-300
    residuals = [np.sqrt(rs) / b_norm]
    for _ in range(cg_iters):
        if residuals[-1] <= cg_tol:
            break
        ad = op.normal(d) + mu * d
        alpha = rs / _vdot(d, ad)
        z += alpha * d
        r -= alpha * ad
        rs_new = _vdot(r, r)
        if not np.isfinite(rs_new):
            raise SolverNumericalError("CG produced non-finite residual",
                                       dict(residuals=residuals))
        d = r + (rs_new / rs) * d
        rs = rs_new
        residuals.append(np.sqrt(rs) / b_norm)
    return z, residuals


def x_step(z: np.ndarray, mu: float, lam: float, prior) -> np.ndarray:
    """Prox of the prior at strength lam/mu."""
    if lam == 0:
        return z.copy()
    return prior.prox(z, lam / mu)


def p_step(x: np.ndarray, frames: list[np.ndarray], motions: list[MotionParams],
           model: ObservationModel, gn_iters: int = 3,
           max_halvings: int = 5) -> tuple[list[MotionParams], list[bool]]:
    """Gauss-Newton refinement of p_k against the current x; frame 0 stays fixed."""
    refined = [motions[0]]
    flags = [False]
    for k in range(1, len(motions)):
        p = motions[k]
        singular = False
        for _ in range(gn_iters):
            pred, mask = apply_frame_chain(x, p, model)
            mask3 = mask if pred.ndim == 2 else mask[:, :, None]
            r = frames[k] * mask3 - pred
            jac_hr = warp_jacobian(x, p)
            cols = []
            for j in range(p.model.n_params):
                lr = decimate_mosaic_apply_array(
                    blur_apply_array(jac_hr[j], model.kernel), model)
                cols.append((lr * mask3).ravel())
            jmat = np.stack(cols, axis=1)
            hess = jmat.T @ jmat
            if not np.all(np.isfinite(hess)) or np.linalg.cond(hess) > 1e8:
                singular = True
                break
            step = np.linalg.solve(hess, jmat.T @ r.ravel())
            cost = _vdot(r, r)
            accepted = False
            for _ in range(max_halvings + 1):
                cand = MotionParams(p.model, p.p + step)
                cand_pred, cand_mask = apply_frame_chain(x, cand, model)
                cm3 = cand_mask if cand_pred.ndim == 2 else cand_mask[:, :, None]
                cand_r = frames[k] * cm3 - cand_pred
                if _vdot(cand_r, cand_r) <= cost:
                    accepted = True
                    break
                step = step / 2.0
            if not accepted:
                break
            p = cand
        refined.append(p)
        flags.append(singular)
    return refined, flags


def hqs_solve(burst, init_motions: list[MotionParams], model: ObservationModel,
              prior=None, cfg: HqsConfig | None = None) -> SrEstimate:
    cfg = cfg or HqsConfig()
    prior = prior or NoPrior()
    frames = _frame_arrays(burst)
    motions = list(init_motions)
    op = BurstOperator(model, motions)
    my = _masked_frames(frames, op)
    x = init_estimate(frames, motions, model, op=op)
    z = x.copy()
    diag = dict(mu=[], energy_entry=[], energy_after_z=[], energy_after_x=[],
                data_term=[], cg_residuals=[], p_flags=[])
    for t in range(cfg.outer_iters):
        mu = cfg.mu(t)
        for _ in range(cfg.alternations_per_mu):
            diag["mu"].append(mu)
            diag["energy_entry"].append(hqs_energy(x, z, my, op, mu, cfg.lam, prior))
            try:
                z, res = z_step(x, op, my, mu, cfg.cg_iters, cfg.cg_tol, z0=z)
            except SolverNumericalError as err:
                err.diagnostics = dict(diag, failed_iteration=t, cg=err.diagnostics)
                raise
            diag["cg_residuals"].append(res)
            diag["energy_after_z"].append(hqs_energy(x, z, my, op, mu, cfg.lam, prior))
            x = x_step(z, mu, cfg.lam, prior)
            diag["energy_after_x"].append(hqs_energy(x, z, my, op, mu, cfg.lam, prior))
            diag["data_term"].append(_data_term(x, my, op))
        if cfg.motion_refine:
            motions, flags = p_step(x, frames, motions, model, cfg.gn_iters)
            diag["p_flags"].append(flags)
            op = BurstOperator(model, motions)
            my = _masked_frames(frames, op)
    return SrEstimate(RgbImage(x, "linear"), motions, diag)


def estimate_sigma2(frames: list[np.ndarray], noise: NoiseParams | None) -> float:
    """Per-pixel noise variance proxy: shot_slope * mean(y) + read_var."""
    if noise is None:
        noise = NoiseParams()
    mean = float(np.mean([f.mean() for f in frames]))
    return max(float(noise.shot_slope * max(mean, 0.0) + noise.read_var), 1e-8)


def _power_iteration_step(op: BurstOperator, weight: float, iters: int) -> float:
    rng = np.random.default_rng(0)
    v = rng.standard_normal(op.model.hr_shape + (3,))
    v /= np.sqrt(_vdot(v, v))
    lam = 0.0
    for _ in range(iters):
        w = weight * op.normal(v)
        lam = _vdot(v, w)
        norm = np.sqrt(_vdot(w, w))
        if norm == 0:
            return 1e-12
        v = w / norm
    return max(lam, 1e-12)


def pgd_solve(burst, motions: list[MotionParams], model: ObservationModel,
              prior=None, cfg: PgdConfig | None = None) -> SrEstimate:
    cfg = cfg or PgdConfig()
    prior = prior or NoPrior()
    frames = _frame_arrays(burst)
    op = BurstOperator(model, motions)
    my = _masked_frames(frames, op)
    sigma2 = cfg.sigma2 if cfg.sigma2 is not None else estimate_sigma2(frames, cfg.noise)
    weight = 1.0 / (sigma2 * len(frames))
    if cfg.step is not None:
        alpha = cfg.step
        lipschitz = None
    else:
        # 5% safety margin on the power-iteration estimate keeps alpha <= 1/L
        lipschitz = 1.05 * _power_iteration_step(op, weight, cfg.power_iters)
        alpha = 1.0 / lipschitz
    x = init_estimate(frames, motions, model, op=op)
    diag = dict(objective=[], sigma2=sigma2, step=alpha, lipschitz=lipschitz)
    for j in range(cfg.iters + 1):
        pred = op.apply(x)
        resid = [y - p for y, p in zip(my, pred)]
        f = 0.5 * weight * sum(_vdot(r, r) for r in resid)
        diag["objective"].append(f + cfg.lam * prior.value(x))
        if j == cfg.iters:
            break
        grad = -weight * op.adjoint(resid)
        if not np.all(np.isfinite(grad)):
            raise SolverNumericalError("non-finite gradient in PGD",
                                       dict(diag, failed_iteration=j))
        x = prior.prox(x - alpha * grad, alpha * cfg.lam) if cfg.lam > 0 \
            else x - alpha * grad
    return SrEstimate(RgbImage(x, "linear"), list(motions), diag)
