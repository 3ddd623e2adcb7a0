"""Command-line front end: synth, align, sr, eval, bench.

Configuration precedence is defaults < config file < command-line flags. The
config file is flat key=value text; unknown keys are rejected with the list
of valid keys. All commands are deterministic for a fixed config and seed;
bench runtimes are printed and written to a separate timings file so the
score report itself is byte-reproducible.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .bayer import Burst, CfaPattern, RgbImage
from .burst_io import (load_png16, load_image_srgb, read_burst, save_png16,
                       write_sample)
from .camera import ColorPipelineParams, NoiseParams, SynthConfig, synthesize_burst
from .ensemble import default_descriptors, tta_solve
from .errors import SolverNumericalError
from .metrics import AlignedScoreConfig, MetricReport, psnr, ssim
from .motion import MotionModel, MotionParams
from .operators import ObservationModel
from .priors import TvPrior, make_prior
from .registration import BlockFlowConfig, LkConfig, align_burst
from .solver import (HqsConfig, PgdConfig, estimate_sigma2, hqs_solve,
                     pgd_solve, single_frame_baseline)


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


# key -> (default, parser)
CONFIG_KEYS = {
    # synthesis
    "frames": (14, int),
    "sr_factor": (4, int),
    "lr_height": (96, int),
    "lr_width": (96, int),
    "max_translation": (24.0, float),
    "max_rotation": (1.0, float),
    "shot_slope": (2.6e-3, float),
    "read_var": (2.5e-4, float),
    "noise": ("on", str),  # "off" zeroes both noise parameters
    "seed": (0, int),
    "cfa": ("RGGB", str),
    # registration
    "levels": (3, int),
    "lk_iters": (50, int),
    "huber_delta": (0.05, float),
    "conv_tol": (1e-4, float),
    "motion_model": ("euclidean", str),
    # solver
    "method": ("hqs", str),
    "prior": ("tv", str),
    "lam": (1e-3, float),
    "outer_iters": (6, int),
    "mu0": (1e-2, float),
    "mu_growth": (4.0, float),
    "cg_iters": (50, int),
    "cg_tol": (1e-6, float),
    "motion_refine": (False, _parse_bool),
    "gn_iters": (2, int),
    "pgd_iters": (100, int),
    "pgd_step": (0.0, float),    # 0 -> auto 1/L
    "sigma2": (0.0, float),      # 0 -> from noise params
    "use_gt_motion": (False, _parse_bool),
    "tta": (False, _parse_bool),
    "tta_seed": (0, int),
    # evaluation
    "peak": (1.0, float),
    "aligned": (False, _parse_bool),
    "block_size": (16, int),
    # bench
    "methods": ("baseline,hqs,pgd,hqs_tta", str),
    "threads": (1, int),
}


def load_config_file(path) -> dict:
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in CONFIG_KEYS:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}; valid keys: "
                             + ", ".join(sorted(CONFIG_KEYS)))
        values[key] = CONFIG_KEYS[key][1](raw.strip())
    return values


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = {k: default for k, (default, _) in CONFIG_KEYS.items()}
    if getattr(args, "config", None):
        cfg.update(load_config_file(args.config))
    for key in CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _dump_json(path, payload):
    Path(path).write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# shared pipeline pieces


def _lk_config(cfg: dict) -> LkConfig:
    return LkConfig(pyramid_levels=cfg["levels"], iters_per_level=cfg["lk_iters"],
                    robust_threshold=cfg["huber_delta"], convergence_tol=cfg["conv_tol"])


def _register(burst: Burst, cfg: dict, sr_factor: int):
    """Align to frame 0 on LR grayscale; motions returned at HR scale."""
    model = MotionModel(cfg["motion_model"])
    results = align_burst(burst, model, _lk_config(cfg))
    motions = [r.motion.scaled(sr_factor) for r in results]
    return motions, [r.degenerate for r in results]


def _make_prior(cfg: dict):
    if cfg["prior"] == "tv":
        # fresh warm-started instance per solve: fast repeated proxes,
        # no state shared between solves; PGD calls it every iteration so
        # it gets a lighter budget
        if cfg["method"] == "pgd":
            return TvPrior(inner_iters=60, tol=1e-6, warm_start=True)
        return TvPrior(inner_iters=100, tol=1e-8, warm_start=True)
    return make_prior(cfg["prior"])


def _solve(burst: Burst, motions, model: ObservationModel, cfg: dict,
           noise: NoiseParams):
    prior = _make_prior(cfg)
    if cfg["method"] == "hqs":
        hqs = HqsConfig(outer_iters=cfg["outer_iters"], mu0=cfg["mu0"],
                        mu_growth=cfg["mu_growth"], lam=cfg["lam"],
                        cg_iters=cfg["cg_iters"], cg_tol=cfg["cg_tol"],
                        motion_refine=cfg["motion_refine"], gn_iters=cfg["gn_iters"])
        return hqs_solve(burst, motions, model, prior, hqs)
    if cfg["method"] == "pgd":
        frames = [f.data for f in burst.frames]
        sigma2 = cfg["sigma2"] if cfg["sigma2"] > 0 else estimate_sigma2(frames, noise)
        # keep the regularizer balance identical to the HQS objective
        lam = cfg["lam"] / (sigma2 * len(burst))
        pgd = PgdConfig(iters=cfg["pgd_iters"], lam=lam,
                        step=cfg["pgd_step"] if cfg["pgd_step"] > 0 else None,
                        sigma2=sigma2, noise=noise)
        return pgd_solve(burst, motions, model, prior, pgd)
    raise ValueError(f"unknown method {cfg['method']!r}; expected hqs or pgd")


def _pipeline_solve(burst: Burst, cfg: dict, meta: dict,
                    gt_motions=None) -> tuple[RgbImage, dict]:
    """register (or take GT motions) + solve; returns (image, diagnostics)."""
    model = ObservationModel(burst.frame_shape, meta["sr_factor"], cfa=burst.cfa)
    if cfg["use_gt_motion"]:
        if gt_motions is None:
            raise ValueError("--use-gt-motion requested but burst has no gt_motions")
        motions, degenerate = list(gt_motions), [False] * len(burst)
    else:
        motions, degenerate = _register(burst, cfg, meta["sr_factor"])
    if cfg["tta"]:
        def solve_one(b: Burst) -> RgbImage:
            if cfg["use_gt_motion"]:
                raise ValueError("tta cannot reuse gt motions; disable use_gt_motion")
            m, _ = _register(b, cfg, meta["sr_factor"])
            return _solve(b, m, model, cfg, meta["noise"]).image
        image = tta_solve(solve_one, burst, default_descriptors(len(burst), cfg["tta_seed"]))
        return image, dict(tta=True, lk_degenerate=degenerate)
    est = _solve(burst, motions, model, cfg, meta["noise"])
    diagnostics = dict(est.diagnostics)
    diagnostics["motions"] = [dict(model=m.model.value, p=list(m.p)) for m in est.motions]
    diagnostics["lk_degenerate"] = degenerate
    return est.image, diagnostics


# ---------------------------------------------------------------------------
# commands


def cmd_synth(args) -> int:
    cfg = resolve_config(args)
    hr = load_image_srgb(args.input)
    if cfg["noise"] not in ("on", "off"):
        raise ValueError(f"noise must be 'on' or 'off', got {cfg['noise']!r}")
    noise = NoiseParams(0.0, 0.0) if cfg["noise"] == "off" \
        else NoiseParams(cfg["shot_slope"], cfg["read_var"])
    synth = SynthConfig(frames=cfg["frames"], sr_factor=cfg["sr_factor"],
                        lr_height=cfg["lr_height"], lr_width=cfg["lr_width"],
                        max_translation=cfg["max_translation"],
                        max_rotation=cfg["max_rotation"],
                        noise=noise,
                        seed=cfg["seed"], cfa=CfaPattern(cfg["cfa"]))
    sample = synthesize_burst(hr, ColorPipelineParams(), synth)
    write_sample(args.out_dir, sample, cfg["sr_factor"])
    print(f"wrote {len(sample.burst)} frames of "
          f"{synth.lr_height}x{synth.lr_width} + gt to {args.out_dir}")
    return 0


def cmd_align(args) -> int:
    cfg = resolve_config(args)
    burst, _ = read_burst(args.burst_dir)
    results = align_burst(burst, MotionModel(cfg["motion_model"]), _lk_config(cfg))
    payload = [dict(frame=k, model=r.motion.model.value, p=list(r.motion.p),
                    degenerate=r.degenerate, converged=r.converged,
                    level_costs=r.level_costs)
               for k, r in enumerate(results)]
    out = args.out or str(Path(args.burst_dir) / "alignment.json")
    _dump_json(out, payload)
    for row in payload:
        print(f"frame {row['frame']:2d}: p={np.round(row['p'], 4).tolist()}"
              f"{'  DEGENERATE' if row['degenerate'] else ''}")
    print(f"wrote {out}")
    return 0


def cmd_sr(args) -> int:
    cfg = resolve_config(args)
    burst, meta = read_burst(args.burst_dir)
    out_path = Path(args.out)
    diag_path = args.diagnostics or str(out_path.with_suffix("")) + "_diagnostics.json"
    try:
        image, diagnostics = _pipeline_solve(burst, cfg, meta, meta.get("gt_motions"))
    except SolverNumericalError as err:
        _dump_json(diag_path, dict(error=str(err), diagnostics=err.diagnostics))
        print(f"solver failed: {err} (diagnostics in {diag_path})", file=sys.stderr)
        return 1
    save_png16(out_path, image.data)
    _dump_json(diag_path, diagnostics)
    print(f"wrote {out_path} ({image.data.shape[0]}x{image.data.shape[1]}) and {diag_path}")
    return 0


def cmd_eval(args) -> int:
    cfg = resolve_config(args)
    pred = RgbImage(load_png16(args.pred), "linear")
    gt = RgbImage(load_png16(args.gt), "linear")
    if pred.shape != gt.shape:
        print(f"dimension mismatch: pred {pred.shape} vs gt {gt.shape}", file=sys.stderr)
        return 2
    if cfg["aligned"]:
        score_cfg = AlignedScoreConfig(flow=BlockFlowConfig(block_size=cfg["block_size"]),
                                       peak=cfg["peak"])
        from .metrics import aligned_score
        report = aligned_score(pred, gt, score_cfg)
    else:
        report = MetricReport(psnr_db=psnr(pred, gt, peak=cfg["peak"]),
                              ssim=ssim(pred, gt))
    out = args.out or str(Path(args.pred).with_suffix("")) + "_metrics.json"
    Path(out).write_text(report.to_json() + "\n")
    print(f"psnr_db={report.psnr_db:.4f} ssim={report.ssim:.5f} "
          f"valid_fraction={report.valid_fraction:.4f} flags={report.flags}")
    print(f"wrote {out}")
    return 0


def _bench_methods(cfg: dict) -> list[str]:
    methods = [m.strip() for m in cfg["methods"].split(",") if m.strip()]
    known = {"baseline", "hqs", "pgd", "hqs_tta"}
    unknown = set(methods) - known
    if unknown:
        raise ValueError(f"unknown bench methods {sorted(unknown)}; valid: {sorted(known)}")
    return methods


def _bench_one(sample_dir: Path, cfg: dict, methods: list[str]):
    scores = {}
    timings = {}
    burst, meta = read_burst(sample_dir)
    if "gt" not in meta:
        raise ValueError("sample has no ground truth")
    gt = meta["gt"]
    model = ObservationModel(burst.frame_shape, meta["sr_factor"], cfa=burst.cfa)
    for method in methods:
        t0 = time.perf_counter()
        local = dict(cfg)
        if method == "baseline":
            image = RgbImage(single_frame_baseline(burst.frames[0].data, model), "linear")
        else:
            local["method"] = "pgd" if method == "pgd" else "hqs"
            local["tta"] = method == "hqs_tta"
            if local["tta"]:
                local["use_gt_motion"] = False
            image, _ = _pipeline_solve(burst, local, meta, meta.get("gt_motions"))
        scores[method] = dict(psnr_db=psnr(image, gt, peak=cfg["peak"]),
                              ssim=ssim(image, gt))
        timings[method] = time.perf_counter() - t0
    return scores, timings


def cmd_bench(args) -> int:
    cfg = resolve_config(args)
    corpus = Path(args.corpus_dir)
    sample_dirs = sorted(d for d in corpus.iterdir()
                         if d.is_dir() and (d / "meta.json").exists())
    if not sample_dirs:
        print(f"no samples found in {corpus}", file=sys.stderr)
        return 2
    methods = _bench_methods(cfg)
    out_dir = Path(args.out_dir or corpus)
    out_dir.mkdir(parents=True, exist_ok=True)

    def run(d: Path):
        try:
            return d.name, _bench_one(d, cfg, methods), None
        except Exception as err:  # per-sample failures recorded, run continues
            return d.name, None, f"{type(err).__name__}: {err}"

    if cfg["threads"] > 1:
        with ThreadPoolExecutor(max_workers=cfg["threads"]) as pool:
            outcomes = list(pool.map(run, sample_dirs))
    else:
        outcomes = [run(d) for d in sample_dirs]

    samples = {}
    errors = {}
    timings = {}
    for name, result, error in sorted(outcomes, key=lambda r: r[0]):
        if error is not None:
            errors[name] = error
        else:
            samples[name] = result[0]
            timings[name] = result[1]
    means = {}
    for method in methods:
        vals = [s[method] for s in samples.values() if method in s]
        if vals:
            means[method] = dict(
                psnr_db=float(np.mean([v["psnr_db"] for v in vals])),
                ssim=float(np.mean([v["ssim"] for v in vals])),
                n=len(vals))
    report = dict(samples=samples, mean=means, errors=errors,
                  methods=methods, n_samples=len(sample_dirs))
    _dump_json(out_dir / "report.json", report)
    _dump_json(out_dir / "timings.json", timings)

    lines = [f"{'sample':<20}" + "".join(f"{m:>18}" for m in methods)]
    for name in sorted(samples):
        row = f"{name:<20}"
        for m in methods:
            s = samples[name].get(m)
            row += f"{s['psnr_db']:>11.3f} dB   " if s else f"{'-':>18}"
        lines.append(row)
    lines.append("-" * len(lines[0]))
    row = f"{'mean':<20}"
    for m in methods:
        row += f"{means[m]['psnr_db']:>11.3f} dB   " if m in means else f"{'-':>18}"
    lines.append(row)
    for name, msg in errors.items():
        lines.append(f"FAILED {name}: {msg}")
    table = "\n".join(lines) + "\n"
    (out_dir / "report.txt").write_text(table)
    print(table, end="")
    total = sum(sum(t.values()) for t in timings.values())
    print(f"total solve time {total:.1f}s (per-method timings in {out_dir / 'timings.json'})")
    print(f"wrote {out_dir / 'report.json'} and {out_dir / 'report.txt'}")
    return 0 if not errors else 1


# ---------------------------------------------------------------------------
# argument parsing


def _add_config_flags(parser: argparse.ArgumentParser, keys: list[str]):
    parser.add_argument("--config", help="key=value config file")
    for key in keys:
        default, caster = CONFIG_KEYS[key]
        flag = "--" + key.replace("_", "-")
        if caster is _parse_bool:
            parser.add_argument(flag, dest=key, default=None, type=_parse_bool,
                                metavar="BOOL", help=f"default {default}")
        else:
            parser.add_argument(flag, dest=key, default=None, type=caster,
                                help=f"default {default}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="burstsr",
                                     description="RAW burst super-resolution toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic RAW burst from an sRGB image")
    p.add_argument("input", help="8- or 16-bit sRGB image")
    p.add_argument("out_dir", help="output burst directory")
    _add_config_flags(p, ["frames", "sr_factor", "lr_height", "lr_width",
                          "max_translation", "max_rotation", "shot_slope",
                          "read_var", "noise", "seed", "cfa"])
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("align", help="register a burst and dump the motions")
    p.add_argument("burst_dir")
    p.add_argument("--out", help="output JSON path (default: burst_dir/alignment.json)")
    _add_config_flags(p, ["levels", "lk_iters", "huber_delta", "conv_tol",
                          "motion_model"])
    p.set_defaults(fn=cmd_align)

    p = sub.add_parser("sr", help="reconstruct an HR image from a burst")
    p.add_argument("burst_dir")
    p.add_argument("out", help="output 16-bit PNG path")
    p.add_argument("--diagnostics", help="diagnostics JSON path")
    _add_config_flags(p, ["method", "prior", "lam", "outer_iters", "mu0",
                          "mu_growth", "cg_iters", "cg_tol", "motion_refine",
                          "gn_iters", "pgd_iters", "pgd_step", "sigma2",
                          "use_gt_motion", "tta", "tta_seed", "levels",
                          "lk_iters", "huber_delta", "conv_tol", "motion_model"])
    p.set_defaults(fn=cmd_sr)

    p = sub.add_parser("eval", help="score a prediction against ground truth")
    p.add_argument("pred")
    p.add_argument("gt")
    p.add_argument("--out", help="metrics JSON path")
    _add_config_flags(p, ["peak", "aligned", "block_size"])
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("bench", help="register+solve+eval every burst in a corpus")
    p.add_argument("corpus_dir")
    p.add_argument("--out-dir", help="report directory (default: corpus dir)")
    _add_config_flags(p, [k for k in CONFIG_KEYS
                          if k not in ("frames", "lr_height", "lr_width",
                                       "max_translation", "max_rotation",
                                       "noise", "aligned")])
    p.set_defaults(fn=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, IOError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
