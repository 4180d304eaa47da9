"""Command-line pipeline: render -> match -> homography -> align -> synthesize
-> loss -> solve -> evaluate, plus the derivation self-check.

Every subcommand prints exactly one ``key=value ...`` line on success.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io as pio
from .homography import (
    RansacConfig,
    apply_homography,
    compose_plane_homography,
    estimate_homography_ransac,
    symmetric_transfer_error,
    warp_image_homography,
)
from .losses import LossConfig, min_reprojection, photometric_loss, smoothness_loss, total_loss
from .parallax import planar_parallax_map, synthesize_target
from .rng import make_rng
from .solver import SweepConfig, eval_metrics, median_scale, plane_sweep_gamma
from .synthetic import camera_at, ground_and_wall_scene, relative_motion, render_view, validate_scene
from .verification import DerivationConfig, verify_derivation


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.10g}"


def _emit(**fields):
    print(" ".join(f"{k}={_fmt(v)}" for k, v in fields.items()))


def _sample_matches(rng, src_index, H, k, count, outlier_ratio, noise):
    """Road correspondences from ground truth: source road pixels mapped by H."""
    v, u = np.nonzero(src_index == 0)
    if len(u) < count:
        raise ValueError(f"only {len(u)} road pixels, cannot draw {count} matches")
    pick = rng.choice(len(u), size=count, replace=False)
    src = np.stack([u[pick], v[pick]], axis=-1).astype(np.float64)
    src = src + rng.uniform(-0.5, 0.5, size=src.shape)
    dst = apply_homography(H, src) + rng.normal(scale=noise, size=src.shape)
    n_out = int(round(outlier_ratio * count))
    if n_out:
        idx = rng.choice(count, size=n_out, replace=False)
        dst[idx] = rng.uniform(size=(n_out, 2)) * [k.width - 1, k.height - 1]
    return src, dst


def cmd_render_synthetic(args):
    out = Path(args.out_dir)
    scene = ground_and_wall_scene(
        forward=args.forward, wall_distance=args.wall_distance, with_wall=not args.no_wall
    )
    validate_scene(scene)
    k = scene.intrinsics
    rng = make_rng(args.seed)
    target, depth_t, index_t = render_view(scene, scene.target_pose)
    pio.write_image(out / "target.png", target)
    pio.write_depth_png(out / "depth_target.png", depth_t)
    pio.write_intrinsics(out / "intrinsics.txt", k, scene.ground_plane())
    # previous frame behind the target, next frame the same distance ahead
    for name, z in (("prev", 0.0), ("next", 2 * args.forward)):
        pose = camera_at(z)
        image, _, index = render_view(scene, pose)
        motion = relative_motion(scene.target_pose, pose)
        H = compose_plane_homography(motion, scene.ground_plane(pose), k)
        src, dst = _sample_matches(rng, index, H, k, args.matches, args.outlier_ratio, args.noise)
        pio.write_image(out / f"source_{name}.png", image)
        pio.write_motion(out / f"motion_{name}.txt", motion)
        pio.write_correspondences(out / f"matches_{name}.csv", src, dst)
    _emit(
        width=k.width,
        height=k.height,
        road_px=int((index_t == 0).sum()),
        wall_px=int((index_t == 1).sum()),
        matches=args.matches,
    )


def _ransac(args, matches):
    cfg = RansacConfig(
        threshold=args.threshold,
        max_iterations=args.max_iterations,
        refit=not args.no_refit,
        seed=args.seed,
    )
    return estimate_homography_ransac(matches, cfg)


def cmd_estimate_homography(args):
    src, dst = pio.read_correspondences(args.matches)
    h, inliers = _ransac(args, (src, dst))
    err = symmetric_transfer_error(h.H, src[inliers], dst[inliers])
    pio.write_homography(args.out, h)
    _emit(inliers=int(inliers.sum()), total=len(src), inlier_rms_px=np.sqrt(np.mean(err**2)))


def cmd_align(args):
    source = pio.read_image(args.src)
    target = pio.read_image(args.tgt)
    if source.shape != target.shape:
        raise ValueError(f"source {source.shape} and target {target.shape} differ in size")
    if args.homography:
        h = pio.read_homography(args.homography)
        n_in = n_all = 0
    else:
        src, dst = pio.read_correspondences(args.matches)
        h, inliers = _ransac(args, (src, dst))
        n_in, n_all = int(inliers.sum()), len(src)
    aligned, valid = warp_image_homography(source, h)
    pio.write_image(args.out, aligned)
    pio.write_homography(args.homography_out or Path(args.out).with_suffix(".H.txt"), h)
    if args.mask_out:
        pio.write_mask(args.mask_out, valid)
    diff = np.abs(aligned.astype(np.float64) - target)
    diff = diff.mean(-1) if diff.ndim == 3 else diff
    _emit(
        inliers=n_in,
        total=n_all,
        valid_frac=valid.mean(),
        mean_abs_diff=diff[valid].mean() if valid.any() else float("nan"),
    )


def cmd_synthesize(args):
    aligned = pio.read_image(args.aligned)
    depth = pio.read_depth_png(args.depth)
    k, plane = pio.read_intrinsics(args.intrinsics)
    motion = pio.read_motion(args.motion)
    aligned_valid = pio.read_mask(args.aligned_mask) if args.aligned_mask else None
    pw, ok = planar_parallax_map(depth, motion.t, plane, k)
    synth, valid = synthesize_target(aligned, pw, ok, aligned_valid)
    pio.write_image(args.out, synth)
    if args.mask_out:
        pio.write_mask(args.mask_out, valid)
    fields = {"valid_frac": valid.mean()}
    if args.target:
        target = pio.read_image(args.target)
        diff = np.abs(synth.astype(np.float64) - target)
        diff = diff.mean(-1) if diff.ndim == 3 else diff
        fields["mean_abs_err"] = diff[valid].mean() if valid.any() else float("nan")
    _emit(**fields)


def cmd_loss(args):
    cfg = LossConfig(alpha=args.alpha, smoothness_weight=args.smoothness_weight)
    target = pio.read_image(args.target)
    depth = pio.read_depth_png(args.depth)

    def one(path, mask_path):
        mask = pio.read_mask(mask_path) if mask_path else None
        return photometric_loss(target, pio.read_image(path), mask, cfg)

    photo, mask = one(args.synth_prev, args.mask_prev)
    if args.synth_next:
        photo, mask = min_reprojection(photo, mask, *one(args.synth_next, args.mask_next))
    smooth = smoothness_loss(depth, target)
    _emit(
        total=total_loss(photo, mask, smooth, cfg),
        photometric=photo[mask].mean(),
        smoothness=smooth[mask].mean(),
        valid_frac=mask.mean(),
    )


def cmd_solve_depth(args):
    k, plane = pio.read_intrinsics(args.intrinsics)
    target = pio.read_image(args.target)
    prev = pio.read_image(args.aligned_prev)
    nxt = pio.read_image(args.aligned_next)
    t_prev = pio.read_motion(args.motion_prev).t
    t_next = pio.read_motion(args.motion_next).t
    valid_prev = pio.read_mask(args.mask_prev) if args.mask_prev else None
    valid_next = pio.read_mask(args.mask_next) if args.mask_next else None
    cfg = SweepConfig(
        num_hypotheses=args.hypotheses,
        inv_depth_min=args.inv_depth_min,
        inv_depth_max=args.inv_depth_max,
        patch_radius=args.patch_radius,
        use_ssim=not args.no_ssim,
        alpha=args.alpha,
    )
    res = plane_sweep_gamma(target, prev, nxt, t_prev, t_next, plane, k, cfg,
                            valid_prev, valid_next, threads=args.threads)
    pio.write_depth_png(args.out, res.depth)
    if args.low_confidence_out:
        pio.write_mask(args.low_confidence_out, res.low_confidence)
    d = res.depth
    _emit(
        valid_frac=d.valid.mean(),
        low_conf_frac=res.low_confidence.mean(),
        median_depth=np.median(d.values[d.valid]) if d.valid.any() else float("nan"),
    )


def cmd_evaluate(args):
    pred = pio.read_depth_png(args.pred)
    gt = pio.read_depth_png(args.gt)
    if pred.shape != gt.shape:
        raise ValueError(f"prediction {pred.shape} and ground truth {gt.shape} differ in size")
    scale = 1.0
    if args.median_scale:
        pred, scale = median_scale(pred, gt)
    m = eval_metrics(pred, gt, cap=args.cap)
    _emit(**m.as_dict(), scale=scale)


def cmd_verify_derivation(args):
    report = verify_derivation(args.seed, DerivationConfig(trials=args.trials))
    _emit(max_err_px=report.max_err_px, samples=report.samples, valid=report.valid)
    return 0 if report.max_err_px < args.tolerance else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for all randomness")
    common.add_argument("--threads", type=int, default=1, help="worker threads for the sweep")

    parser = argparse.ArgumentParser(prog="planeparallax", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, func, help):
        p = sub.add_parser(name, parents=[common], help=help)
        p.set_defaults(func=func)
        return p

    def ransac_flags(p):
        p.add_argument("--threshold", type=float, default=1.0, help="inlier threshold, px")
        p.add_argument("--max-iterations", type=int, default=2000)
        p.add_argument("--no-refit", action="store_true", help="skip the DLT refit on inliers")

    p = add("render-synthetic", cmd_render_synthetic, "render the ground+wall test scene")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--forward", type=float, default=0.5, help="target offset ahead of prev, m")
    p.add_argument("--wall-distance", type=float, default=8.0)
    p.add_argument("--no-wall", action="store_true")
    p.add_argument("--matches", type=int, default=200, help="road correspondences per source")
    p.add_argument("--outlier-ratio", type=float, default=0.0)
    p.add_argument("--noise", type=float, default=0.0, help="target-point noise sigma, px")

    p = add("estimate-homography", cmd_estimate_homography, "RANSAC homography from matches")
    p.add_argument("--matches", required=True)
    p.add_argument("--out", required=True)
    ransac_flags(p)

    p = add("align", cmd_align, "warp a source image onto the target's road plane")
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--matches")
    g.add_argument("--homography", help="use this homography file instead of matches")
    p.add_argument("--out", required=True)
    p.add_argument("--homography-out")
    p.add_argument("--mask-out")
    ransac_flags(p)

    p = add("synthesize", cmd_synthesize, "inverse-warp an aligned image with depth")
    p.add_argument("--aligned", required=True)
    p.add_argument("--aligned-mask")
    p.add_argument("--depth", required=True)
    p.add_argument("--intrinsics", required=True)
    p.add_argument("--motion", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mask-out")
    p.add_argument("--target", help="report mean |target - synthesized|")

    p = add("loss", cmd_loss, "photometric + smoothness objective")
    p.add_argument("--target", required=True)
    p.add_argument("--synth-prev", required=True)
    p.add_argument("--synth-next")
    p.add_argument("--mask-prev")
    p.add_argument("--mask-next")
    p.add_argument("--depth", required=True)
    p.add_argument("--alpha", type=float, default=0.85)
    p.add_argument("--smoothness-weight", type=float, default=1e-3)

    p = add("solve-depth", cmd_solve_depth, "plane-sweep depth from two aligned frames")
    p.add_argument("--target", required=True)
    p.add_argument("--aligned-prev", required=True)
    p.add_argument("--aligned-next", required=True)
    p.add_argument("--mask-prev")
    p.add_argument("--mask-next")
    p.add_argument("--motion-prev", required=True)
    p.add_argument("--motion-next", required=True)
    p.add_argument("--intrinsics", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--low-confidence-out")
    p.add_argument("--hypotheses", type=int, default=128)
    p.add_argument("--inv-depth-min", type=float, default=1 / 250.0)
    p.add_argument("--inv-depth-max", type=float, default=2.0)
    p.add_argument("--patch-radius", type=int, default=1)
    p.add_argument("--alpha", type=float, default=0.85)
    p.add_argument("--no-ssim", action="store_true")

    p = add("evaluate", cmd_evaluate, "depth error metrics against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--median-scale", action="store_true")
    p.add_argument("--cap", type=float, default=80.0)

    p = add("verify-derivation", cmd_verify_derivation, "closed form vs. reprojection check")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--tolerance", type=float, default=1e-6)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on usage errors
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        rc = args.func(args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0 if rc is None else rc


def entry_point():
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
