"""Plane-sweep accuracy on the synthetic ground+wall scene for several
inverse-depth search ranges.

    python scripts/sweep_ranges.py --inv-depth-max 0.5 2.0
"""
from __future__ import annotations

import argparse
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import binary_erosion

from planeparallax.homography import compose_plane_homography, warp_image_homography
from planeparallax.parallax import residual_parallax
from planeparallax.solver import SweepConfig, plane_sweep_gamma
from planeparallax.synthetic import camera_at, ground_and_wall_scene, relative_motion, render_view


@dataclass
class Experiment:
    inv_depth_max: list[float] = field(default_factory=lambda: [0.5, 2.0])
    hypotheses: int = 128
    forward: float = 0.5
    wall_distance: float = 8.0
    threads: int = 1


def run(exp: Experiment):
    world = ground_and_wall_scene(forward=exp.forward, wall_distance=exp.wall_distance)
    k = world.intrinsics
    target, depth, index = render_view(world, world.target_pose)
    sources = []
    for z in (0.0, 2 * exp.forward):
        pose = camera_at(z)
        image, _, _ = render_view(world, pose)
        motion = relative_motion(world.target_pose, pose)
        plane = world.ground_plane(pose)
        aligned, valid = warp_image_homography(image, compose_plane_homography(motion, plane, k))
        sources.append((aligned, valid, motion.t, plane))
    (a_prev, v_prev, t_prev, plane), (a_next, v_next, t_next, _) = sources
    road = binary_erosion(index == 0, np.ones((5, 5)))
    grid = k.pixel_grid()

    print("inv_depth_max  wall_abs_rel  road_max_px  road_fail(>0.5px)  low_conf  seconds")
    for hi in exp.inv_depth_max:
        cfg = SweepConfig(num_hypotheses=exp.hypotheses, inv_depth_max=hi)
        start = time.perf_counter()
        res = plane_sweep_gamma(target, a_prev, a_next, t_prev, t_next, plane, k, cfg,
                                v_prev, v_next, threads=exp.threads)
        secs = time.perf_counter() - start
        wall = (index == 1) & res.depth.valid
        abs_rel = (np.abs(res.depth.values - depth.values) / depth.values)[wall].mean()
        r = road & res.depth.valid
        disp = np.zeros(r.sum())
        for t in (t_prev, t_next):
            d = residual_parallax(grid[r], res.gamma.values[r], t, plane.d_c, k)
            disp = np.maximum(disp, np.linalg.norm(d, axis=-1))
        print(f"{hi:13.3f}  {abs_rel:12.4f}  {disp.max():11.3f}  {int((disp > 0.5).sum()):17d}"
              f"  {res.low_confidence.mean():8.3f}  {secs:7.1f}")


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--inv-depth-max", type=float, nargs="+", default=Experiment().inv_depth_max)
    p.add_argument("--hypotheses", type=int, default=Experiment.hypotheses)
    p.add_argument("--threads", type=int, default=1)
    a = p.parse_args()
    run(Experiment(inv_depth_max=a.inv_depth_max, hypotheses=a.hypotheses, threads=a.threads))


if __name__ == "__main__":
    main()
