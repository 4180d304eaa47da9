import time
from dataclasses import dataclass

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from planeparallax.homography import compose_plane_homography, warp_image_homography
from planeparallax.solver import SweepConfig, plane_sweep_gamma
from planeparallax.synthetic import (
    camera_at,
    ground_and_wall_scene,
    relative_motion,
    render_view,
)

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# depth range of the rendered scene is roughly 5.2 m (bottom row) to 8 m, so
# the sweep searches inverse depth up to 1/2 m^-1
SCENE_SWEEP = SweepConfig(inv_depth_max=0.5)


@dataclass
class Source:
    image: np.ndarray
    aligned: np.ndarray
    valid: np.ndarray
    motion: object
    plane: object
    homography: object


@dataclass
class SceneBundle:
    world: object
    target: np.ndarray
    depth: object
    index: np.ndarray
    prev: Source
    next: Source

    @property
    def k(self):
        return self.world.intrinsics


def _source(world, z):
    pose = camera_at(z)
    image, _, _ = render_view(world, pose)
    motion = relative_motion(world.target_pose, pose)
    plane = world.ground_plane(pose)
    H = compose_plane_homography(motion, plane, world.intrinsics)
    aligned, valid = warp_image_homography(image, H)
    return Source(image, aligned, valid, motion, plane, H)


@pytest.fixture(scope="session")
def scene():
    """Ground + wall at 8 m; target 0.5 m ahead of prev, next 0.5 m further."""
    world = ground_and_wall_scene()
    target, depth, index = render_view(world, world.target_pose)
    return SceneBundle(world, target, depth, index, _source(world, 0.0), _source(world, 1.0))


@pytest.fixture(scope="session")
def sweep(scene):
    """Plane sweep on the synthetic scene; returns (result, seconds)."""
    start = time.perf_counter()
    res = plane_sweep_gamma(
        scene.target,
        scene.prev.aligned,
        scene.next.aligned,
        scene.prev.motion.t,
        scene.next.motion.t,
        scene.prev.plane,
        scene.k,
        SCENE_SWEEP,
        scene.prev.valid,
        scene.next.valid,
    )
    return res, time.perf_counter() - start


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
