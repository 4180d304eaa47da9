"""Ray-cast renderer for textured planar scenes with exact ground truth.

Textures are sums of low-frequency sinusoids over in-plane coordinates, so a
bilinear interpolation of a rendered view stays within ~1e-3 of the true
texture and photometric cost landscapes are smooth.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import CameraIntrinsics, DepthMap, PlaneModel, RigidMotion

# Camera centers closer than this to a plane surface are rejected.
SLAB_EPS = 1e-6


@dataclass(frozen=True)
class Sinusoid:
    amplitude: float
    freq_u: float  # cycles per meter along the plane's u axis
    freq_v: float
    phase: float = 0.0


@dataclass(frozen=True)
class TexturedPlane:
    """Finite rectangle of the world plane ``{X : normal . X = offset}``.

    ``origin`` lies on the plane; ``axis_u``/``axis_v`` are orthonormal
    in-plane directions and ``extent`` = (u_min, u_max, v_min, v_max) in meters.
    """

    normal: np.ndarray
    offset: float
    origin: np.ndarray
    axis_u: np.ndarray
    axis_v: np.ndarray
    extent: tuple[float, float, float, float]
    texture: tuple[Sinusoid, ...]
    base: float = 0.5

    def __post_init__(self):
        for name in ("normal", "origin", "axis_u", "axis_v"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        n = self.normal
        if abs(np.linalg.norm(n) - 1) > 1e-12:
            raise ValueError("plane normal must be unit length")
        if abs(n @ self.origin - self.offset) > 1e-9:
            raise ValueError("plane origin is not on the plane")
        if abs(n @ self.axis_u) > 1e-12 or abs(n @ self.axis_v) > 1e-12:
            raise ValueError("texture axes must lie in the plane")
        total = sum(abs(s.amplitude) for s in self.texture)
        if self.base - total < 0 or self.base + total > 1:
            raise ValueError("texture amplitudes leave the [0, 1] intensity range")

    def shade(self, s: np.ndarray, q: np.ndarray) -> np.ndarray:
        out = np.full(np.shape(s), self.base)
        for w in self.texture:
            out = out + w.amplitude * np.sin(2 * np.pi * (w.freq_u * s + w.freq_v * q) + w.phase)
        return out

    def local_coords(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        d = X - self.origin
        return d @ self.axis_u, d @ self.axis_v

    def contains(self, s, q) -> np.ndarray:
        u0, u1, v0, v1 = self.extent
        return (s >= u0) & (s <= u1) & (q >= v0) & (q <= v1)


@dataclass(frozen=True)
class SceneSpec:
    """Planes in world coordinates and two world-to-camera poses.

    The first plane is the ground; it must read ``N = (0, 1, 0)`` in the
    source camera frame.
    """

    planes: tuple[TexturedPlane, ...]
    target_pose: RigidMotion
    source_pose: RigidMotion
    intrinsics: CameraIntrinsics
    background: float = 0.0

    def ground_plane(self, pose: RigidMotion | None = None) -> PlaneModel:
        """Ground plane in the frame of ``pose`` (source camera by default)."""
        pose = self.source_pose if pose is None else pose
        g = self.planes[0]
        N = pose.R @ g.normal
        return PlaneModel.from_normal(N, g.offset + N @ pose.t)


@dataclass
class RenderedPair:
    target: np.ndarray
    source: np.ndarray
    depth_target: DepthMap
    depth_source: DepthMap
    motion: RigidMotion  # source frame -> target frame
    plane: PlaneModel  # ground in the source frame
    plane_id_target: np.ndarray = field(repr=False, default=None)


def camera_center(pose: RigidMotion) -> np.ndarray:
    return -pose.R.T @ pose.t


def relative_motion(target_pose: RigidMotion, source_pose: RigidMotion) -> RigidMotion:
    """Motion taking source-camera coordinates to target-camera coordinates."""
    return target_pose.compose(source_pose.inverse())


def cast_rays(planes, pose: RigidMotion, intrinsics: CameraIntrinsics):
    """Nearest visible plane per pixel: returns (depth, plane index or -1, world hits)."""
    rays = intrinsics.rays()
    shape = intrinsics.shape
    depth = np.full(shape, np.inf)
    index = np.full(shape, -1, dtype=np.int64)
    hits = np.zeros(shape + (3,))
    for i, plane in enumerate(planes):
        n_cam = pose.R @ plane.normal
        c_cam = plane.offset + n_cam @ pose.t
        denom = rays @ n_cam
        with np.errstate(divide="ignore", invalid="ignore"):
            z = c_cam / denom
        ok = np.isfinite(z) & (z > 0)
        X = (np.where(ok, z, 0.0)[..., None] * rays - pose.t) @ pose.R
        s, q = plane.local_coords(X)
        ok &= plane.contains(s, q) & (z < depth)
        depth = np.where(ok, z, depth)
        index = np.where(ok, i, index)
        hits = np.where(ok[..., None], X, hits)
    return depth, index, hits


def render_view(world: SceneSpec, pose: RigidMotion) -> tuple[np.ndarray, DepthMap, np.ndarray]:
    """Render one grayscale view: (image float32, depth, plane index map)."""
    _check_camera(world, pose)
    depth, index, hits = cast_rays(world.planes, pose, world.intrinsics)
    image = np.full(world.intrinsics.shape, world.background)
    for i, plane in enumerate(world.planes):
        sel = index == i
        if sel.any():
            s, q = plane.local_coords(hits[sel])
            image[sel] = plane.shade(s, q)
    valid = index >= 0
    return (
        np.clip(image, 0.0, 1.0).astype(np.float32),
        DepthMap(np.where(valid, depth, 0.0), valid),
        index,
    )


def _check_camera(world: SceneSpec, pose: RigidMotion):
    C = camera_center(pose)
    for plane in world.planes:
        if abs(plane.normal @ C - plane.offset) < SLAB_EPS:
            s, q = plane.local_coords(C)
            if plane.contains(s, q):
                raise ValueError("camera center lies inside a plane slab")


def validate_scene(world: SceneSpec):
    if not world.planes:
        raise ValueError("scene needs at least one plane")
    ground = world.ground_plane()
    if np.abs(ground.N - np.array([0.0, 1.0, 0.0])).max() > 1e-9:
        raise ValueError("first plane must be the ground, N = (0, 1, 0) in the source frame")
    for pose in (world.target_pose, world.source_pose):
        _check_camera(world, pose)
        # ground must be visible along at least half of the bottom image row
        _, index, _ = cast_rays(world.planes, pose, world.intrinsics)
        if (index[-1] == 0).mean() < 0.5:
            raise ValueError("ground plane is not visible enough from a camera")


def render_synthetic(world: SceneSpec) -> RenderedPair:
    """Render target and source views plus ground-truth depth, motion, plane."""
    validate_scene(world)
    tgt, depth_t, index_t = render_view(world, world.target_pose)
    src, depth_s, _ = render_view(world, world.source_pose)
    return RenderedPair(
        target=tgt,
        source=src,
        depth_target=depth_t,
        depth_source=depth_s,
        motion=relative_motion(world.target_pose, world.source_pose),
        plane=world.ground_plane(),
        plane_id_target=index_t,
    )


DEFAULT_INTRINSICS = CameraIntrinsics(fx=300.0, fy=300.0, cx=127.5, cy=95.5, width=256, height=192)

# Every ground component varies along the road so that forward-motion parallax
# (vertical near the bottom of the image) is observable everywhere.
GROUND_TEXTURE = (
    Sinusoid(0.12, 1 / 2.1333, 1 / 8.0, 0.3),
    Sinusoid(0.12, 0.0, 1 / 5.3333, 1.1),
    Sinusoid(0.10, 1 / 3.2, 1 / 4.6667, 2.0),
    Sinusoid(0.08, -1 / 2.5333, 1 / 6.6667, 0.7),
)
WALL_TEXTURE = (
    Sinusoid(0.13, 1 / 1.4667, 0.0, 0.5),
    Sinusoid(0.12, 0.0, 1 / 1.7333, 1.7),
    Sinusoid(0.10, 1 / 2.1333, 1 / 3.0667, 2.9),
    Sinusoid(0.08, -1 / 3.3333, 1 / 1.8667, 0.2),
)


def ground_plane(height: float = 1.65, texture=GROUND_TEXTURE) -> TexturedPlane:
    """Horizontal road ``y = height`` (y points down), large extent."""
    return TexturedPlane(
        normal=[0.0, 1.0, 0.0],
        offset=height,
        origin=[0.0, height, 0.0],
        axis_u=[1.0, 0.0, 0.0],
        axis_v=[0.0, 0.0, 1.0],
        extent=(-200.0, 200.0, -200.0, 300.0),
        texture=texture,
    )


def fronto_wall(distance: float, ground_height: float = 1.65, texture=WALL_TEXTURE) -> TexturedPlane:
    """Fronto-parallel wall ``z = distance`` standing on the ground."""
    return TexturedPlane(
        normal=[0.0, 0.0, 1.0],
        offset=distance,
        origin=[0.0, 0.0, distance],
        axis_u=[1.0, 0.0, 0.0],
        axis_v=[0.0, 1.0, 0.0],
        extent=(-40.0, 40.0, -40.0, ground_height),
        texture=texture,
    )


def camera_at(z: float, x: float = 0.0, y: float = 0.0) -> RigidMotion:
    """World-to-camera pose of an axis-aligned camera centered at (x, y, z)."""
    return RigidMotion(np.eye(3), -np.array([x, y, z], dtype=np.float64))


def ground_and_wall_scene(
    forward: float = 0.5,
    wall_distance: float = 8.0,
    camera_height: float = 1.65,
    intrinsics: CameraIntrinsics = DEFAULT_INTRINSICS,
    with_wall: bool = True,
) -> SceneSpec:
    """Source camera at the world origin, target ``forward`` meters ahead."""
    planes = [ground_plane(camera_height)]
    if with_wall:
        planes.append(fronto_wall(wall_distance, camera_height))
    return SceneSpec(
        planes=tuple(planes),
        target_pose=camera_at(forward),
        source_pose=camera_at(0.0),
        intrinsics=intrinsics,
    )
