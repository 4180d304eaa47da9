"""Pinhole camera, road plane and per-point geometry.

Conventions: camera frame is x right, y down, z forward (meters). Pixel
``(u, v)`` is column/row with integer coordinates at pixel centers. A
``RigidMotion`` maps source-camera coordinates to target-camera
coordinates, ``x_target = R @ x_source + t``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEPTH_MIN = 0.1
DEPTH_MAX = 250.0  # network output range: sigmoid * 250


class BehindCameraError(ValueError):
    pass


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image size must be >= 1, got {self.width}x{self.height}")

    @property
    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    @property
    def inverse(self) -> np.ndarray:
        return np.array(
            [
                [1.0 / self.fx, 0.0, -self.cx / self.fx],
                [0.0, 1.0 / self.fy, -self.cy / self.fy],
                [0.0, 0.0, 1.0],
            ]
        )

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def pixel_grid(self) -> np.ndarray:
        """(height, width, 2) array of ``(u, v)`` pixel-center coordinates."""
        v, u = np.mgrid[0 : self.height, 0 : self.width].astype(np.float64)
        return np.stack([u, v], axis=-1)

    def rays(self, pixels=None) -> np.ndarray:
        """Rays ``K^-1 [u, v, 1]`` with unit z component."""
        if pixels is None:
            pixels = self.pixel_grid()
        pixels = np.asarray(pixels, dtype=np.float64)
        x = (pixels[..., 0] - self.cx) / self.fx
        y = (pixels[..., 1] - self.cy) / self.fy
        return np.stack([x, y, np.ones_like(x)], axis=-1)


@dataclass(frozen=True)
class RigidMotion:
    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.R, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.t, dtype=np.float64).reshape(3)
        if np.abs(R.T @ R - np.eye(3)).max() > 1e-9:
            raise ValueError("R is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise ValueError("det(R) must be +1")
        if not np.all(np.isfinite(t)):
            raise ValueError("translation must be finite")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)

    @classmethod
    def identity(cls) -> RigidMotion:
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_translation(cls, t) -> RigidMotion:
        return cls(np.eye(3), t)

    def apply(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        return points @ self.R.T + self.t

    def inverse(self) -> RigidMotion:
        return RigidMotion(self.R.T, -self.R.T @ self.t)

    def compose(self, other: RigidMotion) -> RigidMotion:
        """Motion equivalent to applying ``other`` first, then ``self``."""
        return RigidMotion(self.R @ other.R, self.R @ other.t + self.t)


@dataclass(frozen=True)
class PlaneModel:
    """Plane ``{x : N.x = d_c}`` in the source camera frame.

    ``d_c`` is the camera height over the plane; for KITTI the road is taken
    as horizontal (N = (0, 1, 0), y pointing down) at d_c = 1.65 m.
    """

    N: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0, 0.0]))
    d_c: float = 1.65

    def __post_init__(self):
        N = np.asarray(self.N, dtype=np.float64).reshape(3)
        norm = np.linalg.norm(N)
        if not np.isfinite(norm) or norm == 0:
            raise ValueError("plane normal must be a finite non-zero vector")
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"plane normal must have unit length, got |N|={norm!r}")
        if not self.d_c > 0:
            raise ValueError(f"d_c must be positive, got {self.d_c}")
        object.__setattr__(self, "N", N)
        object.__setattr__(self, "d_c", float(self.d_c))

    @classmethod
    def from_normal(cls, normal, d_c: float) -> PlaneModel:
        normal = np.asarray(normal, dtype=np.float64)
        return cls(normal / np.linalg.norm(normal), d_c)

    def transformed(self, motion: RigidMotion) -> PlaneModel:
        """The same plane expressed in the frame reached by ``motion``."""
        N = motion.R @ self.N
        return PlaneModel.from_normal(N, self.d_c + float(N @ motion.t))


@dataclass
class DepthMap:
    """Metric depth Z per pixel plus validity mask.

    Non-finite values and values outside ``[DEPTH_MIN, DEPTH_MAX]`` are
    marked invalid on construction.
    """

    values: np.ndarray
    valid: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError(f"depth map must be 2-D, got shape {self.values.shape}")
        valid = np.ones(self.values.shape, bool) if self.valid is None else np.asarray(self.valid, bool)
        if valid.shape != self.values.shape:
            raise ValueError("mask shape does not match depth values")
        with np.errstate(invalid="ignore"):
            in_range = (self.values >= DEPTH_MIN) & (self.values <= DEPTH_MAX)
        self.valid = valid & np.isfinite(self.values) & in_range

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass
class GammaMap:
    """Structure ``gamma = h / Z`` per pixel plus validity mask."""

    values: np.ndarray
    valid: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        valid = np.ones(self.values.shape, bool) if self.valid is None else np.asarray(self.valid, bool)
        if valid.shape != self.values.shape:
            raise ValueError("mask shape does not match gamma values")
        self.valid = valid & np.isfinite(self.values)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def as_image(image) -> np.ndarray:
    """Validate an intensity image: (H, W) or (H, W, 1|3), values in [0, 1]."""
    image = np.asarray(image, dtype=np.float32)
    if image.ndim == 3 and image.shape[2] not in (1, 3):
        raise ValueError(f"images must have 1 or 3 channels, got {image.shape[2]}")
    if image.ndim not in (2, 3):
        raise ValueError(f"image must be 2-D or 3-D, got shape {image.shape}")
    if image.size and (not np.all(np.isfinite(image)) or image.min() < 0 or image.max() > 1):
        raise ValueError("image intensities must lie in [0, 1]")
    return image


def project(points, intrinsics: CameraIntrinsics) -> np.ndarray:
    """Pinhole projection of camera-frame points (..., 3) to pixels (..., 2)."""
    points = np.asarray(points, dtype=np.float64)
    z = points[..., 2]
    if np.any(~(z > 0)):
        raise BehindCameraError("cannot project a point with non-positive depth")
    u = intrinsics.fx * points[..., 0] / z + intrinsics.cx
    v = intrinsics.fy * points[..., 1] / z + intrinsics.cy
    return np.stack([u, v], axis=-1)


def backproject(pixels, depth, intrinsics: CameraIntrinsics) -> np.ndarray:
    """Lift pixels (..., 2) with metric depth (...) to camera-frame points."""
    depth = np.asarray(depth, dtype=np.float64)
    if np.any(~(depth > 0)):
        raise BehindCameraError("depth must be positive to backproject")
    return depth[..., None] * intrinsics.rays(pixels)


def point_plane_height(points, plane: PlaneModel) -> np.ndarray:
    """Signed height ``d_c - N.x`` of points above the plane (negative below)."""
    points = np.asarray(points, dtype=np.float64)
    return plane.d_c - points @ plane.N


def gamma_from_depth(
    depth_map: DepthMap, intrinsics: CameraIntrinsics, plane: PlaneModel
) -> GammaMap:
    if depth_map.shape != intrinsics.shape:
        raise ValueError(f"depth map {depth_map.shape} does not match camera {intrinsics.shape}")
    valid = depth_map.valid
    z = np.where(valid, depth_map.values, 1.0)
    points = backproject(intrinsics.pixel_grid(), z, intrinsics)
    h = point_plane_height(points, plane)
    gamma = np.where(valid, h / z, 0.0)
    return GammaMap(gamma, valid.copy())


def depth_from_gamma(
    gamma_map: GammaMap, intrinsics: CameraIntrinsics, plane: PlaneModel
) -> DepthMap:
    """Invert ``gamma = (d_c - N.(Z r)) / Z``, i.e. ``Z = d_c / (gamma + N.r)``.

    Pixels whose ray makes the denominator vanish, or whose depth falls
    outside the valid range, come back invalid.
    """
    if gamma_map.shape != intrinsics.shape:
        raise ValueError(f"gamma map {gamma_map.shape} does not match camera {intrinsics.shape}")
    denom = gamma_map.values + intrinsics.rays() @ plane.N
    ok = gamma_map.valid & (denom != 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(ok, plane.d_c / np.where(ok, denom, 1.0), 0.0)
    return DepthMap(z, ok)
