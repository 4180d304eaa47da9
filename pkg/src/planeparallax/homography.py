"""Plane-induced homographies: composition, robust estimation and warping."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .geometry import CameraIntrinsics, PlaneModel, RigidMotion, as_image
from .rng import make_rng
from .sampling import bilinear_sample

DET_EPS = 1e-12
W_EPS = 1e-12


class DegenerateConfigurationError(ValueError):
    pass


class PointAtInfinityError(ValueError):
    pass


class EstimationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Homography:
    """3x3 projective map, normalized so H[2,2] = 1 (or unit Frobenius norm
    when H[2,2] is numerically zero)."""

    H: np.ndarray

    def __post_init__(self):
        H = np.asarray(self.H, dtype=np.float64).reshape(3, 3)
        if not np.all(np.isfinite(H)):
            raise DegenerateConfigurationError("homography has non-finite entries")
        if abs(H[2, 2]) > 1e-12:
            H = H / H[2, 2]
        else:
            H = H / np.linalg.norm(H)
        if abs(np.linalg.det(H)) <= DET_EPS:
            raise DegenerateConfigurationError("homography is singular")
        object.__setattr__(self, "H", H)

    def inverse(self) -> Homography:
        return Homography(np.linalg.inv(self.H))

    def __matmul__(self, other: Homography) -> Homography:
        return Homography(self.H @ other.H)


def _transfer(H: np.ndarray, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map (..., 2) points by H; returns (mapped, third homogeneous comp)."""
    x = H[0, 0] * points[..., 0] + H[0, 1] * points[..., 1] + H[0, 2]
    y = H[1, 0] * points[..., 0] + H[1, 1] * points[..., 1] + H[1, 2]
    w = H[2, 0] * points[..., 0] + H[2, 1] * points[..., 1] + H[2, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.stack([x / w, y / w], axis=-1), w


def apply_homography(h: Homography | np.ndarray, points) -> np.ndarray:
    """Perspective-divided image of pixel(s) ``points`` (..., 2) under ``h``."""
    H = h.H if isinstance(h, Homography) else np.asarray(h, dtype=np.float64)
    points = np.asarray(points, dtype=np.float64)
    mapped, w = _transfer(H, points)
    if np.any(np.abs(w) <= W_EPS):
        raise PointAtInfinityError("point maps to the line at infinity")
    return mapped


def compose_plane_homography(
    motion: RigidMotion,
    plane: PlaneModel,
    k_target: CameraIntrinsics,
    k_source: CameraIntrinsics | None = None,
) -> Homography:
    """``H = K (R + t N^T / d_c) K'^-1``, mapping source pixels to target
    pixels for points on ``plane`` (given in the source frame)."""
    if k_source is None:
        k_source = k_target
    A = motion.R + np.outer(motion.t, plane.N) / plane.d_c
    M = k_target.matrix @ A @ k_source.inverse
    if abs(np.linalg.det(A)) <= DET_EPS:
        raise DegenerateConfigurationError("plane passes through the target camera center")
    return Homography(M)


def _hartley_normalization(points: np.ndarray) -> np.ndarray:
    centroid = points.mean(axis=0)
    rms = math.sqrt(((points - centroid) ** 2).sum(axis=1).mean())
    if not rms > 0:
        raise DegenerateConfigurationError("all points coincide")
    s = math.sqrt(2.0) / rms
    return np.array([[s, 0.0, -s * centroid[0]], [0.0, s, -s * centroid[1]], [0.0, 0.0, 1.0]])


def _as_matches(matches) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(matches, tuple) and len(matches) == 2:
        src, dst = (np.asarray(m, dtype=np.float64) for m in matches)
    else:
        arr = np.asarray(matches, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 4:
            raise ValueError("matches must be (source, target) arrays or an (N, 4) array")
        src, dst = arr[:, :2], arr[:, 2:]
    if src.shape != dst.shape or src.ndim != 2 or src.shape[1] != 2:
        raise ValueError("source and target points must both be (N, 2)")
    if not (np.all(np.isfinite(src)) and np.all(np.isfinite(dst))):
        raise ValueError("correspondences must be finite")
    return src, dst


def _dlt(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    T_src = _hartley_normalization(src)
    T_dst = _hartley_normalization(dst)
    s = src @ T_src[:2, :2].T + T_src[:2, 2]
    d = dst @ T_dst[:2, :2].T + T_dst[:2, 2]
    n = len(s)
    A = np.zeros((2 * n, 9))
    one = np.ones(n)
    zero = np.zeros(n)
    A[0::2] = np.column_stack([s[:, 0], s[:, 1], one, zero, zero, zero,
                               -d[:, 0] * s[:, 0], -d[:, 0] * s[:, 1], -d[:, 0]])
    A[1::2] = np.column_stack([zero, zero, zero, s[:, 0], s[:, 1], one,
                               -d[:, 1] * s[:, 0], -d[:, 1] * s[:, 1], -d[:, 1]])
    _, sv, Vt = np.linalg.svd(A)
    # rank must be 8: the second-smallest singular value may not vanish
    if len(sv) < 8 or sv[7] <= 1e-10 * sv[0]:
        raise DegenerateConfigurationError("DLT system is rank deficient")
    Hn = Vt[-1].reshape(3, 3)
    return np.linalg.inv(T_dst) @ Hn @ T_src


def estimate_homography_dlt(matches) -> Homography:
    """Normalized DLT over all correspondences.

    ``matches`` is either ``(src, dst)`` with two (N, 2) arrays or an (N, 4)
    array of ``us, vs, ut, vt`` rows.
    """
    src, dst = _as_matches(matches)
    if len(src) < 4:
        raise EstimationError(f"need at least 4 correspondences, got {len(src)}")
    return Homography(_dlt(src, dst))


def symmetric_transfer_error(H: np.ndarray, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """``sqrt(|H s - d|^2 + |H^-1 d - s|^2)`` per match (pixels)."""
    fwd, w1 = _transfer(H, src)
    bwd, w2 = _transfer(np.linalg.inv(H), dst)
    err = np.sqrt(((fwd - dst) ** 2).sum(-1) + ((bwd - src) ** 2).sum(-1))
    bad = (np.abs(w1) <= W_EPS) | (np.abs(w2) <= W_EPS) | ~np.isfinite(err)
    return np.where(bad, np.inf, err)


def _orientation(points: np.ndarray, i: int, j: int, k: int) -> float:
    a, b, c = points[i], points[j], points[k]
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _sample_is_usable(src: np.ndarray, dst: np.ndarray) -> bool:
    """Reject minimal samples with collinear triples, or whose triangles do
    not all keep (or all flip) orientation between the two views; neither
    can come from a homography of points in front of both cameras."""
    signs = []
    scale_s = np.ptp(src, axis=0).max() ** 2
    scale_d = np.ptp(dst, axis=0).max() ** 2
    if scale_s == 0 or scale_d == 0:
        return False
    for i, j, k in itertools.combinations(range(len(src)), 3):
        o_s = _orientation(src, i, j, k)
        o_d = _orientation(dst, i, j, k)
        if abs(o_s) <= 1e-9 * scale_s or abs(o_d) <= 1e-9 * scale_d:
            return False
        signs.append(np.sign(o_s) * np.sign(o_d))
    return all(s == signs[0] for s in signs)


@dataclass(frozen=True)
class RansacConfig:
    threshold: float = 1.0  # symmetric transfer error, pixels
    max_iterations: int = 2000
    confidence: float = 0.999
    sample_size: int = 4
    refit: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.threshold <= 0:
            raise ValueError("threshold must be positive")
        if self.sample_size < 4:
            raise ValueError("sample_size must be >= 4")
        if not 0 < self.confidence < 1:
            raise ValueError("confidence must be in (0, 1)")


def _required_iterations(inlier_ratio: float, sample_size: int, confidence: float) -> float:
    p_good = inlier_ratio**sample_size
    if p_good >= 1.0:
        return 0
    if p_good <= 0.0:
        return math.inf
    return math.log(1.0 - confidence) / math.log(1.0 - p_good)


def estimate_homography_ransac(
    matches, config: RansacConfig | None = None
) -> tuple[Homography, np.ndarray]:
    """Robust homography: the minimal-sample hypothesis with the most inliers
    (ties go to the lower summed inlier error), refit by DLT on its inliers.

    Returns ``(homography, inlier_mask)``.
    """
    config = config or RansacConfig()
    src, dst = _as_matches(matches)
    n = len(src)
    if n < config.sample_size:
        raise EstimationError(f"need at least {config.sample_size} correspondences, got {n}")
    rng = make_rng(config.seed)

    best_key = None
    best_H = best_mask = None
    needed = config.max_iterations
    it = 0
    while it < min(config.max_iterations, needed):
        it += 1
        idx = rng.choice(n, size=config.sample_size, replace=False)
        if not _sample_is_usable(src[idx], dst[idx]):
            continue
        try:
            H = _dlt(src[idx], dst[idx])
            Homography(H)
        except DegenerateConfigurationError:
            continue
        err = symmetric_transfer_error(H, src, dst)
        mask = err <= config.threshold
        count = int(mask.sum())
        if count < 4:
            continue
        key = (count, -float(err[mask].sum()))
        if best_key is None or key > best_key:
            best_key = key
            best_H, best_mask = H, mask
            needed = _required_iterations(count / n, config.sample_size, config.confidence)

    if best_mask is None:
        raise EstimationError("no hypothesis with at least 4 inliers")
    if config.refit:
        final = estimate_homography_dlt((src[best_mask], dst[best_mask]))
    else:
        final = Homography(best_H)
    return final, best_mask


def warp_image_homography(image, h: Homography) -> tuple[np.ndarray, np.ndarray]:
    """Inverse-warp ``image`` by ``h``: ``out(p) = image(H^-1 p)``, bilinear.

    Returns ``(warped, valid)``; samples whose footprint leaves the source
    image are invalid and zero.
    """
    image = as_image(image)
    H_inv = np.linalg.inv(h.H)
    hgt, wid = image.shape[:2]
    v, u = np.mgrid[0:hgt, 0:wid].astype(np.float64)
    coords, w = _transfer(H_inv, np.stack([u, v], axis=-1))
    out, mask = bilinear_sample(image, coords, valid=np.abs(w) > W_EPS)
    return out.astype(np.float32), mask
