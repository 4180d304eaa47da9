"""Residual planar parallax and target-view synthesis from the aligned image.

After the source image has been warped by the plane homography, a target
pixel ``p`` with structure ``gamma = h / Z`` is found in the aligned image at

    p_w = p + gamma / (d_c - gamma * t_z) * (t_z * p - K t)

Parameterization: ``gamma`` and ``Z`` belong to the target camera, while
``d_c`` is the height of the *source* camera over the plane, and ``h`` is the
point's distance to the plane (camera independent). ``t`` is the translation
of the source-to-target motion ``x_t = R x_s + t``; rotation does not appear
because the homography has already absorbed it.
"""
from __future__ import annotations

import numpy as np

from .geometry import (
    BehindCameraError,
    CameraIntrinsics,
    DepthMap,
    PlaneModel,
    RigidMotion,
    as_image,
    backproject,
    gamma_from_depth,
    point_plane_height,
    project,
)
from .homography import apply_homography, compose_plane_homography
from .sampling import bilinear_sample

EPS_DEN = 1e-6  # meters; guard on d_c - gamma * t_z


class ParallaxSingularityError(ValueError):
    pass


def _parallax(pixels, gamma, t, plane_dc, k_target):
    """Displacement (..., 2) and denominator (...) without any guarding."""
    pixels = np.asarray(pixels, dtype=np.float64)
    gamma = np.asarray(gamma, dtype=np.float64)
    # t may be (3,) or broadcast per sample as (..., 3)
    t = np.asarray(t, dtype=np.float64)
    Kt = t @ k_target.matrix.T
    tz = t[..., 2]
    den = plane_dc - gamma * tz
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = gamma / den
    du = scale * (tz * pixels[..., 0] - Kt[..., 0])
    dv = scale * (tz * pixels[..., 1] - Kt[..., 1])
    return np.stack([du, dv], axis=-1), den


def residual_parallax(
    pixels, gamma, t, plane_dc: float, k_target: CameraIntrinsics
) -> np.ndarray:
    """Displacement ``p_w - p`` in pixels for pixel(s) ``pixels`` (..., 2).

    Raises ``ParallaxSingularityError`` where ``|d_c - gamma t_z| <= 1e-6``.
    """
    t = np.asarray(t, dtype=np.float64).reshape(3)
    disp, den = _parallax(pixels, gamma, t, plane_dc, k_target)
    if np.any(np.abs(den) <= EPS_DEN):
        raise ParallaxSingularityError(
            "d_c - gamma * t_z vanishes: point lies near the plane through the epipole"
        )
    # third homogeneous component: t_z * 1 - (K t)_z, zero for any pinhole K
    assert (t[2] - (k_target.matrix @ t)[2]) == 0.0
    return disp


def planar_parallax_map(
    depth: DepthMap, t, plane: PlaneModel, k_target: CameraIntrinsics
) -> tuple[np.ndarray, np.ndarray]:
    """Dense ``p_w`` field (H, W, 2) for every target pixel, plus validity.

    Structure comes from the depth map through ``gamma = (d_c - N.x) / Z``;
    pixels with invalid depth or hitting the singularity guard are invalid.
    """
    if depth.shape != k_target.shape:
        raise ValueError(f"depth map {depth.shape} does not match camera {k_target.shape}")
    gamma = gamma_from_depth(depth, k_target, plane)
    return parallax_field(gamma.values, gamma.valid, t, plane.d_c, k_target)


def parallax_field(gamma, valid, t, plane_dc: float, k_target: CameraIntrinsics):
    pixels = k_target.pixel_grid()
    disp, den = _parallax(pixels, gamma, t, plane_dc, k_target)
    ok = np.asarray(valid, bool) & (np.abs(den) > EPS_DEN) & np.all(np.isfinite(disp), axis=-1)
    pw = np.where(ok[..., None], pixels + disp, pixels)
    return pw, ok


def synthesize_target(
    aligned, pw_field, pw_valid=None, aligned_valid=None
) -> tuple[np.ndarray, np.ndarray]:
    """Inverse-warp the aligned image: ``out(p) = aligned(p_w(p))``.

    A pixel is invalid when its ``p_w`` is invalid, its bilinear footprint
    leaves the image, or (if ``aligned_valid`` is given) it touches an invalid
    pixel of the aligned image.
    """
    aligned = as_image(aligned)
    pw_field = np.asarray(pw_field, dtype=np.float64)
    if pw_field.shape[:2] != aligned.shape[:2] or pw_field.shape[-1] != 2:
        raise ValueError(
            f"p_w field {pw_field.shape} does not match aligned image {aligned.shape}"
        )
    out, mask = bilinear_sample(aligned, pw_field, pw_valid)
    if aligned_valid is not None:
        aligned_valid = np.asarray(aligned_valid, bool)
        if aligned_valid.shape != aligned.shape[:2]:
            raise ValueError("aligned validity mask does not match the aligned image")
        # any invalid neighbor with non-zero weight pulls the coverage below 1
        coverage, _ = bilinear_sample(aligned_valid.astype(np.float64), pw_field, mask)
        mask &= coverage >= 1.0 - 1e-9
        out[~mask] = 0.0
    return out.astype(np.float32), mask


def structure_gamma(pixels, depth, motion: RigidMotion, plane: PlaneModel,
                    k_target: CameraIntrinsics) -> np.ndarray:
    """Exact ``gamma = h / Z`` for target pixels at target depth ``Z``, with
    ``h`` measured in the source frame where ``plane`` is defined."""
    depth = np.asarray(depth, dtype=np.float64)
    x = backproject(pixels, depth, k_target)
    x_src = (x - motion.t) @ motion.R
    return point_plane_height(x_src, plane) / depth


def full_reprojection_oracle(
    pixels,
    depth,
    motion: RigidMotion,
    plane: PlaneModel,
    k_target: CameraIntrinsics,
    k_source: CameraIntrinsics | None = None,
) -> np.ndarray:
    """``p_w`` by explicit 3-D reprojection, independent of the parallax formula:
    backproject in the target view, move to the source frame, project with
    the source intrinsics, then map by the plane homography."""
    if k_source is None:
        k_source = k_target
    x = backproject(pixels, depth, k_target)
    x_src = (x - motion.t) @ motion.R  # R^T (x - t), row-wise
    if np.any(~(x_src[..., 2] > 0)):
        raise BehindCameraError("point is behind the source camera")
    p_src = project(x_src, k_source)
    H = compose_plane_homography(motion, plane, k_target, k_source)
    return apply_homography(H, p_src)
