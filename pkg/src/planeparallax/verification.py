"""Monte Carlo check that the closed-form residual parallax agrees with an
explicit 3-D reprojection followed by the plane homography."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from .geometry import CameraIntrinsics, PlaneModel, RigidMotion
from .homography import _transfer, compose_plane_homography
from .parallax import EPS_DEN, _parallax
from .rng import make_rng

# KITTI raw calibration (left color camera), 1242x375
KITTI_K = CameraIntrinsics(fx=721.5377, fy=721.5377, cx=609.5593, cy=172.854, width=1242, height=375)


@dataclass(frozen=True)
class DerivationConfig:
    trials: int = 10_000
    points_per_trial: int = 8
    max_translation: float = 2.0
    max_rotation_deg: float = 30.0
    d_c_range: tuple[float, float] = (1.0, 3.0)
    depth_range: tuple[float, float] = (2.0, 80.0)
    max_tilt_deg: float = 30.0  # plane normal deviation from (0, 1, 0)


@dataclass(frozen=True)
class DerivationReport:
    max_err_px: float
    samples: int
    valid: int


def _random_unit(rng, n=None):
    v = rng.normal(size=(3,) if n is None else (n, 3))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def random_configurations(rng, n: int, cfg: DerivationConfig = DerivationConfig()):
    """``n`` random motions and planes as stacked arrays (R, t, N, d_c)."""
    angle = np.deg2rad(cfg.max_rotation_deg) * rng.uniform(size=n)
    R = Rotation.from_rotvec(angle[:, None] * _random_unit(rng, n)).as_matrix()
    # uniform in the ball of radius max_translation
    t = _random_unit(rng, n) * (cfg.max_translation * rng.uniform(size=n) ** (1 / 3))[:, None]
    tilt = np.deg2rad(cfg.max_tilt_deg) * rng.uniform(size=n)
    axis = np.cross([0.0, 1.0, 0.0], _random_unit(rng, n))
    axis /= np.linalg.norm(axis, axis=-1, keepdims=True)
    N = Rotation.from_rotvec(tilt[:, None] * axis).apply([0.0, 1.0, 0.0])
    N /= np.linalg.norm(N, axis=-1, keepdims=True)
    d_c = rng.uniform(*cfg.d_c_range, size=n)
    return R, t, N, d_c


def derivation_errors(seed: int, cfg: DerivationConfig = DerivationConfig(),
                      k: CameraIntrinsics = KITTI_K) -> np.ndarray:
    """Per-sample |p_w(closed form) - p_w(reprojection)| in pixels, shape
    (trials, points_per_trial); NaN for samples outside the domain (behind
    the source camera, singular denominator, point at infinity)."""
    rng = make_rng(seed)
    n, m = cfg.trials, cfg.points_per_trial
    R, t, N, d_c = random_configurations(rng, n, cfg)
    size = np.array([k.width - 1, k.height - 1], dtype=np.float64)
    pixels = rng.uniform(size=(n, m, 2)) * size
    depth = rng.uniform(*cfg.depth_range, size=(n, m))

    # oracle leg: backproject in the target, move to the source frame
    x = depth[..., None] * k.rays(pixels)
    x_src = np.einsum("nji,nmj->nmi", R, x - t[:, None, :])  # R^T (x - t)
    in_front = x_src[..., 2] > 1e-6

    # structure in the source frame where the plane is defined
    h = d_c[:, None] - np.einsum("nmi,ni->nm", x_src, N)
    gamma = h / depth
    disp, den = _parallax(pixels, gamma, t[:, None, :], d_c[:, None], k)
    closed = pixels + disp

    with np.errstate(divide="ignore", invalid="ignore"):
        p_src = x_src[..., :2] / x_src[..., 2:3] * [k.fx, k.fy] + [k.cx, k.cy]
    oracle = np.empty_like(closed)
    w = np.empty(closed.shape[:-1])
    for i in range(n):
        H = compose_plane_homography(RigidMotion(R[i], t[i]), PlaneModel(N[i], d_c[i]), k).H
        oracle[i], w[i] = _transfer(H, p_src[i])

    ok = in_front & (np.abs(den) > EPS_DEN) & (np.abs(w) > 1e-12)
    err = np.linalg.norm(closed - oracle, axis=-1)
    return np.where(ok, err, np.nan)


def verify_derivation(seed: int, cfg: DerivationConfig = DerivationConfig()) -> DerivationReport:
    errors = derivation_errors(seed, cfg)
    valid = np.isfinite(errors)
    max_err = float(errors[valid].max()) if valid.any() else float("nan")
    return DerivationReport(max_err, errors.size, int(valid.sum()))
