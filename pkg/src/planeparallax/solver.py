"""Direct depth recovery: per-pixel plane sweep over inverse depth, plane
fitting, median scaling and the standard depth error metrics."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .geometry import DEPTH_MIN, CameraIntrinsics, DepthMap, GammaMap, PlaneModel, as_image
from .geometry import depth_from_gamma
from .losses import LossConfig, min_reprojection
from .parallax import EPS_DEN, _parallax, synthesize_target

LOW_CONFIDENCE_RATIO = 0.95


@dataclass(frozen=True)
class SweepConfig:
    num_hypotheses: int = 128
    inv_depth_min: float = 1 / 250.0
    inv_depth_max: float = 1 / 0.5
    patch_radius: int = 1
    use_ssim: bool = True
    alpha: float = 0.85

    def __post_init__(self):
        if self.num_hypotheses < 2:
            raise ValueError("need at least 2 hypotheses")
        if not 0 < self.inv_depth_min < self.inv_depth_max <= 1 / DEPTH_MIN:
            raise ValueError(
                "inverse depth range must satisfy 0 < min < max <= 1/0.1, got "
                f"[{self.inv_depth_min}, {self.inv_depth_max}]"
            )
        if self.patch_radius < 1:
            raise ValueError("patch_radius must be >= 1")

    def inverse_depths(self) -> np.ndarray:
        return np.linspace(self.inv_depth_min, self.inv_depth_max, self.num_hypotheses)


@dataclass
class SweepResult:
    gamma: GammaMap
    depth: DepthMap
    index: np.ndarray  # winning hypothesis per pixel, -1 where unscored
    low_confidence: np.ndarray
    cost: np.ndarray  # winning cost per pixel

    def __iter__(self):
        return iter((self.gamma, self.depth))


def _offsets(radius: int):
    r = range(-radius, radius + 1)
    return [(dv, du) for dv in r for du in r]


def _shifted_grid(k: CameraIntrinsics, dv: int, du: int) -> np.ndarray:
    """Pixel grid shifted by (du, dv), clamped to the image (replicate border)."""
    v, u = np.mgrid[0 : k.height, 0 : k.width]
    u = np.clip(u + du, 0, k.width - 1)
    v = np.clip(v + dv, 0, k.height - 1)
    return np.stack([u, v], axis=-1).astype(np.float64)


def _with_channels(x):
    return x[..., None] if x.ndim == 2 else x


class _PatchScorer:
    """Photometric loss of (2r+1)^2 patches warped rigidly with the gamma of
    their center pixel: mean L1 over the patch plus SSIM from the patch
    statistics (same constants as ``ssim_map``)."""

    def __init__(self, target, k: CameraIntrinsics, radius: int, loss_config: LossConfig):
        self.k = k
        self.cfg = loss_config
        self.grids = [_shifted_grid(k, dv, du) for dv, du in _offsets(radius)]
        target = _with_channels(target).astype(np.float64)
        self.target = [target[g[..., 1].astype(int), g[..., 0].astype(int)] for g in self.grids]
        n = len(self.grids)
        self.mu_t = sum(self.target) / n
        self.var_t = sum(t * t for t in self.target) / n - self.mu_t**2

    def __call__(self, aligned, valid, gamma_center, t, d_c):
        n = len(self.grids)
        s_sum = s_sq = ts_sum = l1 = 0.0
        ok = np.ones(self.k.shape, bool)
        for grid, tgt in zip(self.grids, self.target):
            disp, den = _parallax(grid, gamma_center, t, d_c, self.k)
            good = np.abs(den) > EPS_DEN
            synth, mask = synthesize_target(aligned, grid + disp, good, valid)
            ok &= mask
            synth = _with_channels(synth).astype(np.float64)
            s_sum = s_sum + synth
            s_sq = s_sq + synth * synth
            ts_sum = ts_sum + tgt * synth
            l1 = l1 + np.abs(tgt - synth)
        mu_s = s_sum / n
        var_s = s_sq / n - mu_s**2
        cov = ts_sum / n - self.mu_t * mu_s
        c1, c2 = self.cfg.ssim_c1, self.cfg.ssim_c2
        ssim = ((2 * self.mu_t * mu_s + c1) * (2 * cov + c2)) / (
            (self.mu_t**2 + mu_s**2 + c1) * (self.var_t + var_s + c2)
        )
        alpha = self.cfg.alpha
        cost = (1 - alpha) * (l1 / n).mean(-1) + alpha / 2 * (1 - ssim.mean(-1))
        return np.where(ok, cost, np.inf), ok


def sweep_costs(
    target,
    aligned_prev,
    aligned_next,
    t_prev,
    t_next,
    plane: PlaneModel,
    k: CameraIntrinsics,
    config: SweepConfig = SweepConfig(),
    valid_prev=None,
    valid_next=None,
    threads: int = 1,
):
    """Cost volume (num_hypotheses, H, W) and its validity, min-combined over
    the two aligned sources."""
    target = as_image(target)
    aligned_prev = as_image(aligned_prev)
    aligned_next = as_image(aligned_next)
    if not (target.shape == aligned_prev.shape == aligned_next.shape):
        raise ValueError("target and aligned images must share dimensions")
    if target.shape[:2] != k.shape:
        raise ValueError(f"images {target.shape[:2]} do not match camera {k.shape}")
    sources = []
    for aligned, t, valid in ((aligned_prev, t_prev, valid_prev), (aligned_next, t_next, valid_next)):
        t = np.asarray(t, dtype=np.float64).reshape(3)
        if not np.any(t != 0):
            raise ValueError("translations must be non-zero to produce parallax")
        sources.append((aligned, t, valid))

    loss_config = LossConfig(alpha=config.alpha if config.use_ssim else 0.0)
    scorer = _PatchScorer(target, k, config.patch_radius, loss_config)
    n_dot_r = k.rays() @ plane.N
    costs = np.full((config.num_hypotheses,) + k.shape, np.inf)

    def score(j, rho):
        gamma = plane.d_c * rho - n_dot_r
        (c_prev, m_prev), (c_next, m_next) = (
            scorer(aligned, valid, gamma, t, plane.d_c) for aligned, t, valid in sources
        )
        combined, m = min_reprojection(c_prev, m_prev, c_next, m_next)
        costs[j] = np.where(m, combined, np.inf)

    # slices are written independently, so the volume does not depend on scheduling
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(score, *zip(*enumerate(config.inverse_depths()))))
    else:
        for j, rho in enumerate(config.inverse_depths()):
            score(j, rho)
    return costs


def _second_minimum(costs: np.ndarray, best: np.ndarray) -> np.ndarray:
    """Lowest cost among local minima along the hypothesis axis other than
    the winner (inf if the winner is the only one)."""
    padded = np.concatenate([np.full((1,) + costs.shape[1:], np.inf), costs,
                             np.full((1,) + costs.shape[1:], np.inf)])
    is_min = (costs <= padded[:-2]) & (costs <= padded[2:]) & np.isfinite(costs)
    idx = np.arange(costs.shape[0])[:, None, None]
    other = np.where(is_min & (idx != best[None]), costs, np.inf)
    return other.min(axis=0)


def plane_sweep_gamma(
    target,
    aligned_prev,
    aligned_next,
    t_prev,
    t_next,
    plane: PlaneModel,
    k: CameraIntrinsics,
    config: SweepConfig = SweepConfig(),
    valid_prev=None,
    valid_next=None,
    threads: int = 1,
) -> SweepResult:
    """Winner-take-all sweep over hypotheses uniform in inverse depth.

    For each hypothesis every target pixel gets ``gamma = d_c / Z - N.r``, is
    moved by the residual parallax into both aligned images, and scored by
    the patch-averaged photometric loss; the two sources are combined by
    per-pixel minimum. Unpacks as ``gamma, depth = plane_sweep_gamma(...)``.

    Pixels whose best cost is within 5% of a competing local minimum are
    flagged in ``low_confidence`` (textureless or ambiguous regions).
    """
    rhos = config.inverse_depths()
    if len(rhos) == 0:
        raise ValueError("no depth hypotheses in range")
    costs = sweep_costs(target, aligned_prev, aligned_next, t_prev, t_next, plane, k,
                        config, valid_prev, valid_next, threads)
    scored = np.isfinite(costs).any(axis=0)
    best = np.where(scored, np.argmin(costs, axis=0), -1)
    best_cost = np.where(scored, np.take_along_axis(costs, np.maximum(best, 0)[None], 0)[0], np.inf)
    second = _second_minimum(costs, best)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(second > 0, best_cost / second, 1.0)
    low_conf = scored & np.isfinite(second) & (ratio > LOW_CONFIDENCE_RATIO)

    rho = rhos[np.maximum(best, 0)]
    gamma = GammaMap(plane.d_c * rho - k.rays() @ plane.N, scored)
    depth = depth_from_gamma(gamma, k, plane)
    return SweepResult(gamma, depth, best, low_conf, best_cost)


def fit_plane_normal(points) -> PlaneModel:
    """Least-squares plane through 3-D points (centroid + smallest singular
    direction), oriented so N_y >= 0."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(points) < 3:
        raise ValueError(f"need at least 3 points, got {len(points)}")
    centroid = points.mean(axis=0)
    _, sv, Vt = np.linalg.svd(points - centroid, full_matrices=False)
    if sv[0] == 0 or sv[1] <= 1e-9 * sv[0]:
        raise ValueError("points are collinear or coincident")
    N = Vt[2]
    if N[1] < 0:
        N = -N
    d_c = float(N @ centroid)
    if not d_c > 0:
        raise ValueError("fitted plane does not lie below the camera (d_c <= 0)")
    return PlaneModel.from_normal(N, d_c)


def _joint_values(pred: DepthMap, gt: DepthMap):
    if pred.shape != gt.shape:
        raise ValueError(f"depth maps differ in size: {pred.shape} vs {gt.shape}")
    joint = pred.valid & gt.valid
    return joint, pred.values[joint], gt.values[joint]


def median_scale(pred: DepthMap, gt: DepthMap) -> tuple[DepthMap, float]:
    """Rescale ``pred`` so its median over jointly valid pixels equals gt's.

    The ratio of medians is nudged by a few ulps where needed, and if
    rounding still leaves a gap the median element(s) are snapped, so the
    equality holds exactly in floating point.
    """
    joint, p, g = _joint_values(pred, gt)
    if p.size == 0:
        raise ValueError("no pixels valid in both depth maps")
    med_p = np.median(p)
    med_g = np.median(g)
    if med_p == 0 or med_g == 0:
        raise ValueError("zero median")
    scale = _exact_scale(p, med_p, med_g)
    out = pred.values.copy()
    out[joint] = _snap_median(p * scale, med_g)
    return DepthMap(out, pred.valid.copy()), float(scale)


def _snap_median(values: np.ndarray, target: float, max_steps: int = 64) -> np.ndarray:
    """Move the median-defining element(s) by a few ulps so that
    ``np.median(values) == target``; rounding can make that unreachable by
    scaling alone."""
    if np.median(values) == target:
        return values
    values = values.copy()
    order = np.argsort(values, kind="stable")
    n = len(values)
    if n % 2:
        values[order[n // 2]] = target
        return values
    lo, hi = order[n // 2 - 1], order[n // 2]
    candidate = 2 * target - values[hi]
    for _ in range(max_steps):
        values[lo] = min(candidate, values[hi])
        m = np.median(values)
        if m == target:
            return values
        candidate = np.nextafter(candidate, np.inf if m < target else -np.inf)
    raise ArithmeticError("could not match the median exactly")  # pragma: no cover


def _exact_scale(p: np.ndarray, med_p: float, med_g: float, max_steps: int = 256) -> float:
    base = med_g / med_p
    best, best_err = base, abs(np.median(p * base) - med_g)
    up = down = base
    for _ in range(max_steps):
        if best_err == 0:
            break
        up = np.nextafter(up, np.inf)
        down = np.nextafter(down, -np.inf)
        for s in (up, down):
            err = abs(np.median(p * s) - med_g)
            if err < best_err:
                best, best_err = s, err
    return float(best)


@dataclass(frozen=True)
class DepthMetrics:
    abs_rel: float
    sq_rel: float
    rmse: float
    rmse_log: float
    d1: float
    d2: float
    d3: float

    def as_dict(self) -> dict[str, float]:
        return dict(self.__dict__)


def eval_metrics(pred: DepthMap, gt: DepthMap, cap: float = 80.0) -> DepthMetrics:
    """Standard depth errors over jointly valid pixels with gt in (0, cap];
    predictions are clipped to [1e-3, cap]."""
    joint, p, g = _joint_values(pred, gt)
    keep = (g > 0) & (g <= cap)
    p, g = p[keep], g[keep]
    if g.size == 0:
        raise ValueError("no valid pixels to evaluate")
    p = np.clip(p, 1e-3, cap)
    diff = p - g
    # threshold test in multiplicative form: exact at the 1.25 boundary
    within = [((p < 1.25**k * g) & (g < 1.25**k * p)).mean() for k in (1, 2, 3)]
    return DepthMetrics(
        abs_rel=float(np.mean(np.abs(diff) / g)),
        sq_rel=float(np.mean(diff**2 / g)),
        rmse=float(np.sqrt(np.mean(diff**2))),
        rmse_log=float(np.sqrt(np.mean((np.log(p) - np.log(g)) ** 2))),
        d1=float(within[0]),
        d2=float(within[1]),
        d3=float(within[2]),
    )
