"""Self-supervised photometric objective.

Per-pixel SSIM + L1 photometric loss, minimum over the previous/next aligned
frames, edge-aware smoothness on mean-normalized inverse depth, and the
weighted mean of the two.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import minimum_filter, uniform_filter

from .geometry import DepthMap, as_image


@dataclass(frozen=True)
class LossConfig:
    alpha: float = 0.85
    smoothness_weight: float = 1e-3
    ssim_c1: float = 0.01**2
    ssim_c2: float = 0.03**2
    ssim_window: int = 3

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.smoothness_weight < 0:
            raise ValueError("smoothness weight must be non-negative")
        if self.ssim_window < 3 or self.ssim_window % 2 == 0:
            raise ValueError("ssim_window must be odd and >= 3")


def _check_pair(a, b):
    a = as_image(a)
    b = as_image(b)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def _with_channels(x: np.ndarray) -> np.ndarray:
    return x[..., None] if x.ndim == 2 else x


def ssim_map(a, b, config: LossConfig = LossConfig()) -> np.ndarray:
    """Per-pixel SSIM (H, W), averaged over channels.

    Local statistics use a box window with replicate padding at the border.
    """
    a, b = _check_pair(a, b)
    a = _with_channels(a).astype(np.float64)
    b = _with_channels(b).astype(np.float64)
    size = (config.ssim_window, config.ssim_window, 1)

    def box(x):
        return uniform_filter(x, size=size, mode="nearest")

    mu_a = box(a)
    mu_b = box(b)
    var_a = box(a * a) - mu_a * mu_a
    var_b = box(b * b) - mu_b * mu_b
    cov = box(a * b) - mu_a * mu_b
    c1, c2 = config.ssim_c1, config.ssim_c2
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return (num / den).mean(axis=-1)


def photometric_loss(target, synthesized, mask=None, config: LossConfig = LossConfig()):
    """``(1 - alpha) |I_t - I_hat| + alpha / 2 * (1 - SSIM)`` per pixel.

    Returns ``(loss, mask)``. With the SSIM term active, a pixel whose SSIM
    window touches an invalid pixel is dropped from the mask, since its
    local statistics mix in meaningless samples.
    """
    target, synthesized = _check_pair(target, synthesized)
    if mask is None:
        mask = np.ones(target.shape[:2], bool)
    mask = np.asarray(mask, bool)
    if mask.shape != target.shape[:2]:
        raise ValueError("mask shape does not match images")
    l1 = np.abs(_with_channels(target).astype(np.float64) - _with_channels(synthesized)).mean(-1)
    loss = (1 - config.alpha) * l1
    if config.alpha > 0:
        loss = loss + config.alpha / 2 * (1 - ssim_map(target, synthesized, config))
        if not mask.all():
            mask = minimum_filter(mask, size=config.ssim_window, mode="nearest")
    return loss, mask


def min_reprojection(loss_prev, mask_prev, loss_next, mask_next):
    """Per-pixel minimum over two sources; a lone valid source wins, ties
    keep the previous frame."""
    loss_prev = np.asarray(loss_prev, dtype=np.float64)
    loss_next = np.asarray(loss_next, dtype=np.float64)
    mask_prev = np.asarray(mask_prev, bool)
    mask_next = np.asarray(mask_next, bool)
    if not (loss_prev.shape == loss_next.shape == mask_prev.shape == mask_next.shape):
        raise ValueError("loss maps and masks must share one shape")
    take_next = mask_next & (~mask_prev | (loss_next < loss_prev))
    combined = np.where(take_next, loss_next, np.where(mask_prev, loss_prev, 0.0))
    return combined, mask_prev | mask_next


def smoothness_loss(depth: DepthMap, image) -> np.ndarray:
    """Edge-aware first-order smoothness of mean-normalized inverse depth.

    ``|dx d*| exp(-|dx I|) + |dy d*| exp(-|dy I|)`` with forward differences
    and ``d* = (1/Z) / mean(1/Z)``; differences touching an invalid pixel,
    and the last row/column, contribute 0.
    """
    image = as_image(image)
    if image.shape[:2] != depth.shape:
        raise ValueError(f"image {image.shape} and depth {depth.shape} differ in size")
    valid = depth.valid
    if not valid.any():
        raise ValueError("no valid depth pixels: mean inverse depth is undefined")
    inv = np.where(valid, 1.0 / np.where(valid, depth.values, 1.0), 0.0)
    norm = inv / inv[valid].mean()
    gray = _with_channels(image).astype(np.float64).mean(-1)

    loss = np.zeros(depth.shape)
    dx = np.abs(np.diff(norm, axis=1)) * np.exp(-np.abs(np.diff(gray, axis=1)))
    dx[~(valid[:, 1:] & valid[:, :-1])] = 0.0
    dy = np.abs(np.diff(norm, axis=0)) * np.exp(-np.abs(np.diff(gray, axis=0)))
    dy[~(valid[1:, :] & valid[:-1, :])] = 0.0
    loss[:, :-1] += dx
    loss[:-1, :] += dy
    return loss


def total_loss(photo, photo_mask, smooth, config: LossConfig = LossConfig()) -> float:
    """Mean over valid pixels of ``lambda * smooth + photo``."""
    photo = np.asarray(photo, dtype=np.float64)
    smooth = np.asarray(smooth, dtype=np.float64)
    photo_mask = np.asarray(photo_mask, bool)
    if not (photo.shape == smooth.shape == photo_mask.shape):
        raise ValueError("loss maps must share one shape")
    if not photo_mask.any():
        raise ValueError("no valid pixels to average over")
    per_pixel = config.smoothness_weight * smooth + photo
    return float(per_pixel[photo_mask].sum() / photo_mask.sum())
