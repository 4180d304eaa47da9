"""Bilinear image sampling with an "invalid outside" border policy."""
from __future__ import annotations

import numpy as np

# Coordinates this close outside the image are snapped onto the border.
BORDER_EPS = 1e-6


def bilinear_sample(image, coords, valid=None) -> tuple[np.ndarray, np.ndarray]:
    """Sample ``image`` at continuous ``coords`` (..., 2) given as ``(u, v)``.

    Returns ``(samples, mask)``. A sample is valid only if its whole 2x2
    footprint lies inside the image; invalid samples are set to 0. No
    clamping or extrapolation is done.
    """
    image = np.asarray(image)
    coords = np.asarray(coords, dtype=np.float64)
    h, w = image.shape[:2]
    u = coords[..., 0]
    v = coords[..., 1]

    mask = np.isfinite(u) & np.isfinite(v)
    mask &= (u >= -BORDER_EPS) & (u <= w - 1 + BORDER_EPS)
    mask &= (v >= -BORDER_EPS) & (v <= h - 1 + BORDER_EPS)
    if valid is not None:
        mask &= np.asarray(valid, bool)

    u = np.clip(np.where(mask, u, 0.0), 0.0, w - 1)
    v = np.clip(np.where(mask, v, 0.0), 0.0, h - 1)
    u0 = np.floor(u).astype(np.intp)
    v0 = np.floor(v).astype(np.intp)
    u1 = np.minimum(u0 + 1, w - 1)
    v1 = np.minimum(v0 + 1, h - 1)
    du = u - u0
    dv = v - v0
    if image.ndim == 3:
        du = du[..., None]
        dv = dv[..., None]

    img = image.astype(np.float64, copy=False)
    top = img[v0, u0] * (1 - du) + img[v0, u1] * du
    bottom = img[v1, u0] * (1 - du) + img[v1, u1] * du
    out = top * (1 - dv) + bottom * dv
    m = mask[..., None] if image.ndim == 3 else mask
    out = np.where(m, out, 0.0)
    return out.astype(image.dtype if image.dtype.kind == "f" else np.float64), mask
