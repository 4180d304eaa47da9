"""File formats: PNG images and depth maps, intrinsics / motion key-value
files, correspondence CSV and homography text files.

All writers go through a temporary file in the destination directory followed
by an atomic rename, so readers never observe a half-written output.
"""
from __future__ import annotations

import csv
import io
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import png

from .geometry import CameraIntrinsics, DepthMap, PlaneModel, RigidMotion, as_image
from .homography import Homography

DEPTH_SCALE = 256.0


class FileFormatError(ValueError):
    """A file exists but its contents cannot be parsed."""


@contextmanager
def atomic_output(path, mode="wb"):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if "b" in mode else {"newline": ""})) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _CountingReader(io.RawIOBase):
    """Byte stream that remembers how far the decoder got."""

    def __init__(self, data: bytes):
        self._buf = io.BytesIO(data)

    def readable(self):
        return True

    def readinto(self, b):
        return self._buf.readinto(b)

    def read(self, n=-1):
        return self._buf.read(n)

    @property
    def offset(self):
        return self._buf.tell()


def _read_png(path) -> tuple[np.ndarray, int]:
    """Decode a PNG into an (H, W, planes) integer array and its bit depth."""
    path = Path(path)
    data = path.read_bytes()
    stream = _CountingReader(data)
    try:
        width, height, rows, info = png.Reader(file=stream).asDirect()
        arr = np.vstack([np.asarray(r, dtype=np.uint32) for r in rows])
    except (png.Error, ValueError, EOFError) as exc:
        raise FileFormatError(
            f"{path}: cannot decode PNG at byte offset {stream.offset} of {len(data)}: {exc}"
        ) from exc
    planes = info["planes"]
    if info.get("alpha"):
        raise FileFormatError(f"{path}: images with an alpha channel are not supported")
    if arr.shape != (height, width * planes):
        raise FileFormatError(f"{path}: decoded {arr.shape}, header says {height}x{width}x{planes}")
    return arr.reshape(height, width, planes), info["bitdepth"]


def _write_png(path, raw: np.ndarray, bitdepth: int):
    height, width = raw.shape[:2]
    planes = 1 if raw.ndim == 2 else raw.shape[2]
    writer = png.Writer(width, height, greyscale=planes == 1, bitdepth=bitdepth)
    rows = raw.reshape(height, width * planes)
    with atomic_output(path) as fh:
        writer.write(fh, rows.tolist())


def read_image(path) -> np.ndarray:
    """8- or 16-bit gray/RGB PNG as float32 in [0, 1]; (H, W) or (H, W, 3)."""
    raw, bitdepth = _read_png(path)
    if bitdepth not in (8, 16):
        raise FileFormatError(f"{path}: unsupported bit depth {bitdepth}, need 8 or 16")
    if raw.shape[2] not in (1, 3):
        raise FileFormatError(f"{path}: expected 1 or 3 channels, got {raw.shape[2]}")
    img = raw.astype(np.float64) / float(2**bitdepth - 1)
    img = img[..., 0] if raw.shape[2] == 1 else img
    return img.astype(np.float32)


def write_image(path, image, bitdepth: int = 16):
    """Quantize to ``bitdepth`` bits and write a PNG (gray or RGB)."""
    if bitdepth not in (8, 16):
        raise ValueError("bitdepth must be 8 or 16")
    img = as_image(image).astype(np.float64)
    maxval = 2**bitdepth - 1
    raw = np.rint(img * maxval).astype(np.uint32)
    _write_png(path, raw, bitdepth)


def read_mask(path) -> np.ndarray:
    return read_image(path) > 0.5


def write_mask(path, mask):
    _write_png(path, np.asarray(mask, bool).astype(np.uint32) * 255, 8)


def read_depth_png(path) -> DepthMap:
    """16-bit single-channel depth: meters = raw / 256, raw 0 marks no data."""
    raw, bitdepth = _read_png(path)
    if bitdepth != 16 or raw.shape[2] != 1:
        raise FileFormatError(
            f"{path}: depth PNG must be 16-bit single channel, got {bitdepth}-bit x{raw.shape[2]}"
        )
    raw = raw[..., 0]
    return DepthMap(raw / DEPTH_SCALE, raw > 0)


def write_depth_png(path, depth: DepthMap):
    raw = np.rint(np.where(depth.valid, depth.values, 0.0) * DEPTH_SCALE)
    if np.any(raw[depth.valid] < 1) or np.any(raw > 65535):
        raise ValueError("depth outside the encodable range (1/256, 255.996] m")
    _write_png(path, raw.astype(np.uint32), 16)


def _parse_key_values(path) -> dict[str, tuple[int, list[float]]]:
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FileFormatError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            nums = [float(x) for x in value.replace(",", " ").split()]
        except ValueError:
            raise FileFormatError(f"{path}:{lineno}: non-numeric value for {key!r}") from None
        if key in out:
            raise FileFormatError(f"{path}:{lineno}: duplicate key {key!r}")
        out[key] = (lineno, nums)
    return out


def _take(kv, path, key, count, default=None):
    if key not in kv:
        if default is None:
            raise FileFormatError(f"{path}: missing key {key!r}")
        return default
    lineno, nums = kv.pop(key)
    if len(nums) != count:
        raise FileFormatError(f"{path}:{lineno}: {key!r} needs {count} number(s), got {len(nums)}")
    return nums


def read_intrinsics(path) -> tuple[CameraIntrinsics, PlaneModel]:
    """Parse ``key = value`` lines: fx fy cx cy width height, optional d_c and N."""
    kv = _parse_key_values(path)
    vals = {k: _take(kv, path, k, 1)[0] for k in ("fx", "fy", "cx", "cy", "width", "height")}
    d_c = _take(kv, path, "d_c", 1, [1.65])[0]
    N = _take(kv, path, "N", 3, [0.0, 1.0, 0.0])
    if kv:
        raise FileFormatError(f"{path}: unknown key(s) {sorted(kv)}")
    for k in ("width", "height"):
        if vals[k] != int(vals[k]):
            raise FileFormatError(f"{path}: {k} must be an integer")
        vals[k] = int(vals[k])
    try:
        return CameraIntrinsics(**vals), PlaneModel(np.array(N), d_c)
    except ValueError as exc:
        raise FileFormatError(f"{path}: {exc}") from exc


def _fmt(values) -> str:
    return " ".join(repr(float(v)) for v in np.ravel(values))


def write_intrinsics(path, k: CameraIntrinsics, plane: PlaneModel):
    text = (
        f"fx = {k.fx!r}\nfy = {k.fy!r}\ncx = {k.cx!r}\ncy = {k.cy!r}\n"
        f"width = {k.width}\nheight = {k.height}\nd_c = {plane.d_c!r}\nN = {_fmt(plane.N)}\n"
    )
    with atomic_output(path, "w") as fh:
        fh.write(text)


def read_motion(path) -> RigidMotion:
    """``R`` (9 numbers, row-major, default identity) and ``t`` (3 numbers)."""
    kv = _parse_key_values(path)
    R = _take(kv, path, "R", 9, list(np.eye(3).ravel()))
    t = _take(kv, path, "t", 3)
    if kv:
        raise FileFormatError(f"{path}: unknown key(s) {sorted(kv)}")
    try:
        return RigidMotion(np.array(R).reshape(3, 3), np.array(t))
    except ValueError as exc:
        raise FileFormatError(f"{path}: {exc}") from exc


def write_motion(path, motion: RigidMotion):
    with atomic_output(path, "w") as fh:
        fh.write(f"R = {_fmt(motion.R)}\nt = {_fmt(motion.t)}\n")


def read_homography(path) -> Homography:
    text = Path(path).read_text()
    try:
        nums = [float(x) for x in text.split()]
    except ValueError:
        raise FileFormatError(f"{path}: homography file must contain 9 numbers") from None
    if len(nums) != 9:
        raise FileFormatError(f"{path}: expected 9 numbers, found {len(nums)}")
    return Homography(np.array(nums).reshape(3, 3))


def write_homography(path, h: Homography):
    rows = "\n".join(_fmt(r) for r in h.H)
    with atomic_output(path, "w") as fh:
        fh.write(rows + "\n")


CSV_HEADER = ["us", "vs", "ut", "vt"]


def read_correspondences(path) -> tuple[np.ndarray, np.ndarray]:
    """CSV ``us,vs,ut,vt``; returns (source, target) arrays of shape (N, 2)."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != CSV_HEADER:
            raise FileFormatError(f"{path}:1: header must be {','.join(CSV_HEADER)}")
        for row in reader:
            lineno = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                raise FileFormatError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            try:
                vals = [float(c) for c in row]
            except ValueError:
                raise FileFormatError(f"{path}:{lineno}: non-numeric field in {row}") from None
            if not all(np.isfinite(vals)):
                raise FileFormatError(f"{path}:{lineno}: non-finite coordinate")
            rows.append(vals)
    arr = np.array(rows, dtype=np.float64).reshape(-1, 4)
    return arr[:, :2], arr[:, 2:]


def write_correspondences(path, src, dst):
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    with atomic_output(path, "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for s, d in zip(src, dst):
            w.writerow([repr(float(x)) for x in (*s, *d)])
