"""Grayscale face rasters: preprocessing, quality measurements, PGM I/O.

All images are row-major float arrays with intensities in [0, 1]. The
preprocessing path mirrors a fixed camera pipeline: center-crop to a
square, area-averaged rescale, BT.601 luminance for color input.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ImageTooSmallError, InvalidImageError, InvalidInputError

MIN_SIDE = 8

# ITU-R BT.601 luminance weights for RGB -> gray.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class FaceImage:
    """A grayscale raster with every pixel in [0, 1].

    ``pixels`` is a 2-D float64 array of shape (height, width).
    """

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 2:
            raise InvalidImageError(f"expected 2-D pixel array, got ndim={px.ndim}")
        h, w = px.shape
        if h < MIN_SIDE or w < MIN_SIDE:
            raise ImageTooSmallError(f"image {w}x{h} is below the {MIN_SIDE}px minimum")
        if not np.all(np.isfinite(px)):
            raise InvalidImageError("non-finite pixel values")
        if px.min() < 0.0 or px.max() > 1.0:
            raise InvalidImageError(
                f"pixel values outside [0,1]: min={px.min():.6g} max={px.max():.6g}"
            )
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def side(self) -> int:
        """Side length for square images (width checked equal to height)."""
        if self.width != self.height:
            raise InvalidImageError("image is not square")
        return self.width


class Preprocessed(NamedTuple):
    """Preprocess output plus metadata flags."""

    image: FaceImage
    upscaled: bool


def _to_gray(raster) -> np.ndarray:
    """Coerce a FaceImage, gray array, or RGB raster to a float64 gray array."""
    if isinstance(raster, FaceImage):
        return raster.pixels
    arr = np.asarray(raster)
    if arr.dtype == np.uint8:
        arr = arr.astype(np.float64) / 255.0
    else:
        arr = arr.astype(np.float64)
    if arr.ndim == 3 and arr.shape[2] == 3:
        r, g, b = LUMA_WEIGHTS
        arr = r * arr[:, :, 0] + g * arr[:, :, 1] + b * arr[:, :, 2]
    elif arr.ndim != 2:
        raise InvalidImageError(f"expected HxW or HxWx3 raster, got shape {arr.shape}")
    if arr.size == 0 or min(arr.shape) == 0:
        raise InvalidImageError("zero-dimension input")
    return np.clip(arr, 0.0, 1.0)


def _area_weights(src: int, dst: int) -> np.ndarray:
    """(dst, src) box-overlap weight matrix for exact area-average resampling.

    Output cell i covers [i*src/dst, (i+1)*src/dst) in source coordinates;
    each weight is the length of overlap with source cell j, normalized so
    rows sum to 1. For src == dst this is exactly the identity.
    """
    if src == dst:
        return np.eye(src)
    scale = src / dst
    w = np.zeros((dst, src))
    for i in range(dst):
        lo = i * scale
        hi = (i + 1) * scale
        j0 = int(np.floor(lo))
        j1 = min(int(np.ceil(hi)), src)
        for j in range(j0, j1):
            w[i, j] = min(hi, j + 1) - max(lo, j)
    return w / scale


def preprocess(raster, target_side: int) -> Preprocessed:
    """Center-crop to a square, then area-average rescale to target_side.

    Accepts a FaceImage, a 2-D gray array, or an HxWx3 RGB raster (uint8 or
    float in [0,1]). Upscaling is permitted and flagged in the result.
    """
    if target_side < MIN_SIDE:
        raise ImageTooSmallError(f"target_side {target_side} below minimum {MIN_SIDE}")
    gray = _to_gray(raster)
    h, w = gray.shape
    side = min(h, w)
    top = (h - side) // 2
    left = (w - side) // 2
    square = gray[top : top + side, left : left + side]
    wm = _area_weights(side, target_side)
    out = wm @ square @ wm.T
    # Averaging of in-range values stays in range; clip guards roundoff only.
    out = np.clip(out, 0.0, 1.0)
    return Preprocessed(FaceImage(out), upscaled=side < target_side)


def brightness(img) -> float:
    """Mean intensity scaled to [0, 100]."""
    return 100.0 * float(np.mean(_to_gray(img)))


def laplacian_response(img) -> np.ndarray:
    """4-neighbor Laplacian over interior pixels: 4*center - N - S - E - W."""
    px = _to_gray(img)
    if px.shape[0] < 3 or px.shape[1] < 3:
        raise InvalidImageError("image smaller than 3x3 has no interior")
    c = px[1:-1, 1:-1]
    return 4.0 * c - px[:-2, 1:-1] - px[2:, 1:-1] - px[1:-1, :-2] - px[1:-1, 2:]


def laplacian_variance(img) -> float:
    """Population variance of the interior Laplacian response."""
    return float(np.var(laplacian_response(img)))


def sharpness(img, reference_scale: float) -> float:
    """Laplacian-response variance normalized by reference_scale, in [0, 100].

    Saturates at 100 once the variance reaches reference_scale.
    """
    if reference_scale <= 0:
        raise InvalidInputError(f"reference_scale must be positive, got {reference_scale}")
    return 100.0 * min(1.0, laplacian_variance(img) / reference_scale)


def write_pgm(img: FaceImage) -> bytes:
    """Encode as binary PGM (P5), 8-bit, maxval 255."""
    data = np.rint(img.pixels * 255.0).astype(np.uint8)
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + data.tobytes()


def save_pgm(img: FaceImage, path) -> None:
    with open(path, "wb") as fh:
        fh.write(write_pgm(img))


def read_pgm(data: bytes) -> FaceImage:
    """Decode a binary PGM (P5) with maxval 255; intensity i maps to i/255."""
    if not data.startswith(b"P5"):
        raise InvalidImageError("not a binary PGM (P5) stream")
    # Header tokens may be separated by whitespace and '#' comments.
    pos = 2
    tokens = []
    while len(tokens) < 3:
        m = re.compile(rb"(?:\s+|#[^\n]*\n)*(\d+)").match(data, pos)
        if not m:
            raise InvalidImageError("truncated PGM header")
        tokens.append(int(m.group(1)))
        pos = m.end()
    width, height, maxval = tokens
    if maxval != 255:
        raise InvalidImageError(f"unsupported PGM maxval {maxval}, expected 255")
    pos += 1  # single whitespace byte after maxval
    raw = data[pos : pos + width * height]
    if len(raw) != width * height:
        raise InvalidImageError("PGM payload shorter than width*height")
    px = np.frombuffer(raw, dtype=np.uint8).astype(np.float64).reshape(height, width)
    return FaceImage(px / 255.0)


def load_pgm(path) -> FaceImage:
    with open(path, "rb") as fh:
        return read_pgm(fh.read())
