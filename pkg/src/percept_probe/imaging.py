"""Decoding, resampling, color conversion and 2-D convolution.

Images are 8-bit rasters; every intermediate computation is float64 and is
quantized back to 8 bits (round-half-up, clamp) only when an Image is built.
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage
from PIL import ImageOps, UnidentifiedImageError
from scipy import ndimage

from .errors import EvenKernel, MalformedStream, UnsupportedFormat, ValidationError

LUMA_WEIGHTS = (0.299, 0.587, 0.114)
CANONICAL_SHORT_SIDE = 256
CANONICAL_CROP = 224


@dataclass(frozen=True, eq=False)
class Image:
    """An 8-bit raster, shape ``(height, width)`` or ``(height, width, 3)``."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.dtype != np.uint8:
            raise ValidationError(f"Image samples must be uint8, got {px.dtype}")
        if px.ndim == 3 and px.shape[2] == 1:
            px = px[:, :, 0]
        if px.ndim not in (2, 3) or (px.ndim == 3 and px.shape[2] != 3):
            raise ValidationError(f"unsupported image shape {px.shape}")
        if px.shape[0] == 0 or px.shape[1] == 0:
            raise ValidationError("image must be non-empty")
        px = np.ascontiguousarray(px)
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @classmethod
    def from_samples(cls, width, height, channels, samples):
        arr = np.asarray(samples, dtype=np.uint8)
        if arr.size != width * height * channels:
            raise ValidationError(
                f"expected {width * height * channels} samples, got {arr.size}")
        shape = (height, width) if channels == 1 else (height, width, channels)
        return cls(arr.reshape(shape))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else 3

    @property
    def samples(self) -> np.ndarray:
        return self.pixels.reshape(-1)

    def __eq__(self, other):
        if not isinstance(other, Image):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and np.array_equal(
            self.pixels, other.pixels)

    def __repr__(self):
        return f"Image(width={self.width}, height={self.height}, channels={self.channels})"


def quantize(values) -> np.ndarray:
    """Round half up and clamp to [0, 255]."""
    return np.clip(np.floor(np.asarray(values, dtype=np.float64) + 0.5), 0, 255).astype(np.uint8)


def decode_image(data: bytes) -> Image:
    """Decode a PNG or JPEG byte stream, applying EXIF orientation."""
    try:
        pil = PILImage.open(io.BytesIO(data))
    except UnidentifiedImageError as exc:
        raise MalformedStream("cannot identify image data") from exc
    if pil.format not in ("PNG", "JPEG"):
        raise UnsupportedFormat(f"unsupported container {pil.format!r}")
    try:
        pil.load()
        pil = ImageOps.exif_transpose(pil)
    except (OSError, SyntaxError, ValueError) as exc:
        raise MalformedStream(str(exc)) from exc
    if pil.mode in ("L", "1", "I;16", "I", "F"):
        if pil.mode in ("I;16", "I", "F"):
            arr = np.asarray(pil, dtype=np.float64)
            hi = 65535.0 if pil.mode == "I;16" else max(float(arr.max()), 1.0)
            return Image(quantize(arr * 255.0 / hi))
        return Image(np.asarray(pil.convert("L"), dtype=np.uint8))
    return Image(np.asarray(pil.convert("RGB"), dtype=np.uint8))


def read_image(path) -> Image:
    return decode_image(Path(path).read_bytes())


def encode_png(img: Image) -> bytes:
    buf = io.BytesIO()
    # optimize=False and no metadata keep encoding byte-stable across runs
    PILImage.fromarray(img.pixels).save(buf, format="PNG", compress_level=1)
    return buf.getvalue()


def write_png(img: Image, path) -> None:
    Path(path).write_bytes(encode_png(img))


def to_grayscale(img: Image) -> Image:
    if img.channels == 1:
        return img
    rgb = img.pixels.astype(np.float64)
    luma = (LUMA_WEIGHTS[0] * rgb[..., 0] + LUMA_WEIGHTS[1] * rgb[..., 1]
            + LUMA_WEIGHTS[2] * rgb[..., 2])
    return Image(quantize(luma))


def to_float_gray(img: Image) -> np.ndarray:
    """Grayscale plane scaled to [0, 1], float64."""
    return to_grayscale(img).pixels.astype(np.float64) / 255.0


def _resample_matrix(n_in, n_out):
    """Row-stochastic (n_out, n_in) triangle-filter weights, half-pixel centers.

    Upsampling gives plain bilinear interpolation; downsampling widens the
    triangle by the scale factor so every input pixel contributes.
    """
    scale = n_in / n_out
    support = max(scale, 1.0)
    center = (np.arange(n_out, dtype=np.float64) + 0.5) * scale - 0.5
    center = np.clip(center, 0.0, n_in - 1) if scale < 1 else center
    j = np.arange(n_in, dtype=np.float64)
    w = np.maximum(0.0, 1.0 - np.abs(j[np.newaxis, :] - center[:, np.newaxis]) / support)
    return w / w.sum(axis=1, keepdims=True)


def resize_plane(plane: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Separable triangle-filter resize of a float array (H, W) or (H, W, C)."""
    h, w = plane.shape[:2]
    wy = _resample_matrix(h, out_h)
    wx = _resample_matrix(w, out_w)
    return np.einsum("ij,jk...,lk->il...", wy, plane, wx, optimize=True)


def resize_bilinear(img: Image, out_w: int, out_h: int) -> Image:
    if out_w <= 0 or out_h <= 0:
        raise ValidationError("output dimensions must be positive")
    if (out_w, out_h) == (img.width, img.height):
        return img
    return Image(quantize(resize_plane(img.pixels.astype(np.float64), out_w, out_h)))


def convolve2d(plane, kernel) -> np.ndarray:
    """Same-size 2-D convolution with reflect-101 borders."""
    plane = np.asarray(plane, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    if kernel.ndim == 1:
        kernel = kernel[np.newaxis, :]
    if kernel.ndim != 2 or kernel.shape[0] % 2 == 0 or kernel.shape[1] % 2 == 0:
        raise EvenKernel(f"kernel sides must be odd, got {kernel.shape}")
    if plane.ndim != 2 or plane.size == 0:
        raise ValidationError("plane must be a non-empty 2-D array")
    # scipy's "mirror" mode is reflect-101 (d c b | a b c d | c b a)
    return ndimage.convolve(plane, kernel, mode="mirror")


def gaussian_kernel1d(sigma: float, radius: int | None = None) -> np.ndarray:
    if radius is None:
        radius = max(1, int(np.ceil(3.0 * sigma)))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def gaussian_blur_plane(plane: np.ndarray, sigma: float, mode: str = "mirror") -> np.ndarray:
    """Separable Gaussian blur; works per channel.

    ``mode`` is a ``scipy.ndimage`` border mode.  The default ``"mirror"`` is
    reflect-101; ``"reflect"`` (half-sample symmetric) conserves total mass.
    """
    if sigma <= 0:
        return np.asarray(plane, dtype=np.float64)
    k = gaussian_kernel1d(sigma)
    out = np.asarray(plane, dtype=np.float64)
    for axis in (0, 1):
        out = ndimage.convolve1d(out, k, axis=axis, mode=mode)
    return out


def preprocess(img: Image, short_side: int = CANONICAL_SHORT_SIDE,
               crop: int = CANONICAL_CROP) -> Image:
    """Resize so the short side equals ``short_side``, then center-crop."""
    h, w = img.height, img.width
    scale = short_side / min(h, w)
    new_w = max(short_side, int(np.floor(w * scale + 0.5)))
    new_h = max(short_side, int(np.floor(h * scale + 0.5)))
    if h <= w:
        new_h = short_side
    else:
        new_w = short_side
    resized = resize_bilinear(img, new_w, new_h)
    top = (new_h - crop) // 2
    left = (new_w - crop) // 2
    return Image(resized.pixels[top:top + crop, left:left + crop])
