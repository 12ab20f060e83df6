"""Pixel containers, color conversions and the min-max stretch.

Images are plain numpy arrays: RGB rasters are ``(H, W, 3)`` ``uint8``,
gray rasters ``(H, W)`` ``uint8`` and Lab rasters ``(H, W, 3)`` ``float64``
with L in [0, 100] (D65 white point).
"""
from pathlib import Path

import numpy as np
from PIL import Image
from skimage import color

from .errors import DecodeError

GRAY_WEIGHTS = np.array([0.2989, 0.5870, 0.1140])


def as_rgb(img):
    """Validate and return an ``(H, W, 3)`` uint8 view of ``img``."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3 or img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"expected an (H, W, 3) RGB array, got shape {img.shape}")
    if img.dtype != np.uint8:
        img = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    return img


def quantize(values):
    """Round half up and clamp to ``uint8``."""
    return np.clip(np.floor(np.asarray(values, dtype=np.float64) + 0.5), 0, 255).astype(np.uint8)


def to_gray(img):
    """BT.601 luminance, rounded to the nearest level."""
    img = as_rgb(img)
    return quantize(img.astype(np.float64) @ GRAY_WEIGHTS)


def stretch_unit(values):
    """Map ``values`` linearly onto [0, 1]; a constant array maps to zeros."""
    values = np.asarray(values, dtype=np.float64)
    lo = values.min()
    hi = values.max()
    if hi <= lo:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def min_max_stretch(img):
    """Stretch a gray image onto the full 0..255 range.

    The stretched value ``255 * (v - min) / (max - min)`` is rounded half up,
    so ``[50, 100, 150]`` becomes ``[0, 128, 255]``. Constant images map to
    all zeros.
    """
    return quantize(255.0 * stretch_unit(img))


def stretch_channels(img):
    """Apply :func:`stretch_unit` to each channel of an ``(H, W, C)`` array."""
    img = np.asarray(img, dtype=np.float64)
    out = np.empty_like(img)
    for ch in range(img.shape[-1]):
        out[..., ch] = stretch_unit(img[..., ch])
    return out


def rgb_to_lab(img):
    return color.rgb2lab(as_rgb(img).astype(np.float64) / 255.0)


def lab_to_rgb_float(lab):
    """Lab to RGB in [0, 1], out-of-gamut values clipped."""
    return np.clip(color.lab2rgb(np.asarray(lab, dtype=np.float64)), 0.0, 1.0)


def lab_to_rgb(lab):
    return quantize(255.0 * lab_to_rgb_float(lab))


def read_rgb(path):
    """Decode ``path`` as 8-bit sRGB. Alpha is dropped, gray is expanded."""
    try:
        with Image.open(Path(path)) as im:
            im.load()
            if im.mode not in ("RGB", "L", "RGBA", "P", "LA", "1"):
                raise DecodeError(f"{path}: unsupported pixel mode {im.mode}")
            return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()
    except DecodeError:
        raise
    except (OSError, ValueError) as exc:
        raise DecodeError(f"{path}: {exc}") from exc


def write_png(path, img):
    """Write an RGB, gray or boolean array as PNG (booleans as 1-bit)."""
    img = np.asarray(img)
    if img.dtype == bool:
        im = Image.fromarray(img.astype(np.uint8) * 255).convert("1")
    else:
        im = Image.fromarray(img.astype(np.uint8))
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    im.save(path, format="PNG")
