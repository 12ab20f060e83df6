"""Tissue/background mask from the hematoxylin display channel."""
import cv2
import numpy as np
from scipy import ndimage as ndi

from .errors import EmptyMask

EIGHT = np.ones((3, 3), dtype=bool)
FOUR = ndi.generate_binary_structure(2, 1)


def disk(radius):
    """Boolean footprint ``{(dy, dx): dx**2 + dy**2 <= radius**2}``."""
    if radius < 1:
        raise ValueError("disk radius must be >= 1")
    r = int(radius)
    yy, xx = np.mgrid[-r:r + 1, -r:r + 1]
    return xx * xx + yy * yy <= r * r


def otsu_threshold(img):
    """Otsu level over the 256-bin histogram of a uint8 image.

    Pixels ``<= t`` form the lower class. Ties in between-class variance go
    to the lowest level; a constant image returns its value.
    """
    img = np.asarray(img)
    if img.size == 0:
        raise ValueError("empty image")
    hist = np.bincount(img.ravel().astype(np.int64), minlength=256)[:256].astype(np.float64)
    return otsu_from_histogram(hist)


def otsu_from_histogram(hist):
    hist = np.asarray(hist, dtype=np.float64)
    levels = np.arange(len(hist), dtype=np.float64)
    total = hist.sum()
    n0 = np.cumsum(hist)
    s0 = np.cumsum(hist * levels)
    n1 = total - n0
    valid = (n0 > 0) & (n1 > 0)
    if not valid.any():
        return int(np.flatnonzero(hist)[0])
    # between-class variance up to the constant factor 1/total**2
    num = (total * s0 - n0 * s0[-1]) ** 2
    var = np.full(len(hist), -1.0)
    var[valid] = num[valid] / (n0[valid] * n1[valid])
    return int(np.argmax(var))


def dilate(mask, radius):
    """Dilation by a disk; pixels outside the image count as background."""
    mask = np.ascontiguousarray(mask, dtype=bool).view(np.uint8)
    out = cv2.dilate(mask, disk(radius).view(np.uint8),
                     borderType=cv2.BORDER_CONSTANT, borderValue=0)
    return out.view(bool)


def erode(mask, radius):
    """Erosion by a disk; pixels outside the image count as foreground."""
    mask = np.ascontiguousarray(mask, dtype=bool).view(np.uint8)
    out = cv2.erode(mask, disk(radius).view(np.uint8),
                    borderType=cv2.BORDER_CONSTANT, borderValue=1)
    return out.view(bool)


def morph_open(mask, radius):
    return dilate(erode(mask, radius), radius)


def morph_close(mask, radius):
    return erode(dilate(mask, radius), radius)


def fill_holes(mask):
    """Set every background region not 4-connected to the border."""
    return ndi.binary_fill_holes(np.asarray(mask, dtype=bool), structure=FOUR)


def largest_component(mask, connectivity=8):
    """Keep the largest connected component (8-connected by default).

    Ties go to the component whose first pixel comes first in row-major
    order.
    """
    mask = np.asarray(mask, dtype=bool)
    labels, n = ndi.label(mask, structure=EIGHT if connectivity == 8 else FOUR)
    if n == 0:
        raise EmptyMask("no tissue pixel")
    sizes = np.bincount(labels.ravel())[1:]
    # ndi.label numbers components in raster order of their first pixel
    return labels == int(np.argmax(sizes)) + 1


def build_tissue_mask(hema_display, radius=15, connectivity=8):
    """Otsu, then open/close/fill, largest component, and a second open/close/fill.

    Tissue is the darker side of the Otsu level.
    """
    hema_display = np.asarray(hema_display)
    if hema_display.min() == hema_display.max():
        raise EmptyMask("constant hematoxylin channel, nothing to separate")
    mask = hema_display <= otsu_threshold(hema_display)
    mask = fill_holes(morph_close(morph_open(mask, radius), radius))
    mask = largest_component(mask, connectivity)
    mask = fill_holes(morph_close(morph_open(mask, radius), radius))
    # the second opening can split the region again
    return largest_component(mask, connectivity)
