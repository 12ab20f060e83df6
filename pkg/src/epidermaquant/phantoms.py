"""Synthetic H-DAB images of a tissue stripe with known ground truth.

The stripe is a rotated rectangle of hematoxylin-stained tissue on a light
background. A band along one long edge also carries DAB, covering a chosen
fraction of the stripe area.
"""
import math
from dataclasses import dataclass

import numpy as np

from .deconvolve import DAB, HEMATOXYLIN, rgb_from_od


@dataclass
class Phantom:
    rgb: np.ndarray
    tissue: np.ndarray
    dab: np.ndarray
    angle: float

    @property
    def dab_fraction(self):
        return np.count_nonzero(self.dab) / np.count_nonzero(self.tissue)


def stripe_mask(shape, length, thickness, angle=0.0, centre=None):
    """Boolean rectangle ``length`` x ``thickness`` rotated counter-clockwise by ``angle``."""
    h, w = shape
    cy, cx = ((h - 1) / 2.0, (w - 1) / 2.0) if centre is None else centre
    yy, xx = np.mgrid[0:h, 0:w]
    u, v = _stripe_coords(yy - cy, xx - cx, angle)
    return (np.abs(u) <= length / 2.0) & (np.abs(v) <= thickness / 2.0)


def _stripe_coords(dy, dx, angle):
    t = math.radians(angle)
    c, s = math.cos(t), math.sin(t)
    return c * dx - s * dy, s * dx + c * dy


def tissue_phantom(shape=(600, 900), length=700, thickness=160, angle=0.0,
                   dab_fraction=0.3, hema_conc=0.55, dab_conc=0.9,
                   background=242, noise=0.03, seed=0):
    """Render a stripe phantom.

    Parameters
    ----------
    shape : tuple
        Image ``(height, width)``.
    length, thickness : float
        Stripe size in pixels before rotation.
    angle : float
        Counter-clockwise rotation in degrees.
    dab_fraction : float
        Fraction of the stripe thickness (and hence area) carrying DAB.
    hema_conc, dab_conc : float
        Stain concentrations in OD units.
    background : int
        Background gray level.
    noise : float
        Standard deviation of multiplicative concentration noise.
    """
    rng = np.random.default_rng(seed)
    h, w = shape
    yy, xx = np.mgrid[0:h, 0:w]
    u, v = _stripe_coords(yy - (h - 1) / 2.0, xx - (w - 1) / 2.0, angle)
    tissue = (np.abs(u) <= length / 2.0) & (np.abs(v) <= thickness / 2.0)
    dab = tissue & (v < -thickness / 2.0 + dab_fraction * thickness)

    hema_c = hema_conc * (1.0 + noise * rng.standard_normal(shape)) * tissue
    dab_c = dab_conc * (1.0 + noise * rng.standard_normal(shape)) * dab
    od = hema_c[..., None] * HEMATOXYLIN / np.linalg.norm(HEMATOXYLIN)
    od += dab_c[..., None] * DAB / np.linalg.norm(DAB)
    bg_od = -math.log10(background / 255.0)
    od += np.where(tissue, 0.0, bg_od)[..., None]
    rgb = rgb_from_od(np.maximum(od, 0.0))
    jitter = rng.integers(-2, 3, size=rgb.shape)
    rgb = np.clip(rgb.astype(np.int64) + jitter, 0, 255).astype(np.uint8)
    return Phantom(rgb=rgb, tissue=tissue, dab=dab, angle=angle)


def negative_phantom(**kwargs):
    """Tissue stripe with hematoxylin only."""
    kwargs.setdefault("dab_fraction", 0.0)
    return tissue_phantom(**kwargs)


def reference_image():
    """Fixed phantom whose Lab statistics define the default Reinhard target."""
    return tissue_phantom(shape=(512, 768), length=640, thickness=150, angle=4.0,
                          dab_fraction=0.3, seed=2024).rgb
