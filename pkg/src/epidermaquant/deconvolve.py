"""Optical density and Ruifrok-Johnston color deconvolution for H-DAB images."""
from dataclasses import dataclass

import numpy as np

from .errors import SingularMatrix

# H DAB vectors of the ImageJ Colour Deconvolution plugin
HEMATOXYLIN = np.array([0.650, 0.704, 0.286])
DAB = np.array([0.268, 0.570, 0.776])

SINGULAR_DET = 1e-6


def _unit(v):
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v)
    if n == 0:
        raise SingularMatrix("zero stain vector")
    return v / n


def stain_matrix(hema, dab, residual=None):
    """Build a 3x3 stain matrix with unit rows (hematoxylin, DAB, residual).

    A missing residual is the normalized cross product of the first two rows.
    """
    hema = _unit(hema)
    dab = _unit(dab)
    residual = _unit(np.cross(hema, dab) if residual is None else residual)
    m = np.vstack([hema, dab, residual])
    if abs(np.linalg.det(m)) <= SINGULAR_DET:
        raise SingularMatrix(f"|det| = {abs(np.linalg.det(m)):.3g}")
    return m


def hdab_stain_matrix():
    return stain_matrix(HEMATOXYLIN, DAB)


def od_from_rgb(img):
    """Per-channel optical density ``-log10(max(I, 1) / 255)``."""
    img = np.asarray(img, dtype=np.float64)
    return -np.log10(np.maximum(img, 1.0) / 255.0)


def rgb_from_od(od):
    return np.clip(np.floor(255.0 * np.power(10.0, -np.asarray(od)) + 0.5), 0, 255).astype(np.uint8)


@dataclass
class StainChannels:
    """Raw per-pixel stain concentrations, shape ``(H, W, 3)``.

    Columns are hematoxylin, DAB and residual. Values may be negative; the
    display helpers clamp them.
    """

    conc: np.ndarray
    matrix: np.ndarray

    @property
    def hema(self):
        return self.conc[..., 0]

    @property
    def dab(self):
        return self.conc[..., 1]

    def display(self, index):
        """8-bit gray rendering of one stain, darker means more stain."""
        return concentration_display(self.conc[..., index])

    def hema_display(self):
        return self.display(0)

    def dab_display(self):
        return self.display(1)

    def dab_rgb(self):
        return tinted_rgb(self.conc[..., 1], self.matrix[1])


def deconvolve(od, m):
    """Solve ``od = c @ m`` for every pixel.

    Parameters
    ----------
    od : ndarray
        ``(..., 3)`` optical densities.
    m : ndarray
        3x3 stain matrix, one stain OD vector per row.
    """
    m = np.asarray(m, dtype=np.float64)
    if abs(np.linalg.det(m)) <= SINGULAR_DET:
        raise SingularMatrix(f"|det| = {abs(np.linalg.det(m)):.3g}")
    od = np.asarray(od, dtype=np.float64)
    conc = np.linalg.solve(m.T, od.reshape(-1, 3).T).T
    return StainChannels(conc.reshape(od.shape), m)


def concentration_display(conc):
    return rgb_from_od(np.maximum(conc, 0.0))


def tinted_rgb(conc, stain):
    """RGB rendering of a single stain: ``255 * 10**(-c * stain_k)`` per channel."""
    conc = np.maximum(np.asarray(conc, dtype=np.float64), 0.0)
    return rgb_from_od(conc[..., None] * np.asarray(stain)[None, :])


def dab_display(ch):
    """Gray and tinted RGB renderings of the DAB channel."""
    return ch.dab_display(), ch.dab_rgb()
