"""Color normalization: Reinhard transfer, RGB histogram specification, Macenko.

Reinhard followed by a min-max stretch is the pipeline default. The stretch
uses one min and max over all three channels unless ``stretch="channel"``.
"""
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .deconvolve import HEMATOXYLIN, DAB, od_from_rgb
from .errors import DegenerateInput
from .image_core import (as_rgb, lab_to_rgb_float, quantize, rgb_to_lab, stretch_channels,
                         stretch_unit)

STD_FLOOR = 1e-6


class NormalizationMethod(str, Enum):
    REINHARD = "reinhard"
    HISTOGRAM = "histogram"
    MACENKO = "macenko"
    NONE = "none"


@dataclass(frozen=True)
class LabStats:
    """Per-channel Lab mean and population standard deviation."""

    mean_L: float
    mean_a: float
    mean_b: float
    std_L: float
    std_a: float
    std_b: float

    @property
    def means(self):
        return np.array([self.mean_L, self.mean_a, self.mean_b])

    @property
    def stds(self):
        return np.array([self.std_L, self.std_a, self.std_b])

    @classmethod
    def from_arrays(cls, means, stds, eps=STD_FLOOR):
        stds = np.maximum(np.asarray(stds, dtype=np.float64), eps)
        return cls(*(float(v) for v in means), *(float(v) for v in stds))


# Computed with lab_stats(phantoms.reference_image()); see phantoms.py.
DEFAULT_TARGET = LabStats(
    mean_L=81.58517639613547,
    mean_a=4.699394051685838,
    mean_b=-6.130504889641323,
    std_L=25.4682195080592,
    std_a=8.395218681324678,
    std_b=14.48528063295441,
)


def lab_stats_of(lab, eps=STD_FLOOR):
    flat = np.asarray(lab, dtype=np.float64).reshape(-1, 3)
    return LabStats.from_arrays(flat.mean(axis=0), flat.std(axis=0), eps)


def lab_stats(img, eps=STD_FLOOR):
    """Lab channel statistics of an RGB image (population std, floored at ``eps``)."""
    return lab_stats_of(rgb_to_lab(img), eps)


def reinhard_transfer_lab(lab, target, source=None, eps=STD_FLOOR):
    """Shift and scale each Lab channel of ``lab`` onto ``target`` statistics."""
    lab = np.asarray(lab, dtype=np.float64)
    if source is None:
        source = lab_stats_of(lab, eps)
    scale = target.stds / np.maximum(source.stds, eps)
    return (lab - source.means) * scale + target.means


STRETCH_MODES = ("global", "channel")


def reinhard_normalize(src, target=DEFAULT_TARGET, eps=STD_FLOOR, stretch="global"):
    """Reinhard color transfer in CIELAB, then a min-max stretch onto 0..255.

    Parameters
    ----------
    src : ndarray
        ``(H, W, 3)`` uint8 RGB image.
    target : LabStats
        Desired Lab means and standard deviations.
    stretch : {"global", "channel"}
        ``"global"`` stretches all channels with one shared range, which
        keeps hue. ``"channel"`` stretches each RGB channel on its own; this
        raises contrast but can turn a narrow-range hue neutral (a pale
        hematoxylin-only section then reads as dark gray, i.e. as DAB).

    Returns
    -------
    ndarray
        Normalized ``uint8`` RGB image of the same shape.
    """
    lab = reinhard_transfer_lab(rgb_to_lab(src), target, eps=eps)
    rgb = lab_to_rgb_float(lab)
    if stretch == "global":
        return quantize(255.0 * stretch_unit(rgb))
    if stretch == "channel":
        return quantize(255.0 * stretch_channels(rgb))
    raise ValueError(f"unknown stretch {stretch!r}; expected one of {STRETCH_MODES}")


def _match_channel(src, ref):
    src_hist = np.bincount(src.ravel(), minlength=256)
    ref_hist = np.bincount(ref.ravel(), minlength=256)
    src_cdf = np.cumsum(src_hist) / src.size
    ref_cdf = np.cumsum(ref_hist) / ref.size
    # smallest reference level whose CDF reaches the source CDF
    lut = np.searchsorted(ref_cdf, src_cdf - 1e-12, side="left")
    lut = np.minimum(lut, 255).astype(np.uint8)
    return lut[src]


def histogram_specification(src, reference):
    """Match each RGB channel's histogram of ``src`` to ``reference``.

    Uses the discrete CDF inverse, so output levels are always levels that
    occur in the reference.
    """
    src = as_rgb(src)
    reference = as_rgb(reference)
    out = np.empty_like(src)
    for ch in range(3):
        out[..., ch] = _match_channel(src[..., ch], reference[..., ch])
    return out


@dataclass(frozen=True)
class MacenkoParams:
    """Parameters of the Macenko normalizer.

    ``reference_stains`` holds the two target stain OD vectors as rows and
    ``reference_max`` their target robust maximum concentrations. Estimates
    closer than ``min_angle`` degrees are rejected: a single-stain image
    (e.g. hematoxylin only) yields two copies of the same vector.
    """

    od_cutoff: float = 0.15
    alpha: float = 1.0
    beta: float = 99.0
    min_pixels: int = 100
    min_angle: float = 5.0
    reference_stains: tuple = field(default_factory=lambda: (tuple(HEMATOXYLIN), tuple(DAB)))
    reference_max: tuple = (1.0, 1.0)


def macenko_stain_vectors(src, params=MacenkoParams()):
    """Estimate two unit stain OD vectors (rows) from ``src``.

    The first row is the vector with the larger red OD component, which puts
    hematoxylin first for H-DAB images.
    """
    od = od_from_rgb(src).reshape(-1, 3)
    od_hat = od[np.all(od >= params.od_cutoff, axis=1)]
    if len(od_hat) < params.min_pixels:
        raise DegenerateInput(
            f"only {len(od_hat)} pixels above OD cutoff {params.od_cutoff}"
        )
    _, eigvecs = np.linalg.eigh(np.cov(od_hat.T))
    plane = eigvecs[:, 1:3]
    # orient the plane so projections of the (non-negative) OD cloud are positive
    plane = plane * np.where(plane.sum(axis=0) < 0, -1.0, 1.0)
    proj = od_hat @ plane
    phi = np.arctan2(proj[:, 1], proj[:, 0])
    lo, hi = np.percentile(phi, [params.alpha, 100.0 - params.alpha])
    v_lo = plane @ np.array([np.cos(lo), np.sin(lo)])
    v_hi = plane @ np.array([np.cos(hi), np.sin(hi)])
    stains = np.array([v_lo, v_hi] if v_lo[0] > v_hi[0] else [v_hi, v_lo])
    stains *= np.where(stains.sum(axis=1, keepdims=True) < 0, -1.0, 1.0)
    stains /= np.linalg.norm(stains, axis=1, keepdims=True)
    angle = np.degrees(np.arccos(np.clip(stains[0] @ stains[1], -1.0, 1.0)))
    if angle < params.min_angle:
        raise DegenerateInput(f"stain vectors only {angle:.2f} degrees apart; one stain present?")
    return stains


def macenko_concentrations(src, params=MacenkoParams()):
    """Return ``(stains, concentrations, normalized_concentrations)``.

    Concentrations are least-squares solutions ``od = c @ stains`` with shape
    ``(H*W, 2)``. Normalized concentrations are rescaled so their ``beta``
    percentile equals ``params.reference_max``.
    """
    stains = macenko_stain_vectors(src, params)
    od = od_from_rgb(src).reshape(-1, 3)
    conc = np.linalg.lstsq(stains.T, od.T, rcond=None)[0].T
    max_c = np.percentile(conc, params.beta, axis=0)
    if np.any(max_c <= 0):
        raise DegenerateInput("non-positive robust maximum concentration")
    norm = conc * (np.asarray(params.reference_max, dtype=np.float64) / max_c)
    return stains, conc, norm


def macenko_normalize(src, params=MacenkoParams()):
    """Macenko stain normalization onto ``params.reference_stains``."""
    src = as_rgb(src)
    _, _, norm = macenko_concentrations(src, params)
    ref = np.asarray(params.reference_stains, dtype=np.float64)
    ref = ref / np.linalg.norm(ref, axis=1, keepdims=True)
    od = norm @ ref
    out = quantize(255.0 * np.power(10.0, -od))
    return out.reshape(src.shape)
