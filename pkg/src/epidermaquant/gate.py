"""Average-proportion gate that drops images without DAB staining."""
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import EmptyInput, EmptyMask


class Region(str, Enum):
    WHOLE = "whole"
    TISSUE = "tissue"


@dataclass(frozen=True)
class GateConfig:
    """``pixel_threshold`` is a DAB display level; darker pixels count as stained."""

    pixel_threshold: int = 130
    ap_threshold: float = 0.6
    region: Region = Region.WHOLE

    def __post_init__(self):
        if not 0 <= self.pixel_threshold <= 255:
            raise ValueError("pixel_threshold must lie in [0, 255]")
        if not 0 < self.ap_threshold < 100:
            raise ValueError("ap_threshold must lie in (0, 100)")
        object.__setattr__(self, "region", Region(self.region))


def average_proportion(dab_display, cfg=GateConfig(), mask=None):
    """Percent of region pixels whose DAB display level is below the cutoff."""
    dab_display = np.asarray(dab_display)
    if cfg.region is Region.TISSUE:
        if mask is None or not np.any(mask):
            raise EmptyMask("tissue-only AP needs a non-empty mask")
        values = dab_display[np.asarray(mask, dtype=bool)]
    else:
        values = dab_display.ravel()
    return 100.0 * np.count_nonzero(values < cfg.pixel_threshold) / values.size


def gate(ap, cfg=GateConfig()):
    """True when the image is kept for segmentation (inclusive boundary)."""
    return bool(ap >= cfg.ap_threshold)


def candidate_thresholds(lo=0.10, hi=1.00, step=0.01):
    n = int(round((hi - lo) / step))
    return np.round(lo + np.arange(n + 1) * step, 10)


@dataclass
class CalibrationResult:
    ap_threshold: float
    auc: float
    youden_j: float
    roc_points: list = field(default_factory=list)


def roc_auc(positive, negative):
    """Trapezoidal area under the empirical ROC of score ``ap >= t``."""
    scores = np.concatenate([positive, negative])
    thresholds = np.unique(scores)[::-1]
    pos = np.sort(positive)
    neg = np.sort(negative)
    tpr = 1.0 - np.searchsorted(pos, thresholds, side="left") / len(pos)
    fpr = 1.0 - np.searchsorted(neg, thresholds, side="left") / len(neg)
    tpr = np.concatenate([[0.0], tpr])
    fpr = np.concatenate([[0.0], fpr])
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def calibrate(positive_aps, negative_aps, search=None):
    """Pick the AP threshold maximizing Youden's J over a candidate grid.

    A sample is called positive when ``ap >= threshold``. Ties in J go to
    the smallest threshold. The AUC uses every distinct observed AP value,
    not just the grid.
    """
    pos = np.asarray(positive_aps, dtype=np.float64)
    neg = np.asarray(negative_aps, dtype=np.float64)
    if pos.size == 0 or neg.size == 0:
        raise EmptyInput("calibration needs positive and negative samples")
    grid = candidate_thresholds() if search is None else np.asarray(search, dtype=np.float64)
    tp = (pos[None, :] >= grid[:, None]).sum(axis=1)
    fp = (neg[None, :] >= grid[:, None]).sum(axis=1)
    tpr, fpr = tp / pos.size, fp / neg.size
    j = tpr - fpr
    # rank on the exact integer numerator so float noise cannot break ties
    best = int(np.argmax(tp * neg.size - fp * pos.size))
    points = [(float(f), float(t), float(g)) for f, t, g in zip(fpr, tpr, grid)]
    return CalibrationResult(ap_threshold=float(grid[best]), auc=roc_auc(pos, neg),
                             youden_j=float(j[best]), roc_points=points)
