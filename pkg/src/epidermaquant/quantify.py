"""DAB percentage, contour overlays and per-marker summaries."""
import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage as ndi

from .errors import EmptyMask, SubsetViolation

REPORT_HEADER = ["image_id", "marker", "ap_percent", "gated_out", "k", "dab_percent",
                 "rotation_deg", "overlay_path", "status"]
SUMMARY_HEADER = ["marker", "count", "gated_out_count", "median", "q1", "q3"]


@dataclass
class QuantRecord:
    image_id: str
    marker: str
    ap: float = None
    gated_out: bool = False
    k: int = None
    dab_percent: float = None
    rotation_angle: float = None
    output_paths: dict = field(default_factory=dict)
    error: str = None

    @property
    def ok(self):
        return self.error is None

    def row(self):
        def num(v, fmt):
            return "" if v is None else format(v, fmt)

        return [
            self.image_id,
            self.marker,
            num(self.ap, ".4f"),
            "" if not self.ok else ("true" if self.gated_out else "false"),
            "" if self.k is None else str(self.k),
            num(self.dab_percent, ".4f"),
            num(self.rotation_angle, ".1f"),
            self.output_paths.get("overlay", ""),
            "ok" if self.ok else f"failed: {self.error}",
        ]


def dab_percentage(dab_mask, tissue_mask):
    dab_mask = np.asarray(dab_mask, dtype=bool)
    tissue_mask = np.asarray(tissue_mask, dtype=bool)
    n_tissue = np.count_nonzero(tissue_mask)
    if n_tissue == 0:
        raise EmptyMask("empty tissue mask")
    if np.any(dab_mask & ~tissue_mask):
        raise SubsetViolation("DAB mask extends outside the tissue mask")
    return 100.0 * np.count_nonzero(dab_mask) / n_tissue


def contour(mask):
    """Mask pixels with at least one 4-neighbour outside the mask (or image)."""
    mask = np.asarray(mask, dtype=bool)
    inner = ndi.binary_erosion(mask, structure=ndi.generate_binary_structure(2, 1),
                               border_value=0)
    return mask & ~inner


def render_overlay(original, dab_mask, color=(0, 255, 0), thickness=1):
    """Draw the outline of ``dab_mask`` on ``original``.

    The one-pixel contour is widened by ``thickness`` 3x3 dilation steps.
    """
    out = np.array(original, dtype=np.uint8, copy=True)
    ring = contour(dab_mask)
    if thickness > 0 and ring.any():
        ring = ndi.binary_dilation(ring, structure=np.ones((3, 3), bool), iterations=thickness)
    out[ring] = np.asarray(color, dtype=np.uint8)
    return out


def aggregate(records):
    """Per-marker count, gated-out count, median and quartiles of ``dab_percent``.

    Failed records are ignored. Quartiles use linear interpolation between
    order statistics, so the median of an even count is the midpoint of the
    two central values.
    """
    groups = {}
    for rec in records:
        if not rec.ok:
            continue
        g = groups.setdefault(rec.marker, {"values": [], "gated": 0})
        if rec.gated_out:
            g["gated"] += 1
        else:
            g["values"].append(rec.dab_percent)
    summary = {}
    for marker in sorted(groups):
        values = np.sort(np.asarray(groups[marker]["values"], dtype=np.float64))
        if values.size:
            q1, med, q3 = np.percentile(values, [25, 50, 75])
        else:
            q1 = med = q3 = None
        summary[marker] = {
            "count": int(values.size),
            "gated_out_count": groups[marker]["gated"],
            "median": None if med is None else float(med),
            "q1": None if q1 is None else float(q1),
            "q3": None if q3 is None else float(q3),
        }
    return summary


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def report_csv(records):
    return _csv_text(REPORT_HEADER, [r.row() for r in records])


def summary_csv(summary):
    def num(v):
        return "" if v is None else f"{v:.4f}"

    rows = [[m, s["count"], s["gated_out_count"], num(s["median"]), num(s["q1"]), num(s["q3"])]
            for m, s in summary.items()]
    return _csv_text(SUMMARY_HEADER, rows)
