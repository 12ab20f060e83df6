"""Per-image pipeline and batch driver.

normalize -> deconvolve -> tissue mask -> orient/crop -> AP gate ->
segment -> quantify.
"""
import csv
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import PipelineConfig
from .deconvolve import StainChannels, deconvolve, od_from_rgb
from .errors import ConfigError, EmptyInput, EpidermaQuantError
from .gate import average_proportion, calibrate, gate
from .image_core import quantize, read_rgb, write_png
from .normalize import (NormalizationMethod, histogram_specification, macenko_normalize,
                        reinhard_normalize)
from .orient import crop_box, find_rotation, rotate_image, rotate_mask
from .quantify import (QuantRecord, aggregate, dab_percentage, render_overlay, report_csv,
                       summary_csv)
from .segment import select_dab_region
from .tissue_mask import build_tissue_mask

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = {".jpg", ".jpeg", ".png", ".tif", ".tiff", ".bmp"}


def normalize_image(rgb, cfg):
    method = NormalizationMethod(cfg.normalization_method)
    if method is NormalizationMethod.REINHARD:
        return reinhard_normalize(rgb, cfg.reinhard_target(), stretch=cfg.reinhard_stretch)
    if method is NormalizationMethod.HISTOGRAM:
        if not cfg.histogram_reference:
            raise ConfigError("histogram.reference: required for histogram normalization")
        return histogram_specification(rgb, read_rgb(cfg.histogram_reference))
    if method is NormalizationMethod.MACENKO:
        return macenko_normalize(rgb, cfg.macenko_params())
    return rgb


@dataclass
class Oriented:
    """Rotated and cropped layers, all registered to ``mask``."""

    original: np.ndarray
    normalized: np.ndarray
    channels: StainChannels
    mask: np.ndarray

    @property
    def dab_gray(self):
        return self.channels.dab_display()

    @property
    def dab_rgb(self):
        return self.channels.dab_rgb()

    @property
    def hema_gray(self):
        return self.channels.hema_display()


@dataclass
class ImageResult:
    normalized: np.ndarray
    channels: StainChannels
    tissue_mask: np.ndarray
    rotation: object
    oriented: Oriented
    ap: float
    keep: bool
    dab_mask: np.ndarray = None
    clustering: object = None
    dab_percent: float = None
    overlay: np.ndarray = None
    extras: dict = field(default_factory=dict)


def orient_layers(original, normalized, channels, mask, rotation, margin):
    stack = np.concatenate([original.astype(np.float64), normalized.astype(np.float64),
                            channels.conc], axis=2)
    fill = [255.0] * 6 + [0.0] * 3
    rotated = rotate_image(stack, rotation.angle, fill=fill)
    rmask = rotate_mask(mask, rotation.angle)
    r0, r1, c0, c1 = crop_box(rmask, margin)
    rotated = rotated[r0:r1, c0:c1]
    return Oriented(original=quantize(rotated[..., 0:3]),
                    normalized=quantize(rotated[..., 3:6]),
                    channels=StainChannels(rotated[..., 6:9], channels.matrix),
                    mask=rmask[r0:r1, c0:c1])


def process_image(rgb, cfg=PipelineConfig(), stop_after_gate=False):
    """Run the pipeline on one RGB array and return every intermediate."""
    normalized = normalize_image(rgb, cfg)
    channels = deconvolve(od_from_rgb(normalized), cfg.stain_matrix())
    tissue = build_tissue_mask(channels.hema_display(), cfg.mask_se_radius, cfg.mask_connectivity)
    rotation = find_rotation(tissue, step=cfg.rotation_step,
                             downsample_cap=cfg.rotation_downsample_cap,
                             refine_span=cfg.rotation_refine_span,
                             criterion=cfg.rotation_criterion)
    oriented = orient_layers(rgb, normalized, channels, tissue, rotation, cfg.rotation_margin)
    gcfg = cfg.gate_config()
    ap = average_proportion(oriented.dab_gray, gcfg, oriented.mask)
    result = ImageResult(normalized=normalized, channels=channels, tissue_mask=tissue,
                         rotation=rotation, oriented=oriented, ap=ap, keep=gate(ap, gcfg))
    if stop_after_gate or not result.keep:
        return result
    dab_mask, clustering = select_dab_region(oriented.dab_rgb, oriented.dab_gray, oriented.mask,
                                             seed=cfg.segment_seed,
                                             uniformity_tau=cfg.segment_uniformity_tau,
                                             dark_tau=cfg.segment_dark_tau)
    result.dab_mask = dab_mask
    result.clustering = clustering
    result.dab_percent = dab_percentage(dab_mask, oriented.mask)
    result.overlay = render_overlay(oriented.original, dab_mask, cfg.overlay_rgb(),
                                    cfg.overlay_thickness)
    return result


def _cluster_image(result):
    labels = np.full(result.oriented.mask.shape, 255, dtype=np.uint8)
    k = result.clustering.k
    shades = np.linspace(0, 200, k).astype(np.uint8) if k > 1 else np.array([0], np.uint8)
    labels[result.oriented.mask] = shades[result.clustering.labels]
    return labels


def run_single(path, marker, cfg=PipelineConfig(), out_dir=None, image_id=None):
    """Process one image file and write its artifacts; never raises pipeline errors."""
    path = Path(path)
    image_id = image_id or path.stem
    record = QuantRecord(image_id=image_id, marker=marker)
    out = Path(out_dir or cfg.output_dir or ".")
    try:
        rgb = read_rgb(path)
        result = process_image(rgb, cfg)
    except EpidermaQuantError as exc:
        record.error = f"{type(exc).__name__}: {exc}"
        log.warning("%s failed: %s", path, record.error)
        return record
    record.ap = result.ap
    record.gated_out = not result.keep
    record.rotation_angle = result.rotation.angle
    if cfg.saves("intermediates"):
        name = f"{image_id}_tissue_mask.png"
        write_png(out / name, result.tissue_mask)
        record.output_paths["tissue_mask"] = name
    if cfg.saves("rotated"):
        for layer, img in (("normalized", result.oriented.normalized),
                           ("hema", result.oriented.hema_gray),
                           ("dab", result.oriented.dab_gray),
                           ("mask", result.oriented.mask)):
            name = f"{image_id}_rotated_{layer}.png"
            write_png(out / name, img)
            record.output_paths[f"rotated_{layer}"] = name
    if not result.keep:
        return record
    record.k = result.clustering.k
    record.dab_percent = result.dab_percent
    name = f"{image_id}_overlay.png"
    write_png(out / name, result.overlay)
    record.output_paths["overlay"] = name
    if cfg.output_save_mask or cfg.output_save_intermediates:
        name = f"{image_id}_dab_mask.png"
        write_png(out / name, result.dab_mask)
        record.output_paths["dab_mask"] = name
    if cfg.saves("clusters"):
        name = f"{image_id}_clusters.png"
        write_png(out / name, _cluster_image(result))
        record.output_paths["clusters"] = name
    return record


@dataclass
class ManifestEntry:
    path: Path
    marker: str
    control: str = "unknown"


def _control_of(name):
    low = name.lower()
    if low.startswith("pos"):
        return "positive"
    if low.startswith("neg"):
        return "negative"
    return "unknown"


def list_images(directory):
    directory = Path(directory)
    return sorted(p for p in directory.rglob("*")
                  if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)


def load_manifest(source):
    """Read a ``path,marker,control`` CSV, or walk a directory.

    In directory mode the first-level subdirectory names the marker and a
    second-level directory starting with ``pos``/``neg`` gives the control.
    """
    source = Path(source)
    entries = []
    if source.is_dir():
        for p in list_images(source):
            parts = p.relative_to(source).parts
            if len(parts) < 2:
                raise ConfigError(f"{p}: images must sit in a marker subdirectory")
            control = _control_of(parts[1]) if len(parts) > 2 else "unknown"
            entries.append(ManifestEntry(p, parts[0], control))
    else:
        try:
            with open(source, newline="", encoding="utf-8") as fh:
                reader = csv.DictReader(fh)
                if reader.fieldnames is None or not {"path", "marker"} <= set(reader.fieldnames):
                    raise ConfigError(f"{source}: manifest needs 'path' and 'marker' columns")
                for row in reader:
                    marker = (row.get("marker") or "").strip()
                    if not marker:
                        raise ConfigError(f"{source}: empty marker for {row.get('path')!r}")
                    p = Path(row["path"])
                    if not p.is_absolute():
                        p = source.parent / p
                    control = (row.get("control") or "unknown").strip().lower() or "unknown"
                    if control not in ("positive", "negative", "unknown"):
                        raise ConfigError(f"{source}: bad control label {control!r}")
                    entries.append(ManifestEntry(p, marker, control))
        except OSError as exc:
            raise ConfigError(f"cannot read manifest {source}: {exc}") from exc
    if not entries:
        raise EmptyInput(f"{source}: manifest is empty")
    return entries


def image_ids(entries):
    """Stems made unique in manifest order."""
    seen = {}
    ids = []
    for e in entries:
        stem = e.path.stem
        n = seen.get(stem, 0) + 1
        seen[stem] = n
        ids.append(stem if n == 1 else f"{stem}_{n}")
    return ids


def _run_entry(args):
    entry, image_id, cfg, out_dir = args
    return run_single(entry.path, entry.marker, cfg, out_dir, image_id)


def run_batch(entries, cfg=PipelineConfig(), out_dir=None, jobs=1):
    """Process every manifest entry and write ``report.csv`` and ``summary.csv``.

    Returns ``(records, exit_code)`` with exit code 0 when every image
    succeeded and 2 otherwise. Rows follow manifest order for any ``jobs``.
    """
    if not entries:
        raise EmptyInput("manifest is empty")
    out = Path(out_dir or cfg.output_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    tasks = [(e, i, cfg, out) for e, i in zip(entries, image_ids(entries))]
    if jobs <= 1:
        records = [_run_entry(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_entry, tasks))
    _write_text(out / "report.csv", report_csv(records))
    _write_text(out / "summary.csv", summary_csv(aggregate(records)))
    return records, 0 if all(r.ok for r in records) else 2


def _write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def gate_ap(path, cfg):
    """AP of one image, running the pipeline only as far as the gate."""
    return process_image(read_rgb(path), cfg, stop_after_gate=True).ap


def calibrate_gate_dirs(pos_dir, neg_dir, cfg=PipelineConfig(), out_dir=None):
    """AP for every control image, then ROC/Youden calibration.

    Writes ``roc.csv`` (fpr,tpr,threshold) and ``calibration.txt``.
    Unreadable images are skipped and listed in the report.
    """
    aps = {}
    failures = []
    for label, directory in (("positive", pos_dir), ("negative", neg_dir)):
        values = []
        for p in list_images(directory):
            try:
                values.append(gate_ap(p, cfg))
            except EpidermaQuantError as exc:
                failures.append((str(p), f"{type(exc).__name__}: {exc}"))
        if not values:
            raise EmptyInput(f"{directory}: no usable {label} control image")
        aps[label] = values
    result = calibrate(aps["positive"], aps["negative"])
    out = Path(out_dir or cfg.output_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    rows = "".join(f"{f:.6f},{t:.6f},{th:.2f}\n" for f, t, th in result.roc_points)
    _write_text(out / "roc.csv", "fpr,tpr,threshold\n" + rows)
    lines = [
        f"ap_threshold: {result.ap_threshold:.2f}",
        f"youden_j: {result.youden_j:.6f}",
        f"auc: {result.auc:.6f}",
        f"pixel_threshold: {cfg.gate_pixel_threshold}",
        f"positives: {len(aps['positive'])}",
        f"negatives: {len(aps['negative'])}",
        f"failed: {len(failures)}",
    ]
    lines += [f"failed_image: {p} ({err})" for p, err in failures]
    _write_text(out / "calibration.txt", "\n".join(lines) + "\n")
    return result, aps, failures


def default_jobs():
    return max(1, os.cpu_count() or 1)
