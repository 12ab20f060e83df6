"""Flat ``key = value`` pipeline configuration.

Every key has a default, so an empty file is a valid configuration. Lines
starting with ``#`` and blank lines are ignored. Unknown keys are rejected.
"""
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .deconvolve import DAB, HEMATOXYLIN, stain_matrix
from .errors import ConfigError
from .gate import GateConfig, Region
from .normalize import (DEFAULT_TARGET, STRETCH_MODES, LabStats, MacenkoParams,
                        NormalizationMethod)
from .orient import CRITERIA

ENV_VAR = "EPIDERMAQUANT_CONFIG"


@dataclass(frozen=True)
class PipelineConfig:
    normalization_method: str = NormalizationMethod.REINHARD.value
    reinhard_mean_L: float = DEFAULT_TARGET.mean_L
    reinhard_mean_a: float = DEFAULT_TARGET.mean_a
    reinhard_mean_b: float = DEFAULT_TARGET.mean_b
    reinhard_std_L: float = DEFAULT_TARGET.std_L
    reinhard_std_a: float = DEFAULT_TARGET.std_a
    reinhard_std_b: float = DEFAULT_TARGET.std_b
    reinhard_stretch: str = "global"
    histogram_reference: str = ""
    macenko_od_cutoff: float = 0.15
    macenko_alpha: float = 1.0
    macenko_beta: float = 99.0
    stain_hema_r: float = float(HEMATOXYLIN[0])
    stain_hema_g: float = float(HEMATOXYLIN[1])
    stain_hema_b: float = float(HEMATOXYLIN[2])
    stain_dab_r: float = float(DAB[0])
    stain_dab_g: float = float(DAB[1])
    stain_dab_b: float = float(DAB[2])
    # all-zero residual means: cross product of the two stains
    stain_res_r: float = 0.0
    stain_res_g: float = 0.0
    stain_res_b: float = 0.0
    mask_se_radius: int = 15
    mask_connectivity: int = 8
    rotation_step: float = 0.1
    rotation_margin: int = 10
    rotation_downsample_cap: int = 512
    rotation_refine_span: float = 1.0
    rotation_criterion: str = "energy"
    gate_pixel_threshold: int = 130
    gate_ap_threshold: float = 0.6
    gate_region: str = Region.WHOLE.value
    segment_seed: int = 0
    segment_uniformity_tau: float = 2.0
    segment_dark_tau: float = 192.0
    overlay_color: str = "0,255,0"
    overlay_thickness: int = 1
    output_dir: str = ""
    output_save_mask: bool = True
    output_save_intermediates: bool = False
    output_save_rotated: bool = False
    output_save_clusters: bool = False

    def __post_init__(self):
        _validate(self)

    def reinhard_target(self):
        return LabStats(self.reinhard_mean_L, self.reinhard_mean_a, self.reinhard_mean_b,
                        self.reinhard_std_L, self.reinhard_std_a, self.reinhard_std_b)

    def stain_matrix(self):
        res = np.array([self.stain_res_r, self.stain_res_g, self.stain_res_b])
        return stain_matrix([self.stain_hema_r, self.stain_hema_g, self.stain_hema_b],
                            [self.stain_dab_r, self.stain_dab_g, self.stain_dab_b],
                            None if not res.any() else res)

    def gate_config(self):
        return GateConfig(self.gate_pixel_threshold, self.gate_ap_threshold, Region(self.gate_region))

    def macenko_params(self):
        return MacenkoParams(od_cutoff=self.macenko_od_cutoff, alpha=self.macenko_alpha,
                             beta=self.macenko_beta)

    def overlay_rgb(self):
        return tuple(int(v) for v in self.overlay_color.split(","))

    def saves(self, what):
        return self.output_save_intermediates or getattr(self, f"output_save_{what}")


def key_of(name):
    section, _, rest = name.partition("_")
    return f"{section}.{rest}"


KEYS = {key_of(f.name): f for f in fields(PipelineConfig)}


def _check(cond, key, msg):
    if not cond:
        raise ConfigError(f"{key}: {msg}")


def _validate(cfg):
    _check(cfg.normalization_method in {m.value for m in NormalizationMethod},
           "normalization.method", f"unknown method {cfg.normalization_method!r}")
    for ch in "Lab":
        _check(getattr(cfg, f"reinhard_std_{ch}") > 0, f"reinhard.std_{ch}", "must be > 0")
    _check(cfg.reinhard_stretch in STRETCH_MODES, "reinhard.stretch", f"expected one of {STRETCH_MODES}")
    _check(0 < cfg.macenko_od_cutoff, "macenko.od_cutoff", "must be > 0")
    _check(0 <= cfg.macenko_alpha < 50, "macenko.alpha", "must lie in [0, 50)")
    _check(50 < cfg.macenko_beta <= 100, "macenko.beta", "must lie in (50, 100]")
    for stain in ("hema", "dab"):
        v = [getattr(cfg, f"stain_{stain}_{c}") for c in "rgb"]
        _check(any(v) and min(v) >= 0, f"stain.{stain}_r", "stain vector must be non-negative and non-zero")
    _check(cfg.mask_se_radius >= 1, "mask.se_radius", "must be >= 1")
    _check(cfg.mask_connectivity in (4, 8), "mask.connectivity", "must be 4 or 8")
    _check(0 < cfg.rotation_step <= 10, "rotation.step", "must lie in (0, 10]")
    _check(cfg.rotation_margin >= 0, "rotation.margin", "must be >= 0")
    _check(cfg.rotation_downsample_cap >= 16, "rotation.downsample_cap", "must be >= 16")
    _check(cfg.rotation_refine_span >= 0, "rotation.refine_span", "must be >= 0")
    _check(cfg.rotation_criterion in CRITERIA, "rotation.criterion", f"expected one of {CRITERIA}")
    _check(0 <= cfg.gate_pixel_threshold <= 255, "gate.pixel_threshold", "must lie in [0, 255]")
    _check(0 < cfg.gate_ap_threshold < 100, "gate.ap_threshold", "must lie in (0, 100)")
    _check(cfg.gate_region in {r.value for r in Region}, "gate.region", "expected whole or tissue")
    _check(cfg.segment_seed >= 0, "segment.seed", "must be >= 0")
    _check(cfg.segment_uniformity_tau >= 0, "segment.uniformity_tau", "must be >= 0")
    _check(0 <= cfg.segment_dark_tau <= 255, "segment.dark_tau", "must lie in [0, 255]")
    try:
        rgb = [int(v) for v in cfg.overlay_color.split(",")]
    except ValueError:
        rgb = []
    _check(len(rgb) == 3 and all(0 <= v <= 255 for v in rgb), "overlay.color",
           "expected three comma-separated levels in [0, 255]")
    _check(cfg.overlay_thickness >= 0, "overlay.thickness", "must be >= 0")


def _convert(key, field_type, text):
    try:
        if field_type is bool:
            low = text.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(text)
        if field_type is int:
            return int(text)
        if field_type is float:
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as {field_type.__name__}") from None


def parse_config(text):
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, value = (part.strip() for part in line.partition("="))
        if key not in KEYS:
            raise ConfigError(f"unknown config key {key!r} (line {lineno})")
        f = KEYS[key]
        values[f.name] = _convert(key, f.type, value)
    return PipelineConfig(**values)


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def serialize_config(cfg):
    """Canonical text: every key, in declaration order."""
    return "".join(f"{key} = {_format(getattr(cfg, f.name))}\n" for key, f in KEYS.items())


def load_config(path=None):
    """Read ``path``, or the file named by ``$EPIDERMAQUANT_CONFIG``, or defaults."""
    if path is None:
        path = os.environ.get(ENV_VAR)
    if not path:
        return PipelineConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def with_overrides(cfg, **kwargs):
    return replace(cfg, **kwargs)
