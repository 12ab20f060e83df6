"""Unsupervised detection and quantification of DAB staining in H-DAB images
of reconstructed human epidermis."""

__version__ = "0.1.0"

from .config import PipelineConfig, load_config, parse_config, serialize_config
from .deconvolve import deconvolve, hdab_stain_matrix, od_from_rgb
from .errors import (DecodeError, DegenerateInput, EmptyInput, EmptyMask, EpidermaQuantError,
                     SingularMatrix, SubsetViolation, TooFewPoints, UndefinedForKOne)
from .gate import GateConfig, average_proportion, calibrate
from .normalize import histogram_specification, lab_stats, macenko_normalize, reinhard_normalize
from .orient import apply_orientation, find_rotation, rotate_mask
from .pipeline import process_image, run_batch, run_single
from .quantify import aggregate, dab_percentage, render_overlay
from .segment import select_dab_region
from .tissue_mask import build_tissue_mask

__all__ = [
    "PipelineConfig", "load_config", "parse_config", "serialize_config",
    "deconvolve", "hdab_stain_matrix", "od_from_rgb",
    "DecodeError", "DegenerateInput", "EmptyInput", "EmptyMask", "EpidermaQuantError",
    "SingularMatrix", "SubsetViolation", "TooFewPoints", "UndefinedForKOne",
    "GateConfig", "average_proportion", "calibrate",
    "histogram_specification", "lab_stats", "macenko_normalize", "reinhard_normalize",
    "apply_orientation", "find_rotation", "rotate_mask",
    "process_image", "run_batch", "run_single",
    "aggregate", "dab_percentage", "render_overlay",
    "select_dab_region", "build_tissue_mask",
]
