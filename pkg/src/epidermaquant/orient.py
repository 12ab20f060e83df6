"""Rotate the tissue stripe to horizontal and crop around it.

The search rotates the tissue mask over a 0.1 degree grid and scores each
angle from its row-sum profile. Angles are counter-clockwise as displayed
(the same sense as ``np.rot90``).

Two scores are available:

``"energy"`` (default)
    Sum of squared row sums. For a fixed tissue area this is largest when
    the profile is narrowest and flattest, i.e. when the stripe is level.
``"peak"``
    Maximum row sum. For a solid rectangle this peaks at the diagonal
    angle ``atan(thickness / length)`` rather than at horizontal.
"""
import math
from dataclasses import dataclass

import cv2
import numpy as np
from scipy import ndimage as ndi

from .errors import EmptyMask

CRITERIA = ("energy", "peak")
TIE_RTOL = 1e-6


@dataclass
class RotationResult:
    angle: float
    profile_peak: int
    profile: np.ndarray
    score: float = float("nan")
    criterion: str = "energy"


def angle_grid(step=0.1):
    n = int(round(180.0 / step))
    return np.round(np.arange(n) * step, 10)


def rotated_shape(shape, angle):
    h, w = shape[:2]
    t = math.radians(angle)
    c, s = abs(math.cos(t)), abs(math.sin(t))
    # round first so exact quarter turns do not pick up an extra pixel
    out_w = int(math.ceil(round(w * c + h * s, 6)))
    out_h = int(math.ceil(round(w * s + h * c, 6)))
    return max(out_h, 1), max(out_w, 1)


def _inverse_map(shape, angle):
    """Matrix and offset taking output (row, col) to input (row, col)."""
    h, w = shape[:2]
    out_h, out_w = rotated_shape(shape, angle)
    t = math.radians(angle)
    c, s = math.cos(t), math.sin(t)
    matrix = np.array([[c, s], [-s, c]])
    centre_in = np.array([(h - 1) / 2.0, (w - 1) / 2.0])
    centre_out = np.array([(out_h - 1) / 2.0, (out_w - 1) / 2.0])
    offset = centre_in - matrix @ centre_out
    return matrix, offset, (out_h, out_w)


def rotate_mask(mask, angle):
    """Nearest-neighbour rotation about the centre with an expanded canvas."""
    mask = np.ascontiguousarray(mask, dtype=bool)
    matrix, offset, out_shape = _inverse_map(mask.shape, angle)
    # pad so samples within half a pixel of the edge still hit the border pixel
    padded = np.pad(mask, 1).view(np.uint8)
    out = ndi.affine_transform(padded, matrix, offset=offset + 1.0,
                               output_shape=out_shape, order=0, cval=0)
    return out.astype(bool)


def rotate_image(img, angle, fill=0.0):
    """Bilinear rotation of an ``(H, W)`` or ``(H, W, C)`` array.

    Returns float64. ``fill`` is a scalar or one value per channel.
    """
    img = np.asarray(img, dtype=np.float64)
    matrix, offset, (out_h, out_w) = _inverse_map(img.shape, angle)
    # cv2 wants (x, y) ordering: x_in = a * x_out + b * y_out + tx
    warp = np.array([[matrix[1, 1], matrix[1, 0], offset[1]],
                     [matrix[0, 1], matrix[0, 0], offset[0]]])
    flags = cv2.INTER_LINEAR | cv2.WARP_INVERSE_MAP
    channels = img[..., None] if img.ndim == 2 else img
    fills = np.broadcast_to(np.asarray(fill, dtype=np.float64), (channels.shape[2],))
    out = np.empty((out_h, out_w, channels.shape[2]))
    for ch in range(channels.shape[2]):
        out[..., ch] = cv2.warpAffine(np.ascontiguousarray(channels[..., ch]), warp,
                                      (out_w, out_h), flags=flags,
                                      borderMode=cv2.BORDER_CONSTANT,
                                      borderValue=float(fills[ch]))
    return out[..., 0] if img.ndim == 2 else out


def row_sum_profile(mask):
    return np.asarray(mask, dtype=bool).sum(axis=1, dtype=np.int64)


def _crop_to_content(weights):
    rows = np.flatnonzero(weights.any(axis=1))
    cols = np.flatnonzero(weights.any(axis=0))
    if rows.size == 0:
        raise EmptyMask("no tissue pixel to orient")
    return weights[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1]


def projection_profiles(weights, angles, chunk_elems=4_000_000):
    """Anti-aliased row-sum profiles of ``weights`` rotated by each angle.

    Every non-zero pixel is mapped forward to its rotated row coordinate and
    its weight split linearly between the two nearest rows.

    Returns
    -------
    ndarray
        ``(len(angles), height)``; all profiles share a canvas tall enough
        for any angle, so rows outside the projection are zero.
    """
    weights = np.asarray(weights, dtype=np.float64)
    ys, xs = np.nonzero(weights)
    vals = weights[ys, xs].astype(np.float32)
    # an integer centre keeps axis-aligned rows on integer bins at 0 and 90
    ys = (ys - (weights.shape[0] - 1) // 2).astype(np.float32)
    xs = (xs - (weights.shape[1] - 1) // 2).astype(np.float32)
    radius = int(math.ceil(math.hypot(*weights.shape) / 2.0)) + 1
    height = 2 * radius + 2
    angles = np.atleast_1d(np.asarray(angles, dtype=np.float64))
    out = np.empty((len(angles), height))
    per_chunk = max(1, chunk_elems // max(len(vals), 1))
    for start in range(0, len(angles), per_chunk):
        t = np.radians(angles[start:start + per_chunk])
        rows = np.multiply.outer(np.cos(t).astype(np.float32), ys)
        rows -= np.multiply.outer(np.sin(t).astype(np.float32), xs)
        rows += np.float32(radius)
        base = rows.astype(np.int32)
        upper = rows - base
        upper *= vals
        lower = vals - upper
        base += (np.arange(len(t), dtype=np.int32) * height)[:, None]
        size = height * len(t)
        prof = np.bincount(base.ravel(), lower.ravel(), minlength=size)
        base += 1
        prof += np.bincount(base.ravel(), upper.ravel(), minlength=size)
        out[start:start + len(t)] = prof.reshape(len(t), height)
    return out


def score_profiles(profiles, criterion="energy"):
    profiles = np.asarray(profiles, dtype=np.float64)
    if criterion == "energy":
        return np.einsum("ij,ij->i", profiles, profiles)
    if criterion == "peak":
        return profiles.max(axis=1)
    raise ValueError(f"unknown rotation criterion {criterion!r}; expected one of {CRITERIA}")


def _pick(angles, scores):
    """Highest score; near-ties go to the smallest angle."""
    order = np.argsort(angles, kind="stable")
    angles, scores = angles[order], scores[order]
    best = scores.max()
    tied = np.flatnonzero(scores >= best - TIE_RTOL * abs(best))
    return float(angles[tied[0]]), float(scores[tied[0]])


def _block_mean(mask, factor):
    h, w = mask.shape
    ph, pw = -h % factor, -w % factor
    padded = np.pad(mask.astype(np.float64), ((0, ph), (0, pw)))
    return padded.reshape((h + ph) // factor, factor, (w + pw) // factor, factor).mean(axis=(1, 3))


def _result(mask, angle, score, criterion):
    profile = row_sum_profile(rotate_mask(mask, angle))
    return RotationResult(angle=angle, profile_peak=int(profile.max()), profile=profile,
                          score=score, criterion=criterion)


def exhaustive_rotation(mask, step=0.1, criterion="energy"):
    """Score every grid angle at full resolution."""
    weights = _crop_to_content(np.asarray(mask, dtype=bool))
    angles = angle_grid(step)
    scores = score_profiles(projection_profiles(weights, angles), criterion)
    angle, score = _pick(angles, scores)
    return _result(mask, angle, score, criterion)


def find_rotation(mask, step=0.1, downsample_cap=512, refine_span=1.0, criterion="energy"):
    """Angle in [0, 180) that levels the tissue stripe.

    All grid angles are scored on a block-averaged copy of the mask whose
    longer side is at most ``downsample_cap``; the best coarse angle is then
    refined at full resolution over ``+-refine_span`` degrees.
    """
    mask = np.asarray(mask, dtype=bool)
    weights = _crop_to_content(mask)
    factor = int(math.ceil(max(weights.shape) / downsample_cap))
    angles = angle_grid(step)
    if factor <= 1:
        scores = score_profiles(projection_profiles(weights, angles), criterion)
        angle, score = _pick(angles, scores)
        return _result(mask, angle, score, criterion)

    coarse = _block_mean(weights, factor)
    scores = score_profiles(projection_profiles(coarse, angles), criterion)
    coarse_angle, _ = _pick(angles, scores)
    n = int(round(refine_span / step))
    local = np.round(np.mod(coarse_angle + np.arange(-n, n + 1) * step, 180.0), 10)
    local = np.unique(np.where(local >= 180.0 - step / 2, 0.0, local))
    scores = score_profiles(projection_profiles(weights, local), criterion)
    angle, score = _pick(local, scores)
    return _result(mask, angle, score, criterion)


def crop_box(mask, margin=10):
    """Bounding box ``(r0, r1, c0, c1)`` of ``mask`` grown by ``margin``, clamped."""
    rows = np.flatnonzero(np.asarray(mask).any(axis=1))
    cols = np.flatnonzero(np.asarray(mask).any(axis=0))
    if rows.size == 0:
        raise EmptyMask("nothing to crop")
    h, w = mask.shape
    return (max(rows[0] - margin, 0), min(rows[-1] + margin + 1, h),
            max(cols[0] - margin, 0), min(cols[-1] + margin + 1, w))


def apply_orientation(img, mask, rotation, margin=10, fill=255.0):
    """Rotate ``img`` (bilinear) and ``mask`` (nearest), crop both to the mask.

    Returns ``(image, mask)``; the image keeps a float64 dtype so callers can
    quantize or keep raw values.
    """
    mask = np.asarray(mask, dtype=bool)
    img = np.asarray(img)
    if img.shape[:2] != mask.shape:
        raise ValueError(f"image {img.shape[:2]} and mask {mask.shape} differ")
    if not mask.any():
        raise EmptyMask("nothing to orient")
    rmask = rotate_mask(mask, rotation.angle)
    rimg = rotate_image(img, rotation.angle, fill=fill)
    r0, r1, c0, c1 = crop_box(rmask, margin)
    return rimg[r0:r1, c0:c1], rmask[r0:r1, c0:c1]
