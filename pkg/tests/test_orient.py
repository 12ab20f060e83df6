import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epidermaquant.errors import EmptyMask
from epidermaquant.orient import (RotationResult, angle_grid, apply_orientation,
                                  exhaustive_rotation, find_rotation, rotate_image,
                                  rotate_mask, row_sum_profile)
from epidermaquant.phantoms import stripe_mask


def angular_error(got, want):
    d = (got - want) % 180.0
    return min(d, 180.0 - d)


def canvas_stripe(length=400, thickness=80, shape=(1000, 1000), r0=300, c0=200):
    m = np.zeros(shape, bool)
    m[r0:r0 + thickness, c0:c0 + length] = True
    return m


def jaccard(a, b):
    return np.count_nonzero(a & b) / np.count_nonzero(a | b)


def test_angle_grid():
    g = angle_grid(0.1)
    assert len(g) == 1800 and g[0] == 0.0 and g[-1] == pytest.approx(179.9)


def test_rotate_identity_and_quarter_turn(rng):
    m = rng.random((37, 52)) < 0.4
    assert np.array_equal(rotate_mask(m, 0.0), m)
    assert np.array_equal(rotate_mask(m, 90.0), np.rot90(m))
    img = rng.random((20, 30))
    assert np.allclose(rotate_image(img, 90.0), np.rot90(img))


def test_rotate_round_trip_overlap():
    m = np.zeros((300, 600), bool)
    m[110:190, 100:500] = True
    back = rotate_mask(rotate_mask(m, 30.0), -30.0)
    # the canvas grows on each turn; compare in the centred original frame
    dh, dw = (back.shape[0] - m.shape[0]) // 2, (back.shape[1] - m.shape[1]) // 2
    assert jaccard(back[dh:dh + m.shape[0], dw:dw + m.shape[1]], m) >= 0.98
    assert back.sum() == pytest.approx(m.sum(), rel=0.02)


def test_rotate_keeps_all_tissue():
    m = np.ones((40, 100), bool)
    r = rotate_mask(m, 33.0)
    assert r.sum() == pytest.approx(m.sum(), rel=0.03)
    assert not r[0].all() and not r[:, 0].all()


def test_row_sum_profile_examples():
    assert not row_sum_profile(np.zeros((5, 7), bool)).any()
    assert np.array_equal(row_sum_profile(np.ones((5, 7), bool)), np.full(5, 7))
    p = row_sum_profile(canvas_stripe())
    assert np.count_nonzero(p == 400) == 80 and np.count_nonzero(p) == 80


def test_horizontal_stripe_and_square_give_zero():
    assert find_rotation(canvas_stripe()).angle == 0.0
    sq = np.zeros((200, 200), bool)
    sq[50:150, 50:150] = True
    assert find_rotation(sq).angle == 0.0


def test_stripe_rotated_by_30():
    m = rotate_mask(canvas_stripe(), 30.0)
    r = find_rotation(m)
    assert angular_error(r.angle, 150.0) <= 0.2
    assert r.profile_peak == r.profile.max()
    assert round(r.angle * 10) == pytest.approx(r.angle * 10, abs=1e-6)


@pytest.mark.parametrize("angle", [-63.0, -23.0, 7.5, 12.0, 45.0, 88.0])
def test_rectangle_restored_within_tolerance(angle):
    m = stripe_mask((700, 900), 600, 120, angle)
    r = find_rotation(m)
    assert angular_error(r.angle, -angle) <= 0.2


def test_translation_invariance():
    base = stripe_mask((500, 700), 420, 90, 17.3, centre=(200, 300))
    moved = stripe_mask((500, 700), 420, 90, 17.3, centre=(260, 390))
    assert find_rotation(base).angle == find_rotation(moved).angle


def test_coarse_to_fine_matches_exhaustive():
    rng = np.random.default_rng(99)
    for _ in range(20):
        angle = rng.uniform(-90, 90)
        length = rng.uniform(250, 450)
        thick = rng.uniform(30, 100)
        m = stripe_mask((500, 550), length, thick, angle)
        fast = find_rotation(m, downsample_cap=128)
        full = exhaustive_rotation(m)
        assert fast.score >= 0.995 * full.score
        assert fast.profile_peak >= 0.995 * full.profile_peak
        assert angular_error(fast.angle, full.angle) <= 0.2


def test_peak_criterion_prefers_diagonal():
    # documents why the default scores profile energy: the literal peak
    # rule is maximised at atan(thickness / length) from horizontal
    m = stripe_mask((500, 700), 400, 100, 0.0)
    peak = find_rotation(m, criterion="peak")
    assert angular_error(peak.angle, math.degrees(math.atan(100 / 400))) <= 1.5
    assert find_rotation(m).angle == 0.0


def test_find_rotation_empty():
    with pytest.raises(EmptyMask):
        find_rotation(np.zeros((10, 10), bool))


def test_apply_orientation_exact_box_and_clamp():
    m = canvas_stripe(shape=(500, 700), r0=120, c0=90)
    img = np.where(m, 10, 240).astype(np.uint8)
    r0 = RotationResult(0.0, 400, row_sum_profile(m))
    crop, cm = apply_orientation(img, m, r0, margin=0)
    assert cm.shape == (80, 400) and cm.all() and np.all(crop == 10)
    crop, cm = apply_orientation(img, m, r0, margin=10_000)
    assert cm.shape == m.shape and crop.shape == m.shape


@pytest.mark.parametrize("angle", [9.0, -31.0, 58.0])
def test_apply_orientation_height(angle):
    m = stripe_mask((700, 900), 560, 100, angle)
    rgb = np.dstack([np.where(m, 90, 240)] * 3).astype(np.uint8)
    r = find_rotation(m)
    crop, cm = apply_orientation(rgb, m, r, margin=0)
    assert abs(cm.shape[0] - 100) <= 2
    assert crop.shape[:2] == cm.shape and crop.ndim == 3


def test_apply_orientation_errors():
    with pytest.raises(ValueError):
        apply_orientation(np.zeros((5, 6)), np.ones((6, 5), bool), RotationResult(0.0, 0, None))
    with pytest.raises(EmptyMask):
        apply_orientation(np.zeros((5, 5)), np.zeros((5, 5), bool), RotationResult(0.0, 0, None))


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 179.9), st.integers(0, 30))
def test_oriented_mask_never_empty(angle, margin):
    m = stripe_mask((80, 120), 60, 12, 20.0)
    r = RotationResult(round(angle, 1), 0, None)
    _, cm = apply_orientation(np.zeros(m.shape), m, r, margin=margin)
    assert cm.any()
