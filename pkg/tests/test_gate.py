import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from epidermaquant.errors import EmptyInput, EmptyMask
from epidermaquant.gate import (GateConfig, Region, average_proportion, calibrate,
                                candidate_thresholds, gate)
from oracles import auc_brute, youden_brute


def test_ap_examples():
    assert average_proportion(np.full((4, 4), 255, np.uint8)) == 0.0
    assert average_proportion(np.zeros((4, 4), np.uint8), GateConfig(pixel_threshold=1)) == 100.0
    img = np.array([[0, 100], [200, 255]], np.uint8)
    assert average_proportion(img, GateConfig(pixel_threshold=150)) == 50.0


def test_ap_tissue_region():
    img = np.array([[0, 100], [200, 255]], np.uint8)
    cfg = GateConfig(pixel_threshold=150, region=Region.TISSUE)
    assert average_proportion(img, cfg, np.array([[True, False], [True, False]])) == 50.0
    with pytest.raises(EmptyMask):
        average_proportion(img, cfg, np.zeros((2, 2), bool))


def test_config_validation():
    with pytest.raises(ValueError):
        GateConfig(pixel_threshold=256)
    with pytest.raises(ValueError):
        GateConfig(ap_threshold=0)
    assert GateConfig(region="tissue").region is Region.TISSUE


def test_gate_boundary():
    assert gate(0.7)
    assert not gate(0.0)
    assert gate(0.6)
    assert not gate(0.59)


@given(arrays(np.uint8, (6, 7)), st.integers(0, 254))
def test_ap_monotone_and_bounded(img, t):
    lo = average_proportion(img, GateConfig(pixel_threshold=t))
    hi = average_proportion(img, GateConfig(pixel_threshold=t + 1))
    assert 0.0 <= lo <= hi <= 100.0


@given(arrays(np.uint8, (5, 8)), st.randoms(use_true_random=False))
def test_ap_ignores_pixel_order(img, r):
    flat = img.ravel().tolist()
    r.shuffle(flat)
    shuffled = np.array(flat, np.uint8).reshape(img.shape)
    assert average_proportion(img) == average_proportion(shuffled)


def test_candidate_grid():
    g = candidate_thresholds()
    assert len(g) == 91 and g[0] == 0.10 and g[-1] == 1.00
    assert np.allclose(np.diff(g), 0.01)


def test_calibrate_separable():
    res = calibrate([5.0] * 10, [0.05] * 10)
    assert res.youden_j == 1.0 and res.auc == 1.0 and res.ap_threshold == 0.10


def test_calibrate_identical():
    vals = [0.1, 0.3, 0.55, 0.8, 2.0]
    res = calibrate(vals, vals)
    assert all(t - f == 0 for f, t, _ in res.roc_points)
    assert res.youden_j == 0.0
    assert res.auc == pytest.approx(0.5)


def test_calibrate_matches_brute(rng):
    grid = candidate_thresholds()
    for _ in range(20):
        pos = rng.gamma(2.0, 0.4, 50).round(3)
        neg = rng.gamma(1.2, 0.25, 50).round(3)
        res = calibrate(pos, neg)
        t, j = youden_brute(pos.tolist(), neg.tolist(), grid.tolist())
        assert res.ap_threshold == t
        assert res.youden_j == pytest.approx(j, abs=1e-12)
        assert res.auc == pytest.approx(auc_brute(pos.tolist(), neg.tolist()), abs=1e-12)
        assert max(tp - fp for fp, tp, _ in res.roc_points) == pytest.approx(res.youden_j)


def test_roc_points_monotone(rng):
    res = calibrate(rng.random(30), rng.random(30) * 0.5)
    fpr, tpr, thr = np.array(res.roc_points).T
    assert np.all(np.diff(thr) > 0)
    assert np.all(np.diff(fpr) <= 0) and np.all(np.diff(tpr) <= 0)


def test_calibrate_empty():
    with pytest.raises(EmptyInput):
        calibrate([], [0.1])
