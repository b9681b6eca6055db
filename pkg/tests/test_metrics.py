import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from useanet.errors import InputError, ShapeError
from useanet.metrics import mean_report, metrics


def test_identical_masks():
    m = np.zeros((5, 5), np.uint8)
    m[1:3] = 1
    r = metrics(m, m)
    assert (r.iou, r.f1, r.acc) == (1.0, 1.0, 1.0)


def test_disjoint_masks():
    a, b = np.zeros((4, 4), np.uint8), np.zeros((4, 4), np.uint8)
    a[:2], b[2:] = 1, 1
    r = metrics(a, b)
    assert r.iou == 0.0 and r.f1 == 0.0


def test_left_half_against_full_frame():
    pred = np.zeros((10, 10), np.uint8)
    pred[:, :5] = 1
    r = metrics(pred, np.ones((10, 10), np.uint8))
    assert r.iou == 0.5 and abs(r.f1 - 2 / 3) <= 1e-15 and r.acc == 0.5


def test_empty_pair_scores_one():
    z = np.zeros((3, 3), np.uint8)
    assert metrics(z, z).iou == 1.0 and metrics(z, z).f1 == 1.0


def test_dice_jaccard_identity_over_1000_pairs():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(1000):
        shape = tuple(rng.integers(1, 12, size=2))
        p, g = rng.random(shape) < rng.random(), rng.random(shape) < rng.random()
        r = metrics(p.astype(np.uint8), g.astype(np.uint8))
        worst = max(worst, abs(r.f1 - 2 * r.iou / (1 + r.iou)))
    assert worst <= 1e-9


masks = arrays(np.uint8, (6, 6), elements=st.integers(0, 1))


@given(masks, masks)
def test_complement_symmetry_holds_for_accuracy_only(p, g):
    a, b = metrics(p, g), metrics(1 - p, 1 - g)
    assert a.acc == b.acc
    assert a.tp + a.fp + a.fn + a.tn == p.size
    assert a.tp == b.tn and a.fp == b.fn


def test_mean_report_percentages():
    one = metrics(np.ones((2, 2), np.uint8), np.ones((2, 2), np.uint8))
    zero = metrics(np.array([[1, 0]], np.uint8), np.array([[0, 1]], np.uint8))
    out = mean_report([one, zero])
    assert out == {"iou": 50.0, "f1": 50.0, "acc": 50.0, "count": 2}


def test_errors():
    with pytest.raises(InputError):
        metrics(np.full((2, 2), 2), np.zeros((2, 2)))
    with pytest.raises(ShapeError):
        metrics(np.zeros((2, 2)), np.zeros((2, 3)))
    with pytest.raises(InputError):
        mean_report([])
