import numpy as np
import pytest

from patchreg.ncc import NccConfig, window_sum
from patchreg.synth import make_blobs, make_ellipsoid, make_sphere


def test_sphere_label_volume_close_to_analytic():
    _, labels = make_sphere((64, 64, 64), radius=10.0)
    expect = 4.0 / 3.0 * np.pi * 10.0 ** 3
    assert labels.sum() == pytest.approx(expect, rel=0.02)


def test_ellipsoid_label_volume_close_to_analytic():
    _, labels = make_ellipsoid((64, 64, 64), radii=(8.0, 10.0, 12.0))
    expect = 4.0 / 3.0 * np.pi * 8.0 * 10.0 * 12.0
    assert labels.sum() == pytest.approx(expect, rel=0.02)


def test_shapes_are_normalised_and_smooth():
    img, labels = make_sphere((48, 48, 48), radius=10.0)
    assert 0.0 <= img.min() and img.max() <= 1.0
    assert img[24, 24, 24] > 0.99
    assert img[0, 0, 0] < 0.01
    assert set(np.unique(labels)) == {0, 1}


def test_blobs_deterministic():
    a_img, a_lab = make_blobs((32, 32, 32), seed=11)
    b_img, b_lab = make_blobs((32, 32, 32), seed=11)
    assert (a_img == b_img).all()
    assert (a_lab == b_lab).all()
    c_img, _ = make_blobs((32, 32, 32), seed=12)
    assert not (a_img == c_img).all()


def test_blobs_nonconstant_in_most_windows():
    img, _ = make_blobs((64, 64, 64), seed=42)
    w = NccConfig().window
    n = window_sum(np.ones_like(img), w)
    mean = window_sum(img, w) / n
    var = window_sum(img * img, w) / n - mean * mean
    assert (var > 1e-8).mean() >= 0.90


def test_blobs_range():
    img, _ = make_blobs((32, 32, 32), seed=1)
    assert img.min() == 0.0
    assert img.max() == 1.0
