import numpy as np
import pytest

from patchreg.ncc import NccConfig, ncc_gateaux, ncc_value, ncc_value_and_gateaux, window_sum


def ncc_value_oracle(j, f, cfg):
    """Brute-force windowed sums, one clamped window per voxel."""
    r = cfg.window // 2
    nx, ny, nz = j.shape
    total = 0.0
    for x in range(nx):
        for y in range(ny):
            for z in range(nz):
                sl = (slice(max(x - r, 0), min(x + r + 1, nx)),
                      slice(max(y - r, 0), min(y + r + 1, ny)),
                      slice(max(z - r, 0), min(z + r + 1, nz)))
                jw = j[sl] - j[sl].mean()
                fw = f[sl] - f[sl].mean()
                cross = float(np.sum(jw * fw))
                varj = float(np.sum(jw * jw))
                varf = float(np.sum(fw * fw))
                total += cross * cross / (varj * varf + cfg.epsilon)
    return total / j.size


def test_window_sum_truncated():
    a = np.ones((5, 5, 5))
    s = window_sum(a, 3)
    assert s[2, 2, 2] == 27.0
    assert s[0, 0, 0] == 8.0  # corner window is 2x2x2
    assert s[0, 2, 2] == 18.0


def test_identical_images_score_near_one():
    rng = np.random.default_rng(0)
    f = rng.random((16, 16, 16))
    assert ncc_value(f, f) > 1.0 - 1e-3


def test_affine_intensity_invariance():
    rng = np.random.default_rng(1)
    j = rng.random((12, 12, 12))
    f = rng.random((12, 12, 12))
    cfg = NccConfig()
    base = ncc_value(j, f, cfg)
    assert ncc_value(3.0 * j + 0.5, f, cfg) == pytest.approx(base, rel=1e-6)
    assert ncc_value(j, -2.0 * f + 1.0, cfg) == pytest.approx(base, rel=1e-6)


def test_symmetry():
    rng = np.random.default_rng(2)
    j = rng.random((10, 10, 10))
    f = rng.random((10, 10, 10))
    assert ncc_value(j, f) == pytest.approx(ncc_value(f, j), abs=1e-12)


def test_value_matches_bruteforce_oracle():
    rng = np.random.default_rng(3)
    j = rng.random((16, 16, 16))
    f = rng.random((16, 16, 16))
    cfg = NccConfig()
    assert ncc_value(j, f, cfg) == pytest.approx(ncc_value_oracle(j, f, cfg), abs=1e-12)


def test_gateaux_matches_finite_differences():
    cfg = NccConfig(epsilon=1e-5)
    tau = 1e-4
    for seed in (4, 5, 6):
        rng = np.random.default_rng(seed)
        j = rng.random((12, 12, 12))
        f = rng.random((12, 12, 12))
        h = rng.standard_normal((12, 12, 12))
        g = ncc_gateaux(j, f, cfg)
        fd = -(ncc_value(j + tau * h, f, cfg) - ncc_value(j - tau * h, f, cfg)) / (2 * tau)
        analytic = float(np.sum(g * h))
        assert abs(fd - analytic) / abs(fd) < 1e-5


def test_gateaux_vanishes_at_alignment_for_small_floor():
    rng = np.random.default_rng(7)
    f = rng.random((12, 12, 12))
    g = ncc_gateaux(f, f, NccConfig(epsilon=1e-10))
    assert np.abs(g[2:-2, 2:-2, 2:-2]).max() < 1e-6


def test_constant_reference_contributes_nothing():
    rng = np.random.default_rng(8)
    j = rng.random((10, 10, 10))
    f = np.full((10, 10, 10), 0.4)
    value, g = ncc_value_and_gateaux(j, f)
    # floored variance keeps degenerate windows out up to rounding residue
    assert abs(value) < 1e-15
    assert np.abs(g).max() < 1e-15


def test_value_and_gateaux_consistent_with_separate_calls():
    rng = np.random.default_rng(9)
    j = rng.random((10, 10, 10))
    f = rng.random((10, 10, 10))
    value, g = ncc_value_and_gateaux(j, f)
    assert value == ncc_value(j, f)
    assert (g == ncc_gateaux(j, f)).all()


def test_dims_mismatch():
    with pytest.raises(ValueError):
        ncc_value(np.zeros((4, 4, 4)), np.zeros((5, 4, 4)))


def test_config_validation():
    with pytest.raises(ValueError):
        NccConfig(window=4)
    with pytest.raises(ValueError):
        NccConfig(window=1)
    with pytest.raises(ValueError):
        NccConfig(epsilon=0.0)
