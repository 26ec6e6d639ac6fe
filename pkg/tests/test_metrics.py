import json
import math

import numpy as np
import pytest

from eigensr.metrics import evaluate, gaussian_window, psnr, sam, ssim
from oracles import naive_psnr, naive_sam, naive_ssim


def _pair(shape, seed):
    rng = np.random.default_rng(seed)
    ref = rng.random(shape)
    return ref + 0.05 * rng.standard_normal(shape), ref


def test_psnr_against_naive():
    pred, ref = _pair((4, 8, 8), 0)
    mean, bands = psnr(pred, ref, 1.0)
    expected = naive_psnr(pred, ref, 1.0)
    assert np.allclose(bands, expected, rtol=0, atol=1e-9)
    assert abs(mean - np.mean(expected)) <= 1e-9


def test_psnr_identity_and_constant_offset():
    ref = np.random.default_rng(1).random((3, 4, 4))
    mean, bands = psnr(ref, ref)
    assert mean == math.inf and np.all(bands == math.inf)
    mean, _ = psnr(np.full((2, 4, 4), 0.1), np.zeros((2, 4, 4)), peak=1.0)
    assert abs(mean - 20.0) <= 1e-12


def test_psnr_exact_band_excluded_from_mean():
    pred, ref = _pair((3, 8, 8), 2)
    pred[1] = ref[1]
    mean, bands = psnr(pred, ref, 1.0)
    assert bands[1] == math.inf
    assert mean == pytest.approx((bands[0] + bands[2]) / 2, abs=1e-12)


def test_psnr_decreases_with_noise():
    rng = np.random.default_rng(3)
    ref = rng.random((3, 16, 16))
    noise = rng.standard_normal(ref.shape)
    values = [psnr(ref + a * noise, ref, 1.0)[0] for a in (0.01, 0.02, 0.04)]
    assert values[0] > values[1] > values[2]


def test_ssim_against_naive():
    pred, ref = _pair((4, 16, 16), 4)
    mean, bands = ssim(pred, ref, 1.0)
    expected = naive_ssim(pred, ref, 1.0)
    assert np.allclose(bands, expected, rtol=0, atol=1e-9)
    assert abs(mean - np.mean(expected)) <= 1e-9


def test_ssim_identity_and_sign_flip():
    rng = np.random.default_rng(5)
    ref = rng.random((2, 12, 12))
    mean, bands = ssim(ref, ref, 1.0)
    assert mean == 1.0 and np.all(bands == 1.0)
    noise = rng.standard_normal((1, 16, 16))
    noise -= noise.mean()
    assert ssim(-noise, noise, 1.0)[0] < 1.0


def test_ssim_window():
    g = gaussian_window()
    assert g.size == 11 and abs(g.sum() - 1.0) < 1e-15 and g[5] == g.max()
    with pytest.raises(ValueError, match="at least 11x11"):
        ssim(np.ones((1, 8, 8)), np.ones((1, 8, 8)), 1.0)


def test_sam_against_naive():
    pred, ref = _pair((4, 8, 8), 6)
    pred[:, 0, 0] = 0.0
    angle, degenerate = sam(pred, ref)
    assert degenerate == 1
    assert abs(angle - naive_sam(pred, ref)) <= 1e-9


def test_sam_closed_cases():
    ref = np.random.default_rng(7).random((5, 6, 6)) + 0.1
    assert sam(ref, ref) == (0.0, 0)
    assert sam(2 * ref, ref)[0] == pytest.approx(0.0, abs=1e-6)
    a = np.zeros((2, 3, 3))
    b = np.zeros((2, 3, 3))
    a[0], b[1] = 1.0, 1.0
    assert sam(a, b)[0] == pytest.approx(90.0, abs=1e-12)
    scale = np.random.default_rng(8).random((1, 6, 6)) + 0.5
    pred = ref + 0.1 * np.random.default_rng(9).random(ref.shape)
    assert sam(pred * scale, ref)[0] == pytest.approx(sam(pred, ref)[0], abs=1e-9)


def test_geometry_and_band_errors():
    with pytest.raises(ValueError, match="geometry"):
        psnr(np.ones((2, 4, 4)), np.ones((2, 4, 5)))
    with pytest.raises(ValueError, match="2 bands"):
        sam(np.ones((1, 4, 4)), np.ones((1, 4, 4)))


def test_report_json():
    ref = np.random.default_rng(10).random((3, 12, 12))
    report = evaluate(ref, ref)
    d = json.loads(json.dumps(report.to_dict()))
    assert d["psnr"] == "+inf" and d["ssim"] == 1.0 and d["sam"] == 0.0
    assert d["peak"] == ref.max() and d["psnr_exact_bands"] == 3
