import math

import numpy as np
import pytest
from skimage.metrics import peak_signal_noise_ratio, structural_similarity

from gminpaint.errors import DimensionMismatch, EmptyRegion
from gminpaint.imageio import GrayImage, InpaintMask
from gminpaint.metrics import gaussian_window, psnr, ssim


def test_psnr_matches_skimage(camera64, rng):
    noisy = np.clip(camera64.data + rng.normal(scale=8, size=camera64.shape), 0, 255)
    assert psnr(camera64, noisy) == pytest.approx(peak_signal_noise_ratio(camera64.data, noisy, data_range=255))


def test_psnr_region_hand_value():
    ref = np.zeros((4, 4))
    test = ref.copy()
    test[1, 1] = 10.0
    region = np.zeros((4, 4), dtype=bool)
    region[1, 1:3] = True
    # MSE over the two selected pixels is 50
    assert psnr(ref, test, InpaintMask(region)) == pytest.approx(10 * math.log10(255**2 / 50))


def test_psnr_identical_is_inf(camera64):
    assert psnr(camera64, camera64) == math.inf


def test_psnr_errors():
    with pytest.raises(DimensionMismatch):
        psnr(np.zeros((3, 3)), np.zeros((3, 4)))
    with pytest.raises(EmptyRegion):
        psnr(np.zeros((3, 3)), np.ones((3, 3)), np.zeros((3, 3), dtype=bool))


def test_ssim_matches_skimage(camera64, rng):
    noisy = np.clip(camera64.data + rng.normal(scale=15, size=camera64.shape), 0, 255)
    ref = structural_similarity(camera64.data, noisy, gaussian_weights=True, sigma=1.5,
                                use_sample_covariance=False, data_range=255)
    assert ssim(camera64, GrayImage(noisy)) == pytest.approx(ref, abs=1e-10)


def test_ssim_identical_is_one(camera64):
    assert ssim(camera64, camera64) == pytest.approx(1.0)


def test_gaussian_window_normalized():
    w = gaussian_window()
    assert w.shape == (11, 11)
    assert w.sum() == pytest.approx(1.0)
    assert np.allclose(w, w.T)
