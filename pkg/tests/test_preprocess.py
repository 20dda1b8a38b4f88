from fractions import Fraction

import numpy as np
import pytest

from signature.preprocess import (
    GrayImage, PreprocessConfig, binarize_invert, otsu_threshold, preprocess_image, resize_normalize,
)


def otsu_oracle(pixels):
    """Brute-force sweep of w0 * w1 * (mu0 - mu1)^2 over all 256 thresholds, exact arithmetic."""
    values = pixels.ravel().astype(int)
    n = values.size
    best_t, best = None, None
    for t in range(256):
        low = values[values <= t]
        high = values[values > t]
        if low.size == 0 or high.size == 0:
            continue
        w0, w1 = Fraction(low.size, n), Fraction(high.size, n)
        mu0 = Fraction(int(low.sum()), low.size)
        mu1 = Fraction(int(high.sum()), high.size)
        var = w0 * w1 * (mu0 - mu1) ** 2
        if best is None or var > best:
            best_t, best = t, var
    return best_t


def test_gray_image_rejects_out_of_range():
    with pytest.raises(ValueError):
        GrayImage(np.array([[0, 256]]))
    with pytest.raises(ValueError):
        GrayImage.from_list(2, 2, [0, 1, 2])


def test_otsu_two_modes():
    pixels = np.array([10] * 40 + [200] * 60, dtype=np.uint8).reshape(10, 10)
    t = otsu_threshold(GrayImage(pixels))
    assert 10 <= t < 200
    assert t == otsu_oracle(pixels)


def test_otsu_constant_image():
    assert otsu_threshold(GrayImage(np.full((5, 7), 128))) == 128


def test_otsu_matches_oracle_on_random_images():
    rng = np.random.default_rng(3)
    for _ in range(100):
        shape = tuple(rng.integers(2, 9, size=2))
        if rng.random() < 0.5:
            pixels = rng.integers(0, 256, size=shape)
        else:
            pixels = rng.choice(rng.integers(0, 256, size=4), size=shape)
        img = GrayImage(pixels)
        if np.unique(img.pixels).size == 1:
            continue
        assert otsu_threshold(img) == otsu_oracle(img.pixels)


def test_binarize_invert_examples():
    img = GrayImage(np.array([[250, 50]]))
    out = binarize_invert(img, 200)
    np.testing.assert_array_equal(out.pixels, [[0, 205]])

    whole = GrayImage(np.array([[0, 100, 255]]))
    np.testing.assert_array_equal(binarize_invert(whole, 255).pixels, [[255, 155, 0]])


def test_binarize_strict_mode():
    img = GrayImage(np.array([[250, 50, 120]]))
    np.testing.assert_array_equal(binarize_invert(img, 200, strict=True).pixels, [[0, 255, 255]])


def test_whitening_is_idempotent():
    rng = np.random.default_rng(5)
    pixels = rng.integers(0, 256, size=(6, 6))
    t = 140
    once = np.where(pixels > t, 255, pixels)
    twice = np.where(once > t, 255, once)
    np.testing.assert_array_equal(once, twice)
    np.testing.assert_array_equal(binarize_invert(GrayImage(pixels), t).pixels, 255 - once)


def test_resize_all_zero():
    cfg = PreprocessConfig(side_h=32, side_w=32)
    out = resize_normalize(GrayImage(np.zeros((100, 300))), cfg)
    assert out.values.shape == (32, 32)
    assert not out.values.any()


def test_resize_single_pixel():
    pixels = np.zeros((20, 30))
    pixels[7, 11] = 255
    out = resize_normalize(GrayImage(pixels), PreprocessConfig())
    assert out.values.max() == pytest.approx(1.0, abs=1e-6)


def test_resize_identity_at_target_size():
    rng = np.random.default_rng(8)
    pixels = rng.choice([0, 255], size=(8, 8))
    pixels[0, 0] = pixels[-1, -1] = 255
    out = resize_normalize(GrayImage(pixels), PreprocessConfig(side_h=8, side_w=8))
    np.testing.assert_array_equal(out.values, pixels / 255.0)


def test_resize_output_in_unit_interval():
    rng = np.random.default_rng(9)
    cfg = PreprocessConfig(side_h=12, side_w=20)
    for _ in range(10):
        out = resize_normalize(GrayImage(rng.integers(0, 256, size=(17, 23))), cfg)
        assert out.values.min() >= 0.0 and out.values.max() <= 1.0
        assert out.flatten().shape == (cfg.input_dim,)


def test_preprocess_constant_image_is_blank():
    out = preprocess_image(GrayImage(np.full((10, 10), 77)), PreprocessConfig(side_h=4, side_w=4))
    assert not out.values.any()


def test_preprocess_dark_strokes_become_ink():
    pixels = np.full((40, 80), 240)
    pixels[18:22, 10:70] = 20
    out = preprocess_image(GrayImage(pixels), PreprocessConfig(side_h=16, side_w=16))
    assert out.values.max() > 0.3
    # corners are background
    assert out.values[0, 0] == 0.0 and out.values[-1, -1] == 0.0
