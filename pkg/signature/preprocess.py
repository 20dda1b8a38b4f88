"""
Signature image preprocessing: Otsu threshold, background whitening,
inversion, bounding-box crop and bilinear resize to a fixed grid.
"""
import logging
from dataclasses import dataclass

import numpy as np
from PIL import Image

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PreprocessConfig:
    side_h: int = 64
    side_w: int = 64
    strict_binary: bool = False

    def __post_init__(self):
        if self.side_h < 1 or self.side_w < 1:
            raise ValueError(f"target size must be positive, got {self.side_h}x{self.side_w}")

    @property
    def input_dim(self):
        return self.side_h * self.side_w

    def to_dict(self):
        return {'side_h': self.side_h, 'side_w': self.side_w, 'strict_binary': self.strict_binary}


@dataclass
class GrayImage:
    """8-bit grayscale image, 0 = black ink, 255 = white paper."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError(f"GrayImage needs a nonempty 2-D pixel grid, got shape {arr.shape}")
        if np.any(arr < 0) or np.any(arr > 255):
            raise ValueError("GrayImage pixel values must lie in [0, 255]")
        self.pixels = arr.astype(np.uint8)

    @classmethod
    def from_list(cls, width, height, values):
        if len(values) != width * height:
            raise ValueError(f"expected {width * height} pixels, got {len(values)}")
        return cls(np.asarray(values, dtype=np.int64).reshape(height, width))

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def height(self):
        return self.pixels.shape[0]


@dataclass
class NormalizedImage:
    """Fixed-size image with values in [0, 1]; 0 means no ink."""

    values: np.ndarray

    @property
    def side_h(self):
        return self.values.shape[0]

    @property
    def side_w(self):
        return self.values.shape[1]

    def flatten(self):
        return self.values.reshape(-1)


def otsu_threshold(img):
    """
    Otsu's threshold over the 256-bin histogram.

    Pixels <= t form the first class. Between-class variance is compared in
    exact integer arithmetic, so ties resolve to the smallest t.

    Args:
        img (GrayImage): Input image

    Returns:
        int: Threshold level; for a constant image, its single value
    """
    hist = np.bincount(img.pixels.ravel(), minlength=256)
    levels = np.flatnonzero(hist)
    if levels.size == 1:
        logger.debug(f"constant image at level {levels[0]}, no foreground")
        return int(levels[0])

    total_n = int(hist.sum())
    total_s = int(np.dot(hist, np.arange(256)))
    n0 = s0 = 0
    best_t, best_num, best_den = None, 0, 1
    for t in range(256):
        n0 += int(hist[t])
        s0 += t * int(hist[t])
        if n0 == 0 or n0 == total_n:
            continue
        # sigma_B^2 = (N*S0 - n0*S)^2 / (N^2 * n0 * (N - n0)); N^2 is common
        num = (total_n * s0 - n0 * total_s) ** 2
        den = n0 * (total_n - n0)
        if best_t is None or num * best_den > best_num * den:
            best_t, best_num, best_den = t, num, den
    return best_t


def binarize_invert(img, t, strict=False):
    """
    Whiten pixels above ``t`` then invert so the background becomes 0.

    Ink pixels keep their (inverted) gray level unless ``strict`` is set, in
    which case they all become 255.
    """
    if not 0 <= t <= 255:
        raise ValueError(f"threshold must lie in [0, 255], got {t}")
    p = img.pixels.astype(np.int64)
    whitened = np.where(p > t, 255, 0 if strict else p)
    return GrayImage(255 - whitened)


def _pad_to_aspect(arr, side_h, side_w):
    h, w = arr.shape
    if w * side_h < h * side_w:
        new_w, new_h = max(w, int(round(h * side_w / side_h))), h
    else:
        new_w, new_h = w, max(h, int(round(w * side_h / side_w)))
    padded = np.zeros((new_h, new_w), dtype=arr.dtype)
    top = (new_h - h) // 2
    left = (new_w - w) // 2
    padded[top:top + h, left:left + w] = arr
    return padded


def resize_normalize(img, cfg):
    """
    Crop to the ink bounding box, pad to the target aspect ratio, resample
    bilinearly to (side_h, side_w) and scale into [0, 1].

    Args:
        img (GrayImage): Binarized and inverted image (background 0)
        cfg (PreprocessConfig): Target dimensions

    Returns:
        NormalizedImage: All-zero when the input has no ink
    """
    arr = img.pixels
    rows = np.flatnonzero(arr.any(axis=1))
    cols = np.flatnonzero(arr.any(axis=0))
    if rows.size == 0:
        return NormalizedImage(np.zeros((cfg.side_h, cfg.side_w)))

    crop = arr[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1]
    padded = _pad_to_aspect(crop, cfg.side_h, cfg.side_w)
    resized = Image.fromarray(padded.astype(np.float32)).resize((cfg.side_w, cfg.side_h), Image.BILINEAR)
    values = np.asarray(resized, dtype=np.float64) / 255.0
    return NormalizedImage(np.clip(values, 0.0, 1.0))


def preprocess_image(img, cfg):
    """
    Full pipeline: Otsu threshold, whitening, inversion, resize.

    Returns:
        NormalizedImage: Network-ready image
    """
    t = otsu_threshold(img)
    if np.all(img.pixels == t):
        # Constant image: nothing separates ink from paper
        return NormalizedImage(np.zeros((cfg.side_h, cfg.side_w)))
    return resize_normalize(binarize_invert(img, t, strict=cfg.strict_binary), cfg)
