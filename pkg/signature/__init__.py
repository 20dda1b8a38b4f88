"""
Signature images: preprocessing and the synthetic corpus generator.
"""
from .preprocess import GrayImage, NormalizedImage, PreprocessConfig, otsu_threshold, preprocess_image

__all__ = ['GrayImage', 'NormalizedImage', 'PreprocessConfig', 'otsu_threshold', 'preprocess_image']
