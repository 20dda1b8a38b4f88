"""
Feature extractor: a dense VAE trained with a feature-disentangling loss.
"""
from .vae import LatentGaussian, VaeConfig, VaeModel, encode, extract_features
from .disentangle import PairBatch, fd_batch_loss, gauss_distance

__all__ = [
    'LatentGaussian', 'VaeConfig', 'VaeModel', 'encode', 'extract_features',
    'PairBatch', 'fd_batch_loss', 'gauss_distance',
]
