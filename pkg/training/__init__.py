"""
Per-writer joint training of the feature extractor and the classifier.
"""
from .trainer import TrainConfig, WriterSplit, derive_seed, train_round, train_writer

__all__ = ['TrainConfig', 'WriterSplit', 'derive_seed', 'train_round', 'train_writer']
