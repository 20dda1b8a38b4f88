"""
Writer-dependent RBF SVM classifier.
"""
from .svm import SvmConfig, SvmModel, decision_value, predict, smo_train

__all__ = ['SvmConfig', 'SvmModel', 'decision_value', 'predict', 'smo_train']
