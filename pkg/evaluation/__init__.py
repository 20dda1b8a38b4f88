"""
Error rates and the evaluation protocol.
"""
from .metrics import ScoreSet, eer, frr_far, separation_score
from .protocol import EvalReport, ProtocolConfig, run_protocol

__all__ = ['ScoreSet', 'eer', 'frr_far', 'separation_score', 'EvalReport', 'ProtocolConfig', 'run_protocol']
