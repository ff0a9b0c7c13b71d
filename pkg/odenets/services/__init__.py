"""
Servicios de lógica de negocio: entrenamiento, evaluación y compresión
"""

from .compression import CompressionService, compress_checkpoint, shorten_graph
from .evaluation import EvaluationResult, EvaluationService
from .training import OptState, TrainConfig, TrainingService, refine, sgd_momentum_step

__all__ = [
    'CompressionService',
    'EvaluationResult',
    'EvaluationService',
    'OptState',
    'TrainConfig',
    'TrainingService',
    'compress_checkpoint',
    'refine',
    'sgd_momentum_step',
    'shorten_graph',
]
