"""
Servicio de evaluación en modo inferencia
"""

import logging
import time
from dataclasses import asdict, dataclass
from typing import Dict, Optional

import numpy as np

from .. import conf
from ..adcore import softmax_cross_entropy
from ..datasets import Dataset
from ..exceptions import ShapeError
from ..integrate import StageHook
from ..models import ContinuousClassifier, model_forward
from ..odeblock import Mode

# Configurar logging
logger = logging.getLogger(__name__)


@dataclass
class EvaluationResult:
    """Resultado de evaluar un modelo sobre un conjunto de datos"""
    accuracy: float
    loss: float
    param_count: int
    eval_ms: float
    samples: int

    def to_dict(self) -> Dict:
        return asdict(self)


class EvaluationService:
    """
    Servicio para evaluar modelos en modo inferencia
    """

    def __init__(self, batch_size: Optional[int] = None):
        self.batch_size = batch_size or int(conf.get_setting('ODENETS_EVAL_BATCH_SIZE', 256))

    def predict(self, model: ContinuousClassifier, features: np.ndarray,
                stage_hook: Optional[StageHook] = None) -> np.ndarray:
        """Calcular los logits por lotes; cada muestra es independiente del lote"""
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2 or features.shape[1] != model.config.input_dim:
            raise ShapeError(features.shape, (-1, model.config.input_dim), 'datos de evaluación')
        chunks = [
            model_forward(model, features[start:start + self.batch_size], Mode.INFER,
                          stage_hook=stage_hook).logits.data
            for start in range(0, features.shape[0], self.batch_size)
        ]
        if not chunks:
            return np.zeros((0, model.config.num_classes))
        return np.concatenate(chunks)

    def evaluate(self, model: ContinuousClassifier, dataset: Dataset, repeats: int = 1) -> EvaluationResult:
        """
        Evaluar exactitud y pérdida

        eval_ms es la mediana de `repeats` pasadas completas sobre el conjunto.
        """
        if dataset.num_classes > model.config.num_classes:
            raise ShapeError((dataset.num_classes,), (model.config.num_classes,), 'clases del conjunto')

        timings = []
        logits = None
        for _ in range(max(1, repeats)):
            started = time.perf_counter()
            logits = self.predict(model, dataset.features)
            timings.append((time.perf_counter() - started) * 1000.0)

        if len(dataset) == 0:
            accuracy, loss = float('nan'), float('nan')
        else:
            accuracy = float(np.mean(np.argmax(logits, axis=1) == dataset.labels))
            loss = float(softmax_cross_entropy(logits, dataset.labels).data)

        result = EvaluationResult(
            accuracy=accuracy,
            loss=loss,
            param_count=model.param_count(),
            eval_ms=float(np.median(timings)),
            samples=len(dataset),
        )
        logger.debug(f"Evaluación: exactitud={result.accuracy:.4f} pérdida={result.loss:.4f}")
        return result
