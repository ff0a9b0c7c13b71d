"""
Servicio de entrenamiento: SGD con momento y refinamiento multinivel de las bases
"""

import csv
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from ..adcore import ParamStore, softmax_cross_entropy, value_and_grad
from ..basis import BasisSpec, interpolate, next_k, project
from ..checkpoints import Checkpoint, save_checkpoint
from ..datasets import Dataset
from ..exceptions import ConfigurationError, DivergenceError, NumericError, ShapeError, TrainingAborted
from ..models import ContinuousClassifier, model_forward
from ..odeblock import Mode
from .evaluation import EvaluationService

# Configurar logging
logger = logging.getLogger(__name__)

METRICS_HEADER = ('epoch', 'k', 'n_t', 'train_loss', 'val_accuracy', 'lr')

_TRANSFORMS = {
    'interpolate': interpolate,
    'project': project,
}


def _fraction_epochs(epochs: int, fractions: Sequence[float], offset: int = 0) -> Tuple[int, ...]:
    marks = {int(round(f * epochs)) + offset for f in fractions}
    return tuple(sorted(e for e in marks if 1 <= e <= epochs))


@dataclass(frozen=True)
class TrainConfig:
    """
    Hiperparámetros de entrenamiento

    refinement_epochs=None refina al terminar el 25%, 50% y 75% de las épocas; una
    tupla vacía desactiva el refinamiento. El refinamiento ocurre al inicio de la
    época indicada. lr_decay_epochs=None reduce la tasa después del 50% y el 75%.
    """
    epochs: int
    batch_size: int = 128
    learning_rate: float = 0.1
    lr_decay_epochs: Optional[Tuple[int, ...]] = None
    lr_decay_factor: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 5e-4
    refinement_epochs: Optional[Tuple[int, ...]] = None
    refine_steps: bool = True
    refinement_method: str = 'interpolate'
    seed: int = 0
    validation_fraction: float = 0.2

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigurationError(f"epochs debe ser positivo, se recibió {self.epochs}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size debe ser positivo, se recibió {self.batch_size}")
        if self.refinement_method not in _TRANSFORMS:
            raise ConfigurationError(f"Método de refinamiento desconocido: {self.refinement_method!r}")

        refinement = self.refinement_epochs
        if refinement is None:
            refinement = tuple(e for e in _fraction_epochs(self.epochs, (0.25, 0.5, 0.75), offset=1) if e > 1)
        refinement = tuple(int(e) for e in refinement)
        if any(later <= earlier for earlier, later in zip(refinement, refinement[1:])):
            raise ConfigurationError("Las épocas de refinamiento deben ser estrictamente crecientes")
        if refinement and (refinement[0] < 1 or refinement[-1] > self.epochs):
            raise ConfigurationError(f"Las épocas de refinamiento deben estar en [1, {self.epochs}]")
        object.__setattr__(self, 'refinement_epochs', refinement)

        decay = self.lr_decay_epochs
        if decay is None:
            decay = _fraction_epochs(self.epochs, (0.5, 0.75))
        object.__setattr__(self, 'lr_decay_epochs', tuple(sorted(int(e) for e in decay)))

    def learning_rate_at(self, epoch: int) -> float:
        """Tasa de aprendizaje escalonada: se multiplica por el factor después de cada época de decaimiento"""
        steps = sum(1 for decay_epoch in self.lr_decay_epochs if decay_epoch < epoch)
        return self.learning_rate * self.lr_decay_factor ** steps

    def to_dict(self) -> Dict:
        data = asdict(self)
        data['refinement_epochs'] = list(self.refinement_epochs)
        data['lr_decay_epochs'] = list(self.lr_decay_epochs)
        return data

    @classmethod
    def from_dict(cls, data: Mapping) -> 'TrainConfig':
        known = {key: data[key] for key in cls.__dataclass_fields__ if key in data}
        for key in ('refinement_epochs', 'lr_decay_epochs'):
            if known.get(key) is not None:
                known[key] = tuple(known[key])
        return cls(**known)


@dataclass
class OptState:
    """Velocidades por parámetro con las mismas formas que los parámetros de gradiente"""
    velocities: ParamStore

    @classmethod
    def zeros(cls, params: ParamStore) -> 'OptState':
        return cls(velocities=params.zeros_like())


def sgd_momentum_step(params: ParamStore, grads: ParamStore, opt_state: OptState,
                      lr: float, momentum: float, weight_decay: float) -> Tuple[ParamStore, OptState]:
    """
    Un paso de SGD con momento

    v <- momentum * v + g + weight_decay * w (decaimiento solo en núcleos densos)
    w <- w - lr * v
    """
    new_params = []
    new_velocities = []
    for name, weight in params.items():
        if name not in grads or name not in opt_state.velocities:
            raise ShapeError(weight.shape, (), f'gradiente ausente para {name}')
        grad = grads[name]
        velocity = opt_state.velocities[name]
        if grad.shape != weight.shape:
            raise ShapeError(grad.shape, weight.shape, f'gradiente de {name}')
        if velocity.shape != weight.shape:
            raise ShapeError(velocity.shape, weight.shape, f'velocidad de {name}')

        if weight_decay and name.endswith('/kernel'):
            grad = grad + weight_decay * weight
        velocity = momentum * velocity + grad
        new_velocities.append((name, velocity))
        new_params.append((name, weight - lr * velocity))
    return ParamStore(new_params), OptState(ParamStore(new_velocities))


def refine(model: ContinuousClassifier, method: str = 'interpolate',
           rule: Callable[[BasisSpec], int] = next_k, refine_steps: bool = True) -> ContinuousClassifier:
    """
    Refinar todas las bases a rule(K) y duplicar N_T

    La misma transformación se aplica a los parámetros de gradiente y de estado.
    El estado del optimizador lo reinicia quien entrena.
    """
    try:
        transform = _TRANSFORMS[method]
    except KeyError:
        raise ConfigurationError(f"Método de refinamiento desconocido: {method!r}")

    blocks = []
    for block in model.blocks:
        target_g = block.basis_g.with_k(rule(block.basis_g))
        target_s = block.basis_s.with_k(rule(block.basis_s))
        blocks.append(block.replace(
            params_g={name: transform(wf, target_g) for name, wf in block.params_g.items()},
            params_s={name: transform(wf, target_s) for name, wf in block.params_s.items()},
            n_t=block.n_t * 2 if refine_steps else block.n_t,
        ))
    return model.with_blocks(blocks)


@dataclass
class EpochMetrics:
    epoch: int
    k: int
    n_t: int
    train_loss: float
    val_accuracy: float
    lr: float


@dataclass
class TrainingResult:
    model: ContinuousClassifier
    metrics: List[EpochMetrics] = field(default_factory=list)
    refinement_history: List[Dict] = field(default_factory=list)


class TrainingService:
    """
    Servicio para entrenar clasificadores continuos
    """

    def __init__(self, evaluation_service: Optional[EvaluationService] = None, progress: Optional[Callable[[str], None]] = None):
        self.evaluation_service = evaluation_service or EvaluationService()
        self.progress = progress

    def train_step(self, model: ContinuousClassifier, opt_state: OptState, features: np.ndarray,
                   labels: np.ndarray, lr: float, config: TrainConfig) -> Tuple[ContinuousClassifier, OptState, float]:
        """
        Un paso: paso hacia adelante de entrenamiento, gradiente, SGD y actualización del estado

        Returns:
            (modelo actualizado, estado del optimizador, pérdida del lote)
        """
        params = model.gradient_params()
        captured = {}

        def loss_fn(leaves):
            output = model_forward(model, features, Mode.TRAIN, leaves)
            captured['state'] = output.state_updates
            return softmax_cross_entropy(output.logits, labels)

        loss, grads = value_and_grad(loss_fn, params)
        if not np.isfinite(loss):
            raise NumericError(f"Pérdida no finita ({loss})")

        new_params, opt_state = sgd_momentum_step(
            params, grads, opt_state, lr, config.momentum, config.weight_decay
        )
        model = model.with_gradient_params(new_params).with_state_updates(captured['state'])
        return model, opt_state, loss

    def train(self, model: ContinuousClassifier, dataset: Dataset, config: TrainConfig,
              validation: Optional[Dataset] = None,
              checkpoint_path: Optional[Union[str, Path]] = None,
              metrics_path: Optional[Union[str, Path]] = None,
              meta: Optional[Dict] = None) -> TrainingResult:
        """
        Entrenar con el calendario de refinamiento

        Raises:
            TrainingAborted: divergencia numérica; conserva el último modelo válido
        """
        # 1. Separar validación si no se entregó
        train_set = dataset
        if validation is None and config.validation_fraction > 0:
            train_set, validation = dataset.split(config.validation_fraction, config.seed)

        rng = np.random.default_rng(config.seed)
        opt_state = OptState.zeros(model.gradient_params())
        result = TrainingResult(model=model)
        last_good = model

        if metrics_path is not None:
            self._start_metrics(metrics_path)

        for epoch in range(1, config.epochs + 1):
            # 2. Refinar al inicio de las épocas configuradas y reiniciar el optimizador
            if epoch in config.refinement_epochs:
                model = refine(model, config.refinement_method, refine_steps=config.refine_steps)
                opt_state = OptState.zeros(model.gradient_params())
                event = {'epoch': epoch, 'k': model.blocks[0].basis_g.k, 'n_t': model.blocks[0].n_t}
                result.refinement_history.append(event)
                logger.info(f"Refinamiento en la época {epoch}: K={event['k']} N_T={event['n_t']}")

            # 3. Recorrer los lotes con una permutación sembrada
            lr = config.learning_rate_at(epoch)
            order = rng.permutation(len(train_set))
            total_loss = 0.0
            try:
                for features, labels in train_set.batches(config.batch_size, order):
                    model, opt_state, loss = self.train_step(model, opt_state, features, labels, lr, config)
                    total_loss += loss * labels.shape[0]
            except (DivergenceError, NumericError) as e:
                logger.error(f"Entrenamiento abortado en la época {epoch}: {e}")
                result.model = last_good
                raise TrainingAborted(f"Divergencia en la época {epoch}: {e}", last_good, result.metrics) from e

            # 4. Registrar métricas
            val_accuracy = float('nan')
            if validation is not None and len(validation):
                val_accuracy = self.evaluation_service.evaluate(model, validation).accuracy
            metrics = EpochMetrics(
                epoch=epoch,
                k=model.blocks[0].basis_g.k,
                n_t=model.blocks[0].n_t,
                train_loss=total_loss / max(1, len(train_set)),
                val_accuracy=val_accuracy,
                lr=lr,
            )
            result.metrics.append(metrics)
            last_good = model
            result.model = model

            message = (f"Época {epoch}/{config.epochs}: pérdida={metrics.train_loss:.4f} "
                       f"exactitud={metrics.val_accuracy:.4f} K={metrics.k} N_T={metrics.n_t}")
            logger.info(message)
            if self.progress is not None:
                self.progress(message)

            # 5. Guardar checkpoint y métricas de la época
            if metrics_path is not None:
                self._append_metrics(metrics_path, metrics)
            if checkpoint_path is not None:
                save_checkpoint(self.make_checkpoint(result, config, epoch, meta), checkpoint_path)

        return result

    def make_checkpoint(self, result: TrainingResult, config: TrainConfig, epoch: int,
                        meta: Optional[Dict] = None) -> Checkpoint:
        document = dict(meta or {})
        document.update({
            'epochs': epoch,
            'seed': config.seed,
            'train_config': config.to_dict(),
            'refinement_history': list(result.refinement_history),
        })
        return Checkpoint(model=result.model, meta=document)

    @staticmethod
    def _start_metrics(path: Union[str, Path]):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open('w', newline='') as handle:
            csv.writer(handle).writerow(METRICS_HEADER)

    @staticmethod
    def _append_metrics(path: Union[str, Path], metrics: EpochMetrics):
        with Path(path).open('a', newline='') as handle:
            csv.writer(handle).writerow([
                metrics.epoch,
                metrics.k,
                metrics.n_t,
                repr(metrics.train_loss),
                repr(metrics.val_accuracy),
                repr(metrics.lr),
            ])
